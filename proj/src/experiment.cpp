#include "popsim/experiment.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include "popsim/trace_io.hpp"

namespace popsim {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    std::int64_t v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("experiment key '" + key + "': bad integer '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    std::uint64_t v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("experiment key '" + key + "': bad integer '" + value + "'");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// ExperimentConfig

ExperimentConfig ExperimentConfig::from_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("experiment line " + std::to_string(lineno) +
                        ": expected key=value, got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("experiment line " + std::to_string(lineno) + ": empty key");
    cfg.set(key, value);
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open experiment config '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return from_text(text.str());
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  kv_[key] = value;
}

void ExperimentConfig::apply_overrides(const std::vector<std::string>& items) {
  for (const std::string& item : items) {
    auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("override '" + item + "' is not key=value");
    set(trim(item.substr(0, eq)), trim(item.substr(eq + 1)));
  }
}

void ExperimentConfig::apply_environment() {
  if (const char* seed = std::getenv("POPSIM_SEED")) set("seed", seed);
  if (const char* dir = std::getenv("POPSIM_OUT_DIR")) set("out_dir", dir);
}

bool ExperimentConfig::has(const std::string& key) const { return kv_.count(key) > 0; }

std::string ExperimentConfig::get(const std::string& key,
                                  const std::string& fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

std::int64_t ExperimentConfig::get_int(const std::string& key,
                                       std::int64_t fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : parse_int(key, it->second);
}

std::uint64_t ExperimentConfig::get_u64(const std::string& key,
                                        std::uint64_t fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : parse_u64(key, it->second);
}

ProtocolSpec ExperimentConfig::protocol() const {
  std::string name = get("protocol", "pairing");
  const ProtocolSpec* p = builtin_protocol(name);
  if (!p) throw ConfigError("unknown protocol '" + name + "'");
  return *p;
}

ModelId ExperimentConfig::model() const { return model_from_name(get("model", "tw")); }

SimulatorOptions ExperimentConfig::simulator() const {
  return simulator_options_from_description(get("sim", "direct"));
}

std::vector<State> ExperimentConfig::initial_states() const {
  if (has("init")) {
    std::vector<State> states = split_list(get("init", ""), ',');
    if (states.empty()) throw ConfigError("experiment key 'init' lists no states");
    return states;
  }
  if (has("consumers") || has("producers")) {
    PairingInstance inst{static_cast<int>(get_int("consumers", 0)),
                         static_cast<int>(get_int("producers", 0))};
    if (inst.consumers < 0 || inst.producers < 0 || inst.n() < 2)
      throw ConfigError("pairing instance needs at least two agents");
    return inst.initial_states();
  }
  throw ConfigError("experiment needs 'init' or 'consumers'/'producers'");
}

SchedulerConfig ExperimentConfig::scheduler() const {
  SchedulerConfig cfg;
  cfg.n = static_cast<int>(
      get_int("n", static_cast<std::int64_t>(initial_states().size())));
  cfg.seed = get_u64("seed", 0);
  cfg.horizon = get_int("horizon", 100000);
  cfg.validate();
  return cfg;
}

std::optional<AdversaryConfig> ExperimentConfig::adversary() const {
  std::string kind = get("adversary", "none");
  if (kind == "none") return std::nullopt;
  AdversaryConfig adv;
  if (kind == "unbounded") adv.kind = AdversaryKind::kUnboundedOmissions;
  else if (kind == "cutoff") adv.kind = AdversaryKind::kEventuallyNoOmissions;
  else if (kind == "single") adv.kind = AdversaryKind::kSingleOmission;
  else throw ConfigError("unknown adversary '" + kind + "'");
  adv.seed = get_u64("adv_seed", 0);
  adv.rate_num = get_u64("adv_rate_num", adv.rate_num);
  adv.rate_den = get_u64("adv_rate_den", adv.rate_den);
  adv.cutoff = get_int("adv_cutoff", adv.cutoff);
  if (has("adv_max")) adv.max_omissions = get_int("adv_max", 0);
  adv.position = get_int("adv_position", adv.position);
  adv.single_step.starter = static_cast<int>(get_int("adv_starter", 0));
  adv.single_step.reactor = static_cast<int>(get_int("adv_reactor", 1));
  std::string code = get("adv_omission", "r");
  if (code.size() != 1) throw ConfigError("adv_omission must be one of - s r b");
  adv.single_step.omission = omission_from_code(code[0]);
  return adv;
}

std::vector<std::string> ExperimentConfig::checks() const {
  return split_list(get("checks", ""), ',');
}

std::string ExperimentConfig::output_path(const std::string& fallback_name) const {
  if (has("out")) return get("out", "");
  if (has("out_dir")) return get("out_dir", "") + "/" + fallback_name;
  return "";
}

// ---------------------------------------------------------------------------
// Records

std::string format_record(const CheckRecord& r) {
  std::string line = "check=" + r.name + " verdict=" + r.verdict;
  if (!r.witness.empty()) {
    if (r.witness.find(' ') == std::string::npos)
      line += " witness=" + r.witness;
    else
      line += " witness=\"" + r.witness + "\"";
  }
  for (const auto& [k, v] : r.counters) line += " " + k + "=" + v;
  return line;
}

namespace {

// Collects records and tracks the strongest exit code seen.
struct RecordLog {
  std::vector<CheckRecord> records;
  int status = 0;

  void emit(CheckRecord r) {
    if (r.verdict == "fail") status = std::max(status, 1);
    if (r.verdict == "error") status = std::max(status, 2);
    records.push_back(std::move(r));
  }
  void pass(std::string name,
            std::vector<std::pair<std::string, std::string>> counters = {}) {
    emit({std::move(name), "pass", "", std::move(counters)});
  }
  void fail(std::string name, std::string witness,
            std::vector<std::pair<std::string, std::string>> counters = {}) {
    emit({std::move(name), "fail", std::move(witness), std::move(counters)});
  }
  void error(std::string name, std::string witness) {
    emit({std::move(name), "error", std::move(witness), {}});
  }
};

std::string str(std::int64_t v) { return std::to_string(v); }

// ---------------------------------------------------------------------------
// Trace checks shared by `run` and `verify`

void check_pairing_trace(const Trace& t, const ProtocolSpec& spec, RecordLog& log) {
  if (!is_pairing_protocol(spec)) {
    log.error("pairing", "the pairing check needs the pairing protocol");
    return;
  }
  std::vector<State> init = project(t.initial, spec);
  PairingInstance inst;
  for (const State& q : init) {
    if (q == kConsumer) ++inst.consumers;
    else if (q == kProducer) ++inst.producers;
  }
  PairingMonitor monitor(inst);
  monitor.feed(init);
  for (const TraceRecord& rec : t.records) monitor.feed(project(rec.post, spec));
  PairingReport report = monitor.finish();
  std::vector<std::pair<std::string, std::string>> counters{
      {"target", str(inst.target())},
      {"critical", str(report.final_critical)},
      {"stable_from", str(report.stable_from)}};
  if (report.all_pass()) {
    log.pass("pairing", std::move(counters));
    return;
  }
  std::string witness = !report.irrevocable ? "a critical agent changed state"
                        : !report.safe      ? "more critical agents than producers"
                                            : "target count not stable at the horizon";
  if (report.first_violation >= 0)
    counters.push_back({"step", str(report.first_violation)});
  log.fail("pairing", witness, std::move(counters));
}

void check_matching_trace(const Trace& t, const ProtocolSpec& spec, bool derive,
                          RecordLog& log) {
  const std::string name = derive ? "derived" : "matching";
  try {
    EventSeq ev = extract_events(t, spec);
    Matching m = build_matching(ev);
    MatchVerdict verdict = verify_matching(ev, m, spec);
    std::vector<std::pair<std::string, std::string>> counters{
        {"events", str(static_cast<std::int64_t>(ev.size()))},
        {"pairs", str(static_cast<std::int64_t>(m.pairs.size()))},
        {"unmatched", str(static_cast<std::int64_t>(m.unmatched.size()))}};
    if (!verdict.accepted) {
      log.fail(name, verdict.witness, std::move(counters));
      return;
    }
    if (derive) {
      DerivedExecution d = derive_execution(t, ev, m, spec);
      counters.push_back({"derived_steps", str(static_cast<std::int64_t>(d.run.size()))});
    }
    log.pass(name, std::move(counters));
  } catch (const IntegrityError& e) {
    log.fail(name, e.what());
  }
}

void check_replay_trace(const Trace& t, RecordLog& log) {
  std::int64_t step = replay_divergence(t);
  if (step < 0)
    log.pass("replay", {{"steps", str(static_cast<std::int64_t>(t.records.size()))}});
  else
    log.fail("replay", "re-execution diverges from the trace", {{"step", str(step)}});
}

void check_tokens_trace(const Trace& t, const SimulatorOptions& opts, RecordLog& log) {
  if (opts.kind != SimulatorKind::kKnO) {
    log.error("tokens", "the tokens check needs the token-queue simulator");
    return;
  }
  const int o = opts.o;
  const std::int64_t n = static_cast<std::int64_t>(t.initial.size());
  auto audit = [&](const Configuration& c) -> std::string {
    std::int64_t jokers = 0, noted = 0, detections = 0, concrete = 0;
    for (const AgentState& a : c) {
      const auto& k = std::get<KnOAgent>(a);
      detections += k.detected_omissions;
      for (const Token& tok : k.sending) {
        if (tok.kind == Token::Kind::kJoker) ++jokers;
        else ++concrete;
      }
      for (const auto& [identity, count] : k.jokers) noted += count;
    }
    if (jokers + noted != detections) return "detections not conserved";
    if (jokers > o) return "more jokers than the omission bound";
    if (concrete > n * (o + 1) + o) return "concrete tokens exceed their bound";
    return "";
  };
  std::string why = audit(t.initial);
  std::int64_t at = -1;
  for (std::size_t i = 0; why.empty() && i < t.records.size(); ++i) {
    why = audit(t.records[i].post);
    if (!why.empty()) at = t.records[i].index;
  }
  if (why.empty())
    log.pass("tokens", {{"o", str(o)}});
  else
    log.fail("tokens", why, {{"step", str(at)}});
}

void check_naming_trace(const Trace& t, RecordLog& log) {
  if (t.initial.empty() || !std::holds_alternative<NamingAgent>(t.initial[0])) {
    log.error("naming", "the naming check needs the naming simulator");
    return;
  }
  const Configuration& fin =
      t.records.empty() ? t.initial : t.records.back().post;
  const int n = static_cast<int>(fin.size());
  int started = 0;
  std::vector<int> ids;
  for (const AgentState& a : fin) {
    const auto& agent = std::get<NamingAgent>(a);
    if (agent.started()) ++started;
    ids.push_back(agent.my_id);
  }
  std::sort(ids.begin(), ids.end());
  bool unique = true;
  for (int i = 0; i < n; ++i) unique = unique && ids[i] == i + 1;
  std::vector<std::pair<std::string, std::string>> counters{
      {"started", str(started)}, {"n", str(n)}};
  if (started == n && unique)
    log.pass("naming", std::move(counters));
  else if (started < n)
    log.fail("naming", "not every agent started simulating", std::move(counters));
  else
    log.fail("naming", "identifiers are not the range 1..n", std::move(counters));
}

void run_trace_check(const std::string& name, const Trace& t, const ProtocolSpec& spec,
                     const SimulatorOptions& opts, RecordLog& log) {
  if (name == "pairing") check_pairing_trace(t, spec, log);
  else if (name == "matching") check_matching_trace(t, spec, false, log);
  else if (name == "derived") check_matching_trace(t, spec, true, log);
  else if (name == "replay") check_replay_trace(t, log);
  else if (name == "tokens") check_tokens_trace(t, opts, log);
  else if (name == "naming") check_naming_trace(t, log);
  else throw ConfigError("unknown check '" + name + "'");
}

// The `run` pipeline, shared by cmd_run and cmd_batch.
void run_once(const ExperimentConfig& cfg, RecordLog& log) {
  ProtocolSpec spec = cfg.protocol();
  ModelId model = cfg.model();
  SimulatorOptions opts = cfg.simulator();
  std::vector<State> states = cfg.initial_states();
  SchedulerConfig sched = cfg.scheduler();
  if (sched.n != static_cast<int>(states.size()))
    throw ConfigError("scheduler population differs from the initial states");

  check_compatibility(model, opts.kind);
  Configuration init = initial_configuration(opts.kind, spec, states, opts);
  Run run = fair_run(sched);
  if (auto adv = cfg.adversary()) {
    adv->validate(sched.n);
    run = adversary_rewrite(run, *adv, model, sched.n);
  }
  Trace t = simulate(spec, model, opts, std::move(init), run, sched.seed);

  std::vector<std::pair<std::string, std::string>> counters{
      {"steps", str(static_cast<std::int64_t>(t.records.size()))},
      {"omissions", str(count_omissions(run))}};
  std::vector<State> fin =
      project(t.records.empty() ? t.initial : t.records.back().post, spec);
  for (const State& q : spec.states()) {
    std::int64_t count = std::count(fin.begin(), fin.end(), q);
    counters.push_back({"n_" + q, str(count)});
  }
  log.pass("run", std::move(counters));

  for (const std::string& name : cfg.checks()) run_trace_check(name, t, spec, opts, log);

  std::string out_path = cfg.output_path("trace-" + std::to_string(sched.seed) + ".txt");
  if (!out_path.empty()) {
    save_trace_file(out_path, t);
    log.pass("trace", {{"path", out_path}});
  }
}

void flush(const RecordLog& log, std::ostream& out) {
  for (const CheckRecord& r : log.records) out << format_record(r) << "\n";
}

}  // namespace

// ---------------------------------------------------------------------------
// Subcommands

int cmd_run(const ExperimentConfig& cfg, std::ostream& out) {
  RecordLog log;
  try {
    run_once(cfg, log);
  } catch (const std::runtime_error& e) {
    log.error("run", e.what());
  }
  flush(log, out);
  return log.status;
}

int cmd_verify(const std::string& trace_path, const std::vector<std::string>& checks,
               std::ostream& out) {
  RecordLog log;
  try {
    Trace t = load_trace_file(trace_path);
    const ProtocolSpec* spec = builtin_protocol(t.header.protocol);
    if (!spec) throw ConfigError("unknown protocol '" + t.header.protocol + "'");
    SimulatorOptions opts = simulator_options_from_description(t.header.simulator);
    std::vector<std::string> todo =
        checks.empty() ? std::vector<std::string>{"matching", "derived", "replay"}
                       : checks;
    for (const std::string& name : todo) run_trace_check(name, t, *spec, opts, log);
  } catch (const std::runtime_error& e) {
    log.error("verify", e.what());
  }
  flush(log, out);
  return log.status;
}

int cmd_replay(const std::string& trace_path, std::ostream& out) {
  RecordLog log;
  try {
    Trace t = load_trace_file(trace_path);
    check_replay_trace(t, log);
  } catch (const std::runtime_error& e) {
    log.error("replay", e.what());
  }
  flush(log, out);
  return log.status;
}

int cmd_ftt(const ExperimentConfig& cfg, std::ostream& out) {
  RecordLog log;
  try {
    FttQuery q{cfg.protocol(), cfg.model(), cfg.simulator(), cfg.get("q0", kProducer),
               cfg.get("q1", kConsumer), cfg.get_int("depth_cap", 64)};
    check_compatibility(q.model, q.sim.kind);
    FttResult r = fastest_transition_time(q);
    if (r.exceeded_cap) {
      log.fail("ftt", "no transition within the depth cap",
               {{"depth_cap", str(q.depth_cap)}});
    } else {
      std::string witness;
      for (const RunStep& s : r.witness) witness += format_step(s);
      log.emit({"ftt", "pass", witness, {{"t", str(r.t)}}});
    }
  } catch (const std::runtime_error& e) {
    log.error("ftt", e.what());
  }
  flush(log, out);
  return log.status;
}

int cmd_attack(const ExperimentConfig& cfg, std::ostream& out) {
  RecordLog log;
  try {
    AttackConfig attack{cfg.protocol(),
                        model_from_name(cfg.get("model", "i3")),
                        simulator_options_from_description(cfg.get("sim", "kno(o=1)")),
                        cfg.get("q0", kProducer),
                        cfg.get("q1", kConsumer),
                        cfg.get_int("depth_cap", 64),
                        cfg.get_int("extension_cap", 100000),
                        cfg.get_u64("seed", 0)};
    AttackOutcome outcome = lemma1_attack(attack);
    if (outcome.exceeded_cap) {
      log.fail("attack", "plan construction hit a search cap",
               {{"depth_cap", str(attack.depth_cap)}});
    } else {
      const AttackPlan& plan = outcome.plan;
      // The plan is built against the plain simulator; an optional
      // degradation threshold applies to the replay only, to measure the
      // defense against the prepared run.
      AttackConfig replay_cfg = attack;
      if (cfg.has("degrade"))
        replay_cfg.sim.degrade_threshold = static_cast<int>(cfg.get_int("degrade", 1));
      AttackReplay r = replay_attack(plan, replay_cfg);
      std::vector<std::pair<std::string, std::string>> counters{
          {"t", str(plan.t)},
          {"agents", str(plan.agents)},
          {"steps", str(static_cast<std::int64_t>(plan.assembled.size()))},
          {"omissions", str(r.omissions)},
          {"transitioned", str(static_cast<std::int64_t>(r.transitioned.size()))},
          {"final", str(r.final_target_state_count)}};
      bool overran = static_cast<std::int64_t>(r.transitioned.size()) >= plan.t + 1 &&
                     r.omissions == plan.t;
      if (overran)
        log.pass("attack", std::move(counters));
      else
        log.fail("attack", "the run did not overrun the transition count",
                 std::move(counters));

      for (const std::string& name : split_list(cfg.get("rewrite", ""), ',')) {
        RewrittenPlan rw = theorem3_rewrite(model_from_name(name), plan);
        std::string why = validate_rewritten_plan(rw, plan);
        std::vector<std::pair<std::string, std::string>> rw_counters{
            {"steps", str(static_cast<std::int64_t>(rw.assembled.size()))},
            {"omissions", str(count_omissions(rw.assembled))}};
        if (why.empty())
          log.pass("rewrite_" + name, std::move(rw_counters));
        else
          log.fail("rewrite_" + name, why, std::move(rw_counters));
      }
    }
  } catch (const std::runtime_error& e) {
    log.error("attack", e.what());
  }
  flush(log, out);
  return log.status;
}

int cmd_batch(const ExperimentConfig& cfg, int seeds, std::ostream& out) {
  RecordLog log;
  if (seeds <= 0) {
    log.error("batch", "batch needs a positive seed count");
    flush(log, out);
    return log.status;
  }
  std::uint64_t base = cfg.get_u64("seed", 0);
  std::vector<std::string> order;
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> tally;  // pass, fail
  try {
    for (int i = 0; i < seeds; ++i) {
      ExperimentConfig one = cfg;
      one.set("seed", std::to_string(base + static_cast<std::uint64_t>(i)));
      RecordLog local;
      run_once(one, local);
      for (const CheckRecord& r : local.records) {
        if (!tally.count(r.name)) order.push_back(r.name);
        auto& [passes, fails] = tally[r.name];
        if (r.verdict == "pass") ++passes;
        else ++fails;
      }
    }
  } catch (const std::runtime_error& e) {
    log.error("batch", e.what());
    flush(log, out);
    return log.status;
  }
  for (const std::string& name : order) {
    auto [passes, fails] = tally[name];
    CheckRecord r{name, fails == 0 ? "pass" : "fail", "",
                  {{"pass", str(passes)}, {"fail", str(fails)}, {"seeds", str(seeds)}}};
    log.emit(std::move(r));
  }
  flush(log, out);
  return log.status;
}

}  // namespace popsim
