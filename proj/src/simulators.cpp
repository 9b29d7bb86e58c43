#include "popsim/simulators.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <set>

namespace popsim {

namespace {

const std::array<std::string, 5> kSimNames = {"direct", "inert", "kno", "sid",
                                              "naming"};

}  // namespace

SimulatorKind simulator_from_name(const std::string& name) {
  for (std::size_t i = 0; i < kSimNames.size(); ++i)
    if (kSimNames[i] == name) return static_cast<SimulatorKind>(i);
  throw ConfigError("unknown simulator '" + name + "'");
}

const std::string& simulator_name(SimulatorKind k) {
  auto i = static_cast<std::size_t>(k);
  if (i >= kSimNames.size()) throw StructuralError("unknown simulator kind");
  return kSimNames[i];
}

std::string SimulatorOptions::describe() const {
  if (kind != SimulatorKind::kKnO) return simulator_name(kind);
  std::string out = "kno(o=" + std::to_string(o);
  if (degrade_threshold) out += ",degrade=" + std::to_string(*degrade_threshold);
  out += ")";
  return out;
}

SimulatorOptions simulator_options_from_description(const std::string& text) {
  SimulatorOptions opts;
  auto open = text.find('(');
  if (open == std::string::npos) {
    opts.kind = simulator_from_name(text);
    return opts;
  }
  if (text.back() != ')') throw ParseError("unbalanced simulator description");
  opts.kind = simulator_from_name(text.substr(0, open));
  std::string body = text.substr(open + 1, text.size() - open - 2);
  std::size_t at = 0;
  while (at < body.size()) {
    auto comma = body.find(',', at);
    std::string item = body.substr(at, comma == std::string::npos ? comma : comma - at);
    at = comma == std::string::npos ? body.size() : comma + 1;
    auto eq = item.find('=');
    if (eq == std::string::npos)
      throw ParseError("bad simulator option '" + item + "'");
    std::string key = item.substr(0, eq);
    int value;
    try {
      value = std::stoi(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw ParseError("bad simulator option value in '" + item + "'");
    }
    if (key == "o") opts.o = value;
    else if (key == "degrade") opts.degrade_threshold = value;
    else throw ParseError("unknown simulator option '" + key + "'");
  }
  return opts;
}

// ---------------------------------------------------------------------------
// S_KnO

std::optional<Token> kno_starter_step(KnOAgent& a, int o, std::int64_t& serials) {
  if (a.frozen) return std::nullopt;
  if (!a.pending && a.sending.empty()) {
    const std::int64_t serial = ++serials;
    for (int i = 1; i <= o + 1; ++i) {
      Token t = state_token(a.state_p, i);
      t.serial = serial;
      a.sending.push_back(t);
    }
    a.pending = true;
  }
  if (a.sending.empty()) return std::nullopt;
  Token head = a.sending.front();
  a.sending.erase(a.sending.begin());
  return head;
}

void kno_starter_detect(KnOAgent& a) {
  if (a.frozen) return;
  a.detected_omissions += 1;
  a.sending.push_back(joker_token());
}

namespace {

// A complete run assembled out of the queue: one token per slot 1..o+1,
// concrete where possible, jokers for the rest.
struct AssembledRun {
  std::vector<std::size_t> positions;       // queue indices to remove
  std::vector<TokenIdentity> joker_fills;   // identities the jokers stood for
  std::size_t oldest_concrete = std::numeric_limits<std::size_t>::max();
  int jokers_used = 0;
  std::int64_t lead_serial = 0;             // serial of the oldest concrete pick
};

// Key of a candidate run: a state-announcement run for `a`, or a change
// run for the pair (a, b).
struct RunKey {
  bool change = false;
  State a;
  State b;

  TokenIdentity slot(int index) const {
    if (change) return {Token::Kind::kChange, a, b, index};
    return {Token::Kind::kState, a, "", index};
  }
  friend bool operator<(const RunKey& l, const RunKey& r) {
    return std::tie(l.change, l.a, l.b) < std::tie(r.change, r.a, r.b);
  }
};

std::optional<AssembledRun> try_assemble(const std::vector<Token>& queue, int o,
                                         const RunKey& key) {
  AssembledRun run;
  std::vector<bool> used(queue.size(), false);
  std::vector<int> missing;

  for (int index = 1; index <= o + 1; ++index) {
    const TokenIdentity want = key.slot(index);
    bool found = false;
    for (std::size_t pos = 0; pos < queue.size(); ++pos) {
      if (used[pos] || queue[pos].kind == Token::Kind::kJoker) continue;
      if (identity_of(queue[pos]) != want) continue;
      used[pos] = true;
      run.positions.push_back(pos);
      if (pos < run.oldest_concrete) {
        run.oldest_concrete = pos;
        run.lead_serial = queue[pos].serial;
      }
      found = true;
      break;
    }
    if (!found) missing.push_back(index);
  }

  if (missing.size() == static_cast<std::size_t>(o + 1)) return std::nullopt;

  // Jokers fill the missing slots, spent in queue order.
  std::size_t fill = 0;
  for (std::size_t pos = 0; pos < queue.size() && fill < missing.size(); ++pos) {
    if (used[pos] || queue[pos].kind != Token::Kind::kJoker) continue;
    used[pos] = true;
    run.positions.push_back(pos);
    run.joker_fills.push_back(key.slot(missing[fill]));
    ++fill;
  }
  if (fill < missing.size()) return std::nullopt;

  run.jokers_used = static_cast<int>(missing.size());
  return run;
}

struct Candidate {
  RunKey key;
  AssembledRun run;
};

bool better(const Candidate& l, const Candidate& r) {
  if (l.run.oldest_concrete != r.run.oldest_concrete)
    return l.run.oldest_concrete < r.run.oldest_concrete;
  if (l.run.jokers_used != r.run.jokers_used) return l.run.jokers_used < r.run.jokers_used;
  return l.key < r.key;
}

/// Best complete candidate among the given keys, or nothing.
std::optional<Candidate> best_candidate(const std::vector<Token>& queue, int o,
                                        const std::set<RunKey>& keys) {
  std::optional<Candidate> best;
  for (const RunKey& key : keys) {
    auto run = try_assemble(queue, o, key);
    if (!run) continue;
    Candidate c{key, std::move(*run)};
    if (!best || better(c, *best)) best = std::move(c);
  }
  return best;
}

void consume_run(KnOAgent& a, const AssembledRun& run) {
  for (const TokenIdentity& identity : run.joker_fills) a.jokers[identity] += 1;
  std::vector<std::size_t> positions = run.positions;
  std::sort(positions.begin(), positions.end(), std::greater<>());
  for (std::size_t pos : positions)
    a.sending.erase(a.sending.begin() + static_cast<std::ptrdiff_t>(pos));
}

}  // namespace

std::optional<KnOEvent> kno_reactor_step(KnOAgent& a, const ProtocolSpec& p, int o,
                                         std::optional<Token> payload,
                                         bool omission_detected,
                                         std::int64_t& serials) {
  if (a.frozen) return std::nullopt;
  if (!payload && !omission_detected) return std::nullopt;

  // 1. Intake. A detected omission is represented by a fresh joker. A
  // concrete token whose identity a previously spent joker stood for has
  // already been accounted: it turns back into a joker and the debt is
  // cleared.
  if (omission_detected) {
    a.detected_omissions += 1;
    a.sending.push_back(joker_token());
  } else {
    const Token& t = *payload;
    if (t.kind != Token::Kind::kJoker) {
      auto owed = a.jokers.find(identity_of(t));
      if (owed != a.jokers.end()) {
        if (--owed->second == 0) a.jokers.erase(owed);
        a.sending.push_back(joker_token());
      } else {
        a.sending.push_back(t);
      }
    } else {
      a.sending.push_back(t);
    }
  }

  // 2. Preliminary check: a pending agent whose own announcement run is
  // fully back home abandons the exchange -- nobody is going to answer it.
  if (a.pending) {
    RunKey own;
    own.a = a.state_p;
    if (auto run = try_assemble(a.sending, o, own)) {
      consume_run(a, *run);
      a.pending = false;
    }
  }

  if (!a.pending) {
    // 3a. Core, available side: consume a complete announcement run for
    // some state q, take the reactor half of the transition, and emit the
    // change run that will resolve the announcer's starter half.
    std::set<RunKey> keys;
    for (const Token& t : a.sending)
      if (t.kind == Token::Kind::kState) keys.insert(RunKey{false, t.a, ""});
    if (auto cand = best_candidate(a.sending, o, keys)) {
      consume_run(a, cand->run);
      const State old = a.state_p;
      a.state_p = p.apply_reactor(cand->key.a, old);
      const std::int64_t emitted = ++serials;
      for (int i = 1; i <= o + 1; ++i) {
        Token t = change_token(cand->key.a, old, i);
        t.serial = emitted;
        a.sending.push_back(t);
      }
      KnOEvent ev;
      ev.pre = old;
      ev.post = a.state_p;
      ev.starter_half = false;
      ev.counterpart = cand->key.a;
      ev.consumed_serial = cand->run.lead_serial;
      ev.emitted_serial = emitted;
      return ev;
    }
  } else {
    // 3b. Core, pending side: resolve this agent's own announcement with a
    // change run naming its state, taking the starter half.
    std::set<RunKey> keys;
    for (const Token& t : a.sending)
      if (t.kind == Token::Kind::kChange && t.a == a.state_p)
        keys.insert(RunKey{true, t.a, t.b});
    if (auto cand = best_candidate(a.sending, o, keys)) {
      consume_run(a, cand->run);
      const State old = a.state_p;
      a.state_p = p.apply_starter(old, cand->key.b);
      a.pending = false;
      KnOEvent ev;
      ev.pre = old;
      ev.post = a.state_p;
      ev.starter_half = true;
      ev.counterpart = cand->key.b;
      ev.consumed_serial = cand->run.lead_serial;
      ev.emitted_serial = 0;
      return ev;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// S_ID

SidBranch sid_reactor_step(IDAgent& reactor, const IDAgent& starter,
                           const ProtocolSpec& p) {
  if (starter.my_id == reactor.my_id)
    throw IntegrityError("two agents share identifier " +
                         std::to_string(reactor.my_id));

  // Pair: both available; the reactor records the starter and waits for it
  // to lock on this record.
  if (reactor.phase == SimPhase::kAvailable && starter.phase == SimPhase::kAvailable) {
    reactor.phase = SimPhase::kPairing;
    reactor.id_other = starter.my_id;
    reactor.state_other = starter.state_p;
    return SidBranch::kPaired;
  }

  // Lock: the starter has recorded this very agent, and the record is
  // still accurate. The reactor takes the starter half of the transition.
  if (reactor.phase == SimPhase::kAvailable && starter.phase == SimPhase::kPairing &&
      starter.id_other == reactor.my_id && starter.state_other == reactor.state_p) {
    reactor.phase = SimPhase::kLocked;
    reactor.id_other = starter.my_id;
    reactor.state_other = starter.state_p;
    reactor.state_p = p.apply_starter(reactor.state_p, starter.state_p);
    return SidBranch::kLocked;
  }

  // Complete: the recorded partner is locked on this agent. The reactor
  // takes the reactor half, against the partner state it recorded when
  // pairing (the partner has already moved to its post-transition state).
  if (reactor.phase == SimPhase::kPairing && reactor.id_other == starter.my_id &&
      starter.phase == SimPhase::kLocked && starter.id_other == reactor.my_id) {
    if (!reactor.state_other)
      throw IntegrityError("pairing agent lost its recorded partner state");
    reactor.state_p = p.apply_reactor(*reactor.state_other, reactor.state_p);
    reactor.phase = SimPhase::kAvailable;
    reactor.id_other.reset();
    reactor.state_other.reset();
    return SidBranch::kCompleted;
  }

  // Rollback: the recorded partner is no longer engaged with this agent.
  // Covers both an abandoned pairing and a locked agent's release after
  // its partner completed.
  if (reactor.phase != SimPhase::kAvailable && reactor.id_other == starter.my_id &&
      starter.id_other != reactor.my_id) {
    reactor.phase = SimPhase::kAvailable;
    reactor.id_other.reset();
    reactor.state_other.reset();
    return SidBranch::kRollback;
  }

  return SidBranch::kNone;
}

// ---------------------------------------------------------------------------
// N_n

NamingOutcome naming_step(NamingAgent& reactor, const NamingAgent& starter, int n,
                          const ProtocolSpec& p) {
  NamingOutcome out;
  if (reactor.started()) {
    // The naming fields are frozen; only started starters reach the inner
    // layer.
    if (starter.started()) out.inner = sid_reactor_step(*reactor.inner, *starter.inner, p);
    return out;
  }

  if (reactor.my_id == starter.my_id) {
    out.collision = true;
    reactor.my_id += 1;
  }
  reactor.max_id =
      std::max({reactor.my_id, reactor.max_id, starter.my_id, starter.max_id});
  if (reactor.max_id > n)
    throw IntegrityError("an identifier exceeded the population size");
  if (reactor.max_id == n) {
    IDAgent inner;
    inner.my_id = reactor.my_id;
    inner.state_p = reactor.state_p;
    reactor.inner = inner;
    out.started_now = true;
  }
  return out;
}

}  // namespace popsim
