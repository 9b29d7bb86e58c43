#include "popsim/analysis.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <sstream>

namespace popsim {

// ---------------------------------------------------------------------------
// Events

EventSeq extract_events(const Trace& t, const ProtocolSpec& spec) {
  EventSeq out;
  const std::size_t n = t.initial.size();
  std::vector<State> before = project(t.initial, spec);

  for (const TraceRecord& rec : t.records) {
    if (rec.post.size() != n)
      throw IntegrityError("step " + std::to_string(rec.index) +
                           ": configuration arity changed");
    std::vector<State> after = project(rec.post, spec);

    if (rec.events.size() > 2)
      throw IntegrityError("step " + std::to_string(rec.index) +
                           " carries more than two events");

    std::set<int> annotated;
    for (const Event& e : rec.events) {
      if (e.agent < 0 || e.agent >= static_cast<int>(n))
        throw IntegrityError("step " + std::to_string(rec.index) +
                             ": event agent out of range");
      if (e.pre != before[e.agent] || e.post != after[e.agent])
        throw IntegrityError("step " + std::to_string(rec.index) + ": agent " +
                             std::to_string(e.agent) +
                             " annotation contradicts the configurations");
      annotated.insert(e.agent);
      if (e.pre == e.post) continue;  // identity assignment, not an event
      out.push_back({rec.index, e.agent, e.pre, e.post, e.tag});
    }

    for (int i = 0; i < static_cast<int>(n); ++i) {
      if (before[i] == after[i]) continue;
      if (!annotated.count(i))
        throw IntegrityError("step " + std::to_string(rec.index) + ": agent " +
                             std::to_string(i) +
                             " changed simulated state without an event");
      if (i != rec.step.starter && i != rec.step.reactor)
        throw IntegrityError("step " + std::to_string(rec.index) + ": agent " +
                             std::to_string(i) + " changed without participating");
    }
    before = std::move(after);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Matchings

namespace {

std::string event_label(const EventSeq& events, std::size_t pos) {
  const TraceEvent& e = events[pos];
  return "event " + std::to_string(pos) + " (step " + std::to_string(e.step) +
         ", agent " + std::to_string(e.agent) + ")";
}

}  // namespace

MatchVerdict verify_matching(const EventSeq& events, const Matching& m,
                             const ProtocolSpec& spec) {
  const std::size_t n = events.size();
  std::vector<int> cover(n, 0);
  auto touch = [&](std::size_t pos) {
    if (pos >= n)
      throw StructuralError("matching references event position " +
                            std::to_string(pos) + " of " + std::to_string(n));
    ++cover[pos];
  };
  for (const auto& [j, k] : m.pairs) {
    touch(j);
    touch(k);
  }
  for (std::size_t p : m.unmatched) touch(p);

  for (std::size_t p = 0; p < n; ++p) {
    if (cover[p] == 1) continue;
    return {false, event_label(events, p) +
                       (cover[p] ? " appears in the matching twice" :
                                   " is missing from the matching")};
  }

  for (const auto& [j, k] : m.pairs) {
    const TraceEvent& s = events[j];
    const TraceEvent& r = events[k];
    if (s.agent == r.agent)
      return {false, "pair (" + std::to_string(j) + "," + std::to_string(k) +
                         ") uses agent " + std::to_string(s.agent) + " twice"};
    auto [s_post, r_post] = spec.apply(s.pre, r.pre);
    if (s_post != s.post || r_post != r.post)
      return {false, "pair (" + std::to_string(j) + "," + std::to_string(k) +
                         "): delta(" + s.pre + "," + r.pre + ") = (" + s_post +
                         "," + r_post + ") but the events read (" + s.post + "," +
                         r.post + ")"};
  }
  return {true, {}};
}

namespace {

// Tag split on ':'; the leading word classifies the provenance.
std::vector<std::string> tag_fields(const std::string& tag) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : tag) {
    if (c == ':') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

Matching build_matching(const EventSeq& events) {
  Matching m;
  std::vector<bool> used(events.size(), false);
  auto pair_up = [&](std::size_t starter_pos, std::size_t reactor_pos) {
    m.pairs.emplace_back(starter_pos, reactor_pos);
    used[starter_pos] = true;
    used[reactor_pos] = true;
  };

  // Provenance pass. Consumptions (sc) wait for the emitter's resolution
  // (rsc) with the same run serial; locks (txn) wait for the partner's
  // completion (txc); direct steps share one tw tag between their halves.
  std::map<std::string, std::deque<std::size_t>> sc_open;   // serial -> consume
  std::map<std::string, std::deque<std::size_t>> txn_open;  // serial -> lock
  std::map<std::string, std::vector<std::size_t>> tw_groups;
  std::vector<std::size_t> sc_orphans, rsc_orphans;

  for (std::size_t pos = 0; pos < events.size(); ++pos) {
    auto f = tag_fields(events[pos].tag);
    if (f[0] == "sc" && f.size() >= 2) {
      sc_open[f[1]].push_back(pos);
    } else if (f[0] == "rsc" && f.size() >= 2) {
      // Oldest consume under this serial whose signature fits; serials can
      // collide in hand-edited traces, so the check is not redundant.
      bool paired = false;
      auto it = sc_open.find(f[1]);
      if (it != sc_open.end()) {
        for (auto q = it->second.begin(); q != it->second.end(); ++q) {
          auto sf = tag_fields(events[*q].tag);
          if (sf.size() >= 3 && f.size() >= 3 &&
              (sf[2] != events[pos].pre || f[2] != events[*q].pre))
            continue;
          pair_up(pos, *q);  // resolution is the starter-side update
          it->second.erase(q);
          paired = true;
          break;
        }
      }
      if (!paired) rsc_orphans.push_back(pos);
    } else if (f[0] == "txn" && f.size() >= 2) {
      txn_open[f[1]].push_back(pos);
    } else if (f[0] == "txc" && f.size() >= 2) {
      auto it = txn_open.find(f[1]);
      if (it != txn_open.end() && !it->second.empty()) {
        std::size_t lock = it->second.front();
        it->second.pop_front();
        pair_up(lock, pos);  // the locking agent took the starter outcome
      }
    } else if (f[0] == "tw") {
      tw_groups[events[pos].tag].push_back(pos);
    }
  }

  for (auto& [tag, group] : tw_groups) {
    if (group.size() == 2) {
      pair_up(group[0], group[1]);  // engine emits the starter half first
    } else {
      // Tag collision (hand-edited trace): fall back to consecutive pairing.
      for (std::size_t i = 0; i + 1 < group.size(); i += 2)
        pair_up(group[i], group[i + 1]);
    }
  }

  // Serial-collision fallback for token provenance: match leftovers FIFO on
  // the (starter state, reactor old state) signature both halves carry.
  for (auto& [serial, queue] : sc_open)
    for (std::size_t pos : queue) sc_orphans.push_back(pos);
  std::sort(sc_orphans.begin(), sc_orphans.end());
  for (std::size_t r : rsc_orphans) {
    auto rf = tag_fields(events[r].tag);
    for (std::size_t& s : sc_orphans) {
      if (s == events.size() || s > r || used[s]) continue;
      auto sf = tag_fields(events[s].tag);
      if (sf.size() >= 3 && rf.size() >= 3 && sf[2] == events[r].pre &&
          rf[2] == events[s].pre) {
        pair_up(r, s);
        s = events.size();  // spent
        break;
      }
    }
  }

  for (std::size_t pos = 0; pos < events.size(); ++pos)
    if (!used[pos]) m.unmatched.push_back(pos);
  return m;
}

DerivedExecution derive_execution(const Trace& t, const EventSeq& events,
                                  const Matching& m, const ProtocolSpec& spec) {
  MatchVerdict verdict = verify_matching(events, m, spec);
  if (!verdict.accepted)
    throw StructuralError("cannot derive from a rejected matching: " +
                          verdict.witness);

  auto sorted = m.pairs;
  std::sort(sorted.begin(), sorted.end(), [&](const auto& l, const auto& r) {
    auto key = [&](const std::pair<std::size_t, std::size_t>& p) {
      return std::tuple(std::min(events[p.first].step, events[p.second].step),
                        std::max(events[p.first].step, events[p.second].step),
                        events[p.first].agent, events[p.second].agent, p.first,
                        p.second);
    };
    return key(l) < key(r);
  });

  DerivedExecution out;
  std::vector<State> config = project(t.initial, spec);
  out.configs.push_back(config);
  for (const auto& [j, k] : sorted) {
    int x = events[j].agent;
    int y = events[k].agent;
    if (x == y) throw StructuralError("derived pair uses one agent twice");
    auto [nx, ny] = spec.apply(config[x], config[y]);
    config[x] = nx;
    config[y] = ny;
    out.run.push_back({x, y, Omission::kNone});
    out.configs.push_back(config);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transition times

std::optional<std::int64_t> transition_time(const Trace& t, const ProtocolSpec& spec) {
  if (t.initial.size() != 2)
    throw StructuralError("transition time is defined for two agents, not " +
                          std::to_string(t.initial.size()));
  std::vector<State> start = project(t.initial, spec);
  auto [g0, g1] = spec.apply(start[0], start[1]);
  if (start[0] == g0 && start[1] == g1) return 0;
  for (const TraceRecord& rec : t.records) {
    std::vector<State> now = project(rec.post, spec);
    if (now[0] == g0 && now[1] == g1) return rec.index + 1;
  }
  return std::nullopt;
}

FttResult fastest_transition_time(const FttQuery& q) {
  auto [g0, g1] = q.protocol.apply(q.q0, q.q1);
  Configuration init =
      initial_configuration(q.sim.kind, q.protocol, {q.q0, q.q1}, q.sim);
  System root(q.protocol, q.model, q.sim, init);

  auto at_goal = [&](const System& sys) {
    return simulated_state(sys.agent(0)) == g0 && simulated_state(sys.agent(1)) == g1;
  };
  auto key = [](const System& sys) {
    return format_agent(sys.agent(0)) + ' ' + format_agent(sys.agent(1));
  };

  FttResult res;
  if (at_goal(root)) {
    res.t = 0;
    return res;
  }

  struct Node {
    System sys;
    Run path;
  };
  std::deque<Node> frontier;
  std::set<std::string> visited;
  visited.insert(key(root));
  frontier.push_back({std::move(root), {}});

  const RunStep branches[2] = {{0, 1, Omission::kNone}, {1, 0, Omission::kNone}};
  while (!frontier.empty()) {
    Node cur = std::move(frontier.front());
    frontier.pop_front();
    if (static_cast<std::int64_t>(cur.path.size()) >= q.depth_cap) {
      res.exceeded_cap = true;  // all remaining paths are at least this long
      return res;
    }
    for (const RunStep& s : branches) {
      Node child{cur.sys, cur.path};
      child.sys.apply(s);
      child.path.push_back(s);
      if (at_goal(child.sys)) {
        res.t = static_cast<std::int64_t>(child.path.size());
        res.witness = std::move(child.path);
        return res;
      }
      if (visited.insert(key(child.sys)).second) frontier.push_back(std::move(child));
    }
  }
  // Every reachable configuration was expanded without hitting the goal, so
  // no depth cap would help; report it the same way.
  res.exceeded_cap = true;
  return res;
}

// ---------------------------------------------------------------------------
// The slow-simulation attack

namespace {

RunStep remap_pair_step(RunStep s, int k) {
  s.starter = (s.starter == 0) ? 2 * k : 2 * k + 1;
  s.reactor = (s.reactor == 0) ? 2 * k : 2 * k + 1;
  return s;
}

}  // namespace

AttackOutcome lemma1_attack(const AttackConfig& cfg) {
  if (!is_omissive(cfg.model))
    throw ConfigError("the attack needs a model that admits omissions, not " +
                      model_name(cfg.model));
  check_compatibility(cfg.model, cfg.sim.kind);
  if (cfg.q0 == cfg.q1)
    throw ConfigError("the attack needs two distinct initial states");

  auto [q0_after, q1_after] = cfg.protocol.apply(cfg.q0, cfg.q1);
  if (q1_after == cfg.q1)
    throw ConfigError("delta(" + cfg.q0 + "," + cfg.q1 + ") leaves " + cfg.q1 +
                      " unchanged; there is no transition to count");
  auto [r1, r0] = cfg.protocol.apply(cfg.q1, cfg.q0);
  if (r1 != q1_after || r0 != q0_after)
    throw ConfigError("delta must be symmetric on (" + cfg.q0 + "," + cfg.q1 + ")");

  FttQuery fq{cfg.protocol, cfg.model, cfg.sim, cfg.q0, cfg.q1, cfg.depth_cap};
  FttResult ftt = fastest_transition_time(fq);
  AttackOutcome out;
  if (ftt.exceeded_cap) {
    out.exceeded_cap = true;
    return out;
  }
  if (ftt.t <= 0)
    throw ConfigError("the simulator transitions instantly; nothing to attack");

  const std::int64_t t = ftt.t;
  AttackPlan& plan = out.plan;
  plan.t = t;
  plan.q0 = cfg.q0;
  plan.q1 = cfg.q1;
  plan.q0_after = q0_after;
  plan.q1_after = q1_after;
  plan.base_run = ftt.witness;
  plan.agents = static_cast<int>(2 * t + 2);
  plan.initial.assign(plan.agents, cfg.q1);
  for (std::int64_t k = 0; k < t; ++k) plan.initial[2 * k] = cfg.q0;

  const int acc = static_cast<int>(2 * t);      // collects one real turn per block
  const int gen = acc + 1;                      // absorbs the omissive turns

  for (std::int64_t k = 0; k < t; ++k) {
    // I_k: k faithful steps, one omissive step aimed at the q1 agent, then a
    // seeded fair extension until that agent's simulated state flips.
    Run ik(ftt.witness.begin(), ftt.witness.begin() + k);
    RunStep om = ftt.witness[k];
    om.omission = (om.reactor == 1) ? Omission::kReactor : Omission::kStarter;
    ik.push_back(om);

    Configuration init2 =
        initial_configuration(cfg.sim.kind, cfg.protocol, {cfg.q0, cfg.q1}, cfg.sim);
    System sys(cfg.protocol, cfg.model, cfg.sim, init2);
    std::int64_t first_reach = -1;
    std::int64_t applied = 0;
    for (const RunStep& s : ik) {
      sys.apply(s);
      ++applied;
      if (first_reach < 0 && simulated_state(sys.agent(1)) == q1_after)
        first_reach = applied;
    }
    Rng ext(cfg.seed ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(k + 1)));
    while (first_reach < 0) {
      if (applied - (k + 1) >= cfg.extension_cap) {
        out.exceeded_cap = true;
        return out;
      }
      RunStep s = fair_step(2, ext);
      ik.push_back(s);
      sys.apply(s);
      ++applied;
      if (simulated_state(sys.agent(1)) == q1_after) first_reach = applied;
    }
    const std::int64_t tk = std::max(first_reach, k + 1);
    Run executed(ik.begin(), ik.begin() + tk);
    plan.i_runs.push_back(executed);

    AttackBlock blk;
    blk.k = k;
    blk.t_k = tk;
    for (std::int64_t j = 0; j < k; ++j)
      blk.steps.push_back(remap_pair_step(executed[j], static_cast<int>(k)));
    const int a = static_cast<int>(2 * k);
    const int b = a + 1;
    const bool starter_detects =
        effect_plan(cfg.model, Omission::kReactor).starter == SideEffect::kO;
    if (ftt.witness[k].starter == 0) {
      if (starter_detects) {
        // The sender cannot tell which channel failed, so a return-channel
        // omission gives it the exact "detected and compensated" view of
        // the lost send while its token still reaches the collector. The
        // deprived partner saw nothing in the two-agent run either.
        blk.steps.push_back({a, acc, Omission::kStarter});
      } else {
        blk.steps.push_back({a, acc, Omission::kNone});
        blk.steps.push_back({gen, b, Omission::kReactor});
      }
    } else {
      blk.steps.push_back({acc, a, Omission::kNone});
      blk.steps.push_back({b, gen, Omission::kStarter});
    }
    for (std::int64_t j = k + 1; j < tk; ++j)
      blk.steps.push_back(remap_pair_step(executed[j], static_cast<int>(k)));

    plan.assembled.insert(plan.assembled.end(), blk.steps.begin(), blk.steps.end());
    plan.blocks.push_back(std::move(blk));
  }
  return out;
}

AttackReplay replay_attack(const AttackPlan& plan, const AttackConfig& cfg) {
  if (static_cast<int>(plan.initial.size()) != plan.agents)
    throw StructuralError("attack plan initial configuration has the wrong arity");
  Configuration init =
      initial_configuration(cfg.sim.kind, cfg.protocol, plan.initial, cfg.sim);
  System sys(cfg.protocol, cfg.model, cfg.sim, init);

  AttackReplay out;
  std::set<int> seen;
  for (const RunStep& s : plan.assembled) {
    for (const Event& e : sys.apply(s)) {
      if (e.pre == plan.q1 && e.post == plan.q1_after && seen.insert(e.agent).second)
        out.transitioned.push_back(e.agent);
    }
  }
  for (int i = 0; i < sys.n(); ++i)
    if (simulated_state(sys.agent(i)) == plan.q1_after) ++out.final_target_state_count;
  out.omissions = sys.omissions_seen();
  return out;
}

// ---------------------------------------------------------------------------
// Omission-free rewriting for the undetectable models

RewrittenPlan theorem3_rewrite(ModelId model, const AttackPlan& plan) {
  if (model != ModelId::kT1 && model != ModelId::kI1 && model != ModelId::kI2)
    throw ConfigError("the omission-free rewriting covers t1, i1 and i2, not " +
                      model_name(model));

  RewrittenPlan out;
  out.model = model;
  const int acc = 2 * static_cast<int>(plan.t);
  const int gen = acc + 1;

  for (const AttackBlock& src : plan.blocks) {
    const std::int64_t k = src.k;
    const Run& executed = plan.i_runs.at(static_cast<std::size_t>(k));
    const bool d0_starts = plan.base_run.at(static_cast<std::size_t>(k)).starter == 0;
    const int a = static_cast<int>(2 * k);
    const int b = a + 1;

    AttackBlock blk;
    blk.k = k;
    blk.t_k = src.t_k;
    for (std::int64_t j = 0; j < k; ++j)
      blk.steps.push_back(remap_pair_step(executed[j], static_cast<int>(k)));

    switch (model) {
      case ModelId::kT1:
        // One ordinary exchange with the collector stands in for both halves.
        if (d0_starts)
          blk.steps.push_back({a, acc, Omission::kNone});
        else
          blk.steps.push_back({acc, a, Omission::kNone});
        break;
      case ModelId::kI1:
        if (d0_starts) {
          blk.steps.push_back({a, acc, Omission::kNone});
        } else {
          blk.steps.push_back({acc, gen, Omission::kNone});
          blk.steps.push_back({b, gen, Omission::kNone});
        }
        break;
      default:  // kI2
        if (d0_starts) {
          blk.steps.push_back({a, acc, Omission::kNone});
          blk.steps.push_back({b, gen, Omission::kNone});
        } else {
          blk.steps.push_back({acc, gen, Omission::kNone});
          blk.steps.push_back({a, gen, Omission::kNone});
          blk.steps.push_back({b, gen, Omission::kNone});
        }
        break;
    }

    for (std::int64_t j = k + 1; j < src.t_k; ++j)
      blk.steps.push_back(remap_pair_step(executed[j], static_cast<int>(k)));

    out.assembled.insert(out.assembled.end(), blk.steps.begin(), blk.steps.end());
    out.blocks.push_back(std::move(blk));
  }
  return out;
}

namespace {

std::string step_text(const RunStep& s) { return format_step(s); }

}  // namespace

std::string validate_rewritten_plan(const RewrittenPlan& r, const AttackPlan& plan) {
  if (r.model != ModelId::kT1 && r.model != ModelId::kI1 && r.model != ModelId::kI2)
    return "model " + model_name(r.model) + " is not covered by the rewriting";
  if (r.blocks.size() != plan.blocks.size())
    return "expected " + std::to_string(plan.blocks.size()) + " blocks, found " +
           std::to_string(r.blocks.size());

  const int acc = 2 * static_cast<int>(plan.t);
  const int gen = acc + 1;

  Run concat;
  for (std::size_t bi = 0; bi < r.blocks.size(); ++bi) {
    const AttackBlock& blk = r.blocks[bi];
    const std::int64_t k = plan.blocks[bi].k;
    const std::int64_t tk = plan.blocks[bi].t_k;
    const std::string where = "block " + std::to_string(k);
    if (blk.k != k || blk.t_k != tk) return where + ": header data diverged";

    const Run& executed = plan.i_runs.at(bi);
    const bool d0_starts = plan.base_run.at(bi).starter == 0;
    const int a = static_cast<int>(2 * k);
    const int b = a + 1;

    // The replacement window and the length arithmetic per model.
    Run replacement;
    if (r.model == ModelId::kT1) {
      replacement.push_back(d0_starts ? RunStep{a, acc, Omission::kNone}
                                      : RunStep{acc, a, Omission::kNone});
    } else if (r.model == ModelId::kI1) {
      if (d0_starts) {
        replacement.push_back({a, acc, Omission::kNone});
      } else {
        replacement.push_back({acc, gen, Omission::kNone});
        replacement.push_back({b, gen, Omission::kNone});
      }
    } else {
      if (d0_starts) {
        replacement.push_back({a, acc, Omission::kNone});
        replacement.push_back({b, gen, Omission::kNone});
      } else {
        replacement.push_back({acc, gen, Omission::kNone});
        replacement.push_back({a, gen, Omission::kNone});
        replacement.push_back({b, gen, Omission::kNone});
      }
    }

    const std::size_t expected_len = static_cast<std::size_t>(tk - 1) +
                                     replacement.size();
    if (blk.steps.size() != expected_len)
      return where + ": " + std::to_string(blk.steps.size()) + " steps, expected " +
             std::to_string(expected_len);

    int collector_turns = 0;
    for (const RunStep& s : blk.steps) {
      if (s.omission != Omission::kNone)
        return where + ": omissive step " + step_text(s);
      if (s.starter == acc || s.reactor == acc) ++collector_turns;
    }
    if (collector_turns != 1)
      return where + ": the collector took " + std::to_string(collector_turns) +
             " turns instead of one";

    std::size_t pos = 0;
    for (std::int64_t j = 0; j < k; ++j, ++pos) {
      RunStep want = remap_pair_step(executed[j], static_cast<int>(k));
      if (!(blk.steps[pos].starter == want.starter &&
            blk.steps[pos].reactor == want.reactor))
        return where + ": prefix step " + std::to_string(pos) + " is " +
               step_text(blk.steps[pos]) + ", expected " + step_text(want);
    }
    for (const RunStep& want : replacement) {
      if (!(blk.steps[pos].starter == want.starter &&
            blk.steps[pos].reactor == want.reactor))
        return where + ": replacement step " + std::to_string(pos) + " is " +
               step_text(blk.steps[pos]) + ", expected " + step_text(want);
      ++pos;
    }
    for (std::int64_t j = k + 1; j < tk; ++j, ++pos) {
      RunStep want = remap_pair_step(executed[j], static_cast<int>(k));
      if (!(blk.steps[pos].starter == want.starter &&
            blk.steps[pos].reactor == want.reactor))
        return where + ": tail step " + std::to_string(pos) + " is " +
               step_text(blk.steps[pos]) + ", expected " + step_text(want);
    }
    concat.insert(concat.end(), blk.steps.begin(), blk.steps.end());
  }

  if (concat.size() != r.assembled.size())
    return "assembled run does not match the concatenated blocks";
  for (std::size_t i = 0; i < concat.size(); ++i) {
    if (concat[i].starter != r.assembled[i].starter ||
        concat[i].reactor != r.assembled[i].reactor ||
        concat[i].omission != r.assembled[i].omission)
      return "assembled step " + std::to_string(i) +
             " does not match the concatenated blocks";
  }
  if (count_omissions(r.assembled) != 0)
    return "assembled run still contains omissions";
  return {};
}

}  // namespace popsim
