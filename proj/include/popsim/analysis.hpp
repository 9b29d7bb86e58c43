#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "popsim/engine.hpp"
#include "popsim/scheduling.hpp"

namespace popsim {

/// One simulated-state update event extracted from a trace. Pre/post are
/// recomputed from the configurations, not trusted from the annotation.
struct TraceEvent {
  std::int64_t step = 0;
  int agent = 0;
  State pre;
  State post;
  std::string tag;
};

using EventSeq = std::vector<TraceEvent>;

/// Collects the annotated events of a trace in step order. Throws
/// IntegrityError if a simulated state changes at an unannotated step, if
/// an annotation contradicts the configurations, or if a step carries more
/// than two events.
EventSeq extract_events(const Trace& t, const ProtocolSpec& spec);

/// A claimed perfect matching over event positions: ordered pairs
/// (starter-side event, reactor-side event), plus the explicitly reported
/// tail of events still waiting for their partner at the horizon.
struct Matching {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::size_t> unmatched;
};

struct MatchVerdict {
  bool accepted = false;
  std::string witness;  // first violation, empty when accepted
};

/// Checks that the pairs plus the unmatched tail partition the event
/// positions, that each pair's agents differ, and that each pair realizes
/// one two-way transition: delta(pre_j, pre_k) == (post_j, post_k).
MatchVerdict verify_matching(const EventSeq& events, const Matching& m,
                             const ProtocolSpec& spec);

/// Builds a matching from the simulator provenance tags (sid lock /
/// completion serials, kno consume / resolution serials, direct tw step
/// pairing). Same-agent no-op transactions are dropped; events that cannot
/// be paired are reported in `unmatched`.
Matching build_matching(const EventSeq& events);

struct DerivedExecution {
  Run run;  // pair m: (starter-side agent, reactor-side agent)
  std::vector<std::vector<State>> configs;  // initial + one per pair
};

/// Orders the matched pairs by min event step (ties by max, then agents)
/// and replays them through delta from the projected initial
/// configuration.
DerivedExecution derive_execution(const Trace& t, const EventSeq& events,
                                  const Matching& m, const ProtocolSpec& spec);

// ---------------------------------------------------------------------------
// Transition times

/// Smallest t such that after t steps of the trace both simulated states
/// of a 2-agent system equal delta(q0, q1). nullopt when the trace never
/// gets there.
std::optional<std::int64_t> transition_time(const Trace& t, const ProtocolSpec& spec);

struct FttQuery {
  ProtocolSpec protocol;
  ModelId model = ModelId::kTw;
  SimulatorOptions sim;
  State q0;  // agent 0
  State q1;  // agent 1
  std::int64_t depth_cap = 64;
};

struct FttResult {
  bool exceeded_cap = false;
  std::int64_t t = -1;
  Run witness;  // an omission-free 2-agent run achieving t
};

/// Fastest transition time: minimum transition time over all omission-free
/// 2-agent runs, by breadth-first search over the run tree (both ordered
/// pairs branch at every depth, visited configurations deduplicated).
FttResult fastest_transition_time(const FttQuery& q);

// ---------------------------------------------------------------------------
// The slow-simulation attack and its omission-free rewriting

struct AttackConfig {
  ProtocolSpec protocol;
  ModelId model = ModelId::kI3;
  SimulatorOptions sim;
  State q0;  // transitions to delta(q0,q1)[0]
  State q1;  // the counted transition: q1 -> delta(q0,q1)[1]
  std::int64_t depth_cap = 64;
  std::int64_t extension_cap = 100000;
  std::uint64_t seed = 0;
};

/// One block J_k of the attack: the first k steps of the optimal run
/// replayed on a fresh agent pair, the omissive step redirected through
/// the accumulator agent 2t and the omission generator 2t+1, then the
/// remainder of I_k.
struct AttackBlock {
  std::int64_t k = 0;
  std::int64_t t_k = 0;
  Run steps;
};

struct AttackPlan {
  std::int64_t t = 0;  // fastest transition time of the simulator
  State q0, q1, q0_after, q1_after;
  Run base_run;               // I, optimal 2-agent run
  std::vector<Run> i_runs;    // I_k prefixes actually executed (t_k steps each)
  std::vector<AttackBlock> blocks;
  Run assembled;              // I* = J_0 ... J_{t-1}
  int agents = 0;             // 2t + 2
  std::vector<State> initial; // B_0
};

/// Builds the attack plan: t omissions suffice to drive t+1 agents through
/// the q1 -> delta(q0,q1)[1] transition against t agents in q0. Requires
/// delta(q0,q1) and delta(q1,q0) to be symmetric, q1 to actually change,
/// and t >= 1. Throws ConfigError when the preconditions fail and reports
/// cap overruns via FttResult-style flags.
struct AttackOutcome {
  bool exceeded_cap = false;
  AttackPlan plan;
};
AttackOutcome lemma1_attack(const AttackConfig& cfg);

struct AttackReplay {
  std::vector<int> transitioned;   // agents observed doing q1 -> q1'
  std::int64_t final_target_state_count = 0;  // agents ending in q1'
  std::int64_t omissions = 0;
};

/// Replays the assembled run through the real engine from B_0.
AttackReplay replay_attack(const AttackPlan& plan, const AttackConfig& cfg);

/// Omission-free rewriting of an attack plan for the undetectable models
/// (t1, i1, i2). Block length arithmetic relative to the original
/// t_k + 1: t1 always -1; i1 -1 when the starter of I[k] is agent 0, else
/// +0; i2 +0 when the starter of I[k] is agent 0, else +1.
struct RewrittenPlan {
  ModelId model;
  std::vector<AttackBlock> blocks;
  Run assembled;
};
RewrittenPlan theorem3_rewrite(ModelId model, const AttackPlan& plan);

/// Structural validation of a rewritten plan: zero omissions, per-block
/// length arithmetic, and the per-agent replication pattern (pair agents
/// interact only with each other and with the two auxiliary agents in the
/// replacement positions; the accumulator sees one real interaction per
/// block in the correct role). Returns an empty string when valid.
std::string validate_rewritten_plan(const RewrittenPlan& r, const AttackPlan& plan);

}  // namespace popsim
