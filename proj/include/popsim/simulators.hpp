#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "popsim/agents.hpp"
#include "popsim/protocol.hpp"

namespace popsim {

enum class SimulatorKind { kDirect, kInert, kKnO, kSid, kNaming };

SimulatorKind simulator_from_name(const std::string& name);
const std::string& simulator_name(SimulatorKind k);

struct SimulatorOptions {
  SimulatorKind kind = SimulatorKind::kDirect;
  int o = 0;  // omission budget for S_KnO
  // If set, an agent that has locally detected this many omissions stops
  // simulating for good (degradation wrapper used by the attack analysis).
  std::optional<int> degrade_threshold;

  std::string describe() const;
};
SimulatorOptions simulator_options_from_description(const std::string& text);

// ---------------------------------------------------------------------------
// S_KnO: simulator for a known bound o on the number of omissions.
// Runs under it (o = 0), i3, or i4.

/// A delta_P assignment performed by a reactor step, with the provenance
/// needed to reconstruct matchings.
struct KnOEvent {
  State pre;
  State post;
  bool starter_half = false;        // true: pending resolution, delta[0]
  State counterpart;                // consumed run's target q, or the change
                                    // run's partner state q' when resolving
  std::int64_t consumed_serial = 0; // run whose consumption triggered this
  std::int64_t emitted_serial = 0;  // change run created (consume only, else 0)
};

/// Starter side of one interaction. If the agent is available with an
/// empty queue it switches to pending and enqueues the full run of o+1
/// state tokens for its current simulated state; in any case it then
/// dequeues and returns the head token. A pending agent with an empty
/// queue emits nothing and stays pending.
/// `serials` is the engine's run-serial allocator.
std::optional<Token> kno_starter_step(KnOAgent& a, int o, std::int64_t& serials);

/// Starter-side omission detection (i4): the agent compensates for the
/// token it just lost by enqueueing a fresh joker.
void kno_starter_detect(KnOAgent& a);

/// Reactor side of one interaction.
///  1. enqueue the payload, or a joker when an omission was detected
///     (joker-recovery bookkeeping applies when the payload identity is
///     owed in `jokers`);
///  2. preliminary check: a pending agent that can assemble a full run for
///     its own state becomes available and discards it;
///  3. core step: an available agent consuming a run for q applies
///     delta(q, state_p)[1] and enqueues the change run <(q, old state),.>;
///     a pending agent consuming a change run <(state_p, q'),.> applies
///     delta(state_p, q')[0] and becomes available.
/// Run assembly is deterministic: among complete candidate runs, the one
/// whose oldest token sits earliest in the queue wins, jokers are spent
/// only for missing slots, and every joker spend records the replaced
/// identity.
std::optional<KnOEvent> kno_reactor_step(KnOAgent& a, const ProtocolSpec& p, int o,
                                         std::optional<Token> payload,
                                         bool omission_detected,
                                         std::int64_t& serials);

// ---------------------------------------------------------------------------
// S_ID: simulator for unique identifiers, model io.

enum class SidBranch { kNone, kPaired, kLocked, kCompleted, kRollback };

/// One observation step. The reactor sees the starter's full pre-state and
/// is the only side that changes. Exactly the first branch whose guard
/// holds fires:
///   paired:    both available -> record the starter and enter pairing
///   locked:    an available agent that a pairing agent has recorded
///              (same id, unchanged state) applies delta[0]
///   completed: the pairing agent sees its partner locked on it, applies
///              delta[1] using the recorded partner state, and releases
///   rollback:  the recorded partner has moved on -> reset to available
/// Throws IntegrityError when the observed id duplicates the reactor's.
SidBranch sid_reactor_step(IDAgent& reactor, const IDAgent& starter,
                           const ProtocolSpec& p);

// ---------------------------------------------------------------------------
// N_n: naming layer for known population size n, stacked on S_ID.

struct NamingOutcome {
  bool collision = false;    // reactor shared the starter's my_id
  bool started_now = false;  // max_id reached n during this step
  SidBranch inner = SidBranch::kNone;
};

/// One observation step of the naming layer. Non-started reactors run the
/// renaming rule (increment on collision, then fold the maxima) and start
/// the inner S_ID with their frozen my_id once max_id == n. Deliveries
/// from non-started starters to started reactors are ignored by the inner
/// layer.
NamingOutcome naming_step(NamingAgent& reactor, const NamingAgent& starter, int n,
                          const ProtocolSpec& p);

}  // namespace popsim
