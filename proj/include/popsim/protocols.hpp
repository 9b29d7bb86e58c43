#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "popsim/protocol.hpp"

namespace popsim {

// Pairing problem: consumers ("c") and producers ("p"); a consumer and a
// producer may pair, sending the consumer to the critical state "cs" and
// retiring the producer to "bot".
inline constexpr const char* kConsumer = "c";
inline constexpr const char* kProducer = "p";
inline constexpr const char* kCritical = "cs";
inline constexpr const char* kRetired = "bot";

/// The two-way pairing protocol:
///   (c, p) -> (cs, bot)
///   (p, c) -> (bot, cs)
/// and identity everywhere else.
const ProtocolSpec& pairing_protocol();

/// One-shot epidemic, a deliberately asymmetric smoke-test protocol:
///   (i, s) -> (i, i)   (the starter infects, never the reverse)
const ProtocolSpec& epidemic_protocol();

struct PairingInstance {
  int consumers = 0;
  int producers = 0;

  int n() const { return consumers + producers; }
  int target() const { return consumers < producers ? consumers : producers; }
  std::vector<State> initial_states() const;  // consumers first, then producers
};

struct PairingReport {
  bool irrevocable = true;   // no agent ever leaves cs; only c enters cs
  bool safe = true;          // #cs <= producers at every configuration
  bool live_at_horizon = false;  // #cs == target through the final window
  std::int64_t first_violation = -1;  // step of the first safety/irrevocability break
  std::int64_t stable_from = -1;      // first step from which #cs == target held on
  std::int64_t final_critical = 0;

  bool all_pass() const { return irrevocable && safe && live_at_horizon; }
};

/// Streaming checker over a sequence of simulated configurations. Feed the
/// initial configuration first, then one configuration per step.
class PairingMonitor {
 public:
  PairingMonitor(PairingInstance inst, double stability_fraction = 0.1);

  void feed(std::span<const State> simulated);
  /// Final verdict; `fed` configurations after the initial one count as
  /// steps. Liveness requires the target count to hold throughout the
  /// final stability window.
  PairingReport finish() const;

 private:
  PairingInstance inst_;
  double stability_fraction_;
  std::vector<State> previous_;
  std::int64_t fed_ = 0;
  std::int64_t critical_ = 0;
  std::int64_t stable_from_ = -1;
  bool irrevocable_ = true;
  bool safe_ = true;
  std::int64_t first_violation_ = -1;
};

/// Whole-sequence convenience wrapper. `configs` holds the initial
/// configuration followed by one configuration per step; every
/// configuration must use pairing-protocol states, and the initial one
/// must match the instance. Throws StructuralError otherwise.
PairingReport check_pairing(std::span<const std::vector<State>> configs,
                            const PairingInstance& inst,
                            double stability_fraction = 0.1);

/// True if `p` is the pairing protocol (same states and rules).
bool is_pairing_protocol(const ProtocolSpec& p);

/// Built-in protocol tables by name ("pairing", "epidemic"); nullptr when
/// unknown. Traces reference protocols by name, so replay resolves them
/// here.
const ProtocolSpec* builtin_protocol(const std::string& name);

}  // namespace popsim
