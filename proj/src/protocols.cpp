#include "popsim/protocols.hpp"

#include <algorithm>
#include <set>

namespace popsim {

const ProtocolSpec& pairing_protocol() {
  static const ProtocolSpec kPairing(
      "pairing", {kCritical, kConsumer, kProducer, kRetired}, {kConsumer, kProducer},
      {{{kConsumer, kProducer}, {kCritical, kRetired}},
       {{kProducer, kConsumer}, {kRetired, kCritical}}});
  return kPairing;
}

const ProtocolSpec& epidemic_protocol() {
  static const ProtocolSpec kEpidemic("epidemic", {"i", "s"}, {"i", "s"},
                                      {{{"i", "s"}, {"i", "i"}}});
  return kEpidemic;
}

std::vector<State> PairingInstance::initial_states() const {
  if (consumers < 0 || producers < 0)
    throw ConfigError("pairing instance needs nonnegative counts");
  std::vector<State> out;
  out.reserve(static_cast<std::size_t>(n()));
  out.insert(out.end(), static_cast<std::size_t>(consumers), kConsumer);
  out.insert(out.end(), static_cast<std::size_t>(producers), kProducer);
  return out;
}

PairingMonitor::PairingMonitor(PairingInstance inst, double stability_fraction)
    : inst_(inst), stability_fraction_(stability_fraction) {
  if (inst.consumers < 0 || inst.producers < 0)
    throw ConfigError("pairing instance needs nonnegative counts");
  if (stability_fraction < 0.0 || stability_fraction > 1.0)
    throw ConfigError("stability fraction must lie in [0, 1]");
}

void PairingMonitor::feed(std::span<const State> simulated) {
  if (static_cast<int>(simulated.size()) != inst_.n())
    throw StructuralError("configuration arity differs from the pairing instance");
  std::int64_t critical = 0;
  std::int64_t consumers = 0, producers = 0;
  for (const State& q : simulated) {
    if (q == kCritical) ++critical;
    else if (q == kConsumer) ++consumers;
    else if (q == kProducer) ++producers;
    else if (q != kRetired)
      throw StructuralError("state '" + q + "' is not a pairing state");
  }

  const std::int64_t t = fed_;
  if (t == 0) {
    if (consumers != inst_.consumers || producers != inst_.producers || critical != 0)
      throw StructuralError("initial configuration does not match the instance");
  } else {
    for (std::size_t i = 0; i < simulated.size(); ++i) {
      const bool was_critical = previous_[i] == kCritical;
      const bool is_critical = simulated[i] == kCritical;
      if (was_critical && !is_critical) {
        irrevocable_ = false;
        if (first_violation_ < 0) first_violation_ = t;
      }
      if (is_critical && !was_critical && previous_[i] != kConsumer) {
        irrevocable_ = false;
        if (first_violation_ < 0) first_violation_ = t;
      }
    }
  }

  if (critical > inst_.producers) {
    safe_ = false;
    if (first_violation_ < 0) first_violation_ = t;
  }

  if (critical == inst_.target()) {
    if (stable_from_ < 0) stable_from_ = t;
  } else {
    stable_from_ = -1;
  }

  critical_ = critical;
  previous_.assign(simulated.begin(), simulated.end());
  ++fed_;
}

PairingReport PairingMonitor::finish() const {
  if (fed_ == 0) throw StructuralError("monitor finished before any configuration");
  PairingReport r;
  r.irrevocable = irrevocable_;
  r.safe = safe_;
  r.first_violation = first_violation_;
  r.stable_from = stable_from_;
  r.final_critical = critical_;

  const std::int64_t steps = fed_ - 1;
  // The target count must hold from some point on, and that point must not
  // fall inside the final stability window.
  const auto window_start =
      static_cast<std::int64_t>(static_cast<double>(steps) * (1.0 - stability_fraction_));
  r.live_at_horizon = stable_from_ >= 0 && stable_from_ <= window_start;
  return r;
}

PairingReport check_pairing(std::span<const std::vector<State>> configs,
                            const PairingInstance& inst, double stability_fraction) {
  PairingMonitor monitor(inst, stability_fraction);
  for (const std::vector<State>& c : configs) monitor.feed(c);
  return monitor.finish();
}

const ProtocolSpec* builtin_protocol(const std::string& name) {
  if (name == "pairing") return &pairing_protocol();
  if (name == "epidemic") return &epidemic_protocol();
  return nullptr;
}

bool is_pairing_protocol(const ProtocolSpec& p) {
  const ProtocolSpec& ref = pairing_protocol();
  std::set<State> got(p.states().begin(), p.states().end());
  std::set<State> want(ref.states().begin(), ref.states().end());
  return got == want && p.initial_states() == ref.initial_states() &&
         p.rules() == ref.rules();
}

}  // namespace popsim
