#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "popsim/agents.hpp"
#include "popsim/models.hpp"
#include "popsim/run.hpp"
#include "popsim/simulators.hpp"

namespace popsim {

/// One declared simulated-state update: the agent whose state_p the
/// simulator assigned at this step (identity assignments included), with
/// an opaque provenance tag used by the constructive matcher.
struct Event {
  int agent = 0;
  State pre;
  State post;
  std::string tag;

  bool changed() const { return pre != post; }
};

struct TraceRecord {
  std::int64_t index = 0;
  RunStep step;
  std::vector<Event> events;
  Configuration post;
};

struct TraceHeader {
  std::string protocol;
  std::string model;
  int n = 0;
  std::uint64_t seed = 0;
  std::string simulator;  // SimulatorOptions::describe()
};

struct Trace {
  TraceHeader header;
  Configuration initial;
  std::vector<TraceRecord> records;
};

/// Validates model/simulator compatibility: kno needs it|i3|i4, sid and
/// naming need io, direct needs a two-way model. Throws ConfigError.
void check_compatibility(ModelId model, SimulatorKind kind);

/// Builds the initial configuration for a simulator kind from the desired
/// simulated states. S_ID ids are 1..n in agent order.
Configuration initial_configuration(SimulatorKind kind, const ProtocolSpec& p,
                                    const std::vector<State>& simulated,
                                    const SimulatorOptions& opts);

/// A population plus the machinery to apply run steps to it.
class System {
 public:
  System(ProtocolSpec protocol, ModelId model, SimulatorOptions opts,
         Configuration initial);

  int n() const { return static_cast<int>(agents_.size()); }
  ModelId model() const { return model_; }
  const SimulatorOptions& options() const { return opts_; }
  const ProtocolSpec& protocol() const { return protocol_; }
  const Configuration& configuration() const { return agents_; }
  const AgentState& agent(int i) const { return agents_.at(i); }

  /// Applies one interaction; returns the delta_P assignments it caused
  /// (at most two). Throws on descriptors illegal for the model.
  std::vector<Event> apply(const RunStep& step);

  std::int64_t steps_applied() const { return steps_; }
  std::int64_t omissions_seen() const { return omissions_; }

 private:
  std::vector<Event> apply_direct(const RunStep& step, const EffectPlan& plan);
  std::vector<Event> apply_kno(const RunStep& step, const EffectPlan& plan);
  std::vector<Event> apply_sid(const RunStep& step);
  std::vector<Event> apply_naming(const RunStep& step);

  ProtocolSpec protocol_;
  ModelId model_;
  SimulatorOptions opts_;
  Configuration agents_;
  std::int64_t steps_ = 0;
  std::int64_t omissions_ = 0;
  std::int64_t serials_ = 0;               // token run serials (kno)
  std::int64_t transactions_ = 0;          // lock serials (sid)
  std::map<int, std::int64_t> open_locks_; // locked agent -> transaction serial
};

/// Streaming observer; return false to stop the run early.
using StepSink = std::function<bool(std::int64_t index, const RunStep& step,
                                    const System& sys, std::span<const Event> events)>;

/// Applies every step, feeding the sink. Returns the number applied.
std::int64_t run_system(System& sys, std::span<const RunStep> run, const StepSink& sink);

/// Convenience: run and materialize a full trace.
Trace simulate(ProtocolSpec protocol, ModelId model, SimulatorOptions opts,
               Configuration initial, std::span<const RunStep> run,
               std::uint64_t seed_for_header);

/// Re-executes a trace's run and compares configurations line by line.
/// Returns the first mismatching step index, or -1 if the trace replays
/// exactly.
std::int64_t replay_divergence(const Trace& t);

}  // namespace popsim
