#include "popsim/engine.hpp"

#include <set>

#include "popsim/protocols.hpp"

namespace popsim {

void check_compatibility(ModelId model, SimulatorKind kind) {
  switch (kind) {
    case SimulatorKind::kInert:
      return;
    case SimulatorKind::kDirect:
      if (!is_one_way(model)) return;
      throw ConfigError("direct execution needs a two-way model, not " +
                        model_name(model));
    case SimulatorKind::kKnO:
      if (model == ModelId::kIt || model == ModelId::kI3 || model == ModelId::kI4)
        return;
      throw ConfigError("the token-queue simulator runs under it, i3 or i4, not " +
                        model_name(model));
    case SimulatorKind::kSid:
    case SimulatorKind::kNaming:
      if (model == ModelId::kIo) return;
      throw ConfigError("identifier-based simulation runs under io, not " +
                        model_name(model));
  }
  throw StructuralError("unknown simulator kind");
}

Configuration initial_configuration(SimulatorKind kind, const ProtocolSpec& p,
                                    const std::vector<State>& simulated,
                                    const SimulatorOptions& opts) {
  if (opts.kind != kind) throw ConfigError("simulator options disagree with the kind");
  if (kind == SimulatorKind::kKnO && opts.o < 0)
    throw ConfigError("the omission bound must be nonnegative");
  if (opts.degrade_threshold && *opts.degrade_threshold < 1)
    throw ConfigError("the degradation threshold must be positive");

  Configuration out;
  out.reserve(simulated.size());
  int next_id = 1;
  for (const State& q : simulated) {
    if (!p.has_state(q))
      throw StructuralError("initial state '" + q + "' is not a state of '" +
                            p.name() + "'");
    switch (kind) {
      case SimulatorKind::kDirect:
        out.push_back(DirectAgent{q});
        break;
      case SimulatorKind::kInert:
        out.push_back(InertAgent{q});
        break;
      case SimulatorKind::kKnO: {
        KnOAgent a;
        a.state_p = q;
        out.push_back(a);
        break;
      }
      case SimulatorKind::kSid: {
        IDAgent a;
        a.my_id = next_id++;
        a.state_p = q;
        out.push_back(a);
        break;
      }
      case SimulatorKind::kNaming: {
        NamingAgent a;
        a.state_p = q;
        out.push_back(a);
        break;
      }
    }
  }
  return out;
}

namespace {

bool agent_matches(const AgentState& a, SimulatorKind kind) {
  switch (kind) {
    case SimulatorKind::kDirect: return std::holds_alternative<DirectAgent>(a);
    case SimulatorKind::kInert: return std::holds_alternative<InertAgent>(a);
    case SimulatorKind::kKnO: return std::holds_alternative<KnOAgent>(a);
    case SimulatorKind::kSid: return std::holds_alternative<IDAgent>(a);
    case SimulatorKind::kNaming: return std::holds_alternative<NamingAgent>(a);
  }
  return false;
}

}  // namespace

System::System(ProtocolSpec protocol, ModelId model, SimulatorOptions opts,
               Configuration initial)
    : protocol_(std::move(protocol)),
      model_(model),
      opts_(opts),
      agents_(std::move(initial)) {
  check_compatibility(model_, opts_.kind);
  if (agents_.size() < 2) throw StructuralError("a system needs at least two agents");
  if (opts_.kind == SimulatorKind::kKnO && opts_.o < 0)
    throw ConfigError("the omission bound must be nonnegative");
  if (opts_.degrade_threshold && *opts_.degrade_threshold < 1)
    throw ConfigError("the degradation threshold must be positive");

  std::set<int> ids;
  for (const AgentState& a : agents_) {
    if (!agent_matches(a, opts_.kind))
      throw StructuralError("agent kind disagrees with the simulator");
    if (const auto* s = std::get_if<IDAgent>(&a)) {
      if (s->my_id < 1) throw StructuralError("identifiers must be positive");
      if (!ids.insert(s->my_id).second)
        throw StructuralError("identifiers must be unique");
    }
  }
  project(agents_, protocol_);  // validates every simulated state
}

std::vector<Event> System::apply_direct(const RunStep& step, const EffectPlan& plan) {
  auto& s = std::get<DirectAgent>(agents_[step.starter]);
  auto& r = std::get<DirectAgent>(agents_[step.reactor]);
  const State s_pre = s.state_p;
  const State r_pre = r.state_p;

  bool s_assigned = false;
  bool r_assigned = false;
  State s_post = s_pre;
  State r_post = r_pre;
  switch (plan.starter) {
    case SideEffect::kFs:
      s_post = protocol_.apply_starter(s_pre, r_pre);
      s_assigned = true;
      break;
    case SideEffect::kO:   // identity detection hook
    case SideEffect::kNone:
      break;
    default:
      throw StructuralError("unexpected starter effect in direct execution");
  }
  switch (plan.reactor) {
    case SideEffect::kFr:
      r_post = protocol_.apply_reactor(s_pre, r_pre);
      r_assigned = true;
      break;
    case SideEffect::kH:   // identity detection hook
    case SideEffect::kNone:
      break;
    default:
      throw StructuralError("unexpected reactor effect in direct execution");
  }
  s.state_p = s_post;
  r.state_p = r_post;

  std::vector<Event> events;
  const std::string tag = "tw:" + std::to_string(steps_);
  if (s_assigned) events.push_back({step.starter, s_pre, s_post, tag});
  if (r_assigned) events.push_back({step.reactor, r_pre, r_post, tag});
  return events;
}

std::vector<Event> System::apply_kno(const RunStep& step, const EffectPlan& plan) {
  auto& s = std::get<KnOAgent>(agents_[step.starter]);
  auto& r = std::get<KnOAgent>(agents_[step.reactor]);

  std::optional<Token> token = kno_starter_step(s, opts_.o, serials_);
  if (plan.starter == SideEffect::kO && token) kno_starter_detect(s);

  std::optional<KnOEvent> kev;
  switch (plan.reactor) {
    case SideEffect::kF:
      kev = kno_reactor_step(r, protocol_, opts_.o, token, false, serials_);
      break;
    case SideEffect::kH:
      // The scheduled loss only materializes if a token was in flight.
      // When the starter detects too, its hook (above) already replaced
      // the lost token with a joker in its own queue, and the reactor
      // treats the step as a non-delivery: exactly one joker stands in
      // per lost token.
      if (plan.starter != SideEffect::kO)
        kev = kno_reactor_step(r, protocol_, opts_.o, std::nullopt, token.has_value(),
                               serials_);
      break;
    default:
      throw StructuralError("unexpected reactor effect for the token-queue simulator");
  }

  if (opts_.degrade_threshold) {
    for (int idx : {step.starter, step.reactor}) {
      auto& a = std::get<KnOAgent>(agents_[idx]);
      if (!a.frozen && a.detected_omissions >= *opts_.degrade_threshold)
        a.frozen = true;
    }
  }

  std::vector<Event> events;
  if (kev) {
    std::string tag;
    if (kev->starter_half) {
      tag = "rsc:" + std::to_string(kev->consumed_serial) + ":" + kev->counterpart;
    } else {
      tag = "sc:" + std::to_string(kev->emitted_serial) + ":" + kev->counterpart;
    }
    events.push_back({step.reactor, kev->pre, kev->post, tag});
  }
  return events;
}

std::vector<Event> System::apply_sid(const RunStep& step) {
  auto& r = std::get<IDAgent>(agents_[step.reactor]);
  const auto& s = std::get<IDAgent>(agents_[step.starter]);
  const State pre = r.state_p;
  const SidBranch branch = sid_reactor_step(r, s, protocol_);

  std::vector<Event> events;
  switch (branch) {
    case SidBranch::kLocked: {
      const std::int64_t serial = ++transactions_;
      open_locks_[step.reactor] = serial;
      events.push_back({step.reactor, pre, r.state_p, "txn:" + std::to_string(serial)});
      break;
    }
    case SidBranch::kCompleted: {
      auto it = open_locks_.find(step.starter);
      if (it == open_locks_.end())
        throw IntegrityError("a transaction completed without an open lock");
      events.push_back(
          {step.reactor, pre, r.state_p, "txc:" + std::to_string(it->second)});
      open_locks_.erase(it);
      break;
    }
    case SidBranch::kRollback:
      // A released locked agent abandons its transaction serial.
      open_locks_.erase(step.reactor);
      break;
    case SidBranch::kPaired:
    case SidBranch::kNone:
      break;
  }
  return events;
}

std::vector<Event> System::apply_naming(const RunStep& step) {
  auto& r = std::get<NamingAgent>(agents_[step.reactor]);
  const auto& s = std::get<NamingAgent>(agents_[step.starter]);
  const State pre = r.started() ? r.inner->state_p : r.state_p;
  const NamingOutcome out = naming_step(r, s, n(), protocol_);
  const State post = r.started() ? r.inner->state_p : r.state_p;

  std::vector<Event> events;
  switch (out.inner) {
    case SidBranch::kLocked: {
      const std::int64_t serial = ++transactions_;
      open_locks_[step.reactor] = serial;
      events.push_back({step.reactor, pre, post, "txn:" + std::to_string(serial)});
      break;
    }
    case SidBranch::kCompleted: {
      auto it = open_locks_.find(step.starter);
      if (it == open_locks_.end())
        throw IntegrityError("a transaction completed without an open lock");
      events.push_back({step.reactor, pre, post, "txc:" + std::to_string(it->second)});
      open_locks_.erase(it);
      break;
    }
    case SidBranch::kRollback:
      open_locks_.erase(step.reactor);
      break;
    case SidBranch::kPaired:
    case SidBranch::kNone:
      break;
  }
  return events;
}

std::vector<Event> System::apply(const RunStep& step) {
  validate_step(step, n());
  const EffectPlan plan = effect_plan(model_, step.omission);

  std::vector<Event> events;
  switch (opts_.kind) {
    case SimulatorKind::kDirect:
      events = apply_direct(step, plan);
      break;
    case SimulatorKind::kInert:
      break;
    case SimulatorKind::kKnO:
      events = apply_kno(step, plan);
      break;
    case SimulatorKind::kSid:
      events = apply_sid(step);
      break;
    case SimulatorKind::kNaming:
      events = apply_naming(step);
      break;
  }

  ++steps_;
  if (step.omissive()) ++omissions_;
  return events;
}

std::int64_t run_system(System& sys, std::span<const RunStep> run, const StepSink& sink) {
  std::int64_t applied = 0;
  for (const RunStep& step : run) {
    const std::int64_t index = applied;
    std::vector<Event> events = sys.apply(step);
    ++applied;
    if (sink && !sink(index, step, sys, events)) break;
  }
  return applied;
}

Trace simulate(ProtocolSpec protocol, ModelId model, SimulatorOptions opts,
               Configuration initial, std::span<const RunStep> run,
               std::uint64_t seed_for_header) {
  Trace trace;
  trace.header.protocol = protocol.name();
  trace.header.model = model_name(model);
  trace.header.n = static_cast<int>(initial.size());
  trace.header.seed = seed_for_header;
  trace.header.simulator = opts.describe();
  trace.initial = initial;

  System sys(std::move(protocol), model, opts, std::move(initial));
  trace.records.reserve(run.size());
  run_system(sys, run, [&trace](std::int64_t index, const RunStep& step,
                                const System& s, std::span<const Event> events) {
    TraceRecord rec;
    rec.index = index;
    rec.step = step;
    rec.events.assign(events.begin(), events.end());
    rec.post = s.configuration();
    trace.records.push_back(std::move(rec));
    return true;
  });
  return trace;
}

std::int64_t replay_divergence(const Trace& t) {
  const ProtocolSpec* protocol = builtin_protocol(t.header.protocol);
  if (!protocol)
    throw ConfigError("trace names unknown protocol '" + t.header.protocol + "'");
  System sys(*protocol, model_from_name(t.header.model),
             simulator_options_from_description(t.header.simulator), t.initial);
  for (const TraceRecord& rec : t.records) {
    sys.apply(rec.step);
    const Configuration& got = sys.configuration();
    if (got.size() != rec.post.size()) return rec.index;
    for (std::size_t i = 0; i < got.size(); ++i)
      if (!same_serialized(got[i], rec.post[i])) return rec.index;
  }
  return -1;
}

}  // namespace popsim
