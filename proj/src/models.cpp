#include "popsim/models.hpp"

#include <array>

namespace popsim {

namespace {

const std::array<std::string, 10> kNames = {"tw", "it", "io", "t1", "t2",
                                            "t3", "i1", "i2", "i3", "i4"};

}  // namespace

ModelId model_from_name(const std::string& name) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == name) return static_cast<ModelId>(i);
  throw ConfigError("unknown interaction model '" + name + "'");
}

const std::string& model_name(ModelId m) {
  auto i = static_cast<std::size_t>(m);
  if (i >= kNames.size()) throw StructuralError("unknown model id");
  return kNames[i];
}

bool is_one_way(ModelId m) {
  switch (m) {
    case ModelId::kIt:
    case ModelId::kIo:
    case ModelId::kI1:
    case ModelId::kI2:
    case ModelId::kI3:
    case ModelId::kI4:
      return true;
    default:
      return false;
  }
}

bool is_omissive(ModelId m) {
  switch (m) {
    case ModelId::kT1:
    case ModelId::kT2:
    case ModelId::kT3:
    case ModelId::kI1:
    case ModelId::kI2:
    case ModelId::kI3:
    case ModelId::kI4:
      return true;
    default:
      return false;
  }
}

TwoWayHooks hooks_from_protocol(const ProtocolSpec& p) {
  TwoWayHooks h;
  h.f_s = [&p](const State& s, const State& r) { return p.apply_starter(s, r); };
  h.f_r = [&p](const State& s, const State& r) { return p.apply_reactor(s, r); };
  h.o = [](const State& q) { return q; };
  h.h = [](const State& q) { return q; };
  return h;
}

std::vector<Omission> legal_descriptors(ModelId m) {
  if (!is_omissive(m)) return {Omission::kNone};
  if (is_one_way(m)) return {Omission::kNone, Omission::kReactor};
  return {Omission::kNone, Omission::kStarter, Omission::kReactor, Omission::kBoth};
}

EffectPlan effect_plan(ModelId m, Omission om) {
  const bool omitted = om != Omission::kNone;
  switch (m) {
    case ModelId::kTw:
      if (omitted) throw ConfigError("model tw admits no omissions");
      return {SideEffect::kFs, SideEffect::kFr};
    case ModelId::kIt:
      if (omitted) throw ConfigError("model it admits no omissions");
      return {SideEffect::kG, SideEffect::kF};
    case ModelId::kIo:
      if (omitted) throw ConfigError("model io admits no omissions");
      return {SideEffect::kNone, SideEffect::kF};

    case ModelId::kT3:
      switch (om) {
        case Omission::kNone: return {SideEffect::kFs, SideEffect::kFr};
        case Omission::kStarter: return {SideEffect::kO, SideEffect::kFr};
        case Omission::kReactor: return {SideEffect::kFs, SideEffect::kH};
        case Omission::kBoth: return {SideEffect::kO, SideEffect::kH};
      }
      break;
    case ModelId::kT2:
      switch (om) {
        case Omission::kNone: return {SideEffect::kFs, SideEffect::kFr};
        case Omission::kStarter: return {SideEffect::kO, SideEffect::kFr};
        case Omission::kReactor: return {SideEffect::kFs, SideEffect::kNone};
        case Omission::kBoth: return {SideEffect::kO, SideEffect::kNone};
      }
      break;
    case ModelId::kT1:
      switch (om) {
        case Omission::kNone: return {SideEffect::kFs, SideEffect::kFr};
        case Omission::kStarter: return {SideEffect::kNone, SideEffect::kFr};
        case Omission::kReactor: return {SideEffect::kFs, SideEffect::kNone};
        case Omission::kBoth: return {SideEffect::kNone, SideEffect::kNone};
      }
      break;

    // One-way omissive models. kReactor (and the equivalent kBoth) is the
    // native loss; kStarter is the embedded return-channel omission: the
    // message still arrives, only the starter-side hook distinguishes the
    // step from a regular one.
    case ModelId::kI1:
      switch (om) {
        case Omission::kNone: return {SideEffect::kG, SideEffect::kF};
        case Omission::kStarter: return {SideEffect::kG, SideEffect::kF};
        case Omission::kReactor:
        case Omission::kBoth: return {SideEffect::kG, SideEffect::kNone};
      }
      break;
    case ModelId::kI2:
      switch (om) {
        case Omission::kNone: return {SideEffect::kG, SideEffect::kF};
        case Omission::kStarter: return {SideEffect::kG, SideEffect::kF};
        case Omission::kReactor:
        case Omission::kBoth: return {SideEffect::kG, SideEffect::kGReactor};
      }
      break;
    case ModelId::kI3:
      switch (om) {
        case Omission::kNone: return {SideEffect::kG, SideEffect::kF};
        case Omission::kStarter: return {SideEffect::kG, SideEffect::kF};
        case Omission::kReactor:
        case Omission::kBoth: return {SideEffect::kG, SideEffect::kH};
      }
      break;
    case ModelId::kI4:
      switch (om) {
        case Omission::kNone: return {SideEffect::kG, SideEffect::kF};
        case Omission::kStarter: return {SideEffect::kO, SideEffect::kF};
        case Omission::kReactor:
        case Omission::kBoth: return {SideEffect::kO, SideEffect::kH};
      }
      break;
  }
  throw StructuralError("unresolvable effect plan");
}

namespace {

State run_two_way_side(SideEffect e, const TwoWayHooks& hooks, const State& s,
                       const State& r, bool starter_side) {
  switch (e) {
    case SideEffect::kNone: return starter_side ? s : r;
    case SideEffect::kFs: return hooks.f_s(s, r);
    case SideEffect::kFr: return hooks.f_r(s, r);
    case SideEffect::kO: return hooks.o(s);
    case SideEffect::kH: return hooks.h(r);
    default:
      throw StructuralError("one-way effect requested from two-way hooks");
  }
}

State run_one_way_side(SideEffect e, const OneWayHooks& hooks, const State& s,
                       const State& r, bool starter_side) {
  switch (e) {
    case SideEffect::kNone: return starter_side ? s : r;
    case SideEffect::kG: return hooks.g(s);
    case SideEffect::kO: return hooks.o(s);
    case SideEffect::kF: return hooks.f(s, r);
    case SideEffect::kH: return hooks.h(r);
    case SideEffect::kGReactor: return hooks.g(r);
    default:
      throw StructuralError("two-way effect requested from one-way hooks");
  }
}

}  // namespace

std::pair<State, State> apply_step(ModelId m, const TwoWayHooks& hooks, const State& s,
                                   const State& r, Omission om) {
  if (is_one_way(m))
    throw StructuralError("model " + model_name(m) + " takes one-way hooks");
  EffectPlan plan = effect_plan(m, om);
  return {run_two_way_side(plan.starter, hooks, s, r, true),
          run_two_way_side(plan.reactor, hooks, s, r, false)};
}

std::pair<State, State> apply_step(ModelId m, const OneWayHooks& hooks, const State& s,
                                   const State& r, Omission om) {
  if (!is_one_way(m))
    throw StructuralError("model " + model_name(m) + " takes two-way hooks");
  EffectPlan plan = effect_plan(m, om);
  return {run_one_way_side(plan.starter, hooks, s, r, true),
          run_one_way_side(plan.reactor, hooks, s, r, false)};
}

const std::vector<ModelArrow>& checked_hierarchy_arrows() {
  static const std::vector<ModelArrow> kArrows = {
      {ModelId::kIo, ModelId::kIt}, {ModelId::kIt, ModelId::kTw},
      {ModelId::kT1, ModelId::kT2}, {ModelId::kT2, ModelId::kT3},
      {ModelId::kI1, ModelId::kI3}, {ModelId::kI2, ModelId::kI3},
      {ModelId::kI3, ModelId::kI4}, {ModelId::kI3, ModelId::kT3},
      {ModelId::kI4, ModelId::kT3},
  };
  return kArrows;
}

}  // namespace popsim
