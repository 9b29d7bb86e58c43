#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "popsim/protocol.hpp"
#include "popsim/run.hpp"

namespace popsim {

/// Interaction models. Two-way: the starter reads the reactor and vice
/// versa. One-way: only the reactor learns anything about the starter.
///
///   tw        two-way, no omissions
///   t1,t2,t3  two-way omissive; t2 has no reactor-side detection hook,
///             t1 has no detection hooks at all
///   it        one-way transmission, no omissions
///   io        one-way observation (starter state never changes)
///   i1..i4    one-way omissive; detection hooks grow with the index:
///             i1 none, i2 reactor proximity only, i3 reactor detection,
///             i4 starter and reactor detection
enum class ModelId { kTw, kIt, kIo, kT1, kT2, kT3, kI1, kI2, kI3, kI4 };

ModelId model_from_name(const std::string& name);
const std::string& model_name(ModelId m);

bool is_one_way(ModelId m);
bool is_omissive(ModelId m);

/// What each side of an interaction applies, resolved from the model and
/// the omission descriptor. G/O are unary on the starter's own state;
/// Fs/Fr/F are the regular transition halves; H is the reactor's unary
/// detection hook; GReactor is the proximity hook (i2: the reactor applies
/// g to itself); None leaves the state untouched.
enum class SideEffect { kNone, kFs, kFr, kF, kG, kGReactor, kO, kH };

struct EffectPlan {
  SideEffect starter = SideEffect::kNone;
  SideEffect reactor = SideEffect::kNone;
};

/// Hook bundle for one-way models: delta(a_s, a_r) = (g(a_s), f(a_s, a_r)).
/// o and h are the omission-detection hooks; models that fix a hook to the
/// identity (or to g) ignore the supplied function.
struct OneWayHooks {
  std::function<State(const State&)> g;
  std::function<State(const State&, const State&)> f;
  std::function<State(const State&)> o;  // starter-side detection (i4)
  std::function<State(const State&)> h;  // reactor-side detection (i3, i4)
};

/// Hook bundle for two-way models.
struct TwoWayHooks {
  std::function<State(const State&, const State&)> f_s;
  std::function<State(const State&, const State&)> f_r;
  std::function<State(const State&)> o;  // starter-side detection (t2, t3)
  std::function<State(const State&)> h;  // reactor-side detection (t3)
};

TwoWayHooks hooks_from_protocol(const ProtocolSpec& p);

/// Descriptors the adversary may legally attach under a model. One-way
/// omissive models expose {none, reactor}: the single loss site is the
/// reactor's receipt. (apply_step additionally accepts the embedded
/// starter-side descriptor on one-way models; see EffectPlan notes.)
std::vector<Omission> legal_descriptors(ModelId m);

/// Resolves which hook runs on each side. Throws ConfigError for
/// descriptors the model cannot express at all (any omission under
/// tw/it/io).
EffectPlan effect_plan(ModelId m, Omission om);

/// Pure outcome of one interaction on plain states.
std::pair<State, State> apply_step(ModelId m, const TwoWayHooks& hooks,
                                   const State& s, const State& r, Omission om);
std::pair<State, State> apply_step(ModelId m, const OneWayHooks& hooks,
                                   const State& s, const State& r, Omission om);

/// An inclusion arrow source -> destination: every outcome producible
/// under the source model is producible under the destination with a
/// suitable hook assignment and descriptor. Only arrows of this
/// "transition relation is a special case" kind are listed; arrows that
/// rest on the adversary avoiding omissions are not checkable at the
/// outcome level and are left out.
struct ModelArrow {
  ModelId source;
  ModelId destination;
};

const std::vector<ModelArrow>& checked_hierarchy_arrows();

}  // namespace popsim
