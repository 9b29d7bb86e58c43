#include "popsim/scheduling.hpp"

namespace popsim {

// SplitMix64. Small, fast, and with a fixed stream per seed, which keeps
// recorded traces bit-reproducible across platforms and toolchains.
Rng::Rng(std::uint64_t seed) : state_(seed) {}

std::uint64_t Rng::next() {
  state_ += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw StructuralError("Rng::below needs a positive bound");
  // Rejection sampling over the largest multiple of bound.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t draw;
  do {
    draw = next();
  } while (draw >= limit);
  return draw % bound;
}

bool Rng::chance(std::uint64_t num, std::uint64_t den) {
  if (den == 0 || num > den) throw StructuralError("Rng::chance needs num <= den, den > 0");
  if (num == 0) return false;
  return below(den) < num;
}

void SchedulerConfig::validate() const {
  if (n < 2) throw ConfigError("scheduler needs at least two agents");
  if (horizon < 0) throw ConfigError("scheduler horizon must be nonnegative");
}

RunStep fair_step(int n, Rng& rng) {
  // Ordered pair of distinct agents, uniform over the n*(n-1) choices.
  int starter = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
  int other = static_cast<int>(rng.below(static_cast<std::uint64_t>(n - 1)));
  int reactor = other >= starter ? other + 1 : other;
  return {starter, reactor, Omission::kNone};
}

Run fair_run(const SchedulerConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Run run;
  run.reserve(static_cast<std::size_t>(cfg.horizon));
  for (std::int64_t i = 0; i < cfg.horizon; ++i) run.push_back(fair_step(cfg.n, rng));
  return run;
}

void AdversaryConfig::validate(int n) const {
  if (rate_den == 0 || rate_num > rate_den)
    throw ConfigError("adversary rate must be a probability num/den");
  if (kind == AdversaryKind::kEventuallyNoOmissions && cutoff < 0)
    throw ConfigError("adversary cutoff must be nonnegative");
  if (max_omissions && *max_omissions < 0)
    throw ConfigError("adversary omission budget must be nonnegative");
  if (kind == AdversaryKind::kSingleOmission) {
    if (position < 0) throw ConfigError("adversary position must be nonnegative");
    validate_step(single_step, n);
    if (!single_step.omissive())
      throw ConfigError("the single adversary step must be omissive");
  }
}

namespace {

// An omissive step over a pair already appearing nearby, with a descriptor
// the model can express.
RunStep omissive_step(int n, Rng& rng, ModelId model) {
  RunStep step = fair_step(n, rng);
  const std::vector<Omission>& legal = legal_descriptors(model);
  // legal[0] is always kNone; pick among the rest.
  if (legal.size() < 2)
    throw ConfigError("model " + model_name(model) + " admits no omissive steps");
  step.omission = legal[1 + rng.below(legal.size() - 1)];
  return step;
}

}  // namespace

Run adversary_rewrite(std::span<const RunStep> base, const AdversaryConfig& adv,
                      ModelId model, int n) {
  adv.validate(n);
  Rng rng(adv.seed);
  Run out;
  out.reserve(base.size());
  std::int64_t inserted = 0;
  auto budget_left = [&]() {
    return !adv.max_omissions || inserted < *adv.max_omissions;
  };

  // Reject descriptors the model cannot express before emitting anything.
  if (adv.kind == AdversaryKind::kSingleOmission)
    effect_plan(model, adv.single_step.omission);

  for (std::size_t i = 0; i <= base.size(); ++i) {
    // Insertions in the gap before base[i].
    switch (adv.kind) {
      case AdversaryKind::kUnboundedOmissions:
        while (budget_left() && rng.chance(adv.rate_num, adv.rate_den)) {
          out.push_back(omissive_step(n, rng, model));
          ++inserted;
        }
        break;
      case AdversaryKind::kEventuallyNoOmissions:
        while (budget_left() &&
               static_cast<std::int64_t>(out.size()) < adv.cutoff &&
               rng.chance(adv.rate_num, adv.rate_den)) {
          out.push_back(omissive_step(n, rng, model));
          ++inserted;
        }
        break;
      case AdversaryKind::kSingleOmission:
        if (budget_left() && inserted == 0 &&
            static_cast<std::int64_t>(out.size()) >= adv.position) {
          out.push_back(adv.single_step);
          ++inserted;
        }
        break;
    }
    if (i < base.size()) out.push_back(base[i]);
  }
  return out;
}

Run compose_run(std::span<const RunStep> prefix, int n,
                std::optional<SchedulerConfig> extension) {
  validate_run(prefix, n);
  Run out(prefix.begin(), prefix.end());
  if (extension) {
    if (extension->n != n)
      throw StructuralError("extension population size differs from prefix");
    Run tail = fair_run(*extension);
    out.insert(out.end(), tail.begin(), tail.end());
  }
  return out;
}

}  // namespace popsim
