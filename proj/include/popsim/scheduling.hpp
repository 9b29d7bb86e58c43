#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "popsim/models.hpp"
#include "popsim/run.hpp"

namespace popsim {

/// Deterministic seeded RNG used everywhere randomness is needed.
/// Thin wrapper so that draws are pinned independently of library
/// distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next();
  /// Uniform draw in [0, bound), bound >= 1, by rejection.
  std::uint64_t below(std::uint64_t bound);
  /// Bernoulli with probability num/den.
  bool chance(std::uint64_t num, std::uint64_t den);

 private:
  std::uint64_t state_;
};

struct SchedulerConfig {
  int n = 2;
  std::uint64_t seed = 0;
  std::int64_t horizon = 100000;

  void validate() const;
};

/// Uniform scheduler: each step picks an ordered pair (starter, reactor)
/// of distinct agents uniformly at random. Omission-free.
Run fair_run(const SchedulerConfig& cfg);

/// A single step drawn from the uniform scheduler (for incremental
/// extension loops).
RunStep fair_step(int n, Rng& rng);

enum class AdversaryKind {
  kUnboundedOmissions,   // finite batch of omissive steps in every gap
  kEventuallyNoOmissions,  // omissive insertions only before a cutoff
  kSingleOmission,         // at most one omissive insertion, at a fixed position
};

struct AdversaryConfig {
  AdversaryKind kind = AdversaryKind::kUnboundedOmissions;
  std::uint64_t seed = 0;
  /// Expected omissive insertions per gap, as a rational (numerator,
  /// denominator), geometrically distributed. Used by the first two kinds.
  std::uint64_t rate_num = 1;
  std::uint64_t rate_den = 10;
  /// kEventuallyNoOmissions: no omissive step at output index >= cutoff.
  std::int64_t cutoff = 0;
  /// Optional hard budget on the total number of insertions.
  std::optional<std::int64_t> max_omissions;
  /// kSingleOmission: output position of the omissive step, plus its
  /// descriptor and pair. Position counts steps of the rewritten run.
  std::int64_t position = 0;
  RunStep single_step{0, 1, Omission::kReactor};

  void validate(int n) const;
};

/// Inserts omissive interactions into `base` per the adversary config.
/// Never deletes or reorders the input steps; inserted steps carry
/// descriptors legal for `model`.
Run adversary_rewrite(std::span<const RunStep> base, const AdversaryConfig& adv,
                      ModelId model, int n);

/// Concatenates an explicit prefix with an optional fair extension, after
/// validating every step. Throws StructuralError on malformed steps.
Run compose_run(std::span<const RunStep> prefix, int n,
                std::optional<SchedulerConfig> extension = std::nullopt);

}  // namespace popsim
