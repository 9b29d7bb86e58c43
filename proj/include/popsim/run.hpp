#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "popsim/errors.hpp"

namespace popsim {

/// Omission descriptor attached to an interaction by the adversary.
///
/// Two-way models distinguish which side of the exchange was lost. One-way
/// models have a single loss site -- the reactor's receipt -- so their
/// canonical omissive descriptor is kReactor. kStarter on a one-way model
/// denotes the degenerate "return-channel" omission inherited from the
/// two-way embedding: the message is still delivered, the starter's
/// detection hook (if any) fires, and the step counts as an omission.
enum class Omission : std::uint8_t { kNone = 0, kStarter, kReactor, kBoth };

char omission_code(Omission o);
Omission omission_from_code(char c);

/// One interaction: the starter initiates, the reactor observes.
struct RunStep {
  int starter = 0;
  int reactor = 0;
  Omission omission = Omission::kNone;

  bool omissive() const { return omission != Omission::kNone; }
  friend bool operator==(const RunStep&, const RunStep&) = default;
};

/// A finite prefix of a run. Infinite runs are handled by generating
/// prefixes up to an explicit horizon.
using Run = std::vector<RunStep>;

/// Throws StructuralError if a step is malformed for an n-agent system.
void validate_step(const RunStep& step, int n);
void validate_run(std::span<const RunStep> run, int n);

std::int64_t count_omissions(std::span<const RunStep> run);

std::string format_step(const RunStep& step);

}  // namespace popsim
