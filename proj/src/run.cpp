#include "popsim/run.hpp"

#include <sstream>

namespace popsim {

char omission_code(Omission o) {
  switch (o) {
    case Omission::kNone: return '-';
    case Omission::kStarter: return 's';
    case Omission::kReactor: return 'r';
    case Omission::kBoth: return 'b';
  }
  throw StructuralError("unknown omission descriptor");
}

Omission omission_from_code(char c) {
  switch (c) {
    case '-': return Omission::kNone;
    case 's': return Omission::kStarter;
    case 'r': return Omission::kReactor;
    case 'b': return Omission::kBoth;
  }
  throw ParseError(std::string("unknown omission code '") + c + "'");
}

void validate_step(const RunStep& step, int n) {
  if (n < 2) throw StructuralError("a system needs at least two agents");
  if (step.starter < 0 || step.starter >= n || step.reactor < 0 || step.reactor >= n)
    throw StructuralError("step names agent outside 0.." + std::to_string(n - 1));
  if (step.starter == step.reactor)
    throw StructuralError("step pairs an agent with itself");
}

void validate_run(std::span<const RunStep> run, int n) {
  for (const RunStep& s : run) validate_step(s, n);
}

std::int64_t count_omissions(std::span<const RunStep> run) {
  std::int64_t k = 0;
  for (const RunStep& s : run)
    if (s.omissive()) ++k;
  return k;
}

std::string format_step(const RunStep& step) {
  std::ostringstream out;
  out << '(' << step.starter << ',' << step.reactor << ',' << omission_code(step.omission)
      << ')';
  return out.str();
}

}  // namespace popsim
