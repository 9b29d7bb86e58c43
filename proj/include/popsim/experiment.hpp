#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "popsim/analysis.hpp"
#include "popsim/engine.hpp"
#include "popsim/protocols.hpp"
#include "popsim/scheduling.hpp"

namespace popsim {

/// Flat key=value experiment description. Values from later sources win:
/// config file < command-line overrides < environment (POPSIM_SEED,
/// POPSIM_OUT_DIR).
class ExperimentConfig {
 public:
  ExperimentConfig() = default;

  static ExperimentConfig from_file(const std::string& path);
  static ExperimentConfig from_text(const std::string& text);

  void set(const std::string& key, const std::string& value);
  void apply_overrides(const std::vector<std::string>& key_equals_value);
  void apply_environment();

  bool has(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

  // Resolved typed views (validated; throw ConfigError on nonsense).
  ProtocolSpec protocol() const;
  ModelId model() const;
  SimulatorOptions simulator() const;
  SchedulerConfig scheduler() const;
  std::vector<State> initial_states() const;
  std::optional<AdversaryConfig> adversary() const;
  std::vector<std::string> checks() const;  // e.g. pairing,matching,derived,replay,tokens,naming
  std::string output_path(const std::string& fallback_name) const;

 private:
  std::map<std::string, std::string> kv_;
};

/// Outcome of one named check, rendered as a line-delimited record:
///   check=<name> verdict=<pass|fail|error> [witness=...] [k=v ...]
struct CheckRecord {
  std::string name;
  std::string verdict;
  std::string witness;
  std::vector<std::pair<std::string, std::string>> counters;
};
std::string format_record(const CheckRecord& r);

/// Subcommand drivers. Each prints line-delimited records to `out` and
/// returns the process exit code: 0 on success, 1 when a requested check
/// fails, 2 on configuration or structural errors.
int cmd_run(const ExperimentConfig& cfg, std::ostream& out);
int cmd_verify(const std::string& trace_path, const std::vector<std::string>& checks,
               std::ostream& out);
int cmd_replay(const std::string& trace_path, std::ostream& out);
int cmd_ftt(const ExperimentConfig& cfg, std::ostream& out);
int cmd_attack(const ExperimentConfig& cfg, std::ostream& out);
int cmd_batch(const ExperimentConfig& cfg, int seeds, std::ostream& out);

}  // namespace popsim
