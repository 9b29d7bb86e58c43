#pragma once

#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "popsim/errors.hpp"

namespace popsim {

/// Simulated-protocol states are opaque symbols. They never contain
/// whitespace, ';', ',' or ':' so they can be embedded in trace lines.
using State = std::string;

bool valid_state_symbol(const State& s);

/// A two-way population protocol: a finite state set, the subset of states
/// agents may start in, and a total deterministic transition function
/// delta(q_s, q_r) -> (q_s', q_r').  Pairs without an explicit rule are
/// identity transitions.
class ProtocolSpec {
 public:
  ProtocolSpec() = default;
  ProtocolSpec(std::string name, std::vector<State> states,
               std::vector<State> initial,
               std::map<std::pair<State, State>, std::pair<State, State>> rules);

  const std::string& name() const { return name_; }
  const std::vector<State>& states() const { return states_; }
  const std::set<State>& initial_states() const { return initial_; }

  bool has_state(const State& q) const { return index_.count(q) != 0; }

  /// Total transition function. Throws StructuralError on unknown symbols.
  std::pair<State, State> apply(const State& s, const State& r) const;

  /// Starter-side / reactor-side components of delta.
  State apply_starter(const State& s, const State& r) const { return apply(s, r).first; }
  State apply_reactor(const State& s, const State& r) const { return apply(s, r).second; }

  /// Non-identity rules only, in deterministic order.
  const std::map<std::pair<State, State>, std::pair<State, State>>& rules() const {
    return rules_;
  }

 private:
  void validate() const;

  std::string name_;
  std::vector<State> states_;
  std::set<State> initial_;
  std::map<State, int> index_;
  std::map<std::pair<State, State>, std::pair<State, State>> rules_;
};

/// Text format, one declaration per line:
///
///   protocol <name>
///   states <q1> <q2> ...
///   init <q1> ...
///   rule <qs> <qr> -> <qs'> <qr'>
///
/// Blank lines and lines starting with '#' are ignored. Pairs without a
/// rule line are identity transitions.
ProtocolSpec parse_protocol(std::istream& in);
ProtocolSpec parse_protocol_text(const std::string& text);
ProtocolSpec load_protocol_file(const std::string& path);
std::string format_protocol(const ProtocolSpec& p);

}  // namespace popsim
