#include "popsim/protocol.hpp"

#include <fstream>
#include <sstream>

namespace popsim {

bool valid_state_symbol(const State& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == ';' || c == ',' || c == ':' ||
        c == '|' || c == '[' || c == ']') {
      return false;
    }
  }
  return true;
}

ProtocolSpec::ProtocolSpec(
    std::string name, std::vector<State> states, std::vector<State> initial,
    std::map<std::pair<State, State>, std::pair<State, State>> rules)
    : name_(std::move(name)), states_(std::move(states)), rules_(std::move(rules)) {
  for (int i = 0; i < static_cast<int>(states_.size()); ++i) index_[states_[i]] = i;
  initial_.insert(initial.begin(), initial.end());
  validate();
}

void ProtocolSpec::validate() const {
  if (name_.empty()) throw StructuralError("protocol needs a name");
  if (states_.empty()) throw StructuralError("protocol '" + name_ + "' has no states");
  if (index_.size() != states_.size())
    throw StructuralError("protocol '" + name_ + "' repeats a state symbol");
  for (const auto& q : states_) {
    if (!valid_state_symbol(q))
      throw StructuralError("bad state symbol '" + q + "' in protocol '" + name_ + "'");
  }
  if (initial_.empty())
    throw StructuralError("protocol '" + name_ + "' declares no initial states");
  for (const auto& q : initial_) {
    if (!has_state(q))
      throw StructuralError("initial state '" + q + "' is not a state of '" + name_ + "'");
  }
  for (const auto& [lhs, rhs] : rules_) {
    for (const State* q : {&lhs.first, &lhs.second, &rhs.first, &rhs.second}) {
      if (!has_state(*q))
        throw StructuralError("rule of '" + name_ + "' uses unknown state '" + *q + "'");
    }
  }
}

std::pair<State, State> ProtocolSpec::apply(const State& s, const State& r) const {
  if (!has_state(s) || !has_state(r))
    throw StructuralError("delta of '" + name_ + "' applied to unknown state '" +
                          (has_state(s) ? r : s) + "'");
  auto it = rules_.find({s, r});
  if (it != rules_.end()) return it->second;
  return {s, r};
}

namespace {

std::vector<std::string> split_words(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string w;
  while (ss >> w) out.push_back(w);
  return out;
}

}  // namespace

ProtocolSpec parse_protocol(std::istream& in) {
  std::string name;
  std::vector<State> states;
  std::vector<State> initial;
  std::map<std::pair<State, State>, std::pair<State, State>> rules;

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto words = split_words(line);
    if (words.empty() || words[0][0] == '#') continue;
    const std::string& kw = words[0];
    auto fail = [&](const std::string& why) {
      throw ParseError("protocol line " + std::to_string(lineno) + ": " + why);
    };
    if (kw == "protocol") {
      if (words.size() != 2) fail("expected: protocol <name>");
      name = words[1];
    } else if (kw == "states") {
      if (words.size() < 2) fail("expected at least one state");
      states.assign(words.begin() + 1, words.end());
    } else if (kw == "init") {
      if (words.size() < 2) fail("expected at least one initial state");
      initial.assign(words.begin() + 1, words.end());
    } else if (kw == "rule") {
      // rule qs qr -> qs' qr'
      if (words.size() != 6 || words[3] != "->") fail("expected: rule qs qr -> qs' qr'");
      auto key = std::make_pair(words[1], words[2]);
      if (rules.count(key)) fail("duplicate rule for (" + words[1] + ", " + words[2] + ")");
      rules[key] = {words[4], words[5]};
    } else {
      fail("unknown keyword '" + kw + "'");
    }
  }
  try {
    return ProtocolSpec(name, states, initial, rules);
  } catch (const StructuralError& e) {
    throw ParseError(std::string("bad protocol table: ") + e.what());
  }
}

ProtocolSpec parse_protocol_text(const std::string& text) {
  std::istringstream ss(text);
  return parse_protocol(ss);
}

ProtocolSpec load_protocol_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open protocol file '" + path + "'");
  return parse_protocol(in);
}

std::string format_protocol(const ProtocolSpec& p) {
  std::ostringstream out;
  out << "protocol " << p.name() << "\n";
  out << "states";
  for (const auto& q : p.states()) out << ' ' << q;
  out << "\ninit";
  for (const auto& q : p.initial_states()) out << ' ' << q;
  out << "\n";
  for (const auto& [lhs, rhs] : p.rules()) {
    out << "rule " << lhs.first << ' ' << lhs.second << " -> " << rhs.first << ' '
        << rhs.second << "\n";
  }
  return out.str();
}

}  // namespace popsim
