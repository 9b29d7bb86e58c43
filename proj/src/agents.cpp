#include "popsim/agents.hpp"

#include <charconv>
#include <sstream>

namespace popsim {

// ---------------------------------------------------------------------------
// Tokens

bool Token::same_identity(const Token& other) const {
  return kind == other.kind && a == other.a && b == other.b && index == other.index;
}

Token state_token(const State& q, int index) {
  Token t;
  t.kind = Token::Kind::kState;
  t.a = q;
  t.index = index;
  return t;
}

Token change_token(const State& q, const State& old_r, int index) {
  Token t;
  t.kind = Token::Kind::kChange;
  t.a = q;
  t.b = old_r;
  t.index = index;
  return t;
}

Token joker_token() { return Token{}; }

TokenIdentity identity_of(const Token& t) { return {t.kind, t.a, t.b, t.index}; }

std::string format_token(const Token& t) {
  switch (t.kind) {
    case Token::Kind::kJoker: return "J";
    case Token::Kind::kState: return t.a + ":" + std::to_string(t.index);
    case Token::Kind::kChange:
      return "chg:" + t.a + ":" + t.b + ":" + std::to_string(t.index);
  }
  throw StructuralError("token of unknown kind");
}

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

int parse_int(const std::string& text, const char* what) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ParseError(std::string("bad ") + what + " '" + text + "'");
  return value;
}

}  // namespace

Token parse_token(const std::string& text) {
  if (text == "J") return joker_token();
  auto parts = split(text, ':');
  if (parts.size() == 2) {
    if (!valid_state_symbol(parts[0]))
      throw ParseError("bad token state '" + parts[0] + "'");
    int index = parse_int(parts[1], "token index");
    if (index < 1) throw ParseError("token index must be positive in '" + text + "'");
    return state_token(parts[0], index);
  }
  if (parts.size() == 4 && parts[0] == "chg") {
    if (!valid_state_symbol(parts[1]) || !valid_state_symbol(parts[2]))
      throw ParseError("bad change token '" + text + "'");
    int index = parse_int(parts[3], "token index");
    if (index < 1) throw ParseError("token index must be positive in '" + text + "'");
    return change_token(parts[1], parts[2], index);
  }
  throw ParseError("unreadable token '" + text + "'");
}

// ---------------------------------------------------------------------------
// Phases

char sim_phase_code(SimPhase p) {
  switch (p) {
    case SimPhase::kAvailable: return 'a';
    case SimPhase::kPairing: return 'p';
    case SimPhase::kLocked: return 'l';
  }
  throw StructuralError("unknown phase");
}

SimPhase sim_phase_from_code(char c) {
  switch (c) {
    case 'a': return SimPhase::kAvailable;
    case 'p': return SimPhase::kPairing;
    case 'l': return SimPhase::kLocked;
  }
  throw ParseError(std::string("unknown phase code '") + c + "'");
}

// ---------------------------------------------------------------------------
// Configurations

const State& simulated_state(const AgentState& a) {
  if (const auto* d = std::get_if<DirectAgent>(&a)) return d->state_p;
  if (const auto* i = std::get_if<InertAgent>(&a)) return i->state_p;
  if (const auto* k = std::get_if<KnOAgent>(&a)) return k->state_p;
  if (const auto* s = std::get_if<IDAgent>(&a)) return s->state_p;
  const auto& naming = std::get<NamingAgent>(a);
  return naming.started() ? naming.inner->state_p : naming.state_p;
}

std::vector<State> project(const Configuration& c, const ProtocolSpec& spec) {
  std::vector<State> out;
  out.reserve(c.size());
  for (const AgentState& a : c) {
    const State& q = simulated_state(a);
    if (!spec.has_state(q))
      throw StructuralError("simulated state '" + q + "' is not a state of '" +
                            spec.name() + "'");
    out.push_back(q);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
//
// One agent, no spaces:
//   d;<q>                                   direct
//   x;<q>                                   inert
//   k;<q>;<a|p>;<tokens|->;<owed|->;<det>;<0|1>   token-queue simulator
//   s;<q>;<phase>;<id>;<id_other|->;<state_other|->   identifier simulator
//   n;<q>;<id>;<max>;-                      naming, not started
//   n;<q>;<id>;<max>;<sid fields>           naming, started

namespace {

std::string format_sid_fields(const IDAgent& a) {
  std::string out = a.state_p;
  out += ';';
  out += sim_phase_code(a.phase);
  out += ';';
  out += std::to_string(a.my_id);
  out += ';';
  out += a.id_other ? std::to_string(*a.id_other) : "-";
  out += ';';
  out += a.state_other ? *a.state_other : "-";
  return out;
}

IDAgent parse_sid_fields(const std::vector<std::string>& f, std::size_t at) {
  if (f.size() != at + 5) throw ParseError("identifier agent needs five fields");
  IDAgent a;
  a.state_p = f[at];
  if (f[at + 1].size() != 1) throw ParseError("bad phase '" + f[at + 1] + "'");
  a.phase = sim_phase_from_code(f[at + 1][0]);
  a.my_id = parse_int(f[at + 2], "agent id");
  if (f[at + 3] != "-") a.id_other = parse_int(f[at + 3], "partner id");
  if (f[at + 4] != "-") a.state_other = f[at + 4];
  return a;
}

std::string format_token_list(const std::vector<Token>& tokens) {
  if (tokens.empty()) return "-";
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ',';
    out += format_token(tokens[i]);
  }
  return out;
}

}  // namespace

std::string format_agent(const AgentState& agent) {
  if (const auto* d = std::get_if<DirectAgent>(&agent)) return "d;" + d->state_p;
  if (const auto* i = std::get_if<InertAgent>(&agent)) return "x;" + i->state_p;
  if (const auto* k = std::get_if<KnOAgent>(&agent)) {
    std::string out = "k;" + k->state_p + ";";
    out += k->pending ? 'p' : 'a';
    out += ';';
    out += format_token_list(k->sending);
    out += ';';
    if (k->jokers.empty()) {
      out += '-';
    } else {
      bool first = true;
      for (const auto& [identity, count] : k->jokers) {
        Token t{identity.kind, identity.a, identity.b, identity.index, 0};
        for (int c = 0; c < count; ++c) {
          if (!first) out += ',';
          out += format_token(t);
          first = false;
        }
      }
    }
    out += ';';
    out += std::to_string(k->detected_omissions);
    out += ';';
    out += k->frozen ? '1' : '0';
    return out;
  }
  if (const auto* s = std::get_if<IDAgent>(&agent)) return "s;" + format_sid_fields(*s);
  const auto& naming = std::get<NamingAgent>(agent);
  std::string out = "n;" + naming.state_p + ";" + std::to_string(naming.my_id) + ";" +
                    std::to_string(naming.max_id) + ";";
  out += naming.started() ? format_sid_fields(*naming.inner) : "-";
  return out;
}

AgentState parse_agent(const std::string& text) {
  auto f = split(text, ';');
  if (f.empty() || f[0].size() != 1) throw ParseError("unreadable agent '" + text + "'");
  switch (f[0][0]) {
    case 'd':
      if (f.size() != 2) throw ParseError("direct agent needs one field");
      return DirectAgent{f[1]};
    case 'x':
      if (f.size() != 2) throw ParseError("inert agent needs one field");
      return InertAgent{f[1]};
    case 'k': {
      if (f.size() != 7) throw ParseError("token-queue agent needs six fields");
      KnOAgent a;
      a.state_p = f[1];
      if (f[2] == "p") a.pending = true;
      else if (f[2] == "a") a.pending = false;
      else throw ParseError("bad availability flag '" + f[2] + "'");
      if (f[3] != "-")
        for (const std::string& t : split(f[3], ',')) a.sending.push_back(parse_token(t));
      if (f[4] != "-") {
        for (const std::string& t : split(f[4], ',')) {
          Token tok = parse_token(t);
          if (tok.kind == Token::Kind::kJoker)
            throw ParseError("owed identities must be concrete tokens");
          a.jokers[identity_of(tok)] += 1;
        }
      }
      a.detected_omissions = parse_int(f[5], "detection count");
      if (f[6] == "1") a.frozen = true;
      else if (f[6] == "0") a.frozen = false;
      else throw ParseError("bad frozen flag '" + f[6] + "'");
      return a;
    }
    case 's':
      return parse_sid_fields(f, 1);
    case 'n': {
      if (f.size() < 5) throw ParseError("naming agent needs at least four fields");
      NamingAgent a;
      a.state_p = f[1];
      a.my_id = parse_int(f[2], "agent id");
      a.max_id = parse_int(f[3], "max id");
      if (f.size() == 5 && f[4] == "-") return a;
      a.inner = parse_sid_fields(f, 4);
      return a;
    }
    default:
      throw ParseError("unknown agent kind '" + text + "'");
  }
}

bool same_serialized(const AgentState& a, const AgentState& b) {
  return format_agent(a) == format_agent(b);
}

}  // namespace popsim
