#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "popsim/protocol.hpp"

namespace popsim {

// ---------------------------------------------------------------------------
// Token-based simulator memory (S_KnO)

/// Tokens carried in sending queues. A state token <q,i> announces state q
/// (slot i of o+1); a change token <(q,q'),i> reports that some agent in
/// state q' consumed a run for q; a joker is a wildcard standing in for one
/// lost token.
///
/// Text forms: "q:i", "chg:q:q':i", "J".
struct Token {
  enum class Kind : std::uint8_t { kState, kChange, kJoker };
  Kind kind = Kind::kJoker;
  State a;        // announced state (kState, kChange)
  State b;        // consumer's pre-transition state (kChange)
  int index = 0;  // 1..o+1 (kState, kChange)

  // Engine-side provenance: which injected run this token belongs to.
  // Not part of the agent-visible identity and not serialized.
  std::int64_t serial = 0;

  bool same_identity(const Token& other) const;
  friend bool operator==(const Token& l, const Token& r) { return l.same_identity(r); }
};

Token state_token(const State& q, int index);
Token change_token(const State& q, const State& old_r, int index);
Token joker_token();

std::string format_token(const Token& t);
Token parse_token(const std::string& text);

/// Identity of a concrete (non-joker) token, used as a multiset key for
/// the joker-recovery bookkeeping.
struct TokenIdentity {
  Token::Kind kind;
  State a;
  State b;
  int index;
  auto operator<=>(const TokenIdentity&) const = default;
};
TokenIdentity identity_of(const Token& t);

/// Agent memory for the known-omission-number simulator S_KnO(o).
struct KnOAgent {
  State state_p;
  bool pending = false;  // false: available
  std::vector<Token> sending;              // FIFO, front() leaves first
  std::map<TokenIdentity, int> jokers;     // identities owed after joker spends
  int detected_omissions = 0;              // for the degradation wrapper
  bool frozen = false;
};

// ---------------------------------------------------------------------------
// Identifier-based simulator memory (S_ID)

enum class SimPhase : std::uint8_t { kAvailable, kPairing, kLocked };
char sim_phase_code(SimPhase p);
SimPhase sim_phase_from_code(char c);

struct IDAgent {
  int my_id = 0;
  State state_p;
  SimPhase phase = SimPhase::kAvailable;
  std::optional<int> id_other;
  std::optional<State> state_other;
};

// ---------------------------------------------------------------------------
// Naming layer N_n (knowledge of n), wrapping S_ID

struct NamingAgent {
  State state_p;  // carried through the naming phase untouched
  int my_id = 1;
  int max_id = 1;
  std::optional<IDAgent> inner;  // engaged once max_id reaches n

  bool started() const { return inner.has_value(); }
};

// ---------------------------------------------------------------------------

/// Direct execution: the agent is just its protocol state.
struct DirectAgent {
  State state_p;
};

/// A "simulator" that never changes simulated state; test plumbing for the
/// transition-time machinery (its transition time is infinite).
struct InertAgent {
  State state_p;
};

using AgentState = std::variant<DirectAgent, InertAgent, KnOAgent, IDAgent, NamingAgent>;

/// Full system configuration: one complete agent state per agent.
using Configuration = std::vector<AgentState>;

const State& simulated_state(const AgentState& a);

/// Projection onto simulated protocol states. Throws StructuralError if a
/// simulated state is not a state of `spec`.
std::vector<State> project(const Configuration& c, const ProtocolSpec& spec);

/// Space-free serialization used in trace lines; round-trips via
/// parse_agent. Engine-side token serials are not serialized.
std::string format_agent(const AgentState& a);
AgentState parse_agent(const std::string& text);

bool same_serialized(const AgentState& a, const AgentState& b);

}  // namespace popsim
