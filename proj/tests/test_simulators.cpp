#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "popsim/engine.hpp"
#include "popsim/protocols.hpp"
#include "popsim/scheduling.hpp"
#include "popsim/simulators.hpp"

using namespace popsim;

namespace {

KnOAgent kno_agent(const State& q) {
  KnOAgent a;
  a.state_p = q;
  return a;
}

IDAgent sid_agent(int id, const State& q) {
  IDAgent a;
  a.my_id = id;
  a.state_p = q;
  return a;
}

std::vector<std::string> queue_text(const KnOAgent& a) {
  std::vector<std::string> out;
  for (const Token& t : a.sending) out.push_back(format_token(t));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Serialization

TEST_CASE("tokens format and parse") {
  CHECK(format_token(state_token("c", 2)) == "c:2");
  CHECK(format_token(change_token("p", "c", 1)) == "chg:p:c:1");
  CHECK(format_token(joker_token()) == "J");
  for (const char* text : {"c:2", "chg:p:c:1", "J", "q_1':3"}) {
    CHECK(format_token(parse_token(text)) == text);
  }
  CHECK_THROWS_AS(parse_token("c"), ParseError);
  CHECK_THROWS_AS(parse_token("c:0"), ParseError);
  CHECK_THROWS_AS(parse_token("chg:p:1"), ParseError);
  CHECK_THROWS_AS(parse_token(""), ParseError);

  // Serials are provenance, not identity.
  Token a = state_token("c", 1);
  Token b = state_token("c", 1);
  b.serial = 99;
  CHECK(a == b);
  CHECK(identity_of(a) == identity_of(b));
}

TEST_CASE("agent serialization round-trips for every kind") {
  std::vector<AgentState> agents;
  agents.push_back(DirectAgent{"c"});
  agents.push_back(InertAgent{"p"});

  KnOAgent k = kno_agent("cs");
  k.pending = true;
  k.sending = {state_token("cs", 1), joker_token(), change_token("c", "p", 2)};
  k.jokers[identity_of(state_token("p", 2))] = 2;
  k.detected_omissions = 3;
  k.frozen = true;
  agents.push_back(k);

  IDAgent s = sid_agent(4, "p");
  s.phase = SimPhase::kPairing;
  s.id_other = 2;
  s.state_other = "c";
  agents.push_back(s);
  agents.push_back(sid_agent(1, "c"));

  NamingAgent plain;
  plain.state_p = "p";
  plain.my_id = 2;
  plain.max_id = 3;
  agents.push_back(plain);

  NamingAgent started = plain;
  started.inner = sid_agent(2, "p");
  started.inner->phase = SimPhase::kLocked;
  started.inner->id_other = 1;
  started.inner->state_other = "c";
  agents.push_back(started);

  for (const AgentState& a : agents) {
    std::string text = format_agent(a);
    CHECK(text.find(' ') == std::string::npos);
    AgentState back = parse_agent(text);
    CHECK(same_serialized(a, back));
    CHECK(format_agent(back) == text);
  }
  CHECK_THROWS_AS(parse_agent("z;c"), ParseError);
  CHECK_THROWS_AS(parse_agent("k;c;q;-;-;0;0"), ParseError);
  CHECK_THROWS_AS(parse_agent(""), ParseError);
}

TEST_CASE("simulated state projection") {
  Configuration c;
  c.push_back(DirectAgent{"c"});
  c.push_back(kno_agent("p"));
  NamingAgent started;
  started.state_p = "c";
  started.inner = sid_agent(1, "bot");
  c.push_back(started);
  NamingAgent fresh;
  fresh.state_p = "p";
  c.push_back(fresh);

  std::vector<State> p = project(c, pairing_protocol());
  CHECK(p == std::vector<State>{"c", "p", "bot", "p"});

  c.push_back(DirectAgent{"i"});
  CHECK_THROWS_AS(project(c, pairing_protocol()), StructuralError);
}

TEST_CASE("simulator options describe and parse") {
  SimulatorOptions o;
  o.kind = SimulatorKind::kKnO;
  o.o = 2;
  CHECK(o.describe() == "kno(o=2)");
  o.degrade_threshold = 3;
  CHECK(o.describe() == "kno(o=2,degrade=3)");

  SimulatorOptions back = simulator_options_from_description("kno(o=2,degrade=3)");
  CHECK(back.kind == SimulatorKind::kKnO);
  CHECK(back.o == 2);
  CHECK(back.degrade_threshold == 3);
  CHECK(simulator_options_from_description("direct").kind == SimulatorKind::kDirect);
  CHECK(simulator_options_from_description("naming").kind == SimulatorKind::kNaming);
  CHECK_THROWS_AS(simulator_options_from_description("kno(o=2"), ParseError);
  CHECK_THROWS_AS(simulator_options_from_description("kno(x=2)"), ParseError);
  CHECK_THROWS_AS(simulator_options_from_description("warp"), ConfigError);
}

// ---------------------------------------------------------------------------
// Token-queue simulator, starter side

TEST_CASE("starter injects a full announcement run once, then forwards") {
  std::int64_t serials = 0;

  KnOAgent a = kno_agent("c");
  SUBCASE("bound zero") {
    auto tok = kno_starter_step(a, 0, serials);
    REQUIRE(tok.has_value());
    CHECK(format_token(*tok) == "c:1");
    CHECK(a.pending);
    CHECK(a.sending.empty());
    // Pending with an empty queue: nothing to send.
    CHECK_FALSE(kno_starter_step(a, 0, serials).has_value());
    CHECK(a.pending);
  }
  SUBCASE("bound two") {
    auto tok = kno_starter_step(a, 2, serials);
    REQUIRE(tok.has_value());
    CHECK(format_token(*tok) == "c:1");
    CHECK(a.pending);
    CHECK(queue_text(a) == std::vector<std::string>{"c:2", "c:3"});
    // Subsequent sends drain the queue without a second injection.
    CHECK(format_token(*kno_starter_step(a, 2, serials)) == "c:2");
    CHECK(format_token(*kno_starter_step(a, 2, serials)) == "c:3");
    CHECK_FALSE(kno_starter_step(a, 2, serials).has_value());
  }
  SUBCASE("available with buffered foreign tokens forwards them first") {
    a.sending = {state_token("p", 1)};
    auto tok = kno_starter_step(a, 0, serials);
    REQUIRE(tok.has_value());
    CHECK(format_token(*tok) == "p:1");
    CHECK_FALSE(a.pending);  // no injection happened
  }
}

// ---------------------------------------------------------------------------
// Token-queue simulator, reactor side

TEST_CASE("bound-zero exchange applies both transition halves in two steps") {
  const ProtocolSpec& p = pairing_protocol();
  std::int64_t serials = 0;
  KnOAgent a = kno_agent("c");
  KnOAgent b = kno_agent("p");

  // a announces; b consumes and takes the reactor half.
  auto tok = kno_starter_step(a, 0, serials);
  auto ev = kno_reactor_step(b, p, 0, tok, false, serials);
  REQUIRE(ev.has_value());
  CHECK(ev->pre == "p");
  CHECK(ev->post == "bot");
  CHECK_FALSE(ev->starter_half);
  CHECK(ev->counterpart == "c");
  CHECK(ev->consumed_serial == 1);
  CHECK(ev->emitted_serial == 2);
  CHECK(b.state_p == "bot");
  CHECK_FALSE(b.pending);
  CHECK(queue_text(b) == std::vector<std::string>{"chg:c:p:1"});

  // b forwards the change run; a resolves its starter half.
  tok = kno_starter_step(b, 0, serials);
  REQUIRE(tok.has_value());
  ev = kno_reactor_step(a, p, 0, tok, false, serials);
  REQUIRE(ev.has_value());
  CHECK(ev->pre == "c");
  CHECK(ev->post == "cs");
  CHECK(ev->starter_half);
  CHECK(ev->counterpart == "p");
  CHECK(ev->consumed_serial == 2);
  CHECK(a.state_p == "cs");
  CHECK_FALSE(a.pending);
  CHECK(a.sending.empty());
}

TEST_CASE("a returned announcement is quietly retired") {
  const ProtocolSpec& p = pairing_protocol();
  std::int64_t serials = 0;
  KnOAgent a = kno_agent("c");
  auto tok = kno_starter_step(a, 0, serials);
  REQUIRE(a.pending);

  // The agent's own token comes back: no answer is coming.
  auto ev = kno_reactor_step(a, p, 0, tok, false, serials);
  CHECK_FALSE(ev.has_value());
  CHECK_FALSE(a.pending);
  CHECK(a.sending.empty());
  CHECK(a.jokers.empty());
}

TEST_CASE("detected omission spends a joker and notes the replaced identity") {
  const ProtocolSpec& p = pairing_protocol();
  std::int64_t serials = 10;
  KnOAgent a = kno_agent("c");
  Token p1 = state_token("p", 1);
  p1.serial = 7;
  a.sending = {p1, joker_token()};

  auto ev = kno_reactor_step(a, p, 1, std::nullopt, true, serials);
  REQUIRE(ev.has_value());
  CHECK(ev->pre == "c");
  CHECK(ev->post == "cs");
  CHECK(ev->counterpart == "p");
  CHECK(ev->consumed_serial == 7);
  CHECK(a.state_p == "cs");
  CHECK(a.detected_omissions == 1);
  CHECK(queue_text(a) == std::vector<std::string>{"J", "chg:p:c:1", "chg:p:c:2"});
  REQUIRE(a.jokers.size() == 1);
  CHECK(a.jokers.count(identity_of(state_token("p", 2))) == 1);
  CHECK(a.jokers.at(identity_of(state_token("p", 2))) == 1);
}

TEST_CASE("a late token owed to a spent joker turns back into a joker") {
  const ProtocolSpec& p = pairing_protocol();
  std::int64_t serials = 0;
  KnOAgent a = kno_agent("bot");
  a.jokers[identity_of(state_token("p", 2))] = 1;

  auto ev = kno_reactor_step(a, p, 1, state_token("p", 2), false, serials);
  CHECK_FALSE(ev.has_value());
  CHECK(a.jokers.empty());
  CHECK(queue_text(a) == std::vector<std::string>{"J"});
}

TEST_CASE("runs assemble FIFO with jokers only for missing slots") {
  const ProtocolSpec& p = pairing_protocol();
  std::int64_t serials = 100;
  KnOAgent a = kno_agent("c");

  // Two complete candidates; the run whose oldest token arrived first wins.
  Token p2 = state_token("p", 2);
  p2.serial = 5;
  Token c1 = state_token("c", 1);
  c1.serial = 6;
  Token c2 = state_token("c", 2);
  c2.serial = 6;
  Token p1 = state_token("p", 1);
  p1.serial = 5;
  a.sending = {p2, c1, c2};

  auto ev = kno_reactor_step(a, p, 1, p1, false, serials);
  REQUIRE(ev.has_value());
  // The p-run's oldest token (p:2, position 0) predates the c-run's.
  CHECK(ev->counterpart == "p");
  CHECK(ev->consumed_serial == 5);
  CHECK(ev->pre == "c");
  CHECK(ev->post == "cs");
  // The c tokens stay buffered behind the freshly emitted change run.
  auto q = queue_text(a);
  REQUIRE(q.size() == 4);
  CHECK(q[0] == "c:1");
  CHECK(q[1] == "c:2");
  CHECK(q[2] == "chg:p:c:1");
  CHECK(q[3] == "chg:p:c:2");
}

TEST_CASE("no event without a payload or a detection") {
  const ProtocolSpec& p = pairing_protocol();
  std::int64_t serials = 0;
  KnOAgent a = kno_agent("c");
  a.sending = {state_token("p", 1)};
  CHECK_FALSE(kno_reactor_step(a, p, 0, std::nullopt, false, serials).has_value());
  CHECK(a.sending.size() == 1);  // not even an intake happened
}

// ---------------------------------------------------------------------------
// Identifier simulator

TEST_CASE("identifier transaction: pair, lock, complete, release") {
  const ProtocolSpec& p = pairing_protocol();
  IDAgent a0 = sid_agent(1, "c");
  IDAgent a1 = sid_agent(2, "p");

  // a1 observes a0: records it and waits.
  CHECK(sid_reactor_step(a1, a0, p) == SidBranch::kPaired);
  CHECK(a1.phase == SimPhase::kPairing);
  CHECK(a1.id_other == 1);
  CHECK(a1.state_other == "c");
  CHECK(a1.state_p == "p");

  // a0 observes a1's record of itself: locks and takes the starter half.
  CHECK(sid_reactor_step(a0, a1, p) == SidBranch::kLocked);
  CHECK(a0.phase == SimPhase::kLocked);
  CHECK(a0.state_p == "cs");
  CHECK(a0.id_other == 2);

  // a1 sees its partner locked: completes against the recorded pre-lock
  // state and releases itself.
  CHECK(sid_reactor_step(a1, a0, p) == SidBranch::kCompleted);
  CHECK(a1.phase == SimPhase::kAvailable);
  CHECK(a1.state_p == "bot");
  CHECK_FALSE(a1.id_other.has_value());

  // a0 sees its partner moved on: releases.
  CHECK(sid_reactor_step(a0, a1, p) == SidBranch::kRollback);
  CHECK(a0.phase == SimPhase::kAvailable);
  CHECK(a0.state_p == "cs");
  CHECK_FALSE(a0.id_other.has_value());
}

TEST_CASE("a pairing agent whose partner got away rolls back") {
  const ProtocolSpec& p = pairing_protocol();
  IDAgent a0 = sid_agent(1, "c");
  IDAgent a1 = sid_agent(2, "p");
  IDAgent a2 = sid_agent(3, "p");

  CHECK(sid_reactor_step(a1, a0, p) == SidBranch::kPaired);  // a1 records a0
  CHECK(sid_reactor_step(a0, a2, p) == SidBranch::kPaired);  // a0 records a2

  // a0 observes a1: a1's record names a0, but a0 is busy with a2, and its
  // own record names a2 -- nothing fires.
  CHECK(sid_reactor_step(a0, a1, p) == SidBranch::kNone);

  // a1 observes a0 engaged elsewhere: its wait is hopeless, roll back.
  CHECK(sid_reactor_step(a1, a0, p) == SidBranch::kRollback);
  CHECK(a1.phase == SimPhase::kAvailable);
  CHECK(a1.state_p == "p");
  CHECK_FALSE(a1.id_other.has_value());

  // The a0/a2 transaction is unaffected and completes normally.
  CHECK(sid_reactor_step(a2, a0, p) == SidBranch::kLocked);
  CHECK(a2.state_p == "bot");  // starter half of delta(p, c)
  CHECK(sid_reactor_step(a0, a2, p) == SidBranch::kCompleted);
  CHECK(a0.state_p == "cs");   // reactor half against the recorded state p
}

TEST_CASE("duplicate identifiers are rejected") {
  IDAgent a0 = sid_agent(1, "c");
  IDAgent a1 = sid_agent(1, "p");
  CHECK_THROWS_AS(sid_reactor_step(a0, a1, pairing_protocol()), IntegrityError);
}

// ---------------------------------------------------------------------------
// Naming layer

TEST_CASE("two agents name themselves and start simulating") {
  const ProtocolSpec& p = pairing_protocol();
  NamingAgent a0;
  a0.state_p = "c";
  NamingAgent a1;
  a1.state_p = "p";

  // Collision: the reactor renames itself, sees the maximum hit n = 2, and
  // starts.
  NamingOutcome out = naming_step(a1, a0, 2, p);
  CHECK(out.collision);
  CHECK(out.started_now);
  CHECK(a1.my_id == 2);
  CHECK(a1.max_id == 2);
  REQUIRE(a1.started());
  CHECK(a1.inner->my_id == 2);
  CHECK(a1.inner->state_p == "p");

  // The other agent learns the maximum from the started one.
  out = naming_step(a0, a1, 2, p);
  CHECK_FALSE(out.collision);
  CHECK(out.started_now);
  CHECK(a0.my_id == 1);
  CHECK(a0.max_id == 2);
  REQUIRE(a0.started());
  CHECK(a0.inner->my_id == 1);

  // From here the inner layer carries the protocol.
  out = naming_step(a1, a0, 2, p);
  CHECK(out.inner == SidBranch::kPaired);
  out = naming_step(a0, a1, 2, p);
  CHECK(out.inner == SidBranch::kLocked);
  CHECK(a0.inner->state_p == "cs");
  out = naming_step(a1, a0, 2, p);
  CHECK(out.inner == SidBranch::kCompleted);
  CHECK(a1.inner->state_p == "bot");
}

TEST_CASE("a started starter is ignored by a non-started reactor's inner layer") {
  const ProtocolSpec& p = pairing_protocol();
  NamingAgent fresh;
  fresh.state_p = "c";
  NamingAgent started;
  started.state_p = "p";
  started.my_id = 3;
  started.max_id = 3;
  started.inner = sid_agent(3, "p");

  // The naming fields still flow to the fresh reactor.
  NamingOutcome out = naming_step(fresh, started, 3, p);
  CHECK_FALSE(out.collision);
  CHECK(out.started_now);
  CHECK(fresh.max_id == 3);

  // A non-started starter never reaches a started reactor's inner layer.
  NamingAgent late;
  late.state_p = "c";
  late.my_id = 2;
  out = naming_step(started, late, 3, p);
  CHECK(out.inner == SidBranch::kNone);
  CHECK(started.inner->phase == SimPhase::kAvailable);
}

// ---------------------------------------------------------------------------
// Engine integration

TEST_CASE("compatibility matrix") {
  CHECK_NOTHROW(check_compatibility(ModelId::kTw, SimulatorKind::kDirect));
  CHECK_NOTHROW(check_compatibility(ModelId::kT3, SimulatorKind::kDirect));
  CHECK_THROWS_AS(check_compatibility(ModelId::kIo, SimulatorKind::kDirect), ConfigError);
  CHECK_NOTHROW(check_compatibility(ModelId::kIt, SimulatorKind::kKnO));
  CHECK_NOTHROW(check_compatibility(ModelId::kI3, SimulatorKind::kKnO));
  CHECK_NOTHROW(check_compatibility(ModelId::kI4, SimulatorKind::kKnO));
  CHECK_THROWS_AS(check_compatibility(ModelId::kTw, SimulatorKind::kKnO), ConfigError);
  CHECK_THROWS_AS(check_compatibility(ModelId::kI1, SimulatorKind::kKnO), ConfigError);
  CHECK_NOTHROW(check_compatibility(ModelId::kIo, SimulatorKind::kSid));
  CHECK_THROWS_AS(check_compatibility(ModelId::kIt, SimulatorKind::kSid), ConfigError);
  CHECK_NOTHROW(check_compatibility(ModelId::kIo, SimulatorKind::kNaming));
  for (ModelId m : {ModelId::kTw, ModelId::kT1, ModelId::kI2, ModelId::kIo}) {
    CHECK_NOTHROW(check_compatibility(m, SimulatorKind::kInert));
  }
}

TEST_CASE("initial configurations are built per simulator kind") {
  const ProtocolSpec& p = pairing_protocol();
  std::vector<State> states = {"c", "p", "p"};

  SimulatorOptions direct;
  direct.kind = SimulatorKind::kDirect;
  Configuration c = initial_configuration(SimulatorKind::kDirect, p, states, direct);
  CHECK(project(c, p) == states);

  SimulatorOptions sid;
  sid.kind = SimulatorKind::kSid;
  c = initial_configuration(SimulatorKind::kSid, p, states, sid);
  CHECK(std::get<IDAgent>(c[0]).my_id == 1);
  CHECK(std::get<IDAgent>(c[2]).my_id == 3);

  SimulatorOptions bad;
  bad.kind = SimulatorKind::kKnO;
  bad.o = -1;
  CHECK_THROWS_AS(initial_configuration(SimulatorKind::kKnO, p, states, bad),
                  ConfigError);
  SimulatorOptions inert;
  inert.kind = SimulatorKind::kInert;
  CHECK_THROWS_AS(
      initial_configuration(SimulatorKind::kInert, p, {"c", "zap"}, inert),
      StructuralError);
}

TEST_CASE("system constructor validates structure") {
  const ProtocolSpec& p = pairing_protocol();
  SimulatorOptions sid;
  sid.kind = SimulatorKind::kSid;

  Configuration agents = {sid_agent(1, "c"), sid_agent(1, "p")};
  CHECK_THROWS_AS(System(p, ModelId::kIo, sid, agents), StructuralError);

  agents = {sid_agent(1, "c"), DirectAgent{"p"}};
  CHECK_THROWS_AS(System(p, ModelId::kIo, sid, agents), StructuralError);

  agents = {sid_agent(1, "c")};
  CHECK_THROWS_AS(System(p, ModelId::kIo, sid, agents), StructuralError);

  agents = {sid_agent(1, "c"), sid_agent(2, "p")};
  CHECK_NOTHROW(System(p, ModelId::kIo, sid, agents));
  CHECK_THROWS_AS(System(p, ModelId::kIt, sid, agents), ConfigError);
}

TEST_CASE("direct execution under the plain two-way model") {
  const ProtocolSpec& p = pairing_protocol();
  SimulatorOptions opts;
  opts.kind = SimulatorKind::kDirect;
  Configuration init = initial_configuration(SimulatorKind::kDirect, p, {"c", "p"}, opts);
  System sys(p, ModelId::kTw, opts, init);

  auto events = sys.apply({0, 1, Omission::kNone});
  REQUIRE(events.size() == 2);
  CHECK(events[0].agent == 0);
  CHECK(events[0].pre == "c");
  CHECK(events[0].post == "cs");
  CHECK(events[1].agent == 1);
  CHECK(events[1].pre == "p");
  CHECK(events[1].post == "bot");
  CHECK(events[0].tag == events[1].tag);
  CHECK(project(sys.configuration(), p) == std::vector<State>{"cs", "bot"});
  CHECK(sys.steps_applied() == 1);

  CHECK_THROWS_AS(sys.apply({0, 1, Omission::kReactor}), ConfigError);
  CHECK_THROWS_AS(sys.apply({0, 0, Omission::kNone}), StructuralError);
}

TEST_CASE("direct execution under an omissive two-way model loses halves") {
  const ProtocolSpec& p = pairing_protocol();
  SimulatorOptions opts;
  opts.kind = SimulatorKind::kDirect;
  Configuration init = initial_configuration(SimulatorKind::kDirect, p, {"c", "p"}, opts);
  System sys(p, ModelId::kT3, opts, init);

  // The starter's receipt is lost: only the reactor half applies.
  auto events = sys.apply({0, 1, Omission::kStarter});
  REQUIRE(events.size() == 1);
  CHECK(events[0].agent == 1);
  CHECK(events[0].post == "bot");
  CHECK(project(sys.configuration(), p) == std::vector<State>{"c", "bot"});
  CHECK(sys.omissions_seen() == 1);
}

TEST_CASE("token-queue system runs the pairing protocol to completion") {
  const ProtocolSpec& p = pairing_protocol();
  SimulatorOptions opts;
  opts.kind = SimulatorKind::kKnO;
  opts.o = 0;
  Configuration init = initial_configuration(SimulatorKind::kKnO, p, {"c", "p"}, opts);
  System sys(p, ModelId::kIt, opts, init);

  auto ev1 = sys.apply({0, 1, Omission::kNone});
  REQUIRE(ev1.size() == 1);
  CHECK(ev1[0].agent == 1);
  CHECK(ev1[0].pre == "p");
  CHECK(ev1[0].post == "bot");
  CHECK(ev1[0].tag.substr(0, 3) == "sc:");

  auto ev2 = sys.apply({1, 0, Omission::kNone});
  REQUIRE(ev2.size() == 1);
  CHECK(ev2[0].agent == 0);
  CHECK(ev2[0].pre == "c");
  CHECK(ev2[0].post == "cs");
  CHECK(ev2[0].tag.substr(0, 4) == "rsc:");

  CHECK(project(sys.configuration(), p) == std::vector<State>{"cs", "bot"});
}

TEST_CASE("a lost send under two-sided detection is repaired by the sender") {
  const ProtocolSpec& p = pairing_protocol();
  SimulatorOptions opts;
  opts.kind = SimulatorKind::kKnO;
  opts.o = 1;
  Configuration init = initial_configuration(SimulatorKind::kKnO, p, {"c", "p"}, opts);
  System sys(p, ModelId::kI4, opts, init);

  // Agent 0 announces, loses the head token, and compensates in place; the
  // deprived receiver stays untouched -- exactly one joker per lost token.
  CHECK(sys.apply({0, 1, Omission::kReactor}).empty());
  {
    const auto& s = std::get<KnOAgent>(sys.agent(0));
    const auto& r = std::get<KnOAgent>(sys.agent(1));
    REQUIRE(s.sending.size() == 2);
    CHECK(s.sending[0].kind == Token::Kind::kState);
    CHECK(s.sending[1].kind == Token::Kind::kJoker);
    CHECK(s.detected_omissions == 1);
    CHECK(s.pending);
    CHECK(r.sending.empty());
    CHECK(r.detected_omissions == 0);
  }

  // The remaining concrete token and the forwarded joker complete the
  // announcement run at the receiver, and the exchange resolves normally.
  CHECK(sys.apply({0, 1, Omission::kNone}).empty());
  auto ev1 = sys.apply({0, 1, Omission::kNone});
  REQUIRE(ev1.size() == 1);
  CHECK(ev1[0].agent == 1);
  CHECK(ev1[0].pre == "p");
  CHECK(ev1[0].post == "bot");

  CHECK(sys.apply({1, 0, Omission::kNone}).empty());
  auto ev2 = sys.apply({1, 0, Omission::kNone});
  REQUIRE(ev2.size() == 1);
  CHECK(ev2[0].agent == 0);
  CHECK(ev2[0].pre == "c");
  CHECK(ev2[0].post == "cs");

  CHECK(project(sys.configuration(), p) == std::vector<State>{"cs", "bot"});
  CHECK(sys.omissions_seen() == 1);
}

TEST_CASE("token-queue pairing survives a budgeted adversary and stays sound") {
  const ProtocolSpec& p = pairing_protocol();
  for (int o : {0, 1, 2}) {
    for (ModelId model : {ModelId::kI3, ModelId::kI4}) {
      if (o == 0 && model == ModelId::kI4) continue;  // same as i3 with no jokers
      SimulatorOptions opts;
      opts.kind = SimulatorKind::kKnO;
      opts.o = o;

      PairingInstance inst{2, 2};
      Configuration init =
          initial_configuration(SimulatorKind::kKnO, p, inst.initial_states(), opts);
      System sys(p, model, opts, init);

      SchedulerConfig cfg;
      cfg.n = inst.n();
      cfg.seed = 7 + static_cast<std::uint64_t>(o);
      cfg.horizon = 20000;
      AdversaryConfig adv;
      adv.kind = AdversaryKind::kUnboundedOmissions;
      adv.seed = 99;
      adv.rate_num = 1;
      adv.rate_den = 50;
      adv.max_omissions = o;
      Run run = adversary_rewrite(fair_run(cfg), adv, model, cfg.n);

      PairingMonitor monitor(inst);
      monitor.feed(project(sys.configuration(), p));
      bool invariants = true;
      run_system(sys, run, [&](std::int64_t, const RunStep&, const System& s,
                               std::span<const Event>) {
        monitor.feed(project(s.configuration(), p));
        // Conservation: every detection is either a circulating joker or a
        // noted identity; jokers never exceed the omission bound.
        std::int64_t jokers = 0, noted = 0, detections = 0, concrete = 0;
        for (int i = 0; i < s.n(); ++i) {
          const auto& a = std::get<KnOAgent>(s.agent(i));
          detections += a.detected_omissions;
          for (const Token& t : a.sending) {
            if (t.kind == Token::Kind::kJoker) ++jokers;
            else ++concrete;
          }
          for (const auto& [identity, count] : a.jokers) noted += count;
        }
        invariants = invariants && jokers + noted == detections && jokers <= o &&
                     concrete <= s.n() * (o + 1) + o;
        return true;
      });
      CHECK(invariants);
      PairingReport report = monitor.finish();
      INFO("o=", o, " model=", model_name(model));
      CHECK(report.irrevocable);
      CHECK(report.safe);
      CHECK(report.live_at_horizon);
      CHECK(sys.omissions_seen() == o);
    }
  }
}

TEST_CASE("degradation freezes an agent after enough detections") {
  const ProtocolSpec& p = pairing_protocol();
  SimulatorOptions opts;
  opts.kind = SimulatorKind::kKnO;
  opts.o = 2;
  opts.degrade_threshold = 1;
  Configuration init = initial_configuration(SimulatorKind::kKnO, p, {"c", "p"}, opts);
  System sys(p, ModelId::kI3, opts, init);

  sys.apply({0, 1, Omission::kReactor});  // token lost; agent 1 detects
  const auto& victim = std::get<KnOAgent>(sys.agent(1));
  CHECK(victim.detected_omissions == 1);
  CHECK(victim.frozen);

  // A frozen agent neither sends nor reacts.
  std::string before = format_agent(sys.agent(1));
  sys.apply({1, 0, Omission::kNone});
  sys.apply({0, 1, Omission::kNone});
  CHECK(format_agent(sys.agent(1)) == before);
}

TEST_CASE("identifier system emits paired transaction events") {
  const ProtocolSpec& p = pairing_protocol();
  SimulatorOptions opts;
  opts.kind = SimulatorKind::kSid;
  Configuration init = initial_configuration(SimulatorKind::kSid, p, {"c", "p"}, opts);
  System sys(p, ModelId::kIo, opts, init);

  CHECK(sys.apply({0, 1, Omission::kNone}).empty());  // pair
  auto lock = sys.apply({1, 0, Omission::kNone});
  REQUIRE(lock.size() == 1);
  CHECK(lock[0].agent == 0);
  CHECK(lock[0].pre == "c");
  CHECK(lock[0].post == "cs");
  CHECK(lock[0].tag == "txn:1");

  auto complete = sys.apply({0, 1, Omission::kNone});
  REQUIRE(complete.size() == 1);
  CHECK(complete[0].agent == 1);
  CHECK(complete[0].pre == "p");
  CHECK(complete[0].post == "bot");
  CHECK(complete[0].tag == "txc:1");

  CHECK(sys.apply({1, 0, Omission::kNone}).empty());  // release
  CHECK(project(sys.configuration(), p) == std::vector<State>{"cs", "bot"});
}

TEST_CASE("naming system converges to unique identifiers and then simulates") {
  const ProtocolSpec& p = pairing_protocol();
  SimulatorOptions opts;
  opts.kind = SimulatorKind::kNaming;
  PairingInstance inst{2, 2};
  Configuration init =
      initial_configuration(SimulatorKind::kNaming, p, inst.initial_states(), opts);
  System sys(p, ModelId::kIo, opts, init);

  SchedulerConfig cfg;
  cfg.n = inst.n();
  cfg.seed = 123;
  cfg.horizon = 30000;
  Run run = fair_run(cfg);

  // Pointwise invariant: the global maximum increases exactly when the
  // interacting pair shared it as their common name.
  bool lemma = true;
  int prev_max = 1;
  run_system(sys, run, [&](std::int64_t, const RunStep& step, const System& s,
                           std::span<const Event>) {
    const auto& starter = std::get<NamingAgent>(s.agent(step.starter));
    const auto& reactor = std::get<NamingAgent>(s.agent(step.reactor));
    int now = 1;
    for (int i = 0; i < s.n(); ++i)
      now = std::max(now, std::get<NamingAgent>(s.agent(i)).max_id);
    if (now > prev_max) {
      // Only a collision at the previous maximum can push it.
      lemma = lemma && reactor.my_id == prev_max + 1 && starter.my_id == prev_max;
    }
    prev_max = now;
    return true;
  });
  CHECK(lemma);

  std::set<int> ids;
  int started = 0;
  for (int i = 0; i < sys.n(); ++i) {
    const auto& a = std::get<NamingAgent>(sys.agent(i));
    CHECK(a.started());
    if (a.started()) {
      ids.insert(a.inner->my_id);
      ++started;
    }
  }
  CHECK(started == inst.n());
  CHECK(static_cast<int>(ids.size()) == inst.n());  // identifiers are unique

  // And the simulated protocol made progress all the way to the target.
  std::vector<State> final = project(sys.configuration(), p);
  CHECK(std::count(final.begin(), final.end(), State(kCritical)) == inst.target());
}

TEST_CASE("traces replay bit-identically") {
  const ProtocolSpec& p = pairing_protocol();
  SimulatorOptions opts;
  opts.kind = SimulatorKind::kKnO;
  opts.o = 1;
  PairingInstance inst{2, 1};
  Configuration init =
      initial_configuration(SimulatorKind::kKnO, p, inst.initial_states(), opts);

  SchedulerConfig cfg;
  cfg.n = inst.n();
  cfg.seed = 5;
  cfg.horizon = 500;
  AdversaryConfig adv;
  adv.kind = AdversaryKind::kSingleOmission;
  adv.position = 3;
  adv.single_step = {0, 1, Omission::kReactor};
  Run run = adversary_rewrite(fair_run(cfg), adv, ModelId::kI3, cfg.n);

  Trace t = simulate(p, ModelId::kI3, opts, init, run, cfg.seed);
  CHECK(t.header.model == "i3");
  CHECK(t.header.simulator == "kno(o=1)");
  CHECK(t.records.size() == run.size());
  CHECK(replay_divergence(t) == -1);

  // Tampering is caught.
  Trace bad = t;
  std::get<KnOAgent>(bad.records[10].post[0]).state_p = "bot";
  CHECK(replay_divergence(bad) == 10);
}
