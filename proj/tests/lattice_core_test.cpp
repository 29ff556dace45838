#include <gtest/gtest.h>

#include <set>

#include "statesafe/builtin.hpp"
#include "statesafe/format.hpp"
#include "statesafe/schema.hpp"
#include "statesafe/spec.hpp"

using namespace statesafe;

namespace {

StateSchema two_ints() {
  StateSchema s;
  s.components = {{"x", bounded_int("x")}, {"y", bounded_int("y")}};
  return s;
}

DomainBounds xy_bounds(int xmax, int ymax) {
  DomainBounds b;
  b.int_ranges["x"] = {0, xmax};
  b.int_ranges["y"] = {0, ymax};
  return b;
}

StateValue sv(std::vector<std::int32_t> v) { return StateValue(std::move(v)); }

}  // namespace

TEST(Enumerate, CountsAndOrder) {
  const auto states = enumerate_states(two_ints(), xy_bounds(2, 1));
  ASSERT_EQ(states.size(), 6u);
  EXPECT_EQ(states.front(), sv({0, 0}));
  EXPECT_EQ(states[1], sv({0, 1}));
  EXPECT_EQ(states[2], sv({1, 0}));
  EXPECT_EQ(states.back(), sv({2, 1}));
  EXPECT_TRUE(std::is_sorted(states.begin(), states.end()));
}

TEST(Enumerate, PairCounterDomainHas169States) {
  const auto spec = builtin::make_pair_counter();
  EXPECT_EQ(enumerate_states(spec.schema, spec.bounds).size(), 169u);
}

TEST(Enumerate, AuctionCardinalities) {
  // 3 statuses x (bids + bottom) winners x (2 x amounts)^bids x 2^replicas tokens
  const Model unsafe(builtin::make_auction_unsafe());
  EXPECT_EQ(unsafe.layout().cardinality(), 3u * 3u * 36u);
  const Model safe(builtin::make_auction_safe());
  EXPECT_EQ(safe.layout().cardinality(), 3u * 3u * 36u * 4u);
}

TEST(Enumerate, EveryStateAppearsOnceAndRanksMatch) {
  const Model m(builtin::make_auction_safe());
  const auto states = enumerate_states(m.layout(), 1u << 20);
  std::set<StateValue> seen(states.begin(), states.end());
  EXPECT_EQ(seen.size(), states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    ASSERT_TRUE(m.layout().conforms(states[i]));
    ASSERT_EQ(m.layout().rank(states[i]), i);
    ASSERT_EQ(m.layout().unrank(i), states[i]);
  }
}

TEST(Enumerate, DomainTooLargeCarriesCardinality) {
  auto b = xy_bounds(9, 9);
  b.enumeration_cap = 50;
  try {
    enumerate_states(two_ints(), b);
    FAIL() << "expected DomainTooLarge";
  } catch (const DomainTooLarge& e) {
    EXPECT_EQ(e.cardinality(), 100u);
    EXPECT_EQ(e.cap(), 50u);
    EXPECT_EQ(e.kind(), ErrorKind::DomainTooLarge);
  }
}

TEST(Enumerate, MissingBoundIsUnbounded) {
  DomainBounds b;
  b.int_ranges["x"] = {0, 1};
  try {
    enumerate_states(two_ints(), b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnboundedComponent);
  }
}

TEST(Enumerate, EmptyRangeIsBadBounds) {
  auto b = xy_bounds(1, 1);
  b.int_ranges["y"] = {2, 1};
  try {
    enumerate_states(two_ints(), b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::BadBounds);
  }
}

TEST(Layout, MapsAndRefsResolve) {
  const Model m(builtin::make_auction_safe());
  const Layout& L = m.layout();
  EXPECT_EQ(L.label(L.find_domain("bids"), 1), "b2");
  EXPECT_EQ(L.label(L.find_domain("bids"), kBottom), "⊥");
  EXPECT_EQ(L.parse_label(0, "r2"), 1);
  EXPECT_FALSE(L.parse_label(0, "r3").has_value());
  const auto a = L.slot({"bids", 1, "amount"});
  EXPECT_EQ(L.leaves()[a].path, "bids[b2].amount");
  EXPECT_THROW(L.slot({"bids", 2, "amount"}), Error);
  EXPECT_THROW(L.slot({"nope"}), Error);
}

TEST(Format, RendersNestedState) {
  const Model m(builtin::make_auction_unsafe());
  auto s = *m.spec().initial_state;
  EXPECT_EQ(format_state(m.layout(), s),
            "status=INVALID winner=⊥ bids={b1:(placed=false amount=0), b2:(placed=false amount=0)}");
  s[m.layout().slot({"status"})] = 7;
  EXPECT_NE(format_state(m.layout(), s).find("status=<7>"), std::string::npos);
}

TEST(Model, PairCounterOrderAndMerge) {
  const Model m(builtin::make_pair_counter());
  EXPECT_TRUE(m.leq(sv({1, 2}), sv({1, 3})));
  EXPECT_FALSE(m.leq(sv({2, 2}), sv({1, 3})));
  EXPECT_EQ(m.merge_states(sv({4, 5}), sv({3, 6}), replica(0)), sv({4, 6}));
  EXPECT_EQ(m.apply_op("incn", {}, replica(0), sv({4, 5})), sv({5, 5}));
}

TEST(Model, PreconditionViolationReportsFailingConjunct) {
  const Model m(builtin::make_pair_counter());
  try {
    m.apply_op("incn", {}, replica(0), sv({5, 5}));
    FAIL();
  } catch (const PreconditionViolated& e) {
    EXPECT_EQ(e.operation(), "incn");
    ASSERT_EQ(e.clauses().size(), 1u);
    EXPECT_EQ(e.clauses()[0].text, "n + m <= 9");
    EXPECT_EQ(e.clauses()[0].detail, "lhs=10, rhs=9");
  }
}

TEST(Model, ErrorsOnBadInputs) {
  const Model m(builtin::make_pair_counter());
  auto kind_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::DomainTooLarge;
  };
  EXPECT_EQ(kind_of([&] { m.apply_op("nope", {}, replica(0), sv({0, 0})); }), ErrorKind::UnknownOperation);
  EXPECT_EQ(kind_of([&] { m.apply_op("incn", {1}, replica(0), sv({0, 0})); }), ErrorKind::BadParams);
  EXPECT_EQ(kind_of([&] { m.apply_op("incn", {}, replica(0), sv({0})); }), ErrorKind::SchemaMismatch);
  EXPECT_EQ(kind_of([&] { m.leq(sv({0, 13}), sv({0, 0})); }), ErrorKind::SchemaMismatch);
  EXPECT_EQ(kind_of([&] { m.apply_op("incn", {}, replica(5), sv({0, 0})); }), ErrorKind::BadParams);
}

TEST(Model, UndeclaredIdentifierRejected) {
  auto spec = builtin::make_pair_counter();
  spec.invariant = Predicate(local("k") <= 3);
  try {
    Model m(std::move(spec));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::UnknownIdentifier);
  }
}

TEST(Model, AdHocPredicateEvaluation) {
  const Model m(builtin::make_pair_counter());
  auto r = m.eval_predicate(Predicate{local("n") <= 3, local("m") >= 1}, Arity::Unary, sv({4, 0}), nullptr, replica(0));
  EXPECT_FALSE(r.holds);
  ASSERT_EQ(r.failing().size(), 2u);
  EXPECT_EQ(r.failing()[0].detail, "lhs=4, rhs=3");
  const StateValue other = sv({1, 1});
  EXPECT_THROW(m.eval_predicate(Predicate(local("n") <= 3), Arity::Unary, sv({1, 1}), &other, replica(0)), Error);
  EXPECT_THROW(m.eval_predicate(Predicate(remote("n") <= 3), Arity::Binary, sv({1, 1}), nullptr, replica(0)), Error);
  EXPECT_TRUE(m.eval_predicate(Predicate(remote("n") <= local("m")), Arity::Binary, sv({1, 1}), &other, replica(0)).holds);
}

TEST(Model, AuctionPlaceBidRespectsOrigin) {
  const Model m(builtin::make_auction_unsafe());
  auto s = m.apply_op("start_auction", {}, replica(0), *m.spec().initial_state);
  // b1 originates at r2, b2 at r1 with two replicas
  EXPECT_THROW(m.apply_op("place_bid", {0, 1}, replica(0), s), PreconditionViolated);
  auto t = m.apply_op("place_bid", {0, 1}, replica(1), s);
  EXPECT_EQ(format_state(m.layout(), t),
            "status=ACTIVE winner=⊥ bids={b1:(placed=true amount=1), b2:(placed=false amount=0)}");
  auto c = m.apply_op("close_auction", {0}, replica(0), t);
  EXPECT_EQ(m.layout().label(m.layout().find_domain("bids"), c[m.layout().slot({"winner"})]), "b1");
  EXPECT_TRUE(m.inv(c, 0));
}

TEST(Model, AuctionIsHighestTieBreaksToLowestId) {
  const Model m(builtin::make_auction_unsafe());
  const Layout& L = m.layout();
  auto s = m.apply_op("start_auction", {}, replica(0), *m.spec().initial_state);
  s = m.apply_op("place_bid", {0, 2}, replica(1), s);
  s = m.apply_op("place_bid", {1, 2}, replica(0), s);
  EXPECT_THROW(m.apply_op("close_auction", {1}, replica(0), s), PreconditionViolated);
  auto c = m.apply_op("close_auction", {0}, replica(0), s);
  EXPECT_EQ(c[L.slot({"winner"})], 0);
}

TEST(Builtin, RegistryAndBounds) {
  std::vector<std::string> names;
  for (const auto& b : builtin::registry()) names.push_back(b.name);
  EXPECT_EQ(names, (std::vector<std::string>{"pair_counter", "auction_unsafe", "auction_safe", "gset"}));
  EXPECT_THROW(builtin::find("counter"), Error);
  auto b = builtin::pair_counter_bounds();
  b.int_ranges["n"].max = 9;
  EXPECT_THROW(builtin::make_pair_counter(b), Error);
}
