#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "statesafe/error.hpp"
#include "statesafe/expr.hpp"
#include "statesafe/schema.hpp"
#include "statesafe/spec.hpp"

namespace statesafe::builtin {

// ---- pair counter -----------------------------------------------------------

inline DomainBounds pair_counter_bounds() {
  DomainBounds b;
  b.replica_count = 2;
  b.int_ranges["n"] = {0, 12};
  b.int_ranges["m"] = {0, 12};
  return b;
}

/// Two bounded counters with Inv: n + m <= 10 and the componentwise-max merge.
inline ObjectSpec make_pair_counter(const DomainBounds& bounds = pair_counter_bounds()) {
  for (const char* key : {"n", "m"}) {
    auto it = bounds.int_ranges.find(key);
    if (it == bounds.int_ranges.end() || it->second.min > 0 || it->second.max < 10) {
      throw Error(ErrorKind::BadBounds, std::string("pair_counter needs range '") + key + "' covering [0,10]");
    }
  }
  ObjectSpec s;
  s.name = "pair_counter";
  s.description = "pair of counters (n, m) with invariant n + m <= 10";
  s.bounds = bounds;
  s.schema.components = {{"n", bounded_int("n")}, {"m", bounded_int("m")}};

  const Layout layout = Layout::resolve(s.schema, bounds);
  const std::size_t n = layout.slot({"n"});
  const std::size_t m = layout.slot({"m"});

  StateValue init = layout.minimum();
  init[n] = 0;
  init[m] = 0;
  s.initial_state = init;

  s.leq = local("n") <= remote("n") && local("m") <= remote("m");
  s.invariant = Predicate(local("n") + local("m") <= 10);
  s.pre_merge = Predicate(max(local("n"), remote("n")) + max(local("m"), remote("m")) <= 10);

  auto inc = [](std::size_t slot) {
    return [slot](const StateValue& st, std::span<const std::int32_t>, std::int32_t) {
      StateValue out = st;
      ++out[slot];
      return out;
    };
  };
  s.operations.push_back({"incn", {}, Predicate(local("n") + local("m") <= 9), inc(n), "n := n + 1"});
  s.operations.push_back({"incm", {}, Predicate(local("n") + local("m") <= 9), inc(m), "m := m + 1"});

  s.merge = [n, m](const StateValue& a, const StateValue& b, std::int32_t) {
    StateValue out = a;
    out[n] = std::max(a[n], b[n]);
    out[m] = std::max(a[m], b[m]);
    return out;
  };
  s.merge_text = "(max(n, n'), max(m, m'))";
  return s;
}

// ---- auction ----------------------------------------------------------------

/// How the amount-agreement merge precondition quantifies bids.
enum class AmountAgreement {
  CommonlyPlaced,  // forall b placed on both sides (default)
  AllBids,         // forall b, unconditionally
};

/// Encoding of the token/placement merge-precondition clauses.
enum class PlacementClause {
  OriginScoped,  // own bids unconditionally, other bids when their origin's token is revoked locally (default)
  Literal,       // both printed clauses, over every replica and bid
};

/// Encoding of the "tokens revoked => remote winner agrees" clause.
enum class RevokedReading {
  AgreeWhenSet,  // (forall r: !tokens[r]) => winner' == winner || winner' == ⊥ || winner == ⊥ (default)
  AllRevoked,    // (forall r: !tokens[r]) => winner' == winner || winner' == ⊥
  AnyRevoked,    // (exists r: !tokens[r]) => winner' == winner || winner' == ⊥
  OwnRevoked,    // !tokens[me] => winner' == winner || winner' == ⊥
};

/// Premise of the "tokens held => no winner on either side" clause.
enum class HeldReading {
  AllHeld,  // forall r: tokens[r] (default)
  AnyHeld,  // exists r: tokens[r]
  OwnHeld,  // tokens[me]
};

struct AuctionOptions {
  bool tokens = false;
  bool close_requires_is_highest = true;
  AmountAgreement amount_agreement = AmountAgreement::CommonlyPlaced;
  PlacementClause placement = PlacementClause::OriginScoped;
  RevokedReading revoked_reading = RevokedReading::AgreeWhenSet;
  HeldReading held_reading = HeldReading::AllHeld;
};

inline DomainBounds auction_bounds(int replicas = 2, int bids = 2, int amount_max = 2) {
  DomainBounds b;
  b.replica_count = replicas;
  b.domain_sizes["bids"] = bids;
  b.int_ranges["amount"] = {0, amount_max};
  return b;
}

/// Static bid origin: bid i is placed only at replica (i + 1) mod R.
inline std::int32_t bid_origin(std::int32_t bid, int replicas) { return (bid + 1) % replicas; }

/// is_highest(bids of side `of`, w): w beats every bid placed on that side,
/// ties going to the lower id. The winner's amount is read from `amount_side`,
/// the state in which w is known to be placed.
inline Expr is_highest(Side of, const Expr& w, Side amount_side, const std::string& label) {
  Expr bids = side(of, "bids");
  Expr w_amount = side(amount_side, "bids")[w].dot("amount");
  Expr c = arg("c");
  Expr body = forall("c", "bids",
                     implies(bids[c].dot("placed"),
                             bids[c].dot("amount") < w_amount || (bids[c].dot("amount") == w_amount && w <= c)));
  return named(label, body);
}

inline ObjectSpec make_auction(const DomainBounds& bounds, const AuctionOptions& opt) {
  const int replicas = bounds.replica_count;
  auto bids_it = bounds.domain_sizes.find("bids");
  auto amount_it = bounds.int_ranges.find("amount");
  if (replicas < 2 || bids_it == bounds.domain_sizes.end() || bids_it->second < 2 ||
      amount_it == bounds.int_ranges.end() || amount_it->second.min != 0 || amount_it->second.max < 2) {
    throw Error(ErrorKind::BadBounds, "auction needs >= 2 replicas, >= 2 bids and amounts {0..k}, k >= 2");
  }
  const int nbids = bids_it->second;

  ObjectSpec s;
  s.name = opt.tokens ? "auction_safe" : "auction_unsafe";
  s.description = opt.tokens ? "single auction with per-replica bidding tokens"
                             : "single auction, no concurrency control";
  s.bounds = bounds;
  s.schema.domains = {{"bids", "b"}};
  s.schema.components = {
      {"status", ordered_enum({"INVALID", "ACTIVE", "CLOSED"})},
      {"winner", optional_ref("bids")},
      {"bids", fixed_map("bids", tuple({{"placed", flag(true)}, {"amount", bounded_int("amount")}}))},
  };
  if (opt.tokens) s.schema.components.push_back({"tokens", fixed_map(std::string(kReplicaDomain), flag(false))});

  StaticTable origin{"bids", std::string(kReplicaDomain), {}};
  for (int b = 0; b < nbids; ++b) origin.values.push_back(bid_origin(b, replicas));
  s.tables["origin"] = origin;

  const Layout layout = Layout::resolve(s.schema, bounds);
  struct Slots {
    std::size_t status, winner;
    std::vector<std::size_t> placed, amount, tokens;
  } at;
  at.status = layout.slot({"status"});
  at.winner = layout.slot({"winner"});
  for (int b = 0; b < nbids; ++b) {
    at.placed.push_back(layout.slot({"bids", b, "placed"}));
    at.amount.push_back(layout.slot({"bids", b, "amount"}));
  }
  if (opt.tokens) {
    for (int r = 0; r < replicas; ++r) at.tokens.push_back(layout.slot({"tokens", r}));
  }
  constexpr std::int32_t kInvalid = 0, kActive = 1, kClosed = 2;

  StateValue init = layout.minimum();
  init[at.status] = kInvalid;
  init[at.winner] = kBottom;
  for (auto t : at.tokens) init[t] = 1;
  s.initial_state = init;

  const Expr status = local("status"), status_r = remote("status");
  const Expr winner = local("winner"), winner_r = remote("winner");
  const Expr bids = local("bids"), bids_r = remote("bids");
  const Expr tokens = local("tokens"), tokens_r = remote("tokens");
  const Expr b = arg("b"), r = arg("r");

  // comparison: local <= remote
  Predicate leq{status <= status_r, winner_r != bottom() || winner == bottom(),
                forall("b", "bids", bids_r[b].dot("placed") || !bids[b].dot("placed"))};
  if (opt.tokens) leq.add(forall("r", "replicas", !tokens_r[r] || tokens[r]));
  s.leq = leq;

  Predicate inv;
  inv.add(forall("b", "bids", implies(bids[b].dot("placed"), status >= level("ACTIVE") && bids[b].dot("amount") > 0)));
  inv.add(forall("b", "bids", implies(!bids[b].dot("placed"), bids[b].dot("amount") == 0)));
  inv.add(implies(status <= level("ACTIVE"), winner == bottom()));
  inv.add(implies(status == level("CLOSED"), winner != bottom() && bids[winner].dot("placed") &&
                                                 is_highest(Side::Local, winner, Side::Local, "is_highest(bids, winner)")));
  if (opt.tokens) inv.add(implies(status == level("CLOSED"), forall("r", "replicas", !tokens[r])));
  s.invariant = inv;

  Predicate pm;
  pm.add(implies(status == level("CLOSED"), is_highest(Side::Local, winner, Side::Local, "is_highest(bids, winner)") &&
                                                is_highest(Side::Remote, winner, Side::Local, "is_highest(bids', winner)")));
  pm.add(implies(status_r == level("CLOSED"),
                 is_highest(Side::Local, winner_r, Side::Remote, "is_highest(bids, winner')") &&
                     is_highest(Side::Remote, winner_r, Side::Remote, "is_highest(bids', winner')")));
  if (opt.amount_agreement == AmountAgreement::CommonlyPlaced) {
    pm.add(forall("b", "bids", implies(bids[b].dot("placed") && bids_r[b].dot("placed"),
                                       bids[b].dot("amount") == bids_r[b].dot("amount"))));
  } else {
    pm.add(forall("b", "bids", bids[b].dot("amount") == bids_r[b].dot("amount")));
  }
  if (opt.tokens) {
    pm.add(implies(tokens[me()], tokens_r[me()]));
    const Expr origin_b = table("origin", b);
    if (opt.placement == PlacementClause::OriginScoped) {
      pm.add(forall("b", "bids", implies(origin_b == me() && !bids[b].dot("placed"), !bids_r[b].dot("placed"))));
      pm.add(forall("b", "bids", implies(origin_b != me() && !tokens[origin_b] && !bids[b].dot("placed"),
                                         !bids_r[b].dot("placed"))));
    } else {
      pm.add(forall("r", "replicas", forall("b", "bids", implies(!tokens[r] && !bids[b].dot("placed"),
                                                               !bids_r[b].dot("placed")))));
      pm.add(forall("r", "replicas", forall("b", "bids", implies(r != me() && !tokens[r] && !bids[b].dot("placed"),
                                                               !bids_r[b].dot("placed")))));
    }
    Expr agree = winner_r == winner || winner_r == bottom();
    switch (opt.revoked_reading) {
      case RevokedReading::AgreeWhenSet:
        pm.add(implies(forall("r", "replicas", !tokens[r]), agree || winner == bottom()));
        break;
      case RevokedReading::AllRevoked: pm.add(implies(forall("r", "replicas", !tokens[r]), agree)); break;
      case RevokedReading::AnyRevoked: pm.add(implies(exists("r", "replicas", !tokens[r]), agree)); break;
      case RevokedReading::OwnRevoked: pm.add(implies(!tokens[me()], agree)); break;
    }
    Expr none = winner == bottom() && winner_r == bottom();
    switch (opt.held_reading) {
      case HeldReading::AnyHeld: pm.add(implies(exists("r", "replicas", tokens[r]), none)); break;
      case HeldReading::AllHeld: pm.add(implies(forall("r", "replicas", tokens[r]), none)); break;
      case HeldReading::OwnHeld: pm.add(implies(tokens[me()], none)); break;
    }
  }
  s.pre_merge = pm;

  // operations
  Predicate pre_start{status == level("INVALID"), winner == bottom()};
  if (opt.tokens) pre_start.add(forall("r", "replicas", tokens[r]));
  s.operations.push_back({"start_auction", {}, pre_start,
                          [at](const StateValue& st, std::span<const std::int32_t>, std::int32_t) {
                            StateValue out = st;
                            out[at.status] = kActive;
                            out[at.winner] = kBottom;
                            return out;
                          },
                          "status := ACTIVE; winner := ⊥"});

  const Expr v = arg("value");
  Predicate pre_place{!bids[b].dot("placed"), status == level("ACTIVE"), winner == bottom(), v > 0,
                      table("origin", b) == me()};
  if (opt.tokens) pre_place.add(tokens[me()]);
  s.operations.push_back({"place_bid", {{"b", "bids", ""}, {"value", "", "amount"}}, pre_place,
                          [at](const StateValue& st, std::span<const std::int32_t> a, std::int32_t) {
                            StateValue out = st;
                            out[at.placed[static_cast<std::size_t>(a[0])]] = 1;
                            out[at.amount[static_cast<std::size_t>(a[0])]] = a[1];
                            return out;
                          },
                          "bids[b].placed := true; bids[b].amount := value"});

  const Expr w = arg("w");
  Predicate pre_close{status == level("ACTIVE"), winner == bottom(), bids[w].dot("placed")};
  if (opt.close_requires_is_highest) pre_close.add(is_highest(Side::Local, w, Side::Local, "is_highest(bids, w)"));
  if (opt.tokens) pre_close.add(forall("r", "replicas", !tokens[r]));
  s.operations.push_back({"close_auction", {{"w", "bids", ""}}, pre_close,
                          [at](const StateValue& st, std::span<const std::int32_t> a, std::int32_t) {
                            StateValue out = st;
                            out[at.status] = kClosed;
                            out[at.winner] = a[0];
                            return out;
                          },
                          "status := CLOSED; winner := w"});

  if (opt.tokens) {
    s.operations.push_back({"release_token", {}, Predicate{tokens[me()], status >= level("ACTIVE")},
                            [at](const StateValue& st, std::span<const std::int32_t>, std::int32_t self) {
                              StateValue out = st;
                              out[at.tokens[static_cast<std::size_t>(self)]] = 0;
                              return out;
                            },
                            "tokens[me] := false"});
  }

  s.merge = [at](const StateValue& l, const StateValue& rm, std::int32_t) {
    StateValue out = l;
    out[at.status] = std::max(l[at.status], rm[at.status]);
    out[at.winner] = rm[at.winner] != kBottom ? rm[at.winner] : l[at.winner];
    for (std::size_t i = 0; i < at.placed.size(); ++i) {
      out[at.placed[i]] = l[at.placed[i]] || rm[at.placed[i]];
      out[at.amount[i]] = l[at.placed[i]] ? l[at.amount[i]] : rm[at.amount[i]];
    }
    for (auto t : at.tokens) out[t] = l[t] && rm[t];
    return out;
  };
  s.merge_text = opt.tokens
                     ? "status := max; winner := winner' if set else winner; placed := or; amount := local if placed "
                       "locally else remote; tokens[r] := tokens[r] && tokens'[r]"
                     : "status := max; winner := winner' if set else winner; placed := or; amount := local if placed "
                       "locally else remote";
  return s;
}

inline ObjectSpec make_auction_unsafe(const DomainBounds& bounds = auction_bounds()) {
  return make_auction(bounds, AuctionOptions{});
}

inline AuctionOptions auction_safe_options() {
  AuctionOptions o;
  o.tokens = true;
  return o;
}

inline ObjectSpec make_auction_safe(const DomainBounds& bounds = auction_bounds()) {
  return make_auction(bounds, auction_safe_options());
}

// ---- grow-only set ----------------------------------------------------------

inline DomainBounds gset_bounds(int elements = 3) {
  DomainBounds b;
  b.replica_count = 2;
  b.domain_sizes["elements"] = elements;
  return b;
}

inline ObjectSpec make_gset(const DomainBounds& bounds = gset_bounds()) {
  auto it = bounds.domain_sizes.find("elements");
  if (it == bounds.domain_sizes.end() || it->second < 1) throw Error(ErrorKind::BadBounds, "gset needs an 'elements' domain");
  ObjectSpec s;
  s.name = "gset";
  s.description = "grow-only set with union merge";
  s.bounds = bounds;
  s.schema.domains = {{"elements", "e"}};
  s.schema.components = {{"members", fixed_map("elements", flag(true))}};
  const Layout layout = Layout::resolve(s.schema, bounds);
  std::vector<std::size_t> slots;
  for (int e = 0; e < it->second; ++e) slots.push_back(layout.slot({"members", e}));
  s.initial_state = layout.minimum();

  const Expr members = local("members"), members_r = remote("members"), e = arg("e");
  s.leq = Predicate(forall("e", "elements", implies(members[e], members_r[e])));
  s.invariant = Predicate(lit(true));
  s.pre_merge = Predicate(lit(true));
  s.operations.push_back({"add", {{"e", "elements", ""}}, Predicate(!members[e]),
                          [slots](const StateValue& st, std::span<const std::int32_t> a, std::int32_t) {
                            StateValue out = st;
                            out[slots[static_cast<std::size_t>(a[0])]] = 1;
                            return out;
                          },
                          "members[e] := true"});
  s.merge = [slots](const StateValue& l, const StateValue& r, std::int32_t) {
    StateValue out = l;
    for (auto k : slots) out[k] = l[k] || r[k];
    return out;
  };
  s.merge_text = "members[e] := members[e] || members'[e]";
  return s;
}

// ---- registry ---------------------------------------------------------------

struct BuiltinSpec {
  std::string name;
  std::string summary;
  DomainBounds default_bounds;
  std::function<ObjectSpec(const DomainBounds&)> make;
};

inline const std::vector<BuiltinSpec>& registry() {
  static const std::vector<BuiltinSpec> specs = {
      {"pair_counter", "pair of counters with n + m <= 10", pair_counter_bounds(),
       [](const DomainBounds& b) { return make_pair_counter(b); }},
      {"auction_unsafe", "auction without concurrency control", auction_bounds(),
       [](const DomainBounds& b) { return make_auction_unsafe(b); }},
      {"auction_safe", "auction guarded by per-replica bidding tokens", auction_bounds(),
       [](const DomainBounds& b) { return make_auction_safe(b); }},
      {"gset", "grow-only set", gset_bounds(), [](const DomainBounds& b) { return make_gset(b); }},
  };
  return specs;
}

inline const BuiltinSpec& find(std::string_view name) {
  for (const auto& s : registry()) {
    if (s.name == name) return s;
  }
  throw Error(ErrorKind::UnknownSpec, "no built-in spec '" + std::string(name) + "'");
}

inline ObjectSpec make(std::string_view name) {
  const auto& s = find(name);
  return s.make(s.default_bounds);
}

inline ObjectSpec make(std::string_view name, const DomainBounds& bounds) { return find(name).make(bounds); }

}  // namespace statesafe::builtin
