#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "statesafe/builtin.hpp"
#include "statesafe/simulator.hpp"

namespace statesafe::sim {

struct BuiltinScenario {
  std::string name;
  std::string summary;
  std::string default_spec;
  DomainBounds bounds;
  std::function<std::vector<Event>()> events;
};

namespace detail {

constexpr std::int32_t kA = 0;
constexpr std::int32_t kB = 1;
constexpr std::int32_t kC = 2;
constexpr std::int32_t kBid1 = 0;
constexpr std::int32_t kBid2 = 1;

/// A opens the auction, B bids 1 and the update reaches A, C outbids with 2
/// but both of C's sends are lost before A closes.
inline std::vector<Event> fig1_prefix() {
  return {
      Invoke{kA, "start_auction", {}},
      Send{kA, kB, "m1"},
      Deliver{"m1"},
      Send{kA, kC, "m2"},
      Deliver{"m2"},
      Invoke{kB, "place_bid", {kBid1, 1}},
      Send{kB, kC, "m3"},
      Deliver{"m3"},
      Invoke{kC, "place_bid", {kBid2, 2}},
      Send{kC, kA, "m4"},
      Drop{"m4"},
      Send{kC, kB, "m5"},
      Drop{"m5"},
      Send{kB, kA, "m6"},
      Deliver{"m6"},
  };
}

inline std::vector<Event> fig1_events() {
  auto ev = fig1_prefix();
  ev.push_back(Invoke{kA, "close_auction", {kBid1}});
  ev.push_back(Send{kC, kA, "m7"});
  ev.push_back(Deliver{"m7"});
  ev.push_back(CheckInvariantAll{});
  return ev;
}

inline std::vector<Event> fig1_tokens_events() {
  auto ev = fig1_prefix();
  for (std::int32_t r : {kA, kB, kC}) ev.push_back(Invoke{r, "release_token", {}});
  ev.push_back(AntiEntropy{});
  ev.push_back(Invoke{kA, "close_auction", {kBid2}});
  ev.push_back(AntiEntropy{});
  ev.push_back(CheckInvariantAll{});
  ev.push_back(CheckConverged{});
  return ev;
}

}  // namespace detail

inline const std::vector<BuiltinScenario>& scenario_registry() {
  static const std::vector<BuiltinScenario> scenarios = {
      {"fig1_auction", "three-replica auction where the closing replica misses the highest bid", "auction_unsafe",
       builtin::auction_bounds(3, 2, 2), detail::fig1_events},
      {"fig1_auction_tokens",
       "the same run continued by releasing every token, propagating, and closing on the highest bid",
       "auction_safe", builtin::auction_bounds(3, 2, 2), detail::fig1_tokens_events},
  };
  return scenarios;
}

inline const BuiltinScenario& find_scenario(std::string_view name) {
  for (const auto& s : scenario_registry()) {
    if (s.name == name) return s;
  }
  throw Error(ErrorKind::UnknownSpec, "no built-in scenario '" + std::string(name) + "'");
}

/// Materializes a built-in scenario for `spec` (its default spec if empty).
inline Scenario make_scenario(std::string_view name, std::string_view spec = {}) {
  const auto& b = find_scenario(name);
  return Scenario{b.name, spec.empty() ? b.default_spec : std::string(spec), b.bounds, Policy::SkipAndRecord,
                  b.events()};
}

}  // namespace statesafe::sim
