// A stock of 4 items sold from every replica. Gating a sale on the locally
// visible total is unsafe under concurrency; giving each replica a fixed
// share of the stock is safe.
#include <iostream>

#include "statesafe/checker.hpp"
#include "statesafe/scenarios.hpp"
#include "statesafe/simulator.hpp"

using namespace statesafe;

namespace {

constexpr int kStock = 4;

ObjectSpec make_stock(bool escrow) {
  ObjectSpec s;
  s.name = escrow ? "stock_escrow" : "stock_shared";
  s.bounds.replica_count = 2;
  s.bounds.int_ranges["sold"] = {0, kStock};
  s.schema.components = {{"sold", fixed_map("replicas", bounded_int("sold"))}};
  const Layout layout = Layout::resolve(s.schema, s.bounds);
  std::vector<std::size_t> slots;
  for (int r = 0; r < s.bounds.replica_count; ++r) slots.push_back(layout.slot({"sold", r}));
  s.initial_state = layout.minimum();

  const Expr sold = local("sold"), sold_r = remote("sold"), a = arg("a"), b = arg("b");
  const Expr total = forall("a", "replicas", forall("b", "replicas", implies(a != b, sold[a] + sold[b] <= kStock)));
  s.leq = Predicate(forall("a", "replicas", sold[a] <= sold_r[a]));
  if (escrow) {
    const int share = kStock / s.bounds.replica_count;
    s.invariant = Predicate(forall("a", "replicas", sold[a] <= share));
    s.pre_merge = Predicate(lit(true));
    s.operations.push_back({"sell", {}, Predicate(sold[me()] < share), {}, "sold[me] := sold[me] + 1"});
  } else {
    s.invariant = Predicate(total);
    s.pre_merge = Predicate(lit(true));
    s.operations.push_back(
        {"sell", {}, Predicate(forall("a", "replicas", forall("b", "replicas", implies(a != b, sold[a] + sold[b] < kStock)))), {},
         "sold[me] := sold[me] + 1"});
  }
  s.operations.back().effect = [slots](const StateValue& st, std::span<const std::int32_t>, std::int32_t me) {
    StateValue out = st;
    ++out[slots[static_cast<std::size_t>(me)]];
    return out;
  };
  s.merge = [slots](const StateValue& l, const StateValue& r, std::int32_t) {
    StateValue out = l;
    for (auto k : slots) out[k] = std::max(l[k], r[k]);
    return out;
  };
  s.merge_text = "sold[r] := max(sold[r], sold'[r])";
  return s;
}

}  // namespace

int main() {
  for (bool escrow : {false, true}) {
    const CheckReport report = run_pipeline(make_stock(escrow));
    std::cout << report.spec << ": " << to_string(report.verdict()) << "\n";
    for (const auto& stage : report.stages) {
      for (const auto& [id, count] : stage.violation_counts) std::cout << "  " << id << ": " << count << "\n";
    }
    const Model model(make_stock(escrow));
    const sim::Trace trace = sim::run_random(model, {7, 300, 0.3, 0.2, true});
    std::cout << "  random run: " << (trace.clean() ? "clean" : "invariant violated") << ", converged "
              << std::boolalpha << trace.converged.value_or(false) << "\n";
  }
}
