// Checks the built-in pair counter, prints its first concurrent-safety
// counterexample, and replays it.
#include <iostream>

#include "statesafe/builtin.hpp"
#include "statesafe/checker.hpp"
#include "statesafe/format.hpp"

using namespace statesafe;

int main() {
  const CheckReport report = run_pipeline(builtin::make("pair_counter"));
  for (const auto& stage : report.stages) std::cout << to_string(stage.stage) << ": " << to_string(stage.verdict) << "\n";

  const StageResult* concurrent = report.stage(CheckStage::ConcurrentSafety);
  if (!concurrent || concurrent->counterexamples.empty()) return 0;

  const Model model(builtin::make("pair_counter"));
  const Counterexample& cex = concurrent->counterexamples.front();
  std::cout << cex.assertion_id << " for " << cex.operation << "\n";
  for (const auto& w : cex.witnesses) std::cout << "  " << w.role << " = " << format_state(model.layout(), w.state) << "\n";
  std::cout << "replay reproduces: " << std::boolalpha << replay(model, cex).reproduces() << "\n";
  return report.exit_code();
}
