#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cstdint>
#include <exception>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "statesafe/format.hpp"
#include "statesafe/random.hpp"
#include "statesafe/spec.hpp"

namespace statesafe {

enum class CheckStage { WellFormedness, Compliance, Convergence, SequentialSafety, ConcurrentSafety };

inline constexpr std::array<CheckStage, 5> kStages = {CheckStage::WellFormedness, CheckStage::Compliance,
                                                      CheckStage::Convergence, CheckStage::SequentialSafety,
                                                      CheckStage::ConcurrentSafety};

inline std::string_view to_string(CheckStage s) {
  switch (s) {
    case CheckStage::WellFormedness: return "WellFormedness";
    case CheckStage::Compliance: return "Compliance";
    case CheckStage::Convergence: return "Convergence";
    case CheckStage::SequentialSafety: return "SequentialSafety";
    case CheckStage::ConcurrentSafety: return "ConcurrentSafety";
  }
  return "?";
}

/// Accepts the stage name in either CamelCase or snake_case, plus the
/// short forms "sequential" and "concurrent".
inline std::optional<CheckStage> parse_stage(std::string_view text) {
  std::string t;
  for (char c : text) {
    if (c != '_' && c != '-') t += static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c);
  }
  if (t == "wellformedness" || t == "syntax") return CheckStage::WellFormedness;
  if (t == "compliance") return CheckStage::Compliance;
  if (t == "convergence") return CheckStage::Convergence;
  if (t == "sequentialsafety" || t == "sequential") return CheckStage::SequentialSafety;
  if (t == "concurrentsafety" || t == "concurrent") return CheckStage::ConcurrentSafety;
  return std::nullopt;
}

enum class Verdict { Pass, Fail, Skipped, Aborted };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Skipped: return "skipped";
    case Verdict::Aborted: return "aborted";
  }
  return "?";
}

enum class LeastnessMode { Auto, Exhaustive, Sampled };

/// Formulation of merge.preserves_pre_merge.
enum class MergePreMergeMode { ThreeState, TwoState };

struct CheckConfig {
  bool stop_on_first_failure = true;
  int max_counterexamples_per_assertion = 3;
  /// Auto is exhaustive when |states|^3 <= enumeration_cap, sampled otherwise.
  /// Applies to every cubic quantifier (transitivity, leastness, triples).
  LeastnessMode leastness = LeastnessMode::Auto;
  std::uint64_t sample_count = 200000;
  std::uint64_t seed = 1;
  bool check_both_pre_merge_orientations = true;
  MergePreMergeMode merge_pre_merge = MergePreMergeMode::ThreeState;
  std::optional<CheckStage> only_stage;
  int jobs = 1;
};

// ---- facts and counterexamples ----------------------------------------------

enum class FactKind { Inv, PreMerge, Pre, Leq, Equal, Conforms };

inline std::string_view to_string(FactKind k) {
  switch (k) {
    case FactKind::Inv: return "inv";
    case FactKind::PreMerge: return "pre_merge";
    case FactKind::Pre: return "pre";
    case FactKind::Leq: return "leq";
    case FactKind::Equal: return "equal";
    case FactKind::Conforms: return "conforms";
  }
  return "?";
}

/// An atomic proposition over named witness states, evaluated at `replica`.
struct Fact {
  FactKind kind = FactKind::Inv;
  std::vector<std::string> roles;
  std::int32_t replica = 0;
  std::string op;
  Args args;

  friend bool operator==(const Fact&, const Fact&) = default;
};

struct Witness {
  std::string role;
  StateValue state;
  std::int32_t holder = -1;  // replica the state is assumed to live at, -1 if none
};

/// How a witness was computed from others; replay recomputes it.
struct Derivation {
  enum class Kind { Op, Merge };
  std::string role;
  Kind kind = Kind::Op;
  std::string op;
  Args args;
  std::int32_t replica = 0;
  std::vector<std::string> inputs;
};

struct FactResult {
  Fact fact;
  bool holds = true;
  std::vector<ClauseResult> clauses;
};

struct Counterexample {
  CheckStage stage = CheckStage::WellFormedness;
  std::string assertion_id;
  std::string operation;
  Args args;
  std::int32_t me = -1;
  std::vector<Witness> witnesses;
  std::vector<Derivation> derived;
  std::vector<Fact> assumptions;
  std::vector<Fact> assertion;  // conjunction; at least one conjunct is false
  std::vector<FactResult> failed;
  std::string message;

  const Witness* witness(std::string_view role) const {
    for (const auto& w : witnesses) {
      if (w.role == role) return &w;
    }
    return nullptr;
  }
};

struct StageResult {
  CheckStage stage = CheckStage::WellFormedness;
  Verdict verdict = Verdict::Pass;
  std::vector<Counterexample> counterexamples;
  /// Total violations per "assertion" or "assertion[op]", before truncation.
  std::map<std::string, std::uint64_t> violation_counts;
  std::vector<std::string> warnings;
  bool sampled = false;
  std::string note;
};

struct Statistics {
  std::uint64_t states_enumerated = 0;
  std::uint64_t valid_states = 0;   // (state, replica) combinations satisfying Inv
  std::uint64_t valid_pairs = 0;    // summed over ordered holder pairs
  std::uint64_t op_transitions = 0; // enabled (state, instance, replica) combinations
  std::uint64_t triples_checked = 0;
};

struct CheckReport {
  std::string spec;
  DomainBounds bounds;
  CheckConfig config;
  std::vector<StageResult> stages;
  Statistics statistics;
  double duration_ms = 0;

  Verdict verdict() const {
    bool fail = false;
    for (const auto& s : stages) {
      if (s.verdict == Verdict::Aborted) return Verdict::Aborted;
      fail = fail || s.verdict == Verdict::Fail;
    }
    return fail ? Verdict::Fail : Verdict::Pass;
  }

  int exit_code() const {
    switch (verdict()) {
      case Verdict::Aborted: return 3;
      case Verdict::Fail: return 1;
      default: return 0;
    }
  }

  const StageResult* stage(CheckStage s) const {
    for (const auto& r : stages) {
      if (r.stage == s) return &r;
    }
    return nullptr;
  }
};

// ---- fact evaluation and replay ---------------------------------------------

using RoleMap = std::map<std::string, StateValue, std::less<>>;

inline std::string describe(const Model& model, const Fact& f) {
  const auto& L = model.layout();
  const std::string at = " @" + L.label(0, f.replica);
  auto role = [&](std::size_t i) { return i < f.roles.size() ? f.roles[i] : std::string("?"); };
  switch (f.kind) {
    case FactKind::Inv: return "Inv(" + role(0) + ")" + at;
    case FactKind::PreMerge: return "Pre_merge(" + role(0) + ", " + role(1) + ")" + at;
    case FactKind::Pre: {
      int op = model.find_operation(f.op);
      std::string call = op >= 0 ? model.format_args(static_cast<std::size_t>(op), f.args) : f.op;
      return "Pre[" + call + "](" + role(0) + ")" + at;
    }
    case FactKind::Leq: return role(0) + " <= " + role(1) + at;
    case FactKind::Equal: return role(0) + " = " + role(1);
    case FactKind::Conforms: return role(0) + " conforms to the schema";
  }
  return "?";
}

inline FactResult evaluate_fact(const Model& model, const Fact& f, const RoleMap& states) {
  FactResult r{f, true, {}};
  const Layout& L = model.layout();
  std::vector<const StateValue*> s;
  for (const auto& role : f.roles) {
    auto it = states.find(role);
    if (it == states.end()) throw Error(ErrorKind::UnknownIdentifier, "no witness '" + role + "'");
    s.push_back(&it->second);
  }
  auto need = [&](std::size_t n) {
    if (s.size() != n) throw Error(ErrorKind::SchemaMismatch, "fact " + describe(model, f) + " has wrong arity");
  };
  if (f.kind == FactKind::Conforms) {
    need(1);
    r.holds = L.conforms(*s[0]);
    r.clauses.push_back({describe(model, f), r.holds, r.holds ? "" : format_state(L, *s[0])});
    return r;
  }
  for (const auto* st : s) {
    if (!L.conforms(*st)) {
      r.holds = false;
      r.clauses.push_back({describe(model, f), false, "witness does not conform to the schema"});
      return r;
    }
  }
  PredicateResult pr;
  switch (f.kind) {
    case FactKind::Inv:
      need(1);
      if (!model.has_invariant()) return r;
      pr = model.invariant_predicate().evaluate(L, s[0]->data(), nullptr, f.replica);
      break;
    case FactKind::PreMerge:
      need(2);
      if (!model.has_pre_merge()) return r;
      pr = model.pre_merge_predicate().evaluate(L, s[0]->data(), s[1]->data(), f.replica);
      break;
    case FactKind::Pre: {
      need(1);
      int op = model.find_operation(f.op);
      if (op < 0) throw Error(ErrorKind::UnknownOperation, "no operation '" + f.op + "'");
      pr = model.operations()[static_cast<std::size_t>(op)].precondition.evaluate(L, s[0]->data(), nullptr, f.replica,
                                                                                f.args);
      break;
    }
    case FactKind::Leq:
      need(2);
      pr = model.leq_predicate().evaluate(L, s[0]->data(), s[1]->data(), f.replica);
      break;
    case FactKind::Equal: {
      need(2);
      pr.holds = *s[0] == *s[1];
      std::string diff;
      for (std::size_t i = 0; i < L.width() && !pr.holds; ++i) {
        if ((*s[0])[i] == (*s[1])[i]) continue;
        if (!diff.empty()) diff += ", ";
        diff += L.leaves()[i].path + ": " + detail::format_leaf(L, L.leaves()[i], (*s[0])[i]) + " vs " +
                detail::format_leaf(L, L.leaves()[i], (*s[1])[i]);
      }
      pr.clauses.push_back({describe(model, f), pr.holds, diff});
      break;
    }
    case FactKind::Conforms: break;
  }
  r.holds = pr.holds;
  r.clauses = std::move(pr.clauses);
  return r;
}

struct ReplayResult {
  bool derivations_match = true;
  bool assumptions_hold = true;
  bool assertion_holds = false;
  std::string problem;

  /// The counterexample reproduces: derived witnesses recompute, every
  /// assumption holds, and the asserted conjunction is false.
  bool reproduces() const { return derivations_match && assumptions_hold && !assertion_holds; }
};

inline ReplayResult replay(const Model& model, const Counterexample& cex) {
  ReplayResult out;
  RoleMap states;
  for (const auto& w : cex.witnesses) states.emplace(w.role, w.state);
  for (const auto& d : cex.derived) {
    std::vector<const StateValue*> in;
    for (const auto& role : d.inputs) {
      auto it = states.find(role);
      if (it == states.end()) throw Error(ErrorKind::UnknownIdentifier, "no witness '" + role + "'");
      if (!model.layout().conforms(it->second)) throw Error(ErrorKind::SchemaMismatch, "input '" + role + "' does not conform");
      in.push_back(&it->second);
    }
    StateValue v;
    if (d.kind == Derivation::Kind::Op) {
      int op = model.find_operation(d.op);
      if (op < 0 || in.size() != 1) throw Error(ErrorKind::UnknownOperation, "bad derivation of '" + d.role + "'");
      v = model.apply_unchecked(static_cast<std::size_t>(op), d.args, d.replica, *in[0]);
    } else {
      if (in.size() != 2) throw Error(ErrorKind::SchemaMismatch, "merge derivation needs two inputs");
      v = model.merge_unchecked(*in[0], *in[1], d.replica);
    }
    auto it = states.find(d.role);
    if (it == states.end()) {
      states.emplace(d.role, std::move(v));
    } else if (it->second != v) {
      out.derivations_match = false;
      out.problem = "recorded " + d.role + " differs from its recomputation";
    }
  }
  for (const auto& f : cex.assumptions) {
    if (!evaluate_fact(model, f, states).holds) {
      out.assumptions_hold = false;
      if (out.problem.empty()) out.problem = "assumption fails: " + describe(model, f);
    }
  }
  out.assertion_holds = true;
  for (const auto& f : cex.assertion) out.assertion_holds = out.assertion_holds && evaluate_fact(model, f, states).holds;
  if (out.assertion_holds && out.problem.empty()) out.problem = "assertion holds on the recorded witnesses";
  return out;
}

// ---- enumeration machinery --------------------------------------------------

namespace detail {

/// Row-major bit matrix; rows are sets over state ranks.
class BitMatrix {
 public:
  BitMatrix() = default;
  BitMatrix(std::size_t rows, std::size_t cols) : words_((cols + 63) / 64), data_(rows * words_, 0) {}

  std::size_t words() const noexcept { return words_; }
  std::uint64_t* row(std::size_t r) { return data_.data() + r * words_; }
  const std::uint64_t* row(std::size_t r) const { return data_.data() + r * words_; }
  bool empty() const noexcept { return data_.empty(); }

 private:
  std::size_t words_ = 0;
  std::vector<std::uint64_t> data_;
};

inline void set_bit(std::uint64_t* row, std::size_t i) { row[i / 64] |= std::uint64_t{1} << (i % 64); }
inline bool test_bit(const std::uint64_t* row, std::size_t i) { return (row[i / 64] >> (i % 64)) & 1u; }

/// Runs fn(begin, end, worker) over contiguous slices of [0, n).
template <class Fn>
void parallel_slices(std::size_t n, int jobs, Fn&& fn) {
  const std::size_t w = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n));
  if (w == 1) {
    fn(std::size_t{0}, n, std::size_t{0});
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(w);
  for (std::size_t i = 0; i < w; ++i) {
    threads.emplace_back([&, i] {
      try {
        fn(n * i / w, n * (i + 1) / w, i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// A violation located by state ranks. Comparison order is the canonical
/// counterexample order within one assertion key.
struct Finding {
  std::int64_t a = -1, b = -1, c = -1;
  std::int32_t inst = -1;
  std::int32_t me = 0, q = -1, q2 = -1;

  auto key() const { return std::tie(a, b, c, inst, me, q, q2); }
  friend bool operator<(const Finding& x, const Finding& y) { return x.key() < y.key(); }
};

/// Keeps the `cap` smallest findings per (assertion, op) plus a total count.
class Collector {
 public:
  struct Bucket {
    std::uint64_t count = 0;
    std::vector<Finding> best;
  };
  using Key = std::pair<int, int>;

  explicit Collector(std::size_t cap) : cap_(cap) {}

  /// Returns false when the finding cannot enter the bucket, so callers
  /// iterating in increasing order may stop early.
  bool add(int assertion, int op, const Finding& f, std::uint64_t count = 1) {
    auto& b = buckets_[{assertion, op}];
    b.count += count;
    return offer(b, f);
  }

  void count_only(int assertion, int op, std::uint64_t count) { buckets_[{assertion, op}].count += count; }

  void merge(const Collector& o) {
    for (const auto& [k, ob] : o.buckets_) {
      auto& b = buckets_[k];
      b.count += ob.count;
      for (const auto& f : ob.best) offer(b, f);
    }
  }

  const std::map<Key, Bucket>& buckets() const noexcept { return buckets_; }

 private:
  bool offer(Bucket& b, const Finding& f) {
    if (b.best.size() >= cap_) {
      if (!(f < b.best.back())) return false;
      b.best.pop_back();
    }
    b.best.insert(std::upper_bound(b.best.begin(), b.best.end(), f), f);
    return true;
  }

  std::size_t cap_;
  std::map<Key, Bucket> buckets_;
};

}  // namespace detail

/// Assertion ids, in reporting order.
inline constexpr std::array<std::string_view, 13> kAssertionIds = {
    "order.reflexivity",    "order.transitivity", "order.antisymmetry",   "inflation",
    "op.closure",           "merge.closure",      "merge.upper_bound",    "merge.least",
    "initial.inv",          "op.preserves_inv",   "merge.preserves_inv",  "op.preserves_pre_merge",
    "merge.preserves_pre_merge"};

/// Runs individual pipeline stages against one compiled model. Enumeration
/// tables are built on first use and shared between stages.
class Checker {
 public:
  Checker(const Model& model, CheckConfig config) : model_(model), cfg_(std::move(config)) {
    if (cfg_.max_counterexamples_per_assertion < 1) throw Error(ErrorKind::BadParams, "max counterexamples must be >= 1");
  }

  const Statistics& statistics() const noexcept { return stats_; }

  StageResult run(CheckStage s) {
    StageResult r;
    r.stage = s;
    try {
      switch (s) {
        case CheckStage::WellFormedness: well_formedness(r); break;
        case CheckStage::Compliance: compliance(r); break;
        case CheckStage::Convergence: convergence(r); break;
        case CheckStage::SequentialSafety: sequential(r); break;
        case CheckStage::ConcurrentSafety: concurrent(r); break;
      }
    } catch (const DomainTooLarge& e) {
      r.verdict = Verdict::Aborted;
      r.note = e.what();
      r.counterexamples.clear();
      return r;
    }
    if (r.verdict != Verdict::Skipped) r.verdict = r.counterexamples.empty() ? Verdict::Pass : Verdict::Fail;
    return r;
  }

 private:
  enum A : int {
    kReflexivity,
    kTransitivity,
    kAntisymmetry,
    kInflation,
    kOpClosure,
    kMergeClosure,
    kUpperBound,
    kLeast,
    kInitialInv,
    kOpInv,
    kMergeInv,
    kOpPreMerge,
    kMergePreMerge,
  };

  struct Instance {
    std::size_t op;
    Args args;
  };

  struct Pair {
    std::int32_t a, b;
    std::int32_t m;  // rank of merge(a, b) at the pair's first holder, -1 if out of the domain
  };

  using Holder = std::pair<std::int32_t, std::int32_t>;

  static constexpr std::int32_t kDisabled = -1;
  static constexpr std::int32_t kEscapes = -2;
  static constexpr std::size_t kMaxTableStates = std::size_t{1} << 16;

  // ---- stages -----------------------------------------------------------------

  void well_formedness(StageResult& r) {
    const auto& spec = model_.spec();
    if (spec.initial_state && !model_.layout().conforms(*spec.initial_state)) {
      add_simple(r, "wellformed.initial_state", "initial state does not conform to the schema");
    }
    ensure_posts();
    for (std::size_t op = 0; op < model_.operations().size(); ++op) {
      bool live = false;
      for (std::size_t i = 0; i < instances_.size() && !live; ++i) {
        if (instances_[i].op != op) continue;
        for (int me = 0; me < R() && !live; ++me) {
          const auto& row = post_[i][static_cast<std::size_t>(me)];
          live = std::any_of(row.begin(), row.end(), [](std::int32_t p) { return p != kDisabled; });
        }
      }
      if (!live) r.warnings.push_back("dead operation: precondition of " + model_.operations()[op].spec->name +
                                      " holds at no enumerated state");
    }
  }

  void compliance(StageResult& r) {
    const auto& spec = model_.spec();
    if (!spec.initial_state) add_simple(r, "compliance.missing_initial_state", "no initial state");
    if (!spec.leq) add_simple(r, "compliance.missing_leq", "no comparison function");
    if (spec.operations.empty()) add_simple(r, "compliance.missing_operations", "no operations");
    if (!spec.merge) add_simple(r, "compliance.missing_merge", "no merge function");
    if (!spec.pre_merge) add_simple(r, "compliance.missing_pre_merge", "no merge precondition");
    if (!spec.invariant) add_simple(r, "compliance.missing_invariant", "no invariant");
  }

  void convergence(StageResult& r) {
    if (!model_.has_leq() || !model_.spec().merge) {
      r.verdict = Verdict::Skipped;
      r.note = "spec has no comparison function or merge";
      return;
    }
    ensure_pairs();
    ensure_posts();
    const bool exhaustive = exhaustive_mode();
    r.sampled = !exhaustive;
    if (exhaustive) ensure_up_sets();
    detail::Collector col(cap());

    // reflexivity, over valid states
    for (std::size_t i = 0; i < N(); ++i) {
      for (int me = 0; me < R(); ++me) {
        if (valid(i, me) && !model_.le(states_[i], states_[i], me)) col.add(kReflexivity, -1, F(i, -1, -1, -1, me, -1));
      }
    }

    // transitivity, over triples of valid states
    if (exhaustive) {
      for (int me = 0; me < R(); ++me) {
        const std::uint64_t v = valid_count_[static_cast<std::size_t>(me)];
        stats_.triples_checked += v * v * v;
        const auto* vmask = valid_mask_.row(static_cast<std::size_t>(me));
        auto& U = up_[static_cast<std::size_t>(me)];
        for (std::size_t i = 0; i < N(); ++i) {
          if (!valid(i, me)) continue;
          const auto* ui = U.row(i);
          for (std::size_t j = 0; j < N(); ++j) {
            if (!valid(j, me) || !detail::test_bit(ui, j)) continue;
            const auto* uj = U.row(j);
            emit_bits(col, kTransitivity, -1, [&](std::size_t w) { return uj[w] & vmask[w] & ~ui[w]; },
                      [&](std::size_t k) { return F(i, j, k, -1, me, -1); }, U.words());
          }
        }
      }
    } else {
      Rng rng(cfg_.seed);
      for (std::uint64_t t = 0; t < cfg_.sample_count; ++t) {
        const int me = static_cast<int>(rng.below(static_cast<std::uint64_t>(R())));
        std::size_t x[3];
        for (auto& v : x) v = static_cast<std::size_t>(rng.below(N()));
        if (!valid(x[0], me) || !valid(x[1], me) || !valid(x[2], me)) continue;
        ++stats_.triples_checked;
        if (model_.le(states_[x[0]], states_[x[1]], me) && model_.le(states_[x[1]], states_[x[2]], me) &&
            !model_.le(states_[x[0]], states_[x[2]], me)) {
          col.add(kTransitivity, -1, F(x[0], x[1], x[2], -1, me, -1));
        }
      }
    }

    // antisymmetry, upper bound, leastness, over valid pairs
    for (std::size_t h = 0; h < holders_.size(); ++h) {
      const auto [me, q] = holders_[h];
      for (const auto& p : pairs_[h]) {
        const auto& sa = states_[static_cast<std::size_t>(p.a)];
        const auto& sb = states_[static_cast<std::size_t>(p.b)];
        if (sa != sb && model_.le(sa, sb, me) && model_.le(sb, sa, me)) {
          col.add(kAntisymmetry, -1, F(p.a, p.b, -1, -1, me, q));
        }
        if (p.m < 0) {
          col.add(kMergeClosure, -1, F(p.a, p.b, -1, -1, me, q));
          continue;
        }
        const auto& sm = states_[static_cast<std::size_t>(p.m)];
        if (!model_.le(sa, sm, me) || !model_.le(sb, sm, me)) col.add(kUpperBound, -1, F(p.a, p.b, -1, -1, me, q));
        if (exhaustive) {
          auto& U = up_[static_cast<std::size_t>(me)];
          const auto *ua = U.row(static_cast<std::size_t>(p.a)), *ub = U.row(static_cast<std::size_t>(p.b)),
                     *um = U.row(static_cast<std::size_t>(p.m));
          stats_.triples_checked += N();
          emit_bits(col, kLeast, -1, [&](std::size_t w) { return ua[w] & ub[w] & ~um[w]; },
                    [&](std::size_t k) { return F(p.a, p.b, k, -1, me, q); }, U.words());
        }
      }
    }
    if (!exhaustive) {
      Rng rng(cfg_.seed ^ 0x9e3779b97f4a7c15ull);
      for (std::uint64_t t = 0; t < cfg_.sample_count; ++t) {
        const std::size_t h = static_cast<std::size_t>(rng.below(holders_.size()));
        if (pairs_[h].empty()) continue;
        const auto& p = pairs_[h][static_cast<std::size_t>(rng.below(pairs_[h].size()))];
        const std::size_t k = static_cast<std::size_t>(rng.below(N()));
        if (p.m < 0) continue;
        const int me = holders_[h].first;
        ++stats_.triples_checked;
        const auto& sk = states_[k];
        if (model_.le(states_[static_cast<std::size_t>(p.a)], sk, me) &&
            model_.le(states_[static_cast<std::size_t>(p.b)], sk, me) &&
            !model_.le(states_[static_cast<std::size_t>(p.m)], sk, me)) {
          col.add(kLeast, -1, F(p.a, p.b, k, -1, me, holders_[h].second));
        }
      }
    }

    // inflation, over valid states and enabled instances
    for (std::size_t i = 0; i < instances_.size(); ++i) {
      const int op = static_cast<int>(instances_[i].op);
      for (int me = 0; me < R(); ++me) {
        const auto& row = post_[i][static_cast<std::size_t>(me)];
        for (std::size_t s = 0; s < N(); ++s) {
          if (row[s] == kDisabled || !valid(s, me)) continue;
          if (row[s] == kEscapes) {
            col.add(kOpClosure, op, F(s, -1, -1, i, me, -1));
          } else if (!model_.le(states_[s], states_[static_cast<std::size_t>(row[s])], me)) {
            col.add(kInflation, op, F(s, -1, -1, i, me, -1));
          }
        }
      }
    }

    raw_antisymmetry_warning(r, exhaustive);
    finish(r, col);
  }

  void sequential(StageResult& r) {
    if (!model_.spec().merge) {
      r.verdict = Verdict::Skipped;
      r.note = "spec has no merge";
      return;
    }
    ensure_pairs();
    ensure_posts();
    detail::Collector col(cap());
    if (const auto& init = model_.spec().initial_state; init && model_.layout().conforms(*init)) {
      for (int me = 0; me < R(); ++me) {
        if (!model_.inv(*init, me) || !model_.pm(*init, *init, me)) col.add(kInitialInv, -1, F(-1, -1, -1, -1, me, -1));
      }
    }
    for (std::size_t i = 0; i < instances_.size(); ++i) {
      const int op = static_cast<int>(instances_[i].op);
      for (int me = 0; me < R(); ++me) {
        const auto& row = post_[i][static_cast<std::size_t>(me)];
        for (std::size_t s = 0; s < N(); ++s) {
          if (row[s] == kDisabled || !valid(s, me)) continue;
          if (row[s] == kEscapes) {
            col.add(kOpClosure, op, F(s, -1, -1, i, me, -1));
          } else if (!model_.inv(states_[static_cast<std::size_t>(row[s])], me)) {
            col.add(kOpInv, op, F(s, -1, -1, i, me, -1));
          }
        }
      }
    }
    for (std::size_t h = 0; h < holders_.size(); ++h) {
      const auto [me, q] = holders_[h];
      for (const auto& p : pairs_[h]) {
        if (p.m < 0) {
          col.add(kMergeClosure, -1, F(p.a, p.b, -1, -1, me, q));
        } else if (!model_.inv(states_[static_cast<std::size_t>(p.m)], me)) {
          col.add(kMergeInv, -1, F(p.a, p.b, -1, -1, me, q));
        }
      }
    }
    finish(r, col);
  }

  void concurrent(StageResult& r) {
    if (!model_.spec().merge) {
      r.verdict = Verdict::Skipped;
      r.note = "spec has no merge";
      return;
    }
    ensure_pairs();
    ensure_posts();
    const bool both = cfg_.check_both_pre_merge_orientations;
    const bool exhaustive = exhaustive_mode();
    r.sampled = !exhaustive && cfg_.merge_pre_merge == MergePreMergeMode::ThreeState;
    const int workers = std::max(cfg_.jobs, 1);
    std::vector<detail::Collector> cols(static_cast<std::size_t>(workers), detail::Collector(cap()));
    std::vector<std::uint64_t> triples(static_cast<std::size_t>(workers), 0);

    // op.preserves_pre_merge
    for (std::size_t h = 0; h < holders_.size(); ++h) {
      const auto [me, q] = holders_[h];
      const auto& pairs = pairs_[h];
      detail::parallel_slices(pairs.size(), workers, [&](std::size_t b0, std::size_t b1, std::size_t w) {
        auto& col = cols[w];
        for (std::size_t k = b0; k < b1; ++k) {
          const auto& p = pairs[k];
          const auto& sb = states_[static_cast<std::size_t>(p.b)];
          for (std::size_t i = 0; i < instances_.size(); ++i) {
            const std::int32_t post = post_[i][static_cast<std::size_t>(me)][static_cast<std::size_t>(p.a)];
            if (post == kDisabled) continue;
            const int op = static_cast<int>(instances_[i].op);
            if (post == kEscapes) {
              col.add(kOpClosure, op, F(p.a, -1, -1, i, me, -1));
              continue;
            }
            const auto& sp = states_[static_cast<std::size_t>(post)];
            if (!model_.pm(sp, sb, me) || (both && !model_.pm(sb, sp, q))) col.add(kOpPreMerge, op, F(p.a, p.b, -1, i, me, q));
          }
        }
      });
    }

    // merge.preserves_pre_merge
    if (cfg_.merge_pre_merge == MergePreMergeMode::TwoState) {
      for (std::size_t h = 0; h < holders_.size(); ++h) {
        const auto [me, q] = holders_[h];
        for (const auto& p : pairs_[h]) {
          if (p.m < 0) continue;
          const auto& sm = states_[static_cast<std::size_t>(p.m)];
          const auto& sb = states_[static_cast<std::size_t>(p.b)];
          if (!model_.pm(sm, sb, me) || (both && !model_.pm(sb, sm, q))) cols[0].add(kMergePreMerge, -1, F(p.a, p.b, -1, -1, me, q));
        }
      }
    } else if (exhaustive) {
      for (std::size_t h = 0; h < holders_.size(); ++h) {
        const auto [me, q1] = holders_[h];
        const auto& pairs = pairs_[h];
        for (int q2 = 0; q2 < R(); ++q2) {
          if (R() > 1 && q2 == me) continue;
          const auto& A = adjacency(me, q2);
          const auto& B = adjacency(q1, q2);
          detail::parallel_slices(pairs.size(), workers, [&](std::size_t b0, std::size_t b1, std::size_t w) {
            std::unordered_map<std::int32_t, std::vector<std::uint64_t>> good;  // merged rank -> mergeable set
            auto& col = cols[w];
            for (std::size_t k = b0; k < b1; ++k) {
              const auto& p = pairs[k];
              if (p.m < 0) continue;
              const auto* ra = A.row(static_cast<std::size_t>(p.a));
              const auto* rb = B.row(static_cast<std::size_t>(p.b));
              auto it = good.find(p.m);
              if (it == good.end()) it = good.emplace(p.m, mergeable_set(p.m, me, q2)).first;
              const auto& g = it->second;
              for (std::size_t x = 0; x < A.words(); ++x) triples[w] += static_cast<std::uint64_t>(std::popcount(ra[x] & rb[x]));
              emit_bits(col, kMergePreMerge, -1, [&](std::size_t x) { return ra[x] & rb[x] & ~g[x]; },
                        [&](std::size_t c) { return F(p.a, p.b, c, -1, me, q1, q2); }, A.words());
            }
          });
        }
      }
    } else {
      Rng rng(cfg_.seed ^ 0x5851f42d4c957f2dull);
      for (std::uint64_t t = 0; t < cfg_.sample_count; ++t) {
        const std::size_t h = static_cast<std::size_t>(rng.below(holders_.size()));
        if (pairs_[h].empty()) continue;
        const auto& p = pairs_[h][static_cast<std::size_t>(rng.below(pairs_[h].size()))];
        const auto [me, q1] = holders_[h];
        int q2 = static_cast<int>(rng.below(static_cast<std::uint64_t>(R())));
        if (R() > 1 && q2 == me) continue;
        const std::size_t c = static_cast<std::size_t>(rng.below(N()));
        if (p.m < 0 || !detail::test_bit(adjacency(me, q2).row(static_cast<std::size_t>(p.a)), c) ||
            !detail::test_bit(adjacency(q1, q2).row(static_cast<std::size_t>(p.b)), c)) {
          continue;
        }
        ++triples[0];
        const auto& sm = states_[static_cast<std::size_t>(p.m)];
        if (!model_.pm(sm, states_[c], me) || (both && !model_.pm(states_[c], sm, q2))) {
          cols[0].add(kMergePreMerge, -1, F(p.a, p.b, c, -1, me, q1, q2));
        }
      }
    }

    for (std::size_t w = 1; w < cols.size(); ++w) cols[0].merge(cols[w]);
    for (auto t : triples) stats_.triples_checked += t;
    finish(r, cols[0]);
  }

  // ---- tables -----------------------------------------------------------------

  int R() const { return model_.replica_count(); }
  std::size_t N() const { return states_.size(); }
  std::size_t cap() const { return static_cast<std::size_t>(cfg_.max_counterexamples_per_assertion); }
  bool valid(std::size_t i, int me) const { return inv_[static_cast<std::size_t>(me)][i] != 0; }

  bool exhaustive_mode() const {
    switch (cfg_.leastness) {
      case LeastnessMode::Exhaustive: return true;
      case LeastnessMode::Sampled: return false;
      case LeastnessMode::Auto: break;
    }
    const std::uint64_t n = N();
    return saturating_mul(saturating_mul(n, n), n) <= model_.spec().bounds.enumeration_cap;
  }

  static detail::Finding F(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t inst, std::int32_t me,
                           std::int32_t q, std::int32_t q2 = -1) {
    detail::Finding f;
    f.a = a;
    f.b = b;
    f.c = c;
    f.inst = static_cast<std::int32_t>(inst);
    f.me = me;
    f.q = q;
    f.q2 = q2;
    return f;
  }

  /// Adds one finding per set bit of word_fn, in increasing bit order, and
  /// counts the rest once the bucket is full.
  template <class WordFn, class MakeFn>
  static void emit_bits(detail::Collector& col, int assertion, int op, WordFn word_fn, MakeFn make, std::size_t words) {
    bool open = true;
    for (std::size_t w = 0; w < words; ++w) {
      std::uint64_t bits = word_fn(w);
      if (!bits) continue;
      if (!open) {
        col.count_only(assertion, op, static_cast<std::uint64_t>(std::popcount(bits)));
        continue;
      }
      while (bits) {
        const std::size_t k = w * 64 + static_cast<std::size_t>(std::countr_zero(bits));
        bits &= bits - 1;
        if (open) {
          open = col.add(assertion, op, make(k));
        } else {
          col.count_only(assertion, op, 1);
        }
      }
    }
  }

  void ensure_states() {
    if (!states_.empty()) return;
    states_ = enumerate_states(model_.layout(), model_.spec().bounds.enumeration_cap);
    if (states_.size() > kMaxTableStates) {
      throw DomainTooLarge(states_.size(), kMaxTableStates, "pair tables need at most " +
                                                                std::to_string(kMaxTableStates) + " states, domain has " +
                                                                std::to_string(states_.size()));
    }
    stats_.states_enumerated = states_.size();
    inv_.assign(static_cast<std::size_t>(R()), std::vector<char>(N(), 0));
    valid_mask_ = detail::BitMatrix(static_cast<std::size_t>(R()), N());
    valid_count_.assign(static_cast<std::size_t>(R()), 0);
    for (int me = 0; me < R(); ++me) {
      for (std::size_t i = 0; i < N(); ++i) {
        if (model_.inv(states_[i], me)) {
          inv_[static_cast<std::size_t>(me)][i] = 1;
          detail::set_bit(valid_mask_.row(static_cast<std::size_t>(me)), i);
          ++valid_count_[static_cast<std::size_t>(me)];
        }
      }
      stats_.valid_states += valid_count_[static_cast<std::size_t>(me)];
    }
    for (int me = 0; me < R(); ++me) {
      for (int q = 0; q < R(); ++q) {
        if (me != q || R() == 1) holders_.emplace_back(me, q);
      }
    }
  }

  std::int32_t rank_of(const StateValue& s) const {
    return model_.layout().conforms(s) ? static_cast<std::int32_t>(model_.layout().rank(s)) : -1;
  }

  /// Pre_merge(a, b) at x as bit rows over b, for rows a valid at x.
  const detail::BitMatrix& pm_rows(int x) {
    auto& m = pm_[static_cast<std::size_t>(x)];
    if (!m.empty()) return m;
    m = detail::BitMatrix(N(), N());
    std::vector<char> any_valid(N(), 0);
    for (std::size_t i = 0; i < N(); ++i) {
      for (int r = 0; r < R(); ++r) any_valid[i] = any_valid[i] || valid(i, r);
    }
    detail::parallel_slices(N(), cfg_.jobs, [&](std::size_t b0, std::size_t b1, std::size_t) {
      for (std::size_t a = b0; a < b1; ++a) {
        if (!any_valid[a]) continue;
        auto* row = m.row(a);
        for (std::size_t b = 0; b < N(); ++b) {
          if (any_valid[b] && model_.pm(states_[a], states_[b], x)) detail::set_bit(row, b);
        }
      }
    });
    return m;
  }

  /// Pairs (a at x, b at y) that are jointly valid.
  const detail::BitMatrix& adjacency(int x, int y) {
    auto& slot = adj_[static_cast<std::size_t>(x * R() + y)];
    if (!slot.empty()) return slot;
    const auto& px = pm_rows(x);
    const auto& py = pm_rows(y);
    detail::BitMatrix m(N(), N());
    const bool both = cfg_.check_both_pre_merge_orientations;
    for (std::size_t a = 0; a < N(); ++a) {
      if (!valid(a, x)) continue;
      auto* row = m.row(a);
      const auto* pa = px.row(a);
      for (std::size_t b = 0; b < N(); ++b) {
        if (valid(b, y) && detail::test_bit(pa, b) && (!both || detail::test_bit(py.row(b), a))) detail::set_bit(row, b);
      }
    }
    slot = std::move(m);
    return slot;
  }

  void ensure_pairs() {
    ensure_states();
    if (!pairs_.empty()) return;
    pm_.assign(static_cast<std::size_t>(R()), {});
    adj_.assign(static_cast<std::size_t>(R() * R()), {});
    pairs_.assign(holders_.size(), {});
    for (std::size_t h = 0; h < holders_.size(); ++h) {
      const auto [me, q] = holders_[h];
      const auto& A = adjacency(me, q);
      std::vector<std::vector<Pair>> rows(N());
      detail::parallel_slices(N(), cfg_.jobs, [&](std::size_t b0, std::size_t b1, std::size_t) {
        for (std::size_t a = b0; a < b1; ++a) {
          const auto* row = A.row(a);
          for (std::size_t b = 0; b < N(); ++b) {
            if (!detail::test_bit(row, b)) continue;
            StateValue m = model_.merge_unchecked(states_[a], states_[b], me);
            rows[a].push_back(Pair{static_cast<std::int32_t>(a), static_cast<std::int32_t>(b), rank_of(m)});
          }
        }
      });
      for (auto& row : rows) pairs_[h].insert(pairs_[h].end(), row.begin(), row.end());
      stats_.valid_pairs += pairs_[h].size();
    }
  }

  void ensure_posts() {
    ensure_states();
    if (!post_.empty()) return;
    for (std::size_t op = 0; op < model_.operations().size(); ++op) {
      for (auto& args : model_.instances(op)) instances_.push_back(Instance{op, std::move(args)});
    }
    post_.assign(instances_.size(), std::vector<std::vector<std::int32_t>>(static_cast<std::size_t>(R())));
    for (std::size_t i = 0; i < instances_.size(); ++i) {
      const auto& inst = instances_[i];
      const auto& pre = model_.operations()[inst.op].precondition;
      for (int me = 0; me < R(); ++me) {
        auto& row = post_[i][static_cast<std::size_t>(me)];
        row.assign(N(), kDisabled);
        for (std::size_t s = 0; s < N(); ++s) {
          if (!pre.holds(states_[s], me, inst.args)) continue;
          const std::int32_t r = rank_of(model_.apply_unchecked(inst.op, inst.args, me, states_[s]));
          row[s] = r < 0 ? kEscapes : r;
          if (valid(s, me)) ++stats_.op_transitions;
        }
      }
    }
  }

  /// up_[me] row i = { j : states[i] <= states[j] at me }.
  void ensure_up_sets() {
    if (!up_.empty()) return;
    up_.assign(static_cast<std::size_t>(R()), {});
    for (int me = 0; me < R(); ++me) {
      auto& U = up_[static_cast<std::size_t>(me)];
      U = detail::BitMatrix(N(), N());
      detail::parallel_slices(N(), cfg_.jobs, [&](std::size_t b0, std::size_t b1, std::size_t) {
        for (std::size_t i = b0; i < b1; ++i) {
          auto* row = U.row(i);
          for (std::size_t j = 0; j < N(); ++j) {
            if (model_.le(states_[i], states_[j], me)) detail::set_bit(row, j);
          }
        }
      });
    }
  }

  /// { c : Pre_merge(m, c) at me, and Pre_merge(c, m) at q2 when both orientations are checked }.
  std::vector<std::uint64_t> mergeable_set(std::int32_t m, int me, int q2) const {
    std::vector<std::uint64_t> g((N() + 63) / 64, 0);
    const auto& sm = states_[static_cast<std::size_t>(m)];
    const bool both = cfg_.check_both_pre_merge_orientations;
    for (std::size_t c = 0; c < N(); ++c) {
      if (model_.pm(sm, states_[c], me) && (!both || model_.pm(states_[c], sm, q2))) detail::set_bit(g.data(), c);
    }
    return g;
  }

  void raw_antisymmetry_warning(StageResult& r, bool exhaustive) {
    std::uint64_t count = 0;
    std::optional<std::pair<std::size_t, std::size_t>> first;
    if (exhaustive) {
      const auto& U = up_[0];
      for (std::size_t i = 0; i < N(); ++i) {
        for (std::size_t j = i + 1; j < N(); ++j) {
          if (detail::test_bit(U.row(i), j) && detail::test_bit(U.row(j), i)) {
            ++count;
            if (!first) first.emplace(i, j);
          }
        }
      }
    } else {
      r.warnings.push_back("raw-domain antisymmetry not computed in sampled mode");
      return;
    }
    if (count) {
      const auto& L = model_.layout();
      r.warnings.push_back("comparison is not antisymmetric over the raw domain (" + std::to_string(count) +
                           " pairs, first: [" + format_state(L, states_[first->first]) + "] and [" +
                           format_state(L, states_[first->second]) + "]); laws are checked within the valid region");
    }
  }

  // ---- counterexamples --------------------------------------------------------

  void add_simple(StageResult& r, const std::string& id, const std::string& message) {
    Counterexample c;
    c.stage = r.stage;
    c.assertion_id = id;
    c.message = message;
    r.counterexamples.push_back(std::move(c));
    ++r.violation_counts[id];
  }

  void finish(StageResult& r, const detail::Collector& col) {
    for (const auto& [key, bucket] : col.buckets()) {
      const auto [assertion, op] = key;
      std::string name(kAssertionIds[static_cast<std::size_t>(assertion)]);
      if (op >= 0) name += "[" + model_.operations()[static_cast<std::size_t>(op)].spec->name + "]";
      r.violation_counts[name] = bucket.count;
      for (const auto& f : bucket.best) r.counterexamples.push_back(build(r.stage, assertion, f));
    }
  }

  Counterexample build(CheckStage stage, int assertion, const detail::Finding& f) const {
    Counterexample c;
    c.stage = stage;
    c.assertion_id = std::string(kAssertionIds[static_cast<std::size_t>(assertion)]);
    c.me = f.me;
    const bool both = cfg_.check_both_pre_merge_orientations;
    auto st = [&](std::int64_t i) { return states_[static_cast<std::size_t>(i)]; };
    auto fact = [](FactKind k, std::vector<std::string> roles, std::int32_t replica) {
      Fact x;
      x.kind = k;
      x.roles = std::move(roles);
      x.replica = replica;
      return x;
    };
    auto valid_pair = [&](const std::string& a, std::int32_t x, const std::string& b, std::int32_t y,
                          bool with_inv_a = true, bool with_inv_b = true) {
      if (with_inv_a) c.assumptions.push_back(fact(FactKind::Inv, {a}, x));
      if (with_inv_b) c.assumptions.push_back(fact(FactKind::Inv, {b}, y));
      c.assumptions.push_back(fact(FactKind::PreMerge, {a, b}, x));
      if (both) c.assumptions.push_back(fact(FactKind::PreMerge, {b, a}, y));
    };
    auto derive_op = [&]() {
      const auto& inst = instances_[static_cast<std::size_t>(f.inst)];
      c.operation = model_.operations()[inst.op].spec->name;
      c.args = inst.args;
      Fact pre = fact(FactKind::Pre, {"sigma"}, f.me);
      pre.op = c.operation;
      pre.args = inst.args;
      c.assumptions.push_back(pre);
      c.derived.push_back({"sigma_new", Derivation::Kind::Op, c.operation, inst.args, f.me, {"sigma"}});
      c.witnesses.push_back({"sigma_new", model_.apply_unchecked(inst.op, inst.args, f.me, st(f.a)), -1});
    };
    auto derive_merge = [&]() {
      c.derived.push_back({"sigma_new", Derivation::Kind::Merge, "", {}, f.me, {"sigma", "sigma'"}});
      c.witnesses.push_back({"sigma_new", model_.merge_unchecked(st(f.a), st(f.b), f.me), f.me});
    };
    auto pair_witnesses = [&]() {
      c.witnesses.push_back({"sigma", st(f.a), f.me});
      c.witnesses.push_back({"sigma'", st(f.b), f.q});
      valid_pair("sigma", f.me, "sigma'", f.q);
    };

    switch (assertion) {
      case kReflexivity:
        c.witnesses.push_back({"sigma", st(f.a), f.me});
        c.assumptions.push_back(fact(FactKind::Inv, {"sigma"}, f.me));
        c.assertion.push_back(fact(FactKind::Leq, {"sigma", "sigma"}, f.me));
        break;
      case kTransitivity:
        for (auto [role, idx] : {std::pair{"sigma1", f.a}, {"sigma2", f.b}, {"sigma3", f.c}}) {
          c.witnesses.push_back({role, st(idx), f.me});
          c.assumptions.push_back(fact(FactKind::Inv, {role}, f.me));
        }
        c.assumptions.push_back(fact(FactKind::Leq, {"sigma1", "sigma2"}, f.me));
        c.assumptions.push_back(fact(FactKind::Leq, {"sigma2", "sigma3"}, f.me));
        c.assertion.push_back(fact(FactKind::Leq, {"sigma1", "sigma3"}, f.me));
        break;
      case kAntisymmetry:
        pair_witnesses();
        c.assumptions.push_back(fact(FactKind::Leq, {"sigma", "sigma'"}, f.me));
        c.assumptions.push_back(fact(FactKind::Leq, {"sigma'", "sigma"}, f.me));
        c.assertion.push_back(fact(FactKind::Equal, {"sigma", "sigma'"}, f.me));
        break;
      case kInflation:
      case kOpClosure:
      case kOpInv:
        c.witnesses.push_back({"sigma", st(f.a), f.me});
        c.assumptions.push_back(fact(FactKind::Inv, {"sigma"}, f.me));
        derive_op();
        if (assertion == kInflation) c.assertion.push_back(fact(FactKind::Leq, {"sigma", "sigma_new"}, f.me));
        if (assertion == kOpClosure) c.assertion.push_back(fact(FactKind::Conforms, {"sigma_new"}, f.me));
        if (assertion == kOpInv) c.assertion.push_back(fact(FactKind::Inv, {"sigma_new"}, f.me));
        break;
      case kMergeClosure:
      case kUpperBound:
      case kMergeInv:
        pair_witnesses();
        derive_merge();
        if (assertion == kMergeClosure) c.assertion.push_back(fact(FactKind::Conforms, {"sigma_new"}, f.me));
        if (assertion == kUpperBound) {
          c.assertion.push_back(fact(FactKind::Leq, {"sigma", "sigma_new"}, f.me));
          c.assertion.push_back(fact(FactKind::Leq, {"sigma'", "sigma_new"}, f.me));
        }
        if (assertion == kMergeInv) c.assertion.push_back(fact(FactKind::Inv, {"sigma_new"}, f.me));
        break;
      case kLeast:
        pair_witnesses();
        c.witnesses.push_back({"sigma*", st(f.c), -1});
        c.assumptions.push_back(fact(FactKind::Leq, {"sigma", "sigma*"}, f.me));
        c.assumptions.push_back(fact(FactKind::Leq, {"sigma'", "sigma*"}, f.me));
        derive_merge();
        c.assertion.push_back(fact(FactKind::Leq, {"sigma_new", "sigma*"}, f.me));
        break;
      case kInitialInv:
        c.witnesses.push_back({"init", *model_.spec().initial_state, f.me});
        c.assertion.push_back(fact(FactKind::Inv, {"init"}, f.me));
        c.assertion.push_back(fact(FactKind::PreMerge, {"init", "init"}, f.me));
        break;
      case kOpPreMerge:
        pair_witnesses();
        derive_op();
        c.assertion.push_back(fact(FactKind::PreMerge, {"sigma_new", "sigma'"}, f.me));
        if (both) c.assertion.push_back(fact(FactKind::PreMerge, {"sigma'", "sigma_new"}, f.q));
        break;
      case kMergePreMerge:
        pair_witnesses();
        derive_merge();
        if (f.c < 0) {
          c.assertion.push_back(fact(FactKind::PreMerge, {"sigma_new", "sigma'"}, f.me));
          if (both) c.assertion.push_back(fact(FactKind::PreMerge, {"sigma'", "sigma_new"}, f.q));
        } else {
          c.witnesses.push_back({"sigma''", st(f.c), f.q2});
          valid_pair("sigma", f.me, "sigma''", f.q2, false, true);
          valid_pair("sigma'", f.q, "sigma''", f.q2, false, false);
          c.assertion.push_back(fact(FactKind::PreMerge, {"sigma_new", "sigma''"}, f.me));
          if (both) c.assertion.push_back(fact(FactKind::PreMerge, {"sigma''", "sigma_new"}, f.q2));
        }
        break;
      default: break;
    }

    RoleMap roles;
    for (const auto& w : c.witnesses) roles.emplace(w.role, w.state);
    for (const auto& a : c.assertion) {
      auto res = evaluate_fact(model_, a, roles);
      if (!res.holds) c.failed.push_back(std::move(res));
    }
    return c;
  }

  const Model& model_;
  CheckConfig cfg_;
  Statistics stats_;

  std::vector<StateValue> states_;
  std::vector<std::vector<char>> inv_;
  detail::BitMatrix valid_mask_;
  std::vector<std::uint64_t> valid_count_;
  std::vector<Holder> holders_;
  std::vector<detail::BitMatrix> pm_;
  std::vector<detail::BitMatrix> adj_;
  std::vector<std::vector<Pair>> pairs_;
  std::vector<Instance> instances_;
  std::vector<std::vector<std::vector<std::int32_t>>> post_;  // [instance][me][state]
  std::vector<detail::BitMatrix> up_;
};

inline StageResult check_stage(const Model& model, CheckStage stage, const CheckConfig& config = {}) {
  return Checker(model, config).run(stage);
}

/// Runs the stages in order. Model construction failures (undeclared names,
/// type errors, unbounded components) are WellFormedness failures.
inline CheckReport run_pipeline(ObjectSpec spec, const CheckConfig& config = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckReport report;
  report.spec = spec.name;
  report.bounds = spec.bounds;
  report.config = config;
  auto done = [&] {
    report.duration_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return report;
  };
  auto skip_rest = [&](std::size_t from, const std::string& why) {
    for (std::size_t i = from; i < kStages.size(); ++i) {
      StageResult s;
      s.stage = kStages[i];
      s.verdict = Verdict::Skipped;
      s.note = why;
      report.stages.push_back(std::move(s));
    }
  };

  std::unique_ptr<Model> model;
  try {
    model = std::make_unique<Model>(std::move(spec));
  } catch (const DomainTooLarge&) {
    throw;
  } catch (const Error& e) {
    StageResult wf;
    wf.stage = CheckStage::WellFormedness;
    wf.verdict = Verdict::Fail;
    Counterexample c;
    c.stage = CheckStage::WellFormedness;
    std::string kind(to_string(e.kind()));
    std::string id = "wellformed.";
    for (char ch : kind) {
      if (ch >= 'A' && ch <= 'Z') {
        if (id.back() != '.') id += '_';
        id += static_cast<char>(ch - 'A' + 'a');
      } else {
        id += ch;
      }
    }
    c.assertion_id = id;
    c.message = e.what();
    wf.violation_counts[id] = 1;
    wf.counterexamples.push_back(std::move(c));
    report.stages.push_back(std::move(wf));
    skip_rest(1, "model does not compile");
    return done();
  }

  Checker checker(*model, config);
  for (std::size_t i = 0; i < kStages.size(); ++i) {
    const CheckStage s = kStages[i];
    if (config.only_stage && *config.only_stage != s) {
      StageResult sk;
      sk.stage = s;
      sk.verdict = Verdict::Skipped;
      sk.note = "not requested";
      report.stages.push_back(std::move(sk));
      continue;
    }
    StageResult r = checker.run(s);
    const Verdict v = r.verdict;
    report.stages.push_back(std::move(r));
    if (v == Verdict::Aborted) {
      skip_rest(i + 1, "previous stage aborted");
      break;
    }
    if (v == Verdict::Fail && config.stop_on_first_failure && !config.only_stage) {
      skip_rest(i + 1, "previous stage failed");
      break;
    }
  }
  report.statistics = checker.statistics();
  return done();
}

}  // namespace statesafe
