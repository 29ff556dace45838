#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "statesafe/error.hpp"
#include "statesafe/eval.hpp"
#include "statesafe/expr.hpp"
#include "statesafe/schema.hpp"

namespace statesafe {

/// Index of a replica in the replica domain.
enum class ReplicaId : std::int32_t {};

constexpr ReplicaId replica(std::int32_t i) { return static_cast<ReplicaId>(i); }
constexpr std::int32_t index_of(ReplicaId r) { return static_cast<std::int32_t>(r); }

using Args = std::vector<std::int32_t>;

using EffectFn = std::function<StateValue(const StateValue& state, std::span<const std::int32_t> args, std::int32_t me)>;
using MergeFn = std::function<StateValue(const StateValue& local, const StateValue& remote, std::int32_t me)>;

/// One operation parameter. Exactly one of `domain` (an id domain) or
/// `range_key` (an integer range from the bounds) is set.
struct ParamSpec {
  std::string name;
  std::string domain;
  std::string range_key;
};

struct OperationSpec {
  std::string name;
  std::vector<ParamSpec> params;
  Predicate precondition;
  EffectFn effect;
  std::string effect_text;
};

/// A complete replicated-object description. Optional parts stay empty when
/// the author omitted them; the compliance stage reports those.
struct ObjectSpec {
  std::string name;
  std::string description;
  StateSchema schema;
  DomainBounds bounds;
  TableMap tables;
  std::optional<StateValue> initial_state;
  std::optional<Predicate> leq;
  std::vector<OperationSpec> operations;
  MergeFn merge;
  std::string merge_text;
  std::optional<Predicate> pre_merge;
  std::optional<Predicate> invariant;
};

/// An object spec with its schema resolved and predicates compiled.
class Model {
 public:
  struct CompiledOperation {
    const OperationSpec* spec = nullptr;
    std::vector<ParamDecl> params;
    CompiledPredicate precondition;
  };

  explicit Model(ObjectSpec spec) : spec_(std::move(spec)), layout_(Layout::resolve(spec_.schema, spec_.bounds)) {
    if (spec_.leq) leq_ = compile(*spec_.leq, Arity::Binary);
    if (spec_.pre_merge) pre_merge_ = compile(*spec_.pre_merge, Arity::Binary);
    if (spec_.invariant) invariant_ = compile(*spec_.invariant, Arity::Unary);
    for (const auto& op : spec_.operations) {
      CompiledOperation c;
      c.spec = &op;
      c.params = param_decls(op);
      c.precondition = CompiledPredicate::compile(op.precondition, layout_, spec_.tables, Arity::Unary, c.params);
      ops_.push_back(std::move(c));
    }
  }

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ObjectSpec& spec() const noexcept { return spec_; }
  const Layout& layout() const noexcept { return layout_; }
  const std::vector<CompiledOperation>& operations() const noexcept { return ops_; }
  int replica_count() const { return layout_.replica_count(); }

  bool has_leq() const { return leq_.has_value(); }
  bool has_pre_merge() const { return pre_merge_.has_value(); }
  bool has_invariant() const { return invariant_.has_value(); }
  const CompiledPredicate& leq_predicate() const { return *leq_; }
  const CompiledPredicate& pre_merge_predicate() const { return *pre_merge_; }
  const CompiledPredicate& invariant_predicate() const { return *invariant_; }

  std::vector<ParamDecl> param_decls(const OperationSpec& op) const {
    std::vector<ParamDecl> out;
    for (const auto& p : op.params) {
      ParamDecl d;
      d.name = p.name;
      if (!p.domain.empty()) {
        int dom = layout_.find_domain(p.domain);
        if (dom < 0) throw Error(ErrorKind::UnknownIdentifier, op.name + ": parameter '" + p.name + "' has undeclared domain '" + p.domain + "'");
        d.type = {ValueType::Id, dom};
      } else {
        if (!spec_.bounds.int_ranges.count(p.range_key)) {
          throw Error(ErrorKind::UnboundedComponent, op.name + ": parameter '" + p.name + "' has no range '" + p.range_key + "'");
        }
        d.type = {ValueType::Int, -1};
        d.range_key = p.range_key;
      }
      out.push_back(std::move(d));
    }
    return out;
  }

  CompiledPredicate compile(const Predicate& p, Arity arity, std::vector<ParamDecl> params = {}) const {
    return CompiledPredicate::compile(p, layout_, spec_.tables, arity, std::move(params));
  }

  int find_operation(std::string_view name) const {
    for (std::size_t i = 0; i < ops_.size(); ++i) {
      if (ops_[i].spec->name == name) return static_cast<int>(i);
    }
    return -1;
  }

  /// Every parameter vector of an operation, in declaration-order
  /// lexicographic order.
  std::vector<Args> instances(std::size_t op) const {
    const auto& params = ops_.at(op).params;
    std::vector<std::pair<std::int32_t, std::int32_t>> ranges;
    for (const auto& p : params) {
      if (p.type.type == ValueType::Id) {
        ranges.emplace_back(0, layout_.domain_size(p.type.aux) - 1);
      } else {
        const IntRange& r = spec_.bounds.int_ranges.at(p.range_key);
        ranges.emplace_back(r.min, r.max);
      }
    }
    std::vector<Args> out;
    Args cur;
    for (const auto& r : ranges) cur.push_back(r.first);
    while (true) {
      out.push_back(cur);
      std::size_t k = ranges.size();
      for (; k > 0; --k) {
        if (cur[k - 1] < ranges[k - 1].second) {
          ++cur[k - 1];
          break;
        }
        cur[k - 1] = ranges[k - 1].first;
      }
      if (k == 0) return out;
    }
  }

  // ---- checked public surface -----------------------------------------------

  bool leq(const StateValue& a, const StateValue& b, ReplicaId me = replica(0)) const {
    require_conforming(a);
    require_conforming(b);
    require_part(leq_.has_value(), "comparison function");
    return leq_->holds(a, b, index_of(me));
  }

  bool precondition_holds(std::size_t op, const Args& args, ReplicaId me, const StateValue& s) const {
    return ops_[op].precondition.holds(s, index_of(me), args);
  }

  /// Applies an operation at origin replica `me`. The input is not modified.
  StateValue apply_op(std::string_view op_name, const Args& args, ReplicaId me, const StateValue& s) const {
    int op = find_operation(op_name);
    if (op < 0) throw Error(ErrorKind::UnknownOperation, "no operation '" + std::string(op_name) + "'");
    require_conforming(s);
    check_args(static_cast<std::size_t>(op), args, me);
    const auto& c = ops_[static_cast<std::size_t>(op)];
    if (!c.precondition.holds(s, index_of(me), args)) {
      auto r = c.precondition.evaluate(layout_, s.data(), nullptr, index_of(me), args);
      throw PreconditionViolated(c.spec->name, r.failing());
    }
    return c.spec->effect(s, args, index_of(me));
  }

  /// Effect without the precondition gate; used by the checker after it has
  /// evaluated the precondition itself.
  StateValue apply_unchecked(std::size_t op, const Args& args, std::int32_t me, const StateValue& s) const {
    return ops_[op].spec->effect(s, args, me);
  }

  StateValue merge_states(const StateValue& local, const StateValue& remote, ReplicaId me) const {
    require_conforming(local);
    require_conforming(remote);
    require_part(static_cast<bool>(spec_.merge), "merge");
    return spec_.merge(local, remote, index_of(me));
  }

  StateValue merge_unchecked(const StateValue& local, const StateValue& remote, std::int32_t me) const {
    return spec_.merge(local, remote, me);
  }

  PredicateResult eval_predicate(const CompiledPredicate& p, const StateValue& s, const StateValue* s2, ReplicaId me,
                                 const Args& args = {}) const {
    require_conforming(s);
    if (p.arity() == Arity::Binary) {
      if (!s2) throw Error(ErrorKind::SchemaMismatch, "binary predicate needs a remote state");
      require_conforming(*s2);
    } else if (s2) {
      throw Error(ErrorKind::SchemaMismatch, "unary predicate given two states");
    }
    return p.evaluate(layout_, s.data(), s2 ? s2->data() : nullptr, index_of(me), args);
  }

  /// Compiles `p` against this model first; undeclared names raise
  /// UnknownIdentifier.
  PredicateResult eval_predicate(const Predicate& p, Arity arity, const StateValue& s, const StateValue* s2,
                                 ReplicaId me) const {
    return eval_predicate(compile(p, arity), s, s2, me);
  }

  PredicateResult eval_invariant(const StateValue& s, ReplicaId me) const {
    require_part(invariant_.has_value(), "invariant");
    return eval_predicate(*invariant_, s, nullptr, me);
  }

  PredicateResult eval_pre_merge(const StateValue& local, const StateValue& remote, ReplicaId me) const {
    require_part(pre_merge_.has_value(), "merge precondition");
    return eval_predicate(*pre_merge_, local, &remote, me);
  }

  PredicateResult eval_precondition(std::string_view op_name, const Args& args, ReplicaId me, const StateValue& s) const {
    int op = find_operation(op_name);
    if (op < 0) throw Error(ErrorKind::UnknownOperation, "no operation '" + std::string(op_name) + "'");
    check_args(static_cast<std::size_t>(op), args, me);
    return eval_predicate(ops_[static_cast<std::size_t>(op)].precondition, s, nullptr, me, args);
  }

  // ---- unchecked fast paths for enumeration loops ---------------------------

  bool inv(const StateValue& s, std::int32_t me) const { return !invariant_ || invariant_->holds(s, me); }
  bool pm(const StateValue& l, const StateValue& r, std::int32_t me) const { return !pre_merge_ || pre_merge_->holds(l, r, me); }
  bool le(const StateValue& a, const StateValue& b, std::int32_t me) const { return leq_->holds(a, b, me); }

  void check_args(std::size_t op, const Args& args, ReplicaId me) const {
    const auto& c = ops_[op];
    if (index_of(me) < 0 || index_of(me) >= replica_count()) throw Error(ErrorKind::BadParams, "replica out of range");
    if (args.size() != c.params.size()) {
      throw Error(ErrorKind::BadParams, c.spec->name + " takes " + std::to_string(c.params.size()) + " parameters");
    }
    for (std::size_t i = 0; i < args.size(); ++i) {
      const auto& p = c.params[i];
      std::int32_t lo = 0;
      std::int32_t hi = 0;
      if (p.type.type == ValueType::Id) {
        hi = layout_.domain_size(p.type.aux) - 1;
      } else {
        lo = spec_.bounds.int_ranges.at(p.range_key).min;
        hi = spec_.bounds.int_ranges.at(p.range_key).max;
      }
      if (args[i] < lo || args[i] > hi) {
        throw Error(ErrorKind::BadParams, c.spec->name + ": parameter '" + p.name + "' out of its domain");
      }
    }
  }

  std::string format_args(std::size_t op, const Args& args) const {
    const auto& c = ops_[op];
    std::string s = c.spec->name + "(";
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (i) s += ", ";
      s += c.params[i].name + "=" + format_param(c.params[i], args[i]);
    }
    return s + ")";
  }

  std::string format_param(const ParamDecl& p, std::int32_t v) const {
    return p.type.type == ValueType::Id ? layout_.label(p.type.aux, v) : std::to_string(v);
  }

 private:
  void require_conforming(const StateValue& s) const {
    if (!layout_.conforms(s)) throw Error(ErrorKind::SchemaMismatch, "state does not conform to the schema of " + spec_.name);
  }

  static void require_part(bool present, const char* what) {
    if (!present) throw Error(ErrorKind::SchemaMismatch, std::string("spec has no ") + what);
  }

  ObjectSpec spec_;
  Layout layout_;
  std::optional<CompiledPredicate> leq_;
  std::optional<CompiledPredicate> pre_merge_;
  std::optional<CompiledPredicate> invariant_;
  std::vector<CompiledOperation> ops_;
};

}  // namespace statesafe
