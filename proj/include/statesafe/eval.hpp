#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "statesafe/error.hpp"
#include "statesafe/expr.hpp"
#include "statesafe/schema.hpp"

namespace statesafe {

/// A total function from one id domain to another, fixed per bounds.
struct StaticTable {
  std::string from_domain;
  std::string to_domain;
  std::vector<std::int32_t> values;
};

using TableMap = std::map<std::string, StaticTable>;

enum class ValueType { Bool, Int, Level, Ref, Id };

struct TypeInfo {
  ValueType type = ValueType::Bool;
  int aux = -1;  // enum index for Level, domain for Ref/Id; -1 for untyped bottom
};

struct ParamDecl {
  std::string name;
  TypeInfo type;
  std::string range_key;  // Int params draw from this DomainBounds range
};

enum class Arity { Unary, Binary };

/// Values visible to a predicate during evaluation.
struct EvalContext {
  const std::int32_t* local = nullptr;
  const std::int32_t* remote = nullptr;
  std::int32_t me = 0;
  std::int32_t* vars = nullptr;
};

/// One expression lowered to a flat node array with resolved slot offsets.
class CompiledExpr {
 public:
  struct Node {
    ExprOp op = ExprOp::BoolLit;
    std::int32_t value = 0;  // literal, var slot, table index, or leaf base offset
    int a = -1;
    int b = -1;
    TypeInfo type;
    Side side = Side::Local;
    std::int32_t leaf_lo = 0;
    int domain_size = 0;
    int first_step = 0;  // Access: range into steps_
    int step_count = 0;
    std::string label;   // bound-variable name for explanations
  };

  struct Step {
    int index_node;
    std::uint32_t stride;
  };

  std::int32_t eval(EvalContext& ctx) const { return eval(root_, ctx); }

  std::int32_t eval(int i, EvalContext& ctx) const {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    switch (n.op) {
      case ExprOp::BoolLit:
      case ExprOp::IntLit:
      case ExprOp::Level: return n.value;
      case ExprOp::Bottom: return kBottom;
      case ExprOp::Me: return ctx.me;
      case ExprOp::Arg: return ctx.vars[n.value];
      case ExprOp::Access: {
        std::int64_t off = n.value;
        for (int s = 0; s < n.step_count; ++s) {
          const Step& st = steps_[static_cast<std::size_t>(n.first_step + s)];
          std::int32_t k = eval(st.index_node, ctx);
          if (k < 0) return n.leaf_lo;
          off += static_cast<std::int64_t>(k) * st.stride;
        }
        const std::int32_t* base = n.side == Side::Local ? ctx.local : ctx.remote;
        return base[off];
      }
      case ExprOp::Table: {
        std::int32_t k = eval(n.a, ctx);
        if (k < 0) return kBottom;
        return tables_[static_cast<std::size_t>(n.value)][static_cast<std::size_t>(k)];
      }
      case ExprOp::Not: return eval(n.a, ctx) ? 0 : 1;
      case ExprOp::And: return eval(n.a, ctx) && eval(n.b, ctx);
      case ExprOp::Or: return eval(n.a, ctx) || eval(n.b, ctx);
      case ExprOp::Implies: return !eval(n.a, ctx) || eval(n.b, ctx);
      case ExprOp::Eq: return eval(n.a, ctx) == eval(n.b, ctx);
      case ExprOp::Ne: return eval(n.a, ctx) != eval(n.b, ctx);
      case ExprOp::Lt: return eval(n.a, ctx) < eval(n.b, ctx);
      case ExprOp::Le: return eval(n.a, ctx) <= eval(n.b, ctx);
      case ExprOp::Gt: return eval(n.a, ctx) > eval(n.b, ctx);
      case ExprOp::Ge: return eval(n.a, ctx) >= eval(n.b, ctx);
      case ExprOp::Add: return eval(n.a, ctx) + eval(n.b, ctx);
      case ExprOp::Sub: return eval(n.a, ctx) - eval(n.b, ctx);
      case ExprOp::Max: return std::max(eval(n.a, ctx), eval(n.b, ctx));
      case ExprOp::Min: return std::min(eval(n.a, ctx), eval(n.b, ctx));
      case ExprOp::Forall:
        for (std::int32_t v = 0; v < n.domain_size; ++v) {
          ctx.vars[n.value] = v;
          if (!eval(n.a, ctx)) return 0;
        }
        return 1;
      case ExprOp::Exists:
        for (std::int32_t v = 0; v < n.domain_size; ++v) {
          ctx.vars[n.value] = v;
          if (eval(n.a, ctx)) return 1;
        }
        return 0;
      case ExprOp::Named: return eval(n.a, ctx);
    }
    return 0;
  }

  /// Values of the root's immediate sub-expressions, or the first falsifying
  /// binding for a universal quantifier.
  std::string explain(EvalContext& ctx, const Layout& layout) const { return explain(root_, ctx, layout, 2); }

  int var_count() const noexcept { return var_count_; }
  bool uses_me() const noexcept { return uses_me_; }
  bool uses_remote() const noexcept { return uses_remote_; }

 private:
  friend class ExprCompiler;

  std::string show(std::int32_t v, const TypeInfo& t, const Layout& layout) const {
    switch (t.type) {
      case ValueType::Bool: return v ? "true" : "false";
      case ValueType::Int: return std::to_string(v);
      case ValueType::Level: return layout.enums().at(static_cast<std::size_t>(t.aux)).at(static_cast<std::size_t>(v));
      case ValueType::Ref:
      case ValueType::Id: return t.aux < 0 ? "⊥" : layout.label(t.aux, v);
    }
    return "?";
  }

  std::string explain(int i, EvalContext& ctx, const Layout& layout, int depth) const {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    auto kid = [&](int k) {
      const Node& c = nodes_[static_cast<std::size_t>(k)];
      return show(eval(k, ctx), c.type, layout);
    };
    switch (n.op) {
      case ExprOp::Named:
        return depth > 0 ? explain(n.a, ctx, layout, depth) : "";
      case ExprOp::Not: return "operand=" + kid(n.a);
      case ExprOp::Forall:
      case ExprOp::Exists: {
        bool want = n.op == ExprOp::Forall ? false : true;
        for (std::int32_t v = 0; v < n.domain_size; ++v) {
          ctx.vars[n.value] = v;
          if (static_cast<bool>(eval(n.a, ctx)) == want) {
            std::string s = n.label + "=" + show(v, TypeInfo{ValueType::Id, n.type.aux}, layout);
            if (depth > 1) {
              std::string inner = explain(n.a, ctx, layout, depth - 1);
              if (!inner.empty()) s += " (" + inner + ")";
            }
            return (n.op == ExprOp::Forall ? "fails at " : "holds at ") + s;
          }
        }
        return n.op == ExprOp::Forall ? "holds for all" : "no witness";
      }
      default:
        if (n.a >= 0 && n.b >= 0)
          return "lhs=" + kid(n.a) + ", rhs=" + kid(n.b);
        if (n.a >= 0) return "arg=" + kid(n.a);
        return "";
    }
  }

  std::vector<Node> nodes_;
  std::vector<Step> steps_;
  std::vector<std::vector<std::int32_t>> tables_;
  int root_ = -1;
  int var_count_ = 0;
  bool uses_me_ = false;
  bool uses_remote_ = false;
};

/// Lowers expressions against a layout; reports undeclared names as
/// UnknownIdentifier and ill-typed terms as SchemaMismatch.
class ExprCompiler {
 public:
  ExprCompiler(const Layout& layout, const TableMap& tables, Arity arity, std::vector<ParamDecl> params)
      : layout_(layout), tables_(tables), arity_(arity), params_(std::move(params)) {}

  CompiledExpr compile(const Expr& e) {
    out_ = CompiledExpr{};
    scope_.clear();
    for (std::size_t i = 0; i < params_.size(); ++i) scope_.push_back({params_[i].name, static_cast<int>(i), params_[i].type});
    next_var_ = static_cast<int>(params_.size());
    max_var_ = next_var_;
    out_.root_ = lower(*e.node());
    if (out_.nodes_[static_cast<std::size_t>(out_.root_)].type.type != ValueType::Bool) {
      throw Error(ErrorKind::SchemaMismatch, "predicate '" + to_string(e) + "' is not boolean");
    }
    out_.var_count_ = std::max(max_var_, 1);
    return std::move(out_);
  }

 private:
  struct Binding {
    std::string name;
    int slot;
    TypeInfo type;
  };

  int push(CompiledExpr::Node n) {
    out_.nodes_.push_back(std::move(n));
    return static_cast<int>(out_.nodes_.size()) - 1;
  }

  const TypeInfo& type_of(int i) const { return out_.nodes_[static_cast<std::size_t>(i)].type; }

  static bool id_like(const TypeInfo& t) { return t.type == ValueType::Ref || t.type == ValueType::Id; }

  void expect(bool ok, const ExprNode& n, const char* what) const {
    if (!ok) throw Error(ErrorKind::SchemaMismatch, std::string(what) + " in '" + to_string(n) + "'");
  }

  bool comparable(const TypeInfo& x, const TypeInfo& y) const {
    if (id_like(x) && id_like(y)) return x.aux < 0 || y.aux < 0 || x.aux == y.aux;
    if (x.type != y.type) return false;
    if (x.type == ValueType::Level) return x.aux == y.aux;
    return true;
  }

  int lower(const ExprNode& n) {
    CompiledExpr::Node c;
    c.op = n.op;
    switch (n.op) {
      case ExprOp::BoolLit:
        c.value = n.value ? 1 : 0;
        c.type = {ValueType::Bool, -1};
        return push(c);
      case ExprOp::IntLit:
        c.value = static_cast<std::int32_t>(n.value);
        c.type = {ValueType::Int, -1};
        return push(c);
      case ExprOp::Level: {
        int found_enum = -1;
        const auto& enums = layout_.enums();
        for (std::size_t e = 0; e < enums.size(); ++e) {
          for (std::size_t l = 0; l < enums[e].size(); ++l) {
            if (enums[e][l] == n.name) {
              if (found_enum >= 0 && found_enum != static_cast<int>(e)) {
                throw Error(ErrorKind::SchemaMismatch, "ambiguous level '" + n.name + "'");
              }
              found_enum = static_cast<int>(e);
              c.value = static_cast<std::int32_t>(l);
            }
          }
        }
        if (found_enum < 0) throw Error(ErrorKind::UnknownIdentifier, "unknown level '" + n.name + "'");
        c.type = {ValueType::Level, found_enum};
        return push(c);
      }
      case ExprOp::Bottom:
        c.type = {ValueType::Ref, -1};
        return push(c);
      case ExprOp::Me:
        out_.uses_me_ = true;
        c.type = {ValueType::Id, 0};
        return push(c);
      case ExprOp::Arg: {
        for (auto it = scope_.rbegin(); it != scope_.rend(); ++it) {
          if (it->name == n.name) {
            c.value = it->slot;
            c.type = it->type;
            return push(c);
          }
        }
        throw Error(ErrorKind::UnknownIdentifier, "unknown variable '" + n.name + "'");
      }
      case ExprOp::Access: return lower_access(n);
      case ExprOp::Table: {
        auto it = tables_.find(n.name);
        if (it == tables_.end()) throw Error(ErrorKind::UnknownIdentifier, "unknown table '" + n.name + "'");
        int from = layout_.find_domain(it->second.from_domain);
        int to = layout_.find_domain(it->second.to_domain);
        if (from < 0 || to < 0) throw Error(ErrorKind::UnknownIdentifier, "table '" + n.name + "' uses undeclared domain");
        if (static_cast<int>(it->second.values.size()) != layout_.domain_size(from)) {
          throw Error(ErrorKind::SchemaMismatch, "table '" + n.name + "' size does not match its domain");
        }
        int k = lower(*n.kids[0]);
        expect(id_like(type_of(k)) && type_of(k).aux == from, n, "table key of wrong domain");
        c.a = k;
        c.value = static_cast<std::int32_t>(out_.tables_.size());
        out_.tables_.push_back(it->second.values);
        c.type = {ValueType::Id, to};
        return push(c);
      }
      case ExprOp::Not: {
        c.a = lower(*n.kids[0]);
        expect(type_of(c.a).type == ValueType::Bool, n, "negation of non-boolean");
        c.type = {ValueType::Bool, -1};
        return push(c);
      }
      case ExprOp::And:
      case ExprOp::Or:
      case ExprOp::Implies: {
        c.a = lower(*n.kids[0]);
        c.b = lower(*n.kids[1]);
        expect(type_of(c.a).type == ValueType::Bool && type_of(c.b).type == ValueType::Bool, n, "connective over non-boolean");
        c.type = {ValueType::Bool, -1};
        return push(c);
      }
      case ExprOp::Eq:
      case ExprOp::Ne:
      case ExprOp::Lt:
      case ExprOp::Le:
      case ExprOp::Gt:
      case ExprOp::Ge: {
        c.a = lower(*n.kids[0]);
        c.b = lower(*n.kids[1]);
        expect(comparable(type_of(c.a), type_of(c.b)), n, "incomparable operands");
        c.type = {ValueType::Bool, -1};
        return push(c);
      }
      case ExprOp::Add:
      case ExprOp::Sub:
      case ExprOp::Max:
      case ExprOp::Min: {
        c.a = lower(*n.kids[0]);
        c.b = lower(*n.kids[1]);
        expect(type_of(c.a).type == ValueType::Int && type_of(c.b).type == ValueType::Int, n, "arithmetic over non-integers");
        c.type = {ValueType::Int, -1};
        return push(c);
      }
      case ExprOp::Forall:
      case ExprOp::Exists: {
        int d = layout_.find_domain(n.domain);
        if (d < 0) throw Error(ErrorKind::UnknownIdentifier, "unknown domain '" + n.domain + "'");
        int slot = next_var_++;
        max_var_ = std::max(max_var_, next_var_);
        scope_.push_back({n.name, slot, {ValueType::Id, d}});
        c.a = lower(*n.kids[0]);
        scope_.pop_back();
        --next_var_;
        expect(type_of(c.a).type == ValueType::Bool, n, "quantifier body is not boolean");
        c.value = slot;
        c.domain_size = layout_.domain_size(d);
        c.type = {ValueType::Bool, d};
        c.label = n.name;
        return push(c);
      }
      case ExprOp::Named: {
        c.a = lower(*n.kids[0]);
        c.type = type_of(c.a);
        return push(c);
      }
    }
    throw Error(ErrorKind::SchemaMismatch, "unsupported expression");
  }

  int lower_access(const ExprNode& n) {
    if (n.side == Side::Remote) {
      if (arity_ == Arity::Unary) {
        throw Error(ErrorKind::SchemaMismatch, "unary predicate reads remote state in '" + to_string(n) + "'");
      }
      out_.uses_remote_ = true;
    }
    const ResolvedNode* node = layout_.root().field(n.name);
    if (!node) throw Error(ErrorKind::UnknownIdentifier, "unknown component '" + n.name + "'");
    std::vector<CompiledExpr::Step> steps;
    for (const auto& st : n.steps) {
      if (st.index) {
        if (node->kind != ComponentSchema::Kind::FixedMap) {
          throw Error(ErrorKind::SchemaMismatch, "indexing a non-map in '" + to_string(n) + "'");
        }
        int k = lower(*st.index);
        const TypeInfo& kt = type_of(k);
        expect(id_like(kt) && kt.aux == node->domain, n, "map key of wrong domain");
        const ResolvedNode& el = node->element.front();
        steps.push_back({k, static_cast<std::uint32_t>(el.width)});
        node = &el;
      } else {
        const ResolvedNode* next = node->field(st.field);
        if (!next) throw Error(ErrorKind::UnknownIdentifier, "unknown field '" + st.field + "' in '" + to_string(n) + "'");
        node = next;
      }
    }
    if (node->width != 1 || node->kind == ComponentSchema::Kind::Tuple || node->kind == ComponentSchema::Kind::FixedMap) {
      throw Error(ErrorKind::SchemaMismatch, "'" + to_string(n) + "' does not address a single value");
    }
    const LeafInfo& leaf = layout_.leaves()[node->offset];
    CompiledExpr::Node c;
    c.op = ExprOp::Access;
    c.side = n.side;
    c.value = static_cast<std::int32_t>(node->offset);  // key-0 slot; steps add the rest
    c.leaf_lo = leaf.lo;
    c.first_step = static_cast<int>(out_.steps_.size());
    c.step_count = static_cast<int>(steps.size());
    for (const auto& s : steps) out_.steps_.push_back(s);
    switch (leaf.kind) {
      case ComponentSchema::Kind::Flag: c.type = {ValueType::Bool, -1}; break;
      case ComponentSchema::Kind::BoundedInt: c.type = {ValueType::Int, -1}; break;
      case ComponentSchema::Kind::OrderedEnum: c.type = {ValueType::Level, leaf.enum_index}; break;
      case ComponentSchema::Kind::OptionalRef: c.type = {ValueType::Ref, leaf.domain}; break;
      default: throw Error(ErrorKind::SchemaMismatch, "not a leaf");
    }
    return push(c);
  }

  const Layout& layout_;
  const TableMap& tables_;
  Arity arity_;
  std::vector<ParamDecl> params_;
  std::vector<Binding> scope_;
  int next_var_ = 0;
  int max_var_ = 0;
  CompiledExpr out_;
};

struct PredicateResult {
  bool holds = true;
  std::vector<ClauseResult> clauses;

  std::vector<ClauseResult> failing() const {
    std::vector<ClauseResult> f;
    for (const auto& c : clauses) {
      if (!c.holds) f.push_back(c);
    }
    return f;
  }
};

class CompiledPredicate {
 public:
  CompiledPredicate() = default;

  static CompiledPredicate compile(const Predicate& p, const Layout& layout, const TableMap& tables, Arity arity,
                                   std::vector<ParamDecl> params = {}) {
    CompiledPredicate out;
    out.arity_ = arity;
    ExprCompiler comp(layout, tables, arity, std::move(params));
    for (const auto& c : p.conjuncts) {
      out.clauses_.push_back(comp.compile(c));
      out.texts_.push_back(to_string(c));
      out.var_count_ = std::max(out.var_count_, out.clauses_.back().var_count());
      out.uses_me_ = out.uses_me_ || out.clauses_.back().uses_me();
    }
    out.source_ = p;
    return out;
  }

  bool holds(const std::int32_t* local, const std::int32_t* remote, std::int32_t me,
             std::span<const std::int32_t> args = {}) const {
    std::int32_t vars[kMaxVars];
    setup(vars, args);
    EvalContext ctx{local, remote, me, vars};
    for (const auto& c : clauses_) {
      if (!c.eval(ctx)) return false;
    }
    return true;
  }

  bool holds(const StateValue& s, std::int32_t me, std::span<const std::int32_t> args = {}) const {
    return holds(s.data(), nullptr, me, args);
  }

  bool holds(const StateValue& s, const StateValue& r, std::int32_t me, std::span<const std::int32_t> args = {}) const {
    return holds(s.data(), r.data(), me, args);
  }

  /// Evaluates every conjunct; failing conjuncts carry an explanation.
  PredicateResult evaluate(const Layout& layout, const std::int32_t* local, const std::int32_t* remote, std::int32_t me,
                           std::span<const std::int32_t> args = {}) const {
    std::int32_t vars[kMaxVars];
    setup(vars, args);
    EvalContext ctx{local, remote, me, vars};
    PredicateResult r;
    for (std::size_t i = 0; i < clauses_.size(); ++i) {
      ClauseResult cr;
      cr.text = texts_[i];
      cr.holds = clauses_[i].eval(ctx) != 0;
      if (!cr.holds) {
        cr.detail = clauses_[i].explain(ctx, layout);
        r.holds = false;
      }
      r.clauses.push_back(std::move(cr));
    }
    return r;
  }

  Arity arity() const noexcept { return arity_; }
  bool uses_me() const noexcept { return uses_me_; }
  const Predicate& source() const noexcept { return source_; }
  const std::vector<std::string>& texts() const noexcept { return texts_; }

 private:
  static constexpr int kMaxVars = 32;

  void setup(std::int32_t* vars, std::span<const std::int32_t> args) const {
    if (var_count_ > kMaxVars) throw Error(ErrorKind::SchemaMismatch, "too many variables in predicate");
    for (std::size_t i = 0; i < args.size() && i < static_cast<std::size_t>(kMaxVars); ++i) vars[i] = args[i];
  }

  Arity arity_ = Arity::Unary;
  std::vector<CompiledExpr> clauses_;
  std::vector<std::string> texts_;
  Predicate source_;
  int var_count_ = 0;
  bool uses_me_ = false;
};

}  // namespace statesafe
