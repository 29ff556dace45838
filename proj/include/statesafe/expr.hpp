#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace statesafe {

/// Which operand of a binary predicate a component access reads. Local is
/// the unprimed state, Remote the primed one.
enum class Side { Local, Remote };

enum class ExprOp {
  BoolLit,
  IntLit,
  Level,
  Bottom,
  Me,
  Arg,
  Access,
  Table,
  Not,
  And,
  Or,
  Implies,
  Eq,
  Ne,
  Lt,
  Le,
  Gt,
  Ge,
  Add,
  Sub,
  Max,
  Min,
  Forall,
  Exists,
  Named,
};

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

struct AccessStep {
  std::string field;  // empty for an index step
  ExprPtr index;
};

struct ExprNode {
  ExprOp op = ExprOp::BoolLit;
  std::int64_t value = 0;
  std::string name;    // component, level, arg, table, bound variable or label
  std::string domain;  // quantifier domain
  Side side = Side::Local;
  std::vector<AccessStep> steps;
  std::vector<ExprPtr> kids;
};

/// Value handle for building predicate bodies:
///   forall("b", "bids", implies(local("bids")[arg("b")].dot("placed"), ...))
class Expr {
 public:
  Expr(int v) : node_(make(ExprOp::IntLit, v)) {}  // NOLINT: literals read naturally in predicates
  explicit Expr(ExprPtr node) : node_(std::move(node)) {}

  const ExprPtr& node() const noexcept { return node_; }
  ExprOp op() const noexcept { return node_->op; }

  /// Map lookup by an id-valued expression.
  Expr operator[](const Expr& key) const { return step(AccessStep{"", key.node_}); }
  Expr dot(std::string field) const { return step(AccessStep{std::move(field), nullptr}); }

  static ExprPtr make(ExprOp op, std::int64_t value = 0) {
    auto n = std::make_shared<ExprNode>();
    n->op = op;
    n->value = value;
    return n;
  }

 private:
  Expr step(AccessStep s) const {
    auto n = std::make_shared<ExprNode>(*node_);
    n->steps.push_back(std::move(s));
    return Expr(std::move(n));
  }

  ExprPtr node_;
};

namespace detail {

inline Expr node_with(ExprOp op, std::vector<ExprPtr> kids) {
  auto n = std::make_shared<ExprNode>();
  n->op = op;
  n->kids = std::move(kids);
  return Expr(std::move(n));
}

inline Expr named_node(ExprOp op, std::string name) {
  auto n = std::make_shared<ExprNode>();
  n->op = op;
  n->name = std::move(name);
  return Expr(std::move(n));
}

}  // namespace detail

inline Expr lit(bool b) { return Expr(Expr::make(ExprOp::BoolLit, b ? 1 : 0)); }
inline Expr level(std::string label) { return detail::named_node(ExprOp::Level, std::move(label)); }
inline Expr bottom() { return Expr(Expr::make(ExprOp::Bottom)); }
inline Expr me() { return Expr(Expr::make(ExprOp::Me)); }
inline Expr arg(std::string name) { return detail::named_node(ExprOp::Arg, std::move(name)); }

inline Expr local(std::string component) {
  auto n = std::make_shared<ExprNode>();
  n->op = ExprOp::Access;
  n->name = std::move(component);
  n->side = Side::Local;
  return Expr(std::move(n));
}

inline Expr remote(std::string component) {
  auto n = std::make_shared<ExprNode>();
  n->op = ExprOp::Access;
  n->name = std::move(component);
  n->side = Side::Remote;
  return Expr(std::move(n));
}

inline Expr side(Side s, std::string component) {
  return s == Side::Local ? local(std::move(component)) : remote(std::move(component));
}

/// Lookup in a static table declared by the object spec (e.g. bid origin).
inline Expr table(std::string name, const Expr& key) {
  auto n = std::make_shared<ExprNode>();
  n->op = ExprOp::Table;
  n->name = std::move(name);
  n->kids = {key.node()};
  return Expr(std::move(n));
}

inline Expr operator!(const Expr& a) { return detail::node_with(ExprOp::Not, {a.node()}); }
inline Expr operator&&(const Expr& a, const Expr& b) { return detail::node_with(ExprOp::And, {a.node(), b.node()}); }
inline Expr operator||(const Expr& a, const Expr& b) { return detail::node_with(ExprOp::Or, {a.node(), b.node()}); }
inline Expr implies(const Expr& a, const Expr& b) { return detail::node_with(ExprOp::Implies, {a.node(), b.node()}); }
inline Expr operator==(const Expr& a, const Expr& b) { return detail::node_with(ExprOp::Eq, {a.node(), b.node()}); }
inline Expr operator!=(const Expr& a, const Expr& b) { return detail::node_with(ExprOp::Ne, {a.node(), b.node()}); }
inline Expr operator<(const Expr& a, const Expr& b) { return detail::node_with(ExprOp::Lt, {a.node(), b.node()}); }
inline Expr operator<=(const Expr& a, const Expr& b) { return detail::node_with(ExprOp::Le, {a.node(), b.node()}); }
inline Expr operator>(const Expr& a, const Expr& b) { return detail::node_with(ExprOp::Gt, {a.node(), b.node()}); }
inline Expr operator>=(const Expr& a, const Expr& b) { return detail::node_with(ExprOp::Ge, {a.node(), b.node()}); }
inline Expr operator+(const Expr& a, const Expr& b) { return detail::node_with(ExprOp::Add, {a.node(), b.node()}); }
inline Expr operator-(const Expr& a, const Expr& b) { return detail::node_with(ExprOp::Sub, {a.node(), b.node()}); }
inline Expr max(const Expr& a, const Expr& b) { return detail::node_with(ExprOp::Max, {a.node(), b.node()}); }
inline Expr min(const Expr& a, const Expr& b) { return detail::node_with(ExprOp::Min, {a.node(), b.node()}); }

inline Expr quantifier(ExprOp op, std::string var, std::string domain, const Expr& body) {
  auto n = std::make_shared<ExprNode>();
  n->op = op;
  n->name = std::move(var);
  n->domain = std::move(domain);
  n->kids = {body.node()};
  return Expr(std::move(n));
}

inline Expr forall(std::string var, std::string domain, const Expr& body) {
  return quantifier(ExprOp::Forall, std::move(var), std::move(domain), body);
}

inline Expr exists(std::string var, std::string domain, const Expr& body) {
  return quantifier(ExprOp::Exists, std::move(var), std::move(domain), body);
}

/// Evaluates as `body` but prints as `label`; used for derived notions such
/// as is_highest.
inline Expr named(std::string label, const Expr& body) {
  auto n = std::make_shared<ExprNode>();
  n->op = ExprOp::Named;
  n->name = std::move(label);
  n->kids = {body.node()};
  return Expr(std::move(n));
}

/// A conjunction of clauses. Clause boundaries are kept so evaluation can
/// report which conjunct failed.
struct Predicate {
  std::vector<Expr> conjuncts;

  Predicate() = default;
  Predicate(const Expr& e) { add(e); }  // NOLINT: a single expression is a predicate
  Predicate(std::initializer_list<Expr> es) {
    for (const auto& e : es) add(e);
  }

  /// Appends `e`, flattening top-level conjunctions.
  Predicate& add(const Expr& e) {
    if (e.op() == ExprOp::And) {
      add(Expr(e.node()->kids[0]));
      add(Expr(e.node()->kids[1]));
    } else {
      conjuncts.push_back(e);
    }
    return *this;
  }

  Predicate operator&&(const Predicate& other) const {
    Predicate p = *this;
    for (const auto& c : other.conjuncts) p.add(c);
    return p;
  }

  bool trivially_true() const { return conjuncts.empty(); }
};

// ---- printing ---------------------------------------------------------------

namespace detail {

inline int precedence(ExprOp op) {
  switch (op) {
    case ExprOp::Forall:
    case ExprOp::Exists: return 0;
    case ExprOp::Implies: return 1;
    case ExprOp::Or: return 2;
    case ExprOp::And: return 3;
    case ExprOp::Eq:
    case ExprOp::Ne:
    case ExprOp::Lt:
    case ExprOp::Le:
    case ExprOp::Gt:
    case ExprOp::Ge: return 4;
    case ExprOp::Add:
    case ExprOp::Sub: return 5;
    case ExprOp::Not: return 6;
    default: return 7;
  }
}

inline const char* infix(ExprOp op) {
  switch (op) {
    case ExprOp::Implies: return " => ";
    case ExprOp::Or: return " || ";
    case ExprOp::And: return " && ";
    case ExprOp::Eq: return " == ";
    case ExprOp::Ne: return " != ";
    case ExprOp::Lt: return " < ";
    case ExprOp::Le: return " <= ";
    case ExprOp::Gt: return " > ";
    case ExprOp::Ge: return " >= ";
    case ExprOp::Add: return " + ";
    case ExprOp::Sub: return " - ";
    default: return " ? ";
  }
}

}  // namespace detail

inline std::string to_string(const ExprNode& n);

inline std::string to_string(const Expr& e) { return to_string(*e.node()); }

inline std::string to_string(const ExprNode& n) {
  auto wrap = [&](const ExprPtr& kid, bool strict) {
    std::string s = to_string(*kid);
    int pk = detail::precedence(kid->op);
    int pn = detail::precedence(n.op);
    return (pk < pn || (strict && pk == pn)) ? "(" + s + ")" : s;
  };
  switch (n.op) {
    case ExprOp::BoolLit: return n.value ? "true" : "false";
    case ExprOp::IntLit: return std::to_string(n.value);
    case ExprOp::Level:
    case ExprOp::Arg:
    case ExprOp::Named: return n.name;
    case ExprOp::Bottom: return "⊥";
    case ExprOp::Me: return "me";
    case ExprOp::Access: {
      std::string s = n.name + (n.side == Side::Remote ? "'" : "");
      for (const auto& st : n.steps) s += st.index ? "[" + to_string(*st.index) + "]" : "." + st.field;
      return s;
    }
    case ExprOp::Table: return n.name + "(" + to_string(*n.kids[0]) + ")";
    case ExprOp::Not: return "!" + wrap(n.kids[0], false);
    case ExprOp::Max: return "max(" + to_string(*n.kids[0]) + ", " + to_string(*n.kids[1]) + ")";
    case ExprOp::Min: return "min(" + to_string(*n.kids[0]) + ", " + to_string(*n.kids[1]) + ")";
    case ExprOp::Forall:
    case ExprOp::Exists:
      return std::string(n.op == ExprOp::Forall ? "forall " : "exists ") + n.name + " in " + n.domain + ": " +
             to_string(*n.kids[0]);
    case ExprOp::Implies:
      // right-associative
      return wrap(n.kids[0], true) + detail::infix(n.op) + wrap(n.kids[1], false);
    default:
      return wrap(n.kids[0], false) + detail::infix(n.op) + wrap(n.kids[1], true);
  }
}

inline std::string to_string(const Predicate& p) {
  if (p.conjuncts.empty()) return "true";
  std::string s;
  for (std::size_t i = 0; i < p.conjuncts.size(); ++i) {
    if (i) s += " && ";
    const auto& c = p.conjuncts[i];
    std::string t = to_string(c);
    s += detail::precedence(c.op()) <= detail::precedence(ExprOp::And) ? "(" + t + ")" : t;
  }
  return s;
}

}  // namespace statesafe
