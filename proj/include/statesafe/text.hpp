#pragma once

#include <cstdio>
#include <sstream>
#include <string>

#include "statesafe/builtin.hpp"
#include "statesafe/checker.hpp"
#include "statesafe/format.hpp"
#include "statesafe/scenarios.hpp"
#include "statesafe/simulator.hpp"

namespace statesafe::text {

inline std::string bounds_line(const DomainBounds& b) {
  std::string s = "replicas=" + std::to_string(b.replica_count);
  for (const auto& [name, size] : b.domain_sizes) s += " " + name + "=" + std::to_string(size);
  for (const auto& [name, r] : b.int_ranges) {
    s += " " + name + "=[" + std::to_string(r.min) + "," + std::to_string(r.max) + "]";
  }
  return s;
}

inline std::string component_summary(const ComponentSchema& c) {
  using K = ComponentSchema::Kind;
  switch (c.kind) {
    case K::OrderedEnum: {
      std::string s = "enum ";
      for (std::size_t i = 0; i < c.levels.size(); ++i) s += (i ? " < " : "") + c.levels[i];
      return s;
    }
    case K::Flag: return std::string("flag (top ") + (c.top ? "true" : "false") + ")";
    case K::BoundedInt: return "int in " + c.range_key;
    case K::OptionalRef: return c.domain + " or ⊥";
    case K::FixedMap: return "map " + c.domain + " -> " + component_summary(c.fields.front().schema);
    case K::Tuple: {
      std::string s = "(";
      for (std::size_t i = 0; i < c.fields.size(); ++i) {
        s += (i ? ", " : "") + c.fields[i].name + ": " + component_summary(c.fields[i].schema);
      }
      return s + ")";
    }
  }
  return "?";
}

inline std::string clause_lines(const std::vector<ClauseResult>& clauses, const std::string& indent, bool only_false) {
  std::string out;
  for (const auto& c : clauses) {
    if (only_false && c.holds) continue;
    out += indent + (c.holds ? "ok    " : "FALSE ") + c.text + "\n";
    if (!c.detail.empty()) out += indent + "      " + c.detail + "\n";
  }
  return out;
}

inline std::string render_counterexample(const Model* m, const Counterexample& c, std::size_t n) {
  std::ostringstream o;
  o << "  counterexample " << n << ": " << c.assertion_id;
  if (m && !c.operation.empty()) {
    const int op = m->find_operation(c.operation);
    o << "  " << (op >= 0 ? m->format_args(static_cast<std::size_t>(op), c.args) : c.operation);
  }
  if (m && c.me >= 0) o << " at " << m->layout().label(0, c.me);
  o << "\n";
  if (!c.message.empty()) o << "    " << c.message << "\n";
  if (!m) return o.str();
  const Layout& L = m->layout();
  for (const auto& w : c.witnesses) {
    o << "    " << w.role;
    if (w.holder >= 0) o << " @" << L.label(0, w.holder);
    o << " = " << format_state(L, w.state) << "\n";
  }
  for (const auto& d : c.derived) {
    o << "    " << d.role << " := ";
    if (d.kind == Derivation::Kind::Op) {
      const int op = m->find_operation(d.op);
      o << (op >= 0 ? m->format_args(static_cast<std::size_t>(op), d.args) : d.op) << " applied to " << d.inputs.at(0);
    } else {
      o << "merge(" << d.inputs.at(0) << ", " << d.inputs.at(1) << ")";
    }
    o << " at " << L.label(0, d.replica) << "\n";
  }
  for (const auto& f : c.assumptions) o << "    assume " << describe(*m, f) << "\n";
  for (const auto& f : c.assertion) o << "    assert " << describe(*m, f) << "\n";
  for (const auto& r : c.failed) {
    o << "    violated: " << describe(*m, r.fact) << "\n";
    o << clause_lines(r.clauses, "      ", true);
  }
  return o.str();
}

inline std::string render_report(const Model* m, const CheckReport& r) {
  std::ostringstream o;
  o << "spec " << r.spec << " (" << bounds_line(r.bounds) << ")\n";
  for (const auto& s : r.stages) {
    char head[64];
    std::snprintf(head, sizeof head, "%-18s %s", std::string(to_string(s.stage)).c_str(),
                  std::string(to_string(s.verdict)).c_str());
    o << head;
    if (s.sampled) o << " (sampled)";
    if (!s.note.empty()) o << "  " << s.note;
    o << "\n";
    for (const auto& w : s.warnings) o << "  warning: " << w << "\n";
    for (const auto& [id, count] : s.violation_counts) o << "  " << id << ": " << count << " violation(s)\n";
    std::size_t n = 0;
    for (const auto& c : s.counterexamples) o << render_counterexample(m, c, ++n);
  }
  const auto& st = r.statistics;
  o << "states " << st.states_enumerated << ", valid " << st.valid_states << ", pairs " << st.valid_pairs
    << ", transitions " << st.op_transitions << ", triples " << st.triples_checked << "\n";
  o << "verdict " << to_string(r.verdict()) << "\n";
  return o.str();
}

inline std::string describe_event(const Model& m, const sim::Event& e) {
  using namespace sim;
  const Layout& L = m.layout();
  return std::visit(
      [&](const auto& ev) -> std::string {
        using T = std::decay_t<decltype(ev)>;
        if constexpr (std::is_same_v<T, Invoke>) {
          const int op = m.find_operation(ev.op);
          return "invoke " + (op >= 0 ? m.format_args(static_cast<std::size_t>(op), ev.args) : ev.op) + " at " +
                 L.label(0, ev.replica);
        } else if constexpr (std::is_same_v<T, Send>) {
          return "send " + ev.label + " " + L.label(0, ev.from) + " -> " + L.label(0, ev.to);
        } else if constexpr (std::is_same_v<T, Deliver>) {
          return "deliver " + ev.label;
        } else if constexpr (std::is_same_v<T, Drop>) {
          return "drop " + ev.label;
        } else if constexpr (std::is_same_v<T, Duplicate>) {
          return "duplicate " + ev.label + " as " + ev.copy_label;
        } else if constexpr (std::is_same_v<T, CheckInvariantAll>) {
          return "check invariant at all replicas";
        } else if constexpr (std::is_same_v<T, CheckConverged>) {
          return "check convergence";
        } else {
          return "anti-entropy";
        }
      },
      e);
}

inline std::string render_trace(const Model& m, const sim::Trace& t) {
  const Layout& L = m.layout();
  std::ostringstream o;
  o << "scenario " << t.scenario << " on " << t.spec << " (" << bounds_line(t.bounds) << "), policy "
    << to_string(t.policy);
  if (t.seed) o << ", seed " << *t.seed;
  o << "\n";
  for (const auto& e : t.entries) {
    char step[16];
    std::snprintf(step, sizeof step, "%4zu ", e.step);
    o << step << describe_event(m, e.event);
    if (e.rejected) o << "  rejected";
    if (e.pre_merge && !*e.pre_merge) o << "  (merge precondition false)";
    if (e.converged) o << (*e.converged ? "  converged" : "  diverged");
    o << "\n";
    if (e.transition) {
      o << "       " << L.label(0, e.transition->replica) << ": " << format_state(L, e.transition->after) << "\n";
      if (!e.transition->invariant) {
        o << "       invariant violated\n" << clause_lines(e.transition->invariant_failing, "         ", true);
      }
      if (!e.transition->monotone) o << "       state did not grow\n";
    }
    if (e.rejected) o << clause_lines(e.rejected_clauses, "         ", true);
    for (const auto& [r, ok] : e.invariants) {
      if (!ok) o << "       invariant false at " << L.label(0, r) << "\n";
    }
  }
  o << "final states\n";
  for (std::size_t r = 0; r < t.final_states.size(); ++r) {
    o << "  " << L.label(0, static_cast<std::int32_t>(r)) << ": " << format_state(L, t.final_states[r]) << "\n";
  }
  if (t.violation) {
    o << "verdict violation at step " << t.violation->step << " (" << L.label(0, t.violation->replica) << ")\n";
  } else if (t.halted) {
    o << "verdict halted\n";
  } else {
    o << "verdict clean\n";
  }
  return o.str();
}

inline std::string render_spec(const builtin::BuiltinSpec& b, bool detailed) {
  std::ostringstream o;
  o << b.name << "  " << b.summary << "\n";
  if (!detailed) return o.str();
  const Model m(b.make(b.default_bounds));
  const auto& spec = m.spec();
  o << "  bounds: " << bounds_line(b.default_bounds) << "\n";
  o << "  components:\n";
  for (const auto& f : spec.schema.components) o << "    " << f.name << ": " << component_summary(f.schema) << "\n";
  o << "  operations:\n";
  for (const auto& op : m.operations()) {
    o << "    " << op.spec->name << "(";
    for (std::size_t i = 0; i < op.params.size(); ++i) {
      const auto& p = op.spec->params[i];
      o << (i ? ", " : "") << p.name << ": " << (p.domain.empty() ? p.range_key : p.domain);
    }
    o << ")\n";
    for (const auto& c : op.precondition.texts()) o << "      pre  " << c << "\n";
    if (!op.spec->effect_text.empty()) o << "      eff  " << op.spec->effect_text << "\n";
  }
  if (!spec.merge_text.empty()) o << "  merge: " << spec.merge_text << "\n";
  auto block = [&](const char* name, bool present, const CompiledPredicate* p) {
    if (!present) return;
    o << "  " << name << ":\n";
    for (const auto& c : p->texts()) o << "    " << c << "\n";
  };
  block("comparison", m.has_leq(), m.has_leq() ? &m.leq_predicate() : nullptr);
  block("merge precondition", m.has_pre_merge(), m.has_pre_merge() ? &m.pre_merge_predicate() : nullptr);
  block("invariant", m.has_invariant(), m.has_invariant() ? &m.invariant_predicate() : nullptr);
  return o.str();
}

inline std::string render_listing(const std::string& only) {
  std::ostringstream o;
  if (!only.empty()) return render_spec(builtin::find(only), true);
  o << "specs\n";
  for (const auto& b : builtin::registry()) o << "  " << render_spec(b, false);
  o << "scenarios\n";
  for (const auto& s : sim::scenario_registry()) o << "  " << s.name << "  " << s.summary << " (default spec " << s.default_spec << ")\n";
  return o.str();
}

}  // namespace statesafe::text
