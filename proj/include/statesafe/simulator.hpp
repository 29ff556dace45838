#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "statesafe/random.hpp"
#include "statesafe/spec.hpp"

namespace statesafe::sim {

enum class Policy { SkipAndRecord, Halt };

inline std::string_view to_string(Policy p) { return p == Policy::Halt ? "halt" : "skip_and_record"; }

struct Invoke {
  std::int32_t replica = 0;
  std::string op;
  Args args;
};
struct Send {
  std::int32_t from = 0;
  std::int32_t to = 0;
  std::string label;  // empty: assigned on execution
};
struct Deliver {
  std::string label;
};
struct Drop {
  std::string label;
};
struct Duplicate {
  std::string label;
  std::string copy_label;  // empty: assigned on execution
};
struct CheckInvariantAll {};
struct CheckConverged {};
/// Every replica sends to every other and each message is delivered at once,
/// repeated replica_count times. Expands into Send/Deliver trace entries.
struct AntiEntropy {};

using Event = std::variant<Invoke, Send, Deliver, Drop, Duplicate, CheckInvariantAll, CheckConverged, AntiEntropy>;

inline std::string_view event_kind(const Event& e) {
  static constexpr std::string_view names[] = {"invoke",  "send",      "deliver",     "drop",
                                               "duplicate", "check_invariant_all", "check_converged", "anti_entropy"};
  return names[e.index()];
}

struct Scenario {
  std::string name;
  std::string spec;
  DomainBounds bounds;
  Policy policy = Policy::SkipAndRecord;
  std::vector<Event> events;
};

struct Message {
  std::string label;
  std::int32_t from = 0;
  std::int32_t to = 0;
  StateValue payload;
};

struct Replica {
  std::int32_t id = 0;
  StateValue state;
  std::uint64_t transitions = 0;
};

/// One state transition at one replica.
struct Transition {
  std::int32_t replica = 0;
  StateValue before;
  StateValue after;
  bool invariant = true;
  std::vector<ClauseResult> invariant_failing;
  bool monotone = true;  // before <= after under the spec's comparison
};

struct TraceEntry {
  std::size_t step = 0;
  Event event;  // with labels resolved
  std::optional<Transition> transition;
  bool rejected = false;
  std::vector<ClauseResult> rejected_clauses;
  std::optional<bool> pre_merge;  // deliveries: Pre_merge(local, payload) at the destination
  std::vector<ClauseResult> pre_merge_failing;
  std::vector<std::pair<std::int32_t, bool>> invariants;  // check_invariant_all
  std::optional<bool> converged;                          // check_converged
};

struct Violation {
  std::size_t step = 0;
  std::int32_t replica = 0;
  std::vector<ClauseResult> clauses;
};

struct Trace {
  std::string scenario;
  std::string spec;
  DomainBounds bounds;
  Policy policy = Policy::SkipAndRecord;
  std::optional<std::uint64_t> seed;
  std::vector<TraceEntry> entries;
  std::vector<StateValue> final_states;
  std::optional<Violation> violation;  // first invariant violation
  bool halted = false;                 // halt policy stopped on a rejected invoke
  std::optional<bool> converged;       // result of the last convergence check

  bool clean() const { return !violation && !halted; }
  int exit_code() const { return clean() ? 0 : 1; }
};

inline bool check_converged(const std::vector<Replica>& replicas) {
  return std::adjacent_find(replicas.begin(), replicas.end(), [](const Replica& a, const Replica& b) {
           return a.state != b.state;
         }) == replicas.end();
}

/// Deterministic event loop over one model. Replicas start in the spec's
/// initial state; the network is a set of labelled in-flight snapshots.
class Simulation {
 public:
  Simulation(const Model& model, Policy policy) : model_(model), policy_(policy) {
    if (!model.spec().initial_state) throw Error(ErrorKind::SchemaMismatch, "spec has no initial state");
    if (!model.spec().merge) throw Error(ErrorKind::SchemaMismatch, "spec has no merge");
    for (int r = 0; r < model.replica_count(); ++r) replicas_.push_back(Replica{r, *model.spec().initial_state, 0});
  }

  const std::vector<Replica>& replicas() const noexcept { return replicas_; }
  const std::map<std::string, Message>& in_flight() const noexcept { return in_flight_; }
  const Trace& trace() const noexcept { return trace_; }
  Trace& trace() noexcept { return trace_; }
  bool halted() const noexcept { return trace_.halted; }

  /// Rejects events naming unknown replicas or operations, or ill-typed parameters.
  void validate(const Event& e) const {
    auto replica_ok = [&](std::int32_t r) {
      if (r < 0 || r >= model_.replica_count()) throw Error(ErrorKind::MalformedEvent, "replica index out of range");
    };
    if (const auto* inv = std::get_if<Invoke>(&e)) {
      replica_ok(inv->replica);
      int op = model_.find_operation(inv->op);
      if (op < 0) throw Error(ErrorKind::MalformedEvent, "unknown operation '" + inv->op + "'");
      try {
        model_.check_args(static_cast<std::size_t>(op), inv->args, replica(inv->replica));
      } catch (const Error& err) {
        throw Error(ErrorKind::MalformedEvent, err.what());
      }
    } else if (const auto* s = std::get_if<Send>(&e)) {
      replica_ok(s->from);
      replica_ok(s->to);
      if (s->from == s->to) throw Error(ErrorKind::MalformedEvent, "send from a replica to itself");
    }
  }

  /// Executes one event. Returns false once a halt policy has stopped the run.
  bool execute(const Event& e) {
    if (trace_.halted) return false;
    validate(e);
    std::visit([&](const auto& ev) { run(ev); }, e);
    return !trace_.halted;
  }

  /// Labels of in-flight messages, in label order.
  std::vector<std::string> pending() const {
    std::vector<std::string> out;
    for (const auto& [label, m] : in_flight_) out.push_back(label);
    return out;
  }

  void finish() {
    trace_.final_states.clear();
    for (const auto& r : replicas_) trace_.final_states.push_back(r.state);
  }

 private:
  TraceEntry& begin(Event e) {
    TraceEntry t;
    t.step = trace_.entries.size();
    t.event = std::move(e);
    trace_.entries.push_back(std::move(t));
    return trace_.entries.back();
  }

  Transition transition(std::int32_t r, const StateValue& before, const StateValue& after) {
    Transition t;
    t.replica = r;
    t.before = before;
    t.after = after;
    if (model_.has_invariant()) {
      auto res = model_.eval_invariant(after, replica(r));
      t.invariant = res.holds;
      t.invariant_failing = res.failing();
    }
    t.monotone = !model_.has_leq() || model_.leq(before, after, replica(r));
    return t;
  }

  void record_violation(const TraceEntry& e) {
    if (!trace_.violation && e.transition && !e.transition->invariant) {
      trace_.violation = Violation{e.step, e.transition->replica, e.transition->invariant_failing};
    }
  }

  std::string fresh_label() {
    std::string l;
    do {
      l = "m" + std::to_string(++next_label_);
    } while (used_labels_.count(l));
    return l;
  }

  void claim(const std::string& label) {
    if (!used_labels_.insert(label).second) throw Error(ErrorKind::MalformedEvent, "message id '" + label + "' reused");
  }

  Message take(const std::string& label) {
    auto it = in_flight_.find(label);
    if (it == in_flight_.end()) throw Error(ErrorKind::UnknownMessage, "no in-flight message '" + label + "'");
    Message m = std::move(it->second);
    in_flight_.erase(it);
    return m;
  }

  void run(const Invoke& ev) {
    auto& rep = replicas_[static_cast<std::size_t>(ev.replica)];
    auto& entry = begin(ev);
    try {
      StateValue after = model_.apply_op(ev.op, ev.args, replica(ev.replica), rep.state);
      entry.transition = transition(ev.replica, rep.state, after);
      rep.state = std::move(after);
      ++rep.transitions;
      record_violation(entry);
    } catch (const PreconditionViolated& pv) {
      entry.rejected = true;
      entry.rejected_clauses = pv.clauses();
      if (policy_ == Policy::Halt) trace_.halted = true;
    }
  }

  void run(const Send& ev) {
    Send resolved = ev;
    if (resolved.label.empty()) {
      resolved.label = fresh_label();
    }
    claim(resolved.label);
    in_flight_.emplace(resolved.label,
                       Message{resolved.label, ev.from, ev.to, replicas_[static_cast<std::size_t>(ev.from)].state});
    begin(resolved);
  }

  void run(const Deliver& ev) {
    Message m = take(ev.label);
    auto& rep = replicas_[static_cast<std::size_t>(m.to)];
    auto& entry = begin(ev);
    if (model_.has_pre_merge()) {
      auto pm = model_.eval_pre_merge(rep.state, m.payload, replica(m.to));
      entry.pre_merge = pm.holds;
      entry.pre_merge_failing = pm.failing();
    }
    StateValue after = model_.merge_states(rep.state, m.payload, replica(m.to));
    entry.transition = transition(m.to, rep.state, after);
    rep.state = std::move(after);
    ++rep.transitions;
    record_violation(entry);
  }

  void run(const Drop& ev) {
    take(ev.label);
    begin(ev);
  }

  void run(const Duplicate& ev) {
    auto it = in_flight_.find(ev.label);
    if (it == in_flight_.end()) throw Error(ErrorKind::UnknownMessage, "no in-flight message '" + ev.label + "'");
    Duplicate resolved = ev;
    if (resolved.copy_label.empty()) resolved.copy_label = fresh_label();
    claim(resolved.copy_label);
    Message copy = it->second;
    copy.label = resolved.copy_label;
    in_flight_.emplace(copy.label, std::move(copy));
    begin(resolved);
  }

  void run(const CheckInvariantAll& ev) {
    auto& entry = begin(ev);
    for (const auto& r : replicas_) {
      const bool ok = model_.inv(r.state, r.id);
      entry.invariants.emplace_back(r.id, ok);
      if (!ok && !trace_.violation) {
        trace_.violation = Violation{entry.step, r.id, model_.eval_invariant(r.state, replica(r.id)).failing()};
      }
    }
  }

  void run(const CheckConverged& ev) {
    auto& entry = begin(ev);
    entry.converged = check_converged(replicas_);
    trace_.converged = entry.converged;
  }

  void run(const AntiEntropy&) {
    const int n = model_.replica_count();
    for (int round = 0; round < n; ++round) {
      for (int from = 0; from < n; ++from) {
        for (int to = 0; to < n; ++to) {
          if (from == to) continue;
          const std::string label = fresh_label();
          run(Send{from, to, label});
          run(Deliver{label});
        }
      }
    }
  }

  const Model& model_;
  Policy policy_;
  std::vector<Replica> replicas_;
  std::map<std::string, Message> in_flight_;
  std::set<std::string> used_labels_;
  std::uint64_t next_label_ = 0;
  Trace trace_;
};

inline Trace run_scenario(const Model& model, const Scenario& scenario) {
  Simulation sim(model, scenario.policy);
  for (const auto& e : scenario.events) sim.validate(e);
  for (const auto& e : scenario.events) {
    if (!sim.execute(e)) break;
  }
  sim.finish();
  Trace t = std::move(sim.trace());
  t.scenario = scenario.name;
  t.spec = model.spec().name;
  t.bounds = model.spec().bounds;
  t.policy = scenario.policy;
  return t;
}

struct RandomConfig {
  std::uint64_t seed = 1;
  std::size_t steps = 1000;
  double drop_probability = 0.0;
  double duplicate_probability = 0.0;
  bool anti_entropy = true;  // close with full anti-entropy and a convergence check
};

/// Generates and executes a pseudo-random run. Invokes are drawn uniformly
/// from the (operation, parameters) pairs enabled at a random replica, so
/// every issued invoke is locally legal.
inline Trace run_random(const Model& model, const RandomConfig& cfg) {
  if (!(cfg.drop_probability >= 0 && cfg.drop_probability <= 1) ||
      !(cfg.duplicate_probability >= 0 && cfg.duplicate_probability <= 1)) {
    throw Error(ErrorKind::BadParams, "probabilities must lie in [0, 1]");
  }
  if (cfg.steps == 0) throw Error(ErrorKind::BadParams, "steps must be positive");
  Rng rng(cfg.seed);
  Simulation sim(model, Policy::SkipAndRecord);
  const int n = model.replica_count();

  std::vector<std::pair<std::size_t, Args>> instances;
  for (std::size_t op = 0; op < model.operations().size(); ++op) {
    for (auto& a : model.instances(op)) instances.emplace_back(op, std::move(a));
  }

  auto try_invoke = [&]() {
    const auto r = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(n)));
    const auto& state = sim.replicas()[static_cast<std::size_t>(r)].state;
    std::vector<std::size_t> enabled;
    for (std::size_t i = 0; i < instances.size(); ++i) {
      if (model.precondition_holds(instances[i].first, instances[i].second, replica(r), state)) enabled.push_back(i);
    }
    if (enabled.empty()) return false;
    const auto& [op, args] = instances[enabled[static_cast<std::size_t>(rng.below(enabled.size()))]];
    sim.execute(Invoke{r, model.operations()[op].spec->name, args});
    return true;
  };
  auto send = [&]() {
    if (n < 2) return false;
    const auto from = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(n)));
    auto to = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(n - 1)));
    if (to >= from) ++to;
    sim.execute(Send{from, to, ""});
    return true;
  };
  auto network = [&]() {
    const auto pending = sim.pending();
    if (pending.empty()) return false;
    const auto& label = pending[static_cast<std::size_t>(rng.below(pending.size()))];
    if (rng.chance(cfg.drop_probability)) {
      sim.execute(Drop{label});
    } else if (rng.chance(cfg.duplicate_probability)) {
      sim.execute(Duplicate{label, ""});
    } else {
      sim.execute(Deliver{label});
    }
    return true;
  };

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const auto roll = rng.below(10);
    bool done = roll < 4 ? try_invoke() : roll < 7 ? send() : network();
    if (!done) done = send() || network() || try_invoke();
  }
  if (cfg.anti_entropy) {
    sim.execute(AntiEntropy{});
    sim.execute(CheckConverged{});
  }
  sim.finish();
  Trace t = std::move(sim.trace());
  t.scenario = "random";
  t.spec = model.spec().name;
  t.bounds = model.spec().bounds;
  t.seed = cfg.seed;
  return t;
}

/// Replays the resolved events of a trace; the final states must match.
inline Scenario scenario_of(const Trace& t) {
  Scenario s;
  s.name = t.scenario;
  s.spec = t.spec;
  s.bounds = t.bounds;
  s.policy = t.policy;
  for (const auto& e : t.entries) s.events.push_back(e.event);
  return s;
}

}  // namespace statesafe::sim
