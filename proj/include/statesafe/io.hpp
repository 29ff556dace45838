#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "statesafe/builtin.hpp"
#include "statesafe/checker.hpp"
#include "statesafe/scenarios.hpp"
#include "statesafe/simulator.hpp"

namespace statesafe::io {

using json = nlohmann::ordered_json;

inline constexpr std::string_view kToolVersion = "statesafe 0.1.0";

[[noreturn]] inline void malformed(const std::string& what) { throw Error(ErrorKind::MalformedEvent, what); }

// ---- bounds -----------------------------------------------------------------

/// Sets one bound by its flat key: `replicas`, `enumeration_cap`, an id domain
/// name, or `<range>_min` / `<range>_max`. `replica_count`, `cap` and
/// `bid_slots` are accepted as aliases.
inline void apply_bound(DomainBounds& b, std::string key, std::int64_t value) {
  if (key == "bid_slots") key = "bids";
  auto as_int = [&]() {
    if (value < std::numeric_limits<int>::min() || value > std::numeric_limits<int>::max()) {
      throw Error(ErrorKind::BadBounds, "bound '" + key + "' out of range");
    }
    return static_cast<int>(value);
  };
  if (key == "replicas" || key == "replica_count") {
    b.replica_count = as_int();
  } else if (key == "enumeration_cap" || key == "cap") {
    if (value <= 0) throw Error(ErrorKind::BadBounds, "enumeration_cap must be > 0");
    b.enumeration_cap = static_cast<std::uint64_t>(value);
  } else if (b.domain_sizes.count(key)) {
    b.domain_sizes[key] = as_int();
  } else if (key.size() > 4 && (key.ends_with("_max") || key.ends_with("_min")) &&
             b.int_ranges.count(key.substr(0, key.size() - 4))) {
    auto& r = b.int_ranges[key.substr(0, key.size() - 4)];
    (key.ends_with("_max") ? r.max : r.min) = as_int();
  } else {
    throw Error(ErrorKind::BadBounds, "unknown bound '" + key + "'");
  }
}

/// Parses `k=v,k=v` over `base`.
inline DomainBounds parse_bounds(std::string_view text, DomainBounds base) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find(',', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view item = text.substr(pos, end - pos);
    pos = end + 1;
    if (item.empty()) continue;
    const std::size_t eq = item.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorKind::BadBounds, "expected key=value, got '" + std::string(item) + "'");
    const std::string key(item.substr(0, eq));
    const std::string val(item.substr(eq + 1));
    std::int64_t v = 0;
    try {
      std::size_t used = 0;
      v = std::stoll(val, &used);
      if (used != val.size()) throw std::invalid_argument(val);
    } catch (const std::exception&) {
      throw Error(ErrorKind::BadBounds, "bound '" + key + "' is not an integer");
    }
    apply_bound(base, key, v);
  }
  base.validate();
  return base;
}

inline json bounds_to_json(const DomainBounds& b) {
  json j;
  j["replicas"] = b.replica_count;
  for (const auto& [name, size] : b.domain_sizes) j[name] = size;
  for (const auto& [name, r] : b.int_ranges) {
    j[name + "_min"] = r.min;
    j[name + "_max"] = r.max;
  }
  j["enumeration_cap"] = b.enumeration_cap;
  return j;
}

inline DomainBounds bounds_from_json(const json& j, DomainBounds base) {
  if (!j.is_object()) throw Error(ErrorKind::BadBounds, "bounds must be an object");
  for (const auto& [key, v] : j.items()) {
    if (!v.is_number_integer()) throw Error(ErrorKind::BadBounds, "bound '" + key + "' is not an integer");
    if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
      throw Error(ErrorKind::BadBounds, "bound '" + key + "' out of range");
    }
    apply_bound(base, key, v.get<std::int64_t>());
  }
  base.validate();
  return base;
}

// ---- states -----------------------------------------------------------------

namespace detail {

inline json leaf_to_json(const Layout& L, const LeafInfo& leaf, std::int32_t v) {
  using K = ComponentSchema::Kind;
  switch (leaf.kind) {
    case K::OrderedEnum: return statesafe::detail::format_leaf(L, leaf, v);
    case K::Flag: return v != 0;
    case K::OptionalRef: return v == kBottom ? json(nullptr) : json(L.label(leaf.domain, v));
    default: return v;
  }
}

inline json node_to_json(const Layout& L, const ResolvedNode& node, const StateValue& s, std::size_t shift) {
  using K = ComponentSchema::Kind;
  if (node.kind == K::Tuple) {
    json j = json::object();
    for (const auto& [name, child] : node.fields) j[name] = node_to_json(L, child, s, shift);
    return j;
  }
  if (node.kind == K::FixedMap) {
    const ResolvedNode& el = node.element.front();
    json j = json::object();
    for (int k = 0; k < L.domain_size(node.domain); ++k) {
      j[L.label(node.domain, k)] = node_to_json(L, el, s, shift + static_cast<std::size_t>(k) * el.width);
    }
    return j;
  }
  const std::size_t slot = node.offset + shift;
  return leaf_to_json(L, L.leaves()[slot], s[slot]);
}

inline std::int32_t leaf_from_json(const Layout& L, const LeafInfo& leaf, const json& j) {
  using K = ComponentSchema::Kind;
  auto bad = [&]() -> std::int32_t {
    throw Error(ErrorKind::SchemaMismatch, "bad value for '" + leaf.path + "': " + j.dump());
  };
  switch (leaf.kind) {
    case K::OrderedEnum: {
      if (!j.is_string()) return bad();
      const auto& levels = L.enums().at(static_cast<std::size_t>(leaf.enum_index));
      for (std::size_t i = 0; i < levels.size(); ++i) {
        if (levels[i] == j.get<std::string>()) return static_cast<std::int32_t>(i);
      }
      return bad();
    }
    case K::Flag:
      if (!j.is_boolean()) return bad();
      return j.get<bool>() ? 1 : 0;
    case K::OptionalRef: {
      if (j.is_null()) return kBottom;
      if (!j.is_string()) return bad();
      auto id = L.parse_label(leaf.domain, j.get<std::string>());
      return id ? *id : bad();
    }
    default: {
      if (!j.is_number_integer()) return bad();
      const auto v = j.get<std::int64_t>();
      if (v < leaf.lo || v > leaf.hi) return bad();
      return static_cast<std::int32_t>(v);
    }
  }
}

inline void node_from_json(const Layout& L, const ResolvedNode& node, const json& j, std::size_t shift,
                           const std::string& path, StateValue& out) {
  using K = ComponentSchema::Kind;
  if (node.kind == K::Tuple || node.kind == K::FixedMap) {
    if (!j.is_object()) throw Error(ErrorKind::SchemaMismatch, "expected an object at '" + path + "'");
    std::size_t expected = 0;
    if (node.kind == K::Tuple) {
      for (const auto& [name, child] : node.fields) {
        if (!j.contains(name)) throw Error(ErrorKind::SchemaMismatch, "missing component '" + name + "'");
        node_from_json(L, child, j.at(name), shift, name, out);
        ++expected;
      }
    } else {
      const ResolvedNode& el = node.element.front();
      for (int k = 0; k < L.domain_size(node.domain); ++k) {
        const std::string key = L.label(node.domain, k);
        if (!j.contains(key)) throw Error(ErrorKind::SchemaMismatch, "missing key '" + key + "' in '" + path + "'");
        node_from_json(L, el, j.at(key), shift + static_cast<std::size_t>(k) * el.width, key, out);
        ++expected;
      }
    }
    if (j.size() != expected) throw Error(ErrorKind::SchemaMismatch, "unexpected keys in '" + path + "'");
    return;
  }
  const std::size_t slot = node.offset + shift;
  out[slot] = leaf_from_json(L, L.leaves()[slot], j);
}

}  // namespace detail

/// Component tree: tuples and maps become objects, enum levels and ids
/// their names, optional references `null` when unset.
inline json state_to_json(const Layout& L, const StateValue& s) {
  if (s.size() != L.width()) throw Error(ErrorKind::SchemaMismatch, "state width does not match the layout");
  return detail::node_to_json(L, L.root(), s, 0);
}

inline StateValue state_from_json(const Layout& L, const json& j) {
  StateValue s(std::vector<std::int32_t>(L.width(), 0));
  detail::node_from_json(L, L.root(), j, 0, "state", s);
  return s;
}

// ---- parameters and replicas ------------------------------------------------

inline std::string replica_label(const Model& m, std::int32_t r) { return m.layout().label(0, r); }

inline std::int32_t parse_replica(const Model& m, const json& j) {
  if (j.is_string()) {
    if (auto r = m.layout().parse_label(0, j.get<std::string>())) return *r;
  }
  malformed("unknown replica " + j.dump());
}

inline json args_to_json(const Model& m, std::string_view op, const Args& args) {
  json j = json::object();
  const int idx = m.find_operation(op);
  if (idx < 0) {
    if (!args.empty()) throw Error(ErrorKind::UnknownOperation, "arguments for unknown operation");
    return j;
  }
  const auto& params = m.operations()[static_cast<std::size_t>(idx)].params;
  for (std::size_t i = 0; i < args.size() && i < params.size(); ++i) {
    const auto& p = params[i];
    if (p.type.type == ValueType::Id) {
      j[p.name] = m.layout().label(p.type.aux, args[i]);
    } else {
      j[p.name] = args[i];
    }
  }
  return j;
}

inline Args args_from_json(const Model& m, std::string_view op, const json& j) {
  const int idx = m.find_operation(op);
  if (idx < 0) {
    if (!j.is_null() && !j.empty()) malformed("parameters for unknown operation '" + std::string(op) + "'");
    return {};
  }
  if (!j.is_null() && !j.is_object()) malformed("params must be an object");
  const auto& params = m.operations()[static_cast<std::size_t>(idx)].params;
  Args args;
  std::size_t seen = 0;
  for (const auto& p : params) {
    if (j.is_null() || !j.contains(p.name)) malformed(std::string(op) + ": missing parameter '" + p.name + "'");
    const json& v = j.at(p.name);
    ++seen;
    if (p.type.type == ValueType::Id) {
      std::optional<std::int32_t> id;
      if (v.is_string()) id = m.layout().parse_label(p.type.aux, v.get<std::string>());
      if (!id) malformed(std::string(op) + ": bad value for '" + p.name + "': " + v.dump());
      args.push_back(*id);
    } else {
      if (!v.is_number_integer()) malformed(std::string(op) + ": parameter '" + p.name + "' must be an integer");
      const auto x = v.get<std::int64_t>();
      if (x < INT32_MIN || x > INT32_MAX) malformed(std::string(op) + ": parameter '" + p.name + "' out of range");
      args.push_back(static_cast<std::int32_t>(x));
    }
  }
  if (!j.is_null() && j.size() != seen) malformed(std::string(op) + ": unexpected parameters");
  return args;
}

inline json clauses_to_json(const std::vector<ClauseResult>& clauses) {
  json a = json::array();
  for (const auto& c : clauses) {
    json j;
    j["conjunct"] = c.text;
    j["holds"] = c.holds;
    if (!c.detail.empty()) j["detail"] = c.detail;
    a.push_back(std::move(j));
  }
  return a;
}

inline std::vector<ClauseResult> clauses_from_json(const json& a) {
  std::vector<ClauseResult> out;
  for (const auto& j : a) out.push_back({j.at("conjunct").get<std::string>(), j.at("holds").get<bool>(), j.value("detail", "")});
  return out;
}

// ---- check reports ----------------------------------------------------------

inline json config_to_json(const CheckConfig& c) {
  json j;
  j["stop_on_first_failure"] = c.stop_on_first_failure;
  j["max_counterexamples_per_assertion"] = c.max_counterexamples_per_assertion;
  j["leastness"] = c.leastness == LeastnessMode::Auto ? "auto" : c.leastness == LeastnessMode::Exhaustive ? "exhaustive" : "sampled";
  j["sample_count"] = c.sample_count;
  j["seed"] = c.seed;
  j["check_both_pre_merge_orientations"] = c.check_both_pre_merge_orientations;
  j["merge_pre_merge"] = c.merge_pre_merge == MergePreMergeMode::ThreeState ? "three_state" : "two_state";
  j["only_stage"] = c.only_stage ? json(std::string(to_string(*c.only_stage))) : json(nullptr);
  j["jobs"] = c.jobs;
  return j;
}

inline CheckConfig config_from_json(const json& j) {
  CheckConfig c;
  c.stop_on_first_failure = j.at("stop_on_first_failure").get<bool>();
  c.max_counterexamples_per_assertion = j.at("max_counterexamples_per_assertion").get<int>();
  const auto l = j.at("leastness").get<std::string>();
  c.leastness = l == "auto" ? LeastnessMode::Auto : l == "exhaustive" ? LeastnessMode::Exhaustive : LeastnessMode::Sampled;
  c.sample_count = j.at("sample_count").get<std::uint64_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.check_both_pre_merge_orientations = j.at("check_both_pre_merge_orientations").get<bool>();
  c.merge_pre_merge = j.at("merge_pre_merge").get<std::string>() == "two_state" ? MergePreMergeMode::TwoState
                                                                                : MergePreMergeMode::ThreeState;
  if (!j.at("only_stage").is_null()) c.only_stage = parse_stage(j.at("only_stage").get<std::string>());
  c.jobs = j.at("jobs").get<int>();
  return c;
}

inline FactKind fact_kind_from(std::string_view s) {
  for (auto k : {FactKind::Inv, FactKind::PreMerge, FactKind::Pre, FactKind::Leq, FactKind::Equal, FactKind::Conforms}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorKind::SchemaMismatch, "unknown fact kind '" + std::string(s) + "'");
}

inline json fact_to_json(const Model& m, const Fact& f) {
  json j;
  j["kind"] = to_string(f.kind);
  j["text"] = describe(m, f);
  j["roles"] = f.roles;
  j["replica"] = replica_label(m, f.replica);
  if (f.kind == FactKind::Pre) {
    j["op"] = f.op;
    j["args"] = args_to_json(m, f.op, f.args);
  }
  return j;
}

inline Fact fact_from_json(const Model& m, const json& j) {
  Fact f;
  f.kind = fact_kind_from(j.at("kind").get<std::string>());
  f.roles = j.at("roles").get<std::vector<std::string>>();
  f.replica = parse_replica(m, j.at("replica"));
  if (f.kind == FactKind::Pre) {
    f.op = j.at("op").get<std::string>();
    f.args = args_from_json(m, f.op, j.at("args"));
  }
  return f;
}

inline json counterexample_to_json(const Model* m, const Counterexample& c) {
  json j;
  j["assertion"] = c.assertion_id;
  if (!c.operation.empty()) j["operation"] = c.operation;
  if (m && !c.operation.empty()) j["args"] = args_to_json(*m, c.operation, c.args);
  if (m && c.me >= 0) j["me"] = replica_label(*m, c.me);
  j["message"] = c.message;
  if (!m) return j;
  json ws = json::array();
  for (const auto& w : c.witnesses) {
    json x;
    x["role"] = w.role;
    x["holder"] = w.holder >= 0 ? json(replica_label(*m, w.holder)) : json(nullptr);
    x["text"] = format_state(m->layout(), w.state);
    x["state"] = state_to_json(m->layout(), w.state);
    ws.push_back(std::move(x));
  }
  j["witnesses"] = std::move(ws);
  json ds = json::array();
  for (const auto& d : c.derived) {
    json x;
    x["role"] = d.role;
    x["kind"] = d.kind == Derivation::Kind::Op ? "op" : "merge";
    if (d.kind == Derivation::Kind::Op) {
      x["op"] = d.op;
      x["args"] = args_to_json(*m, d.op, d.args);
    }
    x["replica"] = replica_label(*m, d.replica);
    x["inputs"] = d.inputs;
    ds.push_back(std::move(x));
  }
  j["derived"] = std::move(ds);
  json as = json::array();
  for (const auto& f : c.assumptions) as.push_back(fact_to_json(*m, f));
  j["assumptions"] = std::move(as);
  json asr = json::array();
  for (const auto& f : c.assertion) asr.push_back(fact_to_json(*m, f));
  j["asserts"] = std::move(asr);
  json fs = json::array();
  for (const auto& r : c.failed) {
    json x;
    x["fact"] = fact_to_json(*m, r.fact);
    x["text"] = describe(*m, r.fact);
    x["clauses"] = clauses_to_json(r.clauses);
    fs.push_back(std::move(x));
  }
  j["failed"] = std::move(fs);
  return j;
}

inline Counterexample counterexample_from_json(const Model* m, CheckStage stage, const json& j) {
  Counterexample c;
  c.stage = stage;
  c.assertion_id = j.at("assertion").get<std::string>();
  c.operation = j.value("operation", "");
  c.message = j.value("message", "");
  if (!m) return c;
  if (j.contains("args")) c.args = args_from_json(*m, c.operation, j.at("args"));
  if (j.contains("me")) c.me = parse_replica(*m, j.at("me"));
  for (const auto& x : j.value("witnesses", json::array())) {
    Witness w;
    w.role = x.at("role").get<std::string>();
    w.holder = x.at("holder").is_null() ? -1 : parse_replica(*m, x.at("holder"));
    w.state = state_from_json(m->layout(), x.at("state"));
    c.witnesses.push_back(std::move(w));
  }
  for (const auto& x : j.value("derived", json::array())) {
    Derivation d;
    d.role = x.at("role").get<std::string>();
    d.kind = x.at("kind").get<std::string>() == "op" ? Derivation::Kind::Op : Derivation::Kind::Merge;
    if (d.kind == Derivation::Kind::Op) {
      d.op = x.at("op").get<std::string>();
      d.args = args_from_json(*m, d.op, x.at("args"));
    }
    d.replica = parse_replica(*m, x.at("replica"));
    d.inputs = x.at("inputs").get<std::vector<std::string>>();
    c.derived.push_back(std::move(d));
  }
  for (const auto& x : j.value("assumptions", json::array())) c.assumptions.push_back(fact_from_json(*m, x));
  for (const auto& x : j.value("asserts", json::array())) c.assertion.push_back(fact_from_json(*m, x));
  for (const auto& x : j.value("failed", json::array())) {
    c.failed.push_back({fact_from_json(*m, x.at("fact")), false, clauses_from_json(x.at("clauses"))});
  }
  return c;
}

inline json statistics_to_json(const Statistics& s) {
  json j;
  j["states_enumerated"] = s.states_enumerated;
  j["valid_states"] = s.valid_states;
  j["valid_pairs"] = s.valid_pairs;
  j["op_transitions"] = s.op_transitions;
  j["triples_checked"] = s.triples_checked;
  return j;
}

/// `m` may be null when the spec did not compile; counterexamples then
/// carry only their message.
inline json report_to_json(const Model* m, const CheckReport& r) {
  json j;
  j["tool"] = kToolVersion;
  j["kind"] = "check";
  j["spec"] = r.spec;
  j["bounds"] = bounds_to_json(r.bounds);
  j["config"] = config_to_json(r.config);
  j["verdict"] = to_string(r.verdict());
  j["exit_code"] = r.exit_code();
  j["statistics"] = statistics_to_json(r.statistics);
  json stages = json::array();
  for (const auto& s : r.stages) {
    json x;
    x["stage"] = to_string(s.stage);
    x["verdict"] = to_string(s.verdict);
    if (!s.note.empty()) x["note"] = s.note;
    x["sampled"] = s.sampled;
    x["warnings"] = s.warnings;
    json counts = json::object();
    for (const auto& [k, v] : s.violation_counts) counts[k] = v;
    x["violation_counts"] = std::move(counts);
    json cs = json::array();
    for (const auto& c : s.counterexamples) cs.push_back(counterexample_to_json(m, c));
    x["counterexamples"] = std::move(cs);
    stages.push_back(std::move(x));
  }
  j["stages"] = std::move(stages);
  j["duration_ms"] = r.duration_ms;
  return j;
}

inline Verdict verdict_from(std::string_view s) {
  for (auto v : {Verdict::Pass, Verdict::Fail, Verdict::Skipped, Verdict::Aborted}) {
    if (to_string(v) == s) return v;
  }
  throw Error(ErrorKind::SchemaMismatch, "unknown verdict '" + std::string(s) + "'");
}

inline CheckReport report_from_json(const Model* m, const json& j) {
  CheckReport r;
  r.spec = j.at("spec").get<std::string>();
  r.bounds = bounds_from_json(j.at("bounds"), builtin::find(r.spec).default_bounds);
  r.config = config_from_json(j.at("config"));
  const auto& st = j.at("statistics");
  r.statistics = {st.at("states_enumerated").get<std::uint64_t>(), st.at("valid_states").get<std::uint64_t>(),
                  st.at("valid_pairs").get<std::uint64_t>(), st.at("op_transitions").get<std::uint64_t>(),
                  st.at("triples_checked").get<std::uint64_t>()};
  for (const auto& x : j.at("stages")) {
    StageResult s;
    auto stage = parse_stage(x.at("stage").get<std::string>());
    if (!stage) throw Error(ErrorKind::SchemaMismatch, "unknown stage");
    s.stage = *stage;
    s.verdict = verdict_from(x.at("verdict").get<std::string>());
    s.note = x.value("note", "");
    s.sampled = x.at("sampled").get<bool>();
    s.warnings = x.at("warnings").get<std::vector<std::string>>();
    for (const auto& [k, v] : x.at("violation_counts").items()) s.violation_counts[k] = v.get<std::uint64_t>();
    for (const auto& c : x.at("counterexamples")) s.counterexamples.push_back(counterexample_from_json(m, s.stage, c));
    r.stages.push_back(std::move(s));
  }
  r.duration_ms = j.at("duration_ms").get<double>();
  return r;
}

// ---- scenarios and traces ---------------------------------------------------

inline json event_to_json(const Model& m, const sim::Event& e) {
  using namespace sim;
  json j;
  std::visit(
      [&](const auto& ev) {
        using T = std::decay_t<decltype(ev)>;
        if constexpr (std::is_same_v<T, Invoke>) {
          j["invoke"] = {{"replica", replica_label(m, ev.replica)}, {"op", ev.op}, {"params", args_to_json(m, ev.op, ev.args)}};
        } else if constexpr (std::is_same_v<T, Send>) {
          json s = {{"from", replica_label(m, ev.from)}, {"to", replica_label(m, ev.to)}};
          if (!ev.label.empty()) s["id"] = ev.label;
          j["send"] = std::move(s);
        } else if constexpr (std::is_same_v<T, Deliver>) {
          j["deliver"] = ev.label;
        } else if constexpr (std::is_same_v<T, Drop>) {
          j["drop"] = ev.label;
        } else if constexpr (std::is_same_v<T, Duplicate>) {
          if (ev.copy_label.empty()) {
            j["duplicate"] = ev.label;
          } else {
            j["duplicate"] = {{"id", ev.label}, {"as", ev.copy_label}};
          }
        } else if constexpr (std::is_same_v<T, CheckInvariantAll>) {
          j["check_invariant_all"] = json::object();
        } else if constexpr (std::is_same_v<T, CheckConverged>) {
          j["check_converged"] = json::object();
        } else {
          j["anti_entropy"] = json::object();
        }
      },
      e);
  return j;
}

inline sim::Event event_from_json(const Model& m, const json& j) {
  using namespace sim;
  if (!j.is_object() || j.size() != 1) malformed("an event is an object with exactly one tag: " + j.dump());
  const auto& [tag, body] = *j.items().begin();
  auto label = [&](const json& v, const char* what) {
    if (!v.is_string() || v.get<std::string>().empty()) malformed(std::string(what) + " needs a message id");
    return v.get<std::string>();
  };
  auto field = [&](const char* name) -> const json& {
    if (!body.is_object() || !body.contains(name)) malformed(tag + " needs '" + name + "'");
    return body.at(name);
  };
  if (tag == "invoke") {
    const json& op = field("op");
    if (!op.is_string()) malformed("invoke: op must be a string");
    const std::string name = op.get<std::string>();
    if (m.find_operation(name) < 0) malformed("unknown operation '" + name + "'");
    return Invoke{parse_replica(m, field("replica")), name, args_from_json(m, name, body.value("params", json()))};
  }
  if (tag == "send") {
    Send s{parse_replica(m, field("from")), parse_replica(m, field("to")), ""};
    if (body.contains("id")) s.label = label(body.at("id"), "send");
    return s;
  }
  if (tag == "deliver") return Deliver{label(body, "deliver")};
  if (tag == "drop") return Drop{label(body, "drop")};
  if (tag == "duplicate") {
    if (body.is_object()) {
      Duplicate d{label(field("id"), "duplicate"), ""};
      if (body.contains("as")) d.copy_label = label(body.at("as"), "duplicate");
      return d;
    }
    return Duplicate{label(body, "duplicate"), ""};
  }
  if (tag == "check_invariant_all") return CheckInvariantAll{};
  if (tag == "check_converged") return CheckConverged{};
  if (tag == "anti_entropy") return AntiEntropy{};
  malformed("unknown event '" + tag + "'");
}

inline sim::Policy policy_from(std::string_view s) {
  if (s == "halt") return sim::Policy::Halt;
  if (s == "skip_and_record") return sim::Policy::SkipAndRecord;
  malformed("unknown policy '" + std::string(s) + "'");
}

/// A scenario together with the model its events were resolved against.
struct LoadedScenario {
  sim::Scenario scenario;
  std::unique_ptr<Model> model;
};

/// Parses a scenario document. `spec_override` replaces its `spec` field.
inline LoadedScenario load_scenario(const json& j, std::string_view spec_override = {}) {
  if (!j.is_object()) malformed("a scenario is an object");
  LoadedScenario out;
  auto& s = out.scenario;
  s.name = j.value("name", "scenario");
  if (!spec_override.empty()) {
    s.spec = spec_override;
  } else if (j.contains("spec") && j.at("spec").is_string()) {
    s.spec = j.at("spec").get<std::string>();
  } else {
    malformed("scenario needs a 'spec'");
  }
  const auto& builtin = builtin::find(s.spec);
  s.bounds = j.contains("bounds") ? bounds_from_json(j.at("bounds"), builtin.default_bounds) : builtin.default_bounds;
  if (j.contains("policy")) {
    if (!j.at("policy").is_string()) malformed("policy must be a string");
    s.policy = policy_from(j.at("policy").get<std::string>());
  }
  out.model = std::make_unique<Model>(builtin.make(s.bounds));
  if (!j.contains("events") || !j.at("events").is_array()) malformed("scenario needs an 'events' list");
  for (const auto& e : j.at("events")) s.events.push_back(event_from_json(*out.model, e));
  return out;
}

inline json scenario_to_json(const Model& m, const sim::Scenario& s) {
  json j;
  j["name"] = s.name;
  j["spec"] = s.spec;
  j["bounds"] = bounds_to_json(s.bounds);
  j["policy"] = to_string(s.policy);
  json ev = json::array();
  for (const auto& e : s.events) ev.push_back(event_to_json(m, e));
  j["events"] = std::move(ev);
  return j;
}

inline json trace_to_json(const Model& m, const sim::Trace& t) {
  const Layout& L = m.layout();
  json j;
  j["tool"] = kToolVersion;
  j["kind"] = "trace";
  j["scenario"] = t.scenario;
  j["spec"] = t.spec;
  j["bounds"] = bounds_to_json(t.bounds);
  j["policy"] = to_string(t.policy);
  if (t.seed) j["seed"] = *t.seed;
  json entries = json::array();
  for (const auto& e : t.entries) {
    json x;
    x["step"] = e.step;
    x["event"] = event_to_json(m, e.event);
    if (e.transition) {
      const auto& tr = *e.transition;
      x["replica"] = replica_label(m, tr.replica);
      x["before"] = state_to_json(L, tr.before);
      x["after"] = state_to_json(L, tr.after);
      x["invariant"] = tr.invariant;
      if (!tr.invariant) x["invariant_failing"] = clauses_to_json(tr.invariant_failing);
      x["monotone"] = tr.monotone;
    }
    if (e.pre_merge) {
      x["pre_merge"] = *e.pre_merge;
      if (!*e.pre_merge) x["pre_merge_failing"] = clauses_to_json(e.pre_merge_failing);
    }
    if (e.rejected) x["rejected"] = clauses_to_json(e.rejected_clauses);
    if (!e.invariants.empty()) {
      json inv = json::object();
      for (const auto& [r, ok] : e.invariants) inv[replica_label(m, r)] = ok;
      x["invariants"] = std::move(inv);
    }
    if (e.converged) x["converged"] = *e.converged;
    entries.push_back(std::move(x));
  }
  j["entries"] = std::move(entries);
  json finals = json::object();
  for (std::size_t r = 0; r < t.final_states.size(); ++r) {
    finals[replica_label(m, static_cast<std::int32_t>(r))] = state_to_json(L, t.final_states[r]);
  }
  j["final_states"] = std::move(finals);
  j["verdict"] = t.violation ? "violation" : t.halted ? "halted" : "clean";
  if (t.violation) {
    j["violation"] = {{"step", t.violation->step},
                      {"replica", replica_label(m, t.violation->replica)},
                      {"failing", clauses_to_json(t.violation->clauses)}};
  }
  if (t.converged) j["converged"] = *t.converged;
  j["exit_code"] = t.exit_code();
  return j;
}

/// Rebuilds the replayable part of a trace document: its resolved events.
inline sim::Scenario trace_scenario_from_json(const Model& m, const json& j) {
  sim::Scenario s;
  s.name = j.at("scenario").get<std::string>();
  s.spec = j.at("spec").get<std::string>();
  s.bounds = bounds_from_json(j.at("bounds"), builtin::find(s.spec).default_bounds);
  s.policy = policy_from(j.at("policy").get<std::string>());
  for (const auto& e : j.at("entries")) s.events.push_back(event_from_json(m, e.at("event")));
  return s;
}

}  // namespace statesafe::io
