#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "statesafe/error.hpp"

namespace statesafe {

/// Name of the id domain whose cardinality is DomainBounds::replica_count.
inline constexpr std::string_view kReplicaDomain = "replicas";

inline constexpr std::uint64_t kDefaultEnumerationCap = std::uint64_t{1} << 32;

struct IntRange {
  std::int32_t min = 0;
  std::int32_t max = 0;

  friend bool operator==(const IntRange&, const IntRange&) = default;
};

struct DomainBounds {
  int replica_count = 2;
  std::map<std::string, int> domain_sizes;
  std::map<std::string, IntRange> int_ranges;
  std::uint64_t enumeration_cap = kDefaultEnumerationCap;

  int domain_size(std::string_view domain) const {
    if (domain == kReplicaDomain) return replica_count;
    auto it = domain_sizes.find(std::string(domain));
    if (it == domain_sizes.end()) {
      throw Error(ErrorKind::UnboundedComponent, "no cardinality for id domain '" + std::string(domain) + "'");
    }
    return it->second;
  }

  void validate() const {
    if (replica_count < 1) throw Error(ErrorKind::BadBounds, "replica_count must be >= 1");
    if (enumeration_cap == 0) throw Error(ErrorKind::BadBounds, "enumeration_cap must be > 0");
    for (const auto& [name, size] : domain_sizes) {
      if (size < 1) throw Error(ErrorKind::BadBounds, "cardinality of '" + name + "' must be >= 1");
    }
    for (const auto& [name, r] : int_ranges) {
      if (r.min > r.max) throw Error(ErrorKind::BadBounds, "empty integer range '" + name + "'");
    }
  }

  friend bool operator==(const DomainBounds&, const DomainBounds&) = default;
};

struct Field;

class ComponentSchema {
 public:
  enum class Kind { OrderedEnum, Flag, BoundedInt, OptionalRef, FixedMap, Tuple };

  Kind kind = Kind::Flag;
  std::vector<std::string> levels;  // OrderedEnum, lowest first
  bool top = true;                  // Flag: the value that is the lattice top
  std::string range_key;            // BoundedInt: key into DomainBounds::int_ranges
  std::string domain;               // OptionalRef target / FixedMap key domain
  std::vector<Field> fields;        // Tuple fields; FixedMap holds its element as fields[0]
};

struct Field {
  std::string name;
  ComponentSchema schema;
};

inline ComponentSchema ordered_enum(std::vector<std::string> levels) {
  ComponentSchema c;
  c.kind = ComponentSchema::Kind::OrderedEnum;
  c.levels = std::move(levels);
  return c;
}

inline ComponentSchema flag(bool top = true) {
  ComponentSchema c;
  c.kind = ComponentSchema::Kind::Flag;
  c.top = top;
  return c;
}

inline ComponentSchema bounded_int(std::string range_key) {
  ComponentSchema c;
  c.kind = ComponentSchema::Kind::BoundedInt;
  c.range_key = std::move(range_key);
  return c;
}

inline ComponentSchema optional_ref(std::string domain) {
  ComponentSchema c;
  c.kind = ComponentSchema::Kind::OptionalRef;
  c.domain = std::move(domain);
  return c;
}

inline ComponentSchema fixed_map(std::string domain, ComponentSchema element) {
  ComponentSchema c;
  c.kind = ComponentSchema::Kind::FixedMap;
  c.domain = std::move(domain);
  c.fields.push_back(Field{"", std::move(element)});
  return c;
}

inline ComponentSchema tuple(std::vector<Field> fields) {
  ComponentSchema c;
  c.kind = ComponentSchema::Kind::Tuple;
  c.fields = std::move(fields);
  return c;
}

struct IdDomain {
  std::string name;
  std::string label_prefix;
};

struct StateSchema {
  /// Declared id domains. The replica domain is implicit and always present.
  std::vector<IdDomain> domains;
  std::vector<Field> components;
};

/// A state as a flat vector of leaf values in schema declaration order.
/// Flags are 0/1, enum levels their index, integers themselves, and optional
/// references the referenced id or -1 for bottom.
class StateValue {
 public:
  StateValue() = default;
  explicit StateValue(std::vector<std::int32_t> slots) : slots_(std::move(slots)) {}

  std::size_t size() const noexcept { return slots_.size(); }
  std::int32_t operator[](std::size_t i) const { return slots_[i]; }
  std::int32_t& operator[](std::size_t i) { return slots_[i]; }
  std::span<const std::int32_t> slots() const noexcept { return slots_; }
  const std::int32_t* data() const noexcept { return slots_.data(); }

  friend bool operator==(const StateValue&, const StateValue&) = default;
  friend auto operator<=>(const StateValue&, const StateValue&) = default;

 private:
  std::vector<std::int32_t> slots_;
};

struct StateValueHash {
  std::size_t operator()(const StateValue& s) const noexcept {
    std::size_t h = 1469598103934665603ull;
    for (auto v : s.slots()) {
      h ^= static_cast<std::uint32_t>(v);
      h *= 1099511628211ull;
    }
    return h;
  }
};

inline constexpr std::int32_t kBottom = -1;

/// A schema node with leaf offsets resolved against bounds.
struct ResolvedNode {
  ComponentSchema::Kind kind = ComponentSchema::Kind::Tuple;
  std::size_t offset = 0;
  std::size_t width = 0;
  int domain = -1;          // key domain (map) or target domain (ref)
  int enum_index = -1;      // OrderedEnum
  bool top = true;          // Flag
  std::string range_key;    // BoundedInt
  std::vector<std::pair<std::string, ResolvedNode>> fields;  // Tuple / root
  std::vector<ResolvedNode> element;                         // FixedMap, size 1

  const ResolvedNode* field(std::string_view name) const {
    for (const auto& [n, node] : fields) {
      if (n == name) return &node;
    }
    return nullptr;
  }
};

struct LeafInfo {
  std::string path;
  ComponentSchema::Kind kind = ComponentSchema::Kind::Flag;
  std::int32_t lo = 0;
  std::int32_t hi = 1;
  int enum_index = -1;
  int domain = -1;

  std::uint64_t radix() const { return static_cast<std::uint64_t>(hi - lo + 1); }
};

struct PathPart {
  PathPart(const char* f) : part(std::string(f)) {}
  PathPart(std::string f) : part(std::move(f)) {}
  PathPart(int i) : part(i) {}
  std::variant<std::string, int> part;
};

inline std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) return std::numeric_limits<std::uint64_t>::max();
  return a * b;
}

/// A schema resolved against concrete bounds: the flat leaf layout, id
/// domains with their labels, and the enumeration order.
class Layout {
 public:
  struct Domain {
    std::string name;
    std::string label_prefix;
    int size = 0;
  };

  static Layout resolve(const StateSchema& schema, const DomainBounds& bounds) {
    bounds.validate();
    Layout l;
    l.domains_.push_back(Domain{std::string(kReplicaDomain), "r", bounds.replica_count});
    for (const auto& d : schema.domains) {
      if (d.name == kReplicaDomain) continue;
      if (l.find_domain(d.name) >= 0) {
        throw Error(ErrorKind::SchemaMismatch, "id domain '" + d.name + "' declared twice");
      }
      l.domains_.push_back(Domain{d.name, d.label_prefix, bounds.domain_size(d.name)});
    }
    l.root_.kind = ComponentSchema::Kind::Tuple;
    for (const auto& f : schema.components) {
      if (l.root_.field(f.name)) throw Error(ErrorKind::SchemaMismatch, "component '" + f.name + "' declared twice");
      l.root_.fields.emplace_back(f.name, l.build(f.schema, f.name, bounds));
    }
    l.root_.width = l.leaves_.size();
    for (std::size_t i = 0; i < l.leaves_.size(); ++i) l.by_path_.emplace(l.leaves_[i].path, i);
    l.weights_.assign(l.leaves_.size(), 1);
    for (std::size_t i = l.leaves_.size(); i-- > 1;) {
      l.weights_[i - 1] = saturating_mul(l.weights_[i], l.leaves_[i].radix());
    }
    return l;
  }

  const std::vector<LeafInfo>& leaves() const noexcept { return leaves_; }
  std::size_t width() const noexcept { return leaves_.size(); }
  const ResolvedNode& root() const noexcept { return root_; }
  const std::vector<Domain>& domains() const noexcept { return domains_; }
  const std::vector<std::vector<std::string>>& enums() const noexcept { return enums_; }

  int find_domain(std::string_view name) const {
    for (std::size_t i = 0; i < domains_.size(); ++i) {
      if (domains_[i].name == name) return static_cast<int>(i);
    }
    return -1;
  }

  int domain_size(int domain) const { return domains_.at(static_cast<std::size_t>(domain)).size; }
  int replica_count() const { return domains_.front().size; }

  std::string label(int domain, std::int32_t id) const {
    if (id == kBottom) return "⊥";
    return domains_.at(static_cast<std::size_t>(domain)).label_prefix + std::to_string(id + 1);
  }

  std::optional<std::int32_t> parse_label(int domain, std::string_view text) const {
    const auto& d = domains_.at(static_cast<std::size_t>(domain));
    for (int i = 0; i < d.size; ++i) {
      if (label(domain, i) == text) return i;
    }
    return std::nullopt;
  }

  /// Slot index of a leaf addressed by field names and map indices.
  std::size_t slot(std::initializer_list<PathPart> path) const {
    const ResolvedNode* node = &root_;
    std::size_t shift = 0;  // element nodes store key-0 offsets
    for (const auto& p : path) {
      if (const auto* name = std::get_if<std::string>(&p.part)) {
        const ResolvedNode* next = node->field(*name);
        if (!next) throw Error(ErrorKind::UnknownIdentifier, "no field '" + *name + "'");
        node = next;
      } else {
        int idx = std::get<int>(p.part);
        if (node->kind != ComponentSchema::Kind::FixedMap || idx < 0 || idx >= domain_size(node->domain)) {
          throw Error(ErrorKind::SchemaMismatch, "bad map index");
        }
        const ResolvedNode& el = node->element.front();
        shift += static_cast<std::size_t>(idx) * el.width;
        node = &el;
      }
    }
    if (node->width != 1 || (node->kind == ComponentSchema::Kind::Tuple)) {
      throw Error(ErrorKind::SchemaMismatch, "path does not address a leaf");
    }
    return node->offset + shift;
  }

  std::size_t slot_of_path(const std::string& path) const {
    auto it = by_path_.find(path);
    if (it == by_path_.end()) throw Error(ErrorKind::UnknownIdentifier, "no leaf '" + path + "'");
    return it->second;
  }

  /// Number of schema-conforming states; saturates at UINT64_MAX.
  std::uint64_t cardinality() const {
    std::uint64_t c = 1;
    for (const auto& leaf : leaves_) c = saturating_mul(c, leaf.radix());
    return c;
  }

  bool conforms(const StateValue& s) const {
    if (s.size() != leaves_.size()) return false;
    for (std::size_t i = 0; i < leaves_.size(); ++i) {
      if (s[i] < leaves_[i].lo || s[i] > leaves_[i].hi) return false;
    }
    return true;
  }

  /// Position of a conforming state in canonical enumeration order.
  std::uint64_t rank(const StateValue& s) const {
    std::uint64_t r = 0;
    for (std::size_t i = 0; i < leaves_.size(); ++i) {
      r += static_cast<std::uint64_t>(s[i] - leaves_[i].lo) * weights_[i];
    }
    return r;
  }

  StateValue unrank(std::uint64_t r) const {
    std::vector<std::int32_t> v(leaves_.size());
    for (std::size_t i = 0; i < leaves_.size(); ++i) {
      v[i] = leaves_[i].lo + static_cast<std::int32_t>(r / weights_[i]);
      r %= weights_[i];
    }
    return StateValue(std::move(v));
  }

  StateValue minimum() const {
    std::vector<std::int32_t> v;
    v.reserve(leaves_.size());
    for (const auto& leaf : leaves_) v.push_back(leaf.lo);
    return StateValue(std::move(v));
  }

 private:
  ResolvedNode build(const ComponentSchema& c, const std::string& path, const DomainBounds& bounds) {
    ResolvedNode n;
    n.kind = c.kind;
    n.offset = leaves_.size();
    using K = ComponentSchema::Kind;
    switch (c.kind) {
      case K::OrderedEnum: {
        if (c.levels.empty()) throw Error(ErrorKind::SchemaMismatch, "enum '" + path + "' has no levels");
        n.enum_index = static_cast<int>(enums_.size());
        enums_.push_back(c.levels);
        leaves_.push_back(LeafInfo{path, K::OrderedEnum, 0, static_cast<std::int32_t>(c.levels.size()) - 1, n.enum_index, -1});
        break;
      }
      case K::Flag:
        n.top = c.top;
        leaves_.push_back(LeafInfo{path, K::Flag, 0, 1, -1, -1});
        break;
      case K::BoundedInt: {
        auto it = bounds.int_ranges.find(c.range_key);
        if (it == bounds.int_ranges.end()) {
          throw Error(ErrorKind::UnboundedComponent, "no range '" + c.range_key + "' for component '" + path + "'");
        }
        n.range_key = c.range_key;
        leaves_.push_back(LeafInfo{path, K::BoundedInt, it->second.min, it->second.max, -1, -1});
        break;
      }
      case K::OptionalRef: {
        n.domain = require_domain(c.domain, path);
        leaves_.push_back(LeafInfo{path, K::OptionalRef, kBottom, domain_size(n.domain) - 1, -1, n.domain});
        break;
      }
      case K::FixedMap: {
        n.domain = require_domain(c.domain, path);
        if (c.fields.size() != 1) throw Error(ErrorKind::SchemaMismatch, "map '" + path + "' needs one element schema");
        for (int k = 0; k < domain_size(n.domain); ++k) {
          ResolvedNode el = build(c.fields.front().schema, path + "[" + label(n.domain, k) + "]", bounds);
          if (k == 0) n.element.push_back(std::move(el));
        }
        break;
      }
      case K::Tuple:
        for (const auto& f : c.fields) n.fields.emplace_back(f.name, build(f.schema, path + "." + f.name, bounds));
        break;
    }
    n.width = leaves_.size() - n.offset;
    return n;
  }

  int require_domain(const std::string& name, const std::string& path) {
    int d = find_domain(name);
    if (d < 0) throw Error(ErrorKind::UnknownIdentifier, "component '" + path + "' references undeclared domain '" + name + "'");
    return d;
  }

  std::vector<Domain> domains_;
  std::vector<std::vector<std::string>> enums_;
  std::vector<LeafInfo> leaves_;
  std::vector<std::uint64_t> weights_;
  std::unordered_map<std::string, std::size_t> by_path_;
  ResolvedNode root_;
};

/// Every schema-conforming state, each exactly once, in canonical order
/// (lexicographic over leaves in declaration order, first leaf most significant).
inline std::vector<StateValue> enumerate_states(const Layout& layout, std::uint64_t cap) {
  const std::uint64_t n = layout.cardinality();
  if (n > cap) {
    throw DomainTooLarge(n, cap, std::to_string(n) + " states exceed enumeration cap " + std::to_string(cap));
  }
  std::vector<StateValue> out;
  out.reserve(static_cast<std::size_t>(n));
  StateValue cur = layout.minimum();
  const auto& leaves = layout.leaves();
  for (std::uint64_t i = 0; i < n; ++i) {
    out.push_back(cur);
    for (std::size_t k = leaves.size(); k-- > 0;) {
      if (cur[k] < leaves[k].hi) {
        ++cur[k];
        break;
      }
      cur[k] = leaves[k].lo;
    }
  }
  return out;
}

inline std::vector<StateValue> enumerate_states(const StateSchema& schema, const DomainBounds& bounds) {
  return enumerate_states(Layout::resolve(schema, bounds), bounds.enumeration_cap);
}

}  // namespace statesafe
