#pragma once

#include <string>

#include "statesafe/schema.hpp"

namespace statesafe {

namespace detail {

inline std::string format_leaf(const Layout& layout, const LeafInfo& leaf, std::int32_t v) {
  using K = ComponentSchema::Kind;
  switch (leaf.kind) {
    case K::OrderedEnum: {
      const auto& levels = layout.enums().at(static_cast<std::size_t>(leaf.enum_index));
      if (v >= 0 && static_cast<std::size_t>(v) < levels.size()) return levels[static_cast<std::size_t>(v)];
      return "<" + std::to_string(v) + ">";
    }
    case K::Flag: return v == 0 ? "false" : v == 1 ? "true" : "<" + std::to_string(v) + ">";
    case K::OptionalRef: return layout.label(leaf.domain, v);
    default: return std::to_string(v);
  }
}

inline void format_node(const Layout& layout, const ResolvedNode& node, const StateValue& s, std::size_t shift,
                        std::string& out, bool top_level) {
  using K = ComponentSchema::Kind;
  switch (node.kind) {
    case K::Tuple: {
      if (!top_level) out += "(";
      bool first = true;
      for (const auto& [name, child] : node.fields) {
        if (!first) out += " ";
        first = false;
        out += name + "=";
        format_node(layout, child, s, shift, out, false);
      }
      if (!top_level) out += ")";
      return;
    }
    case K::FixedMap: {
      const ResolvedNode& el = node.element.front();
      out += "{";
      for (int k = 0; k < layout.domain_size(node.domain); ++k) {
        if (k) out += ", ";
        out += layout.label(node.domain, k) + ":";
        format_node(layout, el, s, shift + static_cast<std::size_t>(k) * el.width, out, false);
      }
      out += "}";
      return;
    }
    default: {
      const std::size_t slot = node.offset + shift;
      out += format_leaf(layout, layout.leaves()[slot], s[slot]);
    }
  }
}

}  // namespace detail

/// One-line rendering, e.g. `status=ACTIVE winner=⊥ bids={b1:(placed=true amount=1), ...}`.
/// Out-of-range leaves render as `<v>` so non-conforming outputs stay printable.
inline std::string format_state(const Layout& layout, const StateValue& s) {
  if (s.size() != layout.width()) return "<state of width " + std::to_string(s.size()) + ">";
  std::string out;
  detail::format_node(layout, layout.root(), s, 0, out, true);
  return out;
}

}  // namespace statesafe
