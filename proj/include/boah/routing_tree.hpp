// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
//
// Routing-tree nodes and the false-positive-eliminating descent. Each node
// of height h >= 1 carries a refined filter holding one record per
// fingerprint in its subtree (prefix length grows with height so the
// slot-to-entry ratio stays >= lambda) and a child table: node ids for
// height > 1, log-unit ids for height 1.
//
// A descent probes the root's filter, keeps candidates whose check character
// matches, and walks down: a child is probed only when at least one of its
// candidates is still alive; the child's candidate list (restricted by the
// next character to the parent's prefix length) must align positionally with
// the parent's per-child sublist — both are in log order — so false
// positives already dead in the parent stay dead in the child without
// re-checking. Survivors at height 1 become log-unit references tagged with
// their root-list ordinal (log order across the level).
#ifndef BOAH_ROUTING_TREE_HPP
#define BOAH_ROUTING_TREE_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "boah/fingerprint.hpp"
#include "boah/refined_filter.hpp"

namespace boah {

struct RoutingNode {
  unsigned height = 0;
  RefinedFilter filter;
  std::vector<std::uint64_t> children;  // node ids, or unit ids at height 1
};

class RoutingTreeArena {
 public:
  std::uint64_t new_node(unsigned height, RefinedFilter filter) {
    nodes_.push_back(RoutingNode{height, std::move(filter), {}});
    return nodes_.size() - 1;
  }
  RoutingNode& node(std::uint64_t id) { return nodes_.at(id); }
  const RoutingNode& node(std::uint64_t id) const { return nodes_.at(id); }
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<RoutingNode> nodes_;
};

struct LeafRef {
  std::uint64_t unit = 0;
  std::uint64_t ordinal = 0;  // position in the root's candidate list
};

struct DescentStats {
  std::uint64_t nodes_accessed = 0;  // filters probed during this descent
  std::uint64_t leaf_refs = 0;
};

// Returns surviving log-unit references, newest first (descending root
// ordinal), deduplicated per unit. p_len_by_height[h] is the filter prefix
// length of height-h nodes. Throws CorruptionError when a child's candidate
// list cannot be aligned with its parent's.
std::vector<LeafRef> descend(RoutingTreeArena& arena, std::uint64_t root_id,
                             Fingerprint f, const Alphabet& alpha,
                             std::span<const unsigned> p_len_by_height,
                             DescentStats* stats);

}  // namespace boah

#endif  // BOAH_ROUTING_TREE_HPP
