// Copyright 2026 the boah authors. Licensed under the Apache 2.0 license.
#include "boah/routing_tree.hpp"

#include <algorithm>
#include <map>

#include "boah/common.hpp"

namespace boah {

namespace {

struct Cand {
  Sketch sk;
  bool alive = false;
  std::uint64_t ordinal = 0;
};

struct NodeCands {
  std::uint64_t node_id = 0;
  std::vector<Cand> cands;
};

}  // namespace

std::vector<LeafRef> descend(RoutingTreeArena& arena, std::uint64_t root_id,
                             Fingerprint f, const Alphabet& alpha,
                             std::span<const unsigned> p_len_by_height,
                             DescentStats* stats) {
  DescentStats local;
  DescentStats& st = stats ? *stats : local;

  RoutingNode& root = arena.node(root_id);
  std::vector<NodeCands> frontier;
  {
    const unsigned pl = p_len_by_height[root.height];
    const std::vector<Sketch> sks =
        root.filter.lookup(alpha.prefix(f, pl));
    ++st.nodes_accessed;
    NodeCands nc{root_id, {}};
    nc.cands.reserve(sks.size());
    const std::uint32_t chk = alpha.check_char(f, root.height);
    for (std::size_t i = 0; i < sks.size(); ++i)
      nc.cands.push_back(Cand{sks[i], sks[i].check == chk, i});
    if (!nc.cands.empty()) frontier.push_back(std::move(nc));
  }

  unsigned height = root.height;
  while (height > 1 && !frontier.empty()) {
    const unsigned child_h = height - 1;
    const unsigned pl = p_len_by_height[child_h];
    const std::uint64_t want_prefix = alpha.prefix(f, pl);
    const std::uint32_t want_next = alpha.next_char(f, pl);
    const std::uint32_t chk = alpha.check_char(f, child_h);

    std::vector<NodeCands> next_frontier;
    for (NodeCands& nc : frontier) {
      RoutingNode& node = arena.node(nc.node_id);
      // Per-child sublists in candidate (log) order, dead entries included:
      // they are needed to align positionally with the child's list.
      std::map<std::uint32_t, std::vector<Cand>> by_child;
      for (const Cand& cand : nc.cands)
        by_child[cand.sk.child].push_back(cand);

      for (auto& [child_idx, sublist] : by_child) {
        const bool any_alive =
            std::any_of(sublist.begin(), sublist.end(),
                        [](const Cand& cd) { return cd.alive; });
        if (!any_alive) continue;
        if (child_idx >= node.children.size())
          throw CorruptionError("candidate child index out of range");
        const std::uint64_t child_id = node.children[child_idx];
        RoutingNode& child = arena.node(child_id);
        if (child.height != child_h)
          throw CorruptionError("child height mismatch");

        const std::vector<Sketch> all = child.filter.lookup(want_prefix);
        ++st.nodes_accessed;
        NodeCands cnc{child_id, {}};
        cnc.cands.reserve(all.size());
        // The child's entries whose next character extends the parent's
        // prefix correspond one-to-one, in log order, with the parent's
        // sublist; they inherit its aliveness. The rest are false positives
        // born in the child (they match one character less); they stay in
        // the list as dead entries because the next level down, looked up at
        // a prefix one character shorter again, reproduces them positionally.
        std::size_t k = 0;
        for (const Sketch& sk : all) {
          Cand cd{sk, false, 0};
          if (sk.next == want_next) {
            if (k == sublist.size())
              throw CorruptionError(
                  "child candidate list misaligned with parent");
            cd.alive = sublist[k].alive && sk.check == chk;
            cd.ordinal = sublist[k].ordinal;
            ++k;
          }
          cnc.cands.push_back(cd);
        }
        if (k != sublist.size())
          throw CorruptionError(
              "child candidate list shorter than parent's: " +
              std::to_string(k) + " vs " + std::to_string(sublist.size()));
        next_frontier.push_back(std::move(cnc));
      }
    }
    frontier = std::move(next_frontier);
    --height;
  }

  std::vector<LeafRef> out;
  for (const NodeCands& nc : frontier) {
    const RoutingNode& node = arena.node(nc.node_id);
    for (const Cand& cand : nc.cands) {
      if (!cand.alive) continue;
      if (cand.sk.child >= node.children.size())
        throw CorruptionError("leaf candidate child index out of range");
      out.push_back(LeafRef{node.children[cand.sk.child], cand.ordinal});
    }
  }
  // One scan per unit suffices; keep the newest ordinal, newest first.
  std::sort(out.begin(), out.end(), [](const LeafRef& a, const LeafRef& b) {
    return a.unit != b.unit ? a.unit < b.unit : a.ordinal > b.ordinal;
  });
  out.erase(std::unique(out.begin(), out.end(),
                        [](const LeafRef& a, const LeafRef& b) {
                          return a.unit == b.unit;
                        }),
            out.end());
  std::sort(out.begin(), out.end(), [](const LeafRef& a, const LeafRef& b) {
    return a.ordinal > b.ordinal;
  });
  st.leaf_refs += out.size();
  return out;
}

}  // namespace boah
