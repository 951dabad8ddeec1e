#pragma once

#include <cstdint>
#include <vector>

namespace mshinf {

/// Address of a node in a multiscale tree. Levels run from 0 (root) to the
/// tree depth K (finest). Indices within a level are 1-based, so the root is
/// (0, 1) and level k holds indices 1..c^k for arity c.
struct NodeId {
  int level = 0;
  std::int64_t index = 1;

  friend bool operator==(const NodeId& a, const NodeId& b) {
    return a.level == b.level && a.index == b.index;
  }
  friend bool operator!=(const NodeId& a, const NodeId& b) { return !(a == b); }
};

/// Shape of a complete, uniform-arity multiscale tree.
///
/// `depth` is the number of edge stages K (levels 0..K exist); `arity` is the
/// number of children per non-leaf node (2 for dyadic trees used with 1-D
/// signals, 4 for quadtrees used with images).
class TreeTopology {
 public:
  TreeTopology(int depth, int arity);

  int depth() const { return depth_; }
  int arity() const { return arity_; }

  /// Number of nodes at a single level: arity^level.
  std::int64_t nodes_at(int level) const;

  /// Total node count: (arity^(depth+1) - 1) / (arity - 1).
  std::int64_t node_count() const;

  /// True when the node address lies inside this tree.
  bool contains(const NodeId& node) const;

  /// The `arity` children of `node`, at level+1, indices
  /// arity*(index-1)+1 .. arity*index in ascending order.
  /// Throws ArgumentError for leaf nodes.
  std::vector<NodeId> children(const NodeId& node) const;

  /// Parent of `node`: (level-1, ceil(index/arity)).
  /// Throws ArgumentError for the root.
  NodeId parent(const NodeId& node) const;

  /// All nodes, level 0 first, ascending index within each level.
  std::vector<NodeId> level_order() const;

  /// Position of `node` in the level-order sequence; the canonical offset
  /// for flat per-node storage.
  std::int64_t flat_index(const NodeId& node) const;

  /// Inverse of flat_index.
  NodeId node_at(std::int64_t flat) const;

  friend bool operator==(const TreeTopology& a, const TreeTopology& b) {
    return a.depth_ == b.depth_ && a.arity_ == b.arity_;
  }

 private:
  void require_valid(const NodeId& node, const char* op) const;

  int depth_;
  int arity_;
  std::vector<std::int64_t> level_offset_;  // nodes before each level
};

}  // namespace mshinf
