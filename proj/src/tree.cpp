#include "mshinf/tree.hpp"

#include <string>

#include "mshinf/errors.hpp"

namespace mshinf {

TreeTopology::TreeTopology(int depth, int arity) : depth_(depth), arity_(arity) {
  if (depth < 1) throw ArgumentError("tree depth must be at least 1");
  if (arity < 2) throw ArgumentError("tree arity must be at least 2");
  // Reject trees whose node count cannot be addressed in 63 bits.
  level_offset_.resize(static_cast<std::size_t>(depth) + 2);
  level_offset_[0] = 0;
  std::int64_t level_nodes = 1;
  for (int k = 0; k <= depth; ++k) {
    level_offset_[static_cast<std::size_t>(k) + 1] =
        level_offset_[static_cast<std::size_t>(k)] + level_nodes;
    if (k < depth) {
      if (level_nodes > (INT64_MAX / 4) / arity)
        throw ArgumentError("tree too large to address");
      level_nodes *= arity;
    }
  }
}

std::int64_t TreeTopology::nodes_at(int level) const {
  if (level < 0 || level > depth_)
    throw ArgumentError("level " + std::to_string(level) + " outside [0, " +
                        std::to_string(depth_) + "]");
  return level_offset_[static_cast<std::size_t>(level) + 1] -
         level_offset_[static_cast<std::size_t>(level)];
}

std::int64_t TreeTopology::node_count() const {
  return level_offset_.back();
}

bool TreeTopology::contains(const NodeId& node) const {
  return node.level >= 0 && node.level <= depth_ && node.index >= 1 &&
         node.index <= nodes_at(node.level);
}

void TreeTopology::require_valid(const NodeId& node, const char* op) const {
  if (!contains(node))
    throw ArgumentError(std::string(op) + ": node (" +
                        std::to_string(node.level) + ", " +
                        std::to_string(node.index) + ") outside the tree");
}

std::vector<NodeId> TreeTopology::children(const NodeId& node) const {
  require_valid(node, "children");
  if (node.level == depth_)
    throw ArgumentError("children: node (" + std::to_string(node.level) +
                        ", " + std::to_string(node.index) +
                        ") is at the finest level and has no children");
  std::vector<NodeId> out;
  out.reserve(static_cast<std::size_t>(arity_));
  const std::int64_t first = static_cast<std::int64_t>(arity_) * (node.index - 1) + 1;
  for (int i = 0; i < arity_; ++i)
    out.push_back(NodeId{node.level + 1, first + i});
  return out;
}

NodeId TreeTopology::parent(const NodeId& node) const {
  require_valid(node, "parent");
  if (node.level == 0)
    throw ArgumentError("parent: the root node has no parent");
  // ceil(index / arity) with 1-based indices.
  return NodeId{node.level - 1, (node.index + arity_ - 1) / arity_};
}

std::vector<NodeId> TreeTopology::level_order() const {
  std::vector<NodeId> out;
  out.reserve(static_cast<std::size_t>(node_count()));
  for (int k = 0; k <= depth_; ++k) {
    const std::int64_t count = nodes_at(k);
    for (std::int64_t m = 1; m <= count; ++m) out.push_back(NodeId{k, m});
  }
  return out;
}

std::int64_t TreeTopology::flat_index(const NodeId& node) const {
  require_valid(node, "flat_index");
  return level_offset_[static_cast<std::size_t>(node.level)] + node.index - 1;
}

NodeId TreeTopology::node_at(std::int64_t flat) const {
  if (flat < 0 || flat >= node_count())
    throw ArgumentError("node_at: flat index out of range");
  int level = 0;
  while (level_offset_[static_cast<std::size_t>(level) + 1] <= flat) ++level;
  return NodeId{level, flat - level_offset_[static_cast<std::size_t>(level)] + 1};
}

}  // namespace mshinf
