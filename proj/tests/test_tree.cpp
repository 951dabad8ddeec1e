#include "mshinf/tree.hpp"

#include <set>

#include "doctest.h"
#include "mshinf/errors.hpp"

using mshinf::NodeId;
using mshinf::TreeTopology;

TEST_CASE("children of the dyadic root are (1,1) and (1,2)") {
  TreeTopology t(3, 2);
  auto kids = t.children(NodeId{0, 1});
  REQUIRE(kids.size() == 2);
  CHECK(kids[0] == NodeId{1, 1});
  CHECK(kids[1] == NodeId{1, 2});
}

TEST_CASE("children of a quadtree node form a contiguous ascending block") {
  TreeTopology t(2, 4);
  auto kids = t.children(NodeId{1, 2});
  REQUIRE(kids.size() == 4);
  CHECK(kids[0] == NodeId{2, 5});
  CHECK(kids[1] == NodeId{2, 6});
  CHECK(kids[2] == NodeId{2, 7});
  CHECK(kids[3] == NodeId{2, 8});
}

TEST_CASE("a leaf has no children") {
  TreeTopology t(2, 2);
  CHECK_THROWS_AS((void)t.children(NodeId{2, 1}), mshinf::ArgumentError);
}

TEST_CASE("parent follows the ceiling rule") {
  CHECK(TreeTopology(3, 2).parent(NodeId{3, 5}) == NodeId{2, 3});
  CHECK(TreeTopology(2, 4).parent(NodeId{2, 8}) == NodeId{1, 2});
}

TEST_CASE("the root has no parent") {
  TreeTopology t(1, 2);
  CHECK_THROWS_AS((void)t.parent(NodeId{0, 1}), mshinf::ArgumentError);
}

TEST_CASE("level order enumerates coarse to fine") {
  TreeTopology t(1, 2);
  auto nodes = t.level_order();
  REQUIRE(nodes.size() == 3);
  CHECK(nodes[0] == NodeId{0, 1});
  CHECK(nodes[1] == NodeId{1, 1});
  CHECK(nodes[2] == NodeId{1, 2});
}

TEST_CASE("node counts match the geometric series") {
  CHECK(TreeTopology(2, 2).node_count() == 7);
  CHECK(TreeTopology(2, 4).node_count() == 21);
  CHECK(TreeTopology(2, 2).level_order().size() == 7);
  CHECK(TreeTopology(2, 4).level_order().size() == 21);
  CHECK(TreeTopology(5, 2).node_count() == 63);
}

TEST_CASE("children of the parent contain every non-root node") {
  for (int arity : {2, 3, 4}) {
    TreeTopology t(3, arity);
    for (const NodeId& node : t.level_order()) {
      if (node.level == 0) continue;
      bool found = false;
      for (const NodeId& sibling : t.children(t.parent(node)))
        if (sibling == node) found = true;
      CHECK(found);
    }
  }
}

TEST_CASE("sibling blocks partition each level") {
  for (int arity : {2, 4}) {
    TreeTopology t(3, arity);
    for (int k = 0; k < t.depth(); ++k) {
      std::set<std::int64_t> covered;
      for (std::int64_t m = 1; m <= t.nodes_at(k); ++m)
        for (const NodeId& child : t.children(NodeId{k, m})) {
          CHECK(child.level == k + 1);
          CHECK(covered.insert(child.index).second);  // disjoint
        }
      CHECK(covered.size() == static_cast<std::size_t>(t.nodes_at(k + 1)));
      CHECK(*covered.begin() == 1);
      CHECK(*covered.rbegin() == t.nodes_at(k + 1));
    }
  }
}

TEST_CASE("flat index round trips through node_at") {
  TreeTopology t(3, 4);
  for (const NodeId& node : t.level_order()) {
    const std::int64_t flat = t.flat_index(node);
    CHECK(t.node_at(flat) == node);
  }
}

TEST_CASE("degenerate topologies are rejected") {
  CHECK_THROWS_AS(TreeTopology(0, 2), mshinf::ArgumentError);
  CHECK_THROWS_AS(TreeTopology(3, 1), mshinf::ArgumentError);
}
