#pragma once

#include <cstddef>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "duo/numerics/tensor.hpp"

namespace duo {

// Joint layout of one body plus the number of bodies in the graph. For two
// bodies, node k of body 2 lives at index J + k.
struct SkeletonSpec {
  std::vector<std::string> joint_names;
  std::vector<std::pair<std::size_t, std::size_t>> tree_edges;  // (parent, child) within one body
  std::size_t root = 0;
  std::size_t bodies = 2;

  std::size_t joints() const noexcept { return joint_names.size(); }
  std::size_t nodes() const noexcept { return bodies * joint_names.size(); }

  // Throws IngestionError unless the edges form a spanning tree of one body.
  void validate() const {
    const std::size_t J = joints();
    if (J == 0) throw IngestionError("skeleton: no joints");
    if (bodies != 1 && bodies != 2) throw IngestionError("skeleton: bodies must be 1 or 2");
    if (root >= J) throw IngestionError("skeleton: root index out of range");
    if (tree_edges.size() != J - 1)
      throw IngestionError("skeleton: a tree over " + std::to_string(J) + " joints needs " + std::to_string(J - 1) +
                           " edges, got " + std::to_string(tree_edges.size()));
    std::vector<std::size_t> parent(J);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t v) {
      while (parent[v] != v) v = parent[v] = parent[parent[v]];
      return v;
    };
    for (auto [a, b] : tree_edges) {
      if (a >= J || b >= J) throw IngestionError("skeleton: edge index out of range");
      const auto ra = find(a), rb = find(b);
      if (ra == rb) throw IngestionError("skeleton: edges contain a cycle");
      parent[ra] = rb;
    }
  }

  static SkeletonSpec from_json(const nlohmann::json& j, std::size_t bodies = 2) {
    SkeletonSpec s;
    try {
      s.joint_names = j.at("joints").get<std::vector<std::string>>();
      for (const auto& e : j.at("edges")) s.tree_edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
      s.root = j.at("root").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw IngestionError(std::string("skeleton: ") + e.what());
    }
    s.bodies = bodies;
    s.validate();
    return s;
  }

  static SkeletonSpec load(const std::string& path, std::size_t bodies = 2) {
    std::ifstream in(path);
    if (!in) throw IngestionError("skeleton: cannot open " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw IngestionError("skeleton " + path + ": " + e.what());
    }
    return from_json(j, bodies);
  }

  nlohmann::json to_json() const {
    nlohmann::json edges = nlohmann::json::array();
    for (auto [a, b] : tree_edges) edges.push_back({a, b});
    return {{"joints", joint_names}, {"edges", edges}, {"root", root}};
  }

  // Heap-ordered tree (parent of i is (i-1)/2) for synthetic data of any size.
  static SkeletonSpec binary_tree(std::size_t J, std::size_t bodies = 2) {
    SkeletonSpec s;
    for (std::size_t i = 0; i < J; ++i) s.joint_names.push_back("j" + std::to_string(i));
    for (std::size_t i = 1; i < J; ++i) s.tree_edges.emplace_back((i - 1) / 2, i);
    s.bodies = bodies;
    s.validate();
    return s;
  }
};

// mask[u,v] = 1 iff u == v or {u,v} is a tree edge inside one body.
inline Tensor kinematic_mask(const SkeletonSpec& spec) {
  const std::size_t J = spec.joints();
  const std::size_t V = spec.nodes();
  Tensor m({V, V});
  for (std::size_t v = 0; v < V; ++v) m[v * V + v] = 1.0;
  for (std::size_t b = 0; b < spec.bodies; ++b)
    for (auto [p, c] : spec.tree_edges) {
      const std::size_t u = b * J + p, w = b * J + c;
      m[u * V + w] = 1.0;
      m[w * V + u] = 1.0;
    }
  return m;
}

} // namespace duo
