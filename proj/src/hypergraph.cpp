#include "hyperq/hypergraph.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "hyperq/error.hpp"

namespace hyperq {

Hyperedge::Hyperedge(std::vector<std::size_t> vertices) : vertices_(std::move(vertices)) {
  std::sort(vertices_.begin(), vertices_.end());
}

bool operator<(const Hyperedge& a, const Hyperedge& b) {
  if (a.order() != b.order()) return a.order() < b.order();
  return a.vertices() < b.vertices();
}

Hypergraph::Hypergraph(std::size_t n_vertices, std::vector<Hyperedge> edges)
    : n_vertices_(n_vertices), edges_(std::move(edges)) {
  std::stable_sort(edges_.begin(), edges_.end());
}

Hypergraph Hypergraph::checked(std::size_t n_vertices,
                               const std::vector<std::vector<std::size_t>>& edges) {
  std::vector<Hyperedge> es;
  es.reserve(edges.size());
  for (const auto& e : edges) es.emplace_back(e);
  Hypergraph h(n_vertices, std::move(es));
  if (auto report = validate(h); !report.ok()) {
    throw Error(ErrorCode::invalid_hypergraph, report.message);
  }
  return h;
}

std::size_t Hypergraph::rank() const {
  std::size_t r = 0;
  for (const auto& e : edges_) r = std::max(r, e.order());
  return r;
}

ValidationReport validate(const Hypergraph& h) {
  std::vector<bool> covered(h.n_vertices(), false);
  for (std::size_t j = 0; j < h.n_edges(); ++j) {
    const auto& v = h.edge(j).vertices();
    if (v.empty()) return {Violation::empty_edge, "hyperedge " + std::to_string(j) + " is empty"};
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (v[k] >= h.n_vertices()) {
        return {Violation::vertex_out_of_range,
                "hyperedge " + std::to_string(j) + " names vertex " + std::to_string(v[k])};
      }
      if (k > 0 && v[k] == v[k - 1]) {
        return {Violation::repeated_vertex,
                "hyperedge " + std::to_string(j) + " repeats vertex " + std::to_string(v[k])};
      }
      covered[v[k]] = true;
    }
    if (j > 0 && h.edge(j) == h.edge(j - 1)) {
      return {Violation::duplicate_edge, "hyperedge " + std::to_string(j) + " is duplicated"};
    }
  }
  for (std::size_t i = 0; i < covered.size(); ++i) {
    if (!covered[i]) {
      return {Violation::not_covering, "vertex " + std::to_string(i) + " is not covered"};
    }
  }
  if (h.n_vertices() == 0) return {Violation::not_covering, "hypergraph has no vertices"};
  return {};
}

std::vector<Hyperedge> complete_uniform(std::size_t n_vertices, std::size_t c) {
  if (c < 1 || c > n_vertices) {
    throw Error(ErrorCode::invalid_order, "order " + std::to_string(c) + " outside [1, " +
                                              std::to_string(n_vertices) + "]");
  }
  std::vector<Hyperedge> out;
  std::vector<std::size_t> combo(c);
  std::iota(combo.begin(), combo.end(), 0);
  while (true) {
    out.emplace_back(combo);
    // advance to the next combination in lexicographic order
    std::size_t i = c;
    while (i > 0 && combo[i - 1] == n_vertices - c + (i - 1)) --i;
    if (i == 0) break;
    ++combo[i - 1];
    for (std::size_t k = i; k < c; ++k) combo[k] = combo[k - 1] + 1;
  }
  return out;
}

Hypergraph rank_hypergraph(std::size_t n_vertices, std::size_t r) {
  if (r < 1 || r > n_vertices) {
    throw Error(ErrorCode::invalid_rank,
                "rank " + std::to_string(r) + " outside [1, " + std::to_string(n_vertices) + "]");
  }
  std::vector<Hyperedge> edges;
  for (std::size_t c = 1; c <= r; ++c) {
    auto layer = complete_uniform(n_vertices, c);
    edges.insert(edges.end(), layer.begin(), layer.end());
  }
  return Hypergraph(n_vertices, std::move(edges));
}

Hypergraph full_edge_hypergraph(std::size_t n_vertices) {
  std::vector<std::size_t> all(n_vertices);
  std::iota(all.begin(), all.end(), 0);
  return Hypergraph::checked(n_vertices, {all});
}

std::vector<std::size_t> project_action(const Hyperedge& edge, std::span<const std::size_t> a) {
  std::vector<std::size_t> out;
  out.reserve(edge.order());
  for (std::size_t v : edge.vertices()) out.push_back(a[v]);
  return out;
}

std::size_t edge_output_count(const Hyperedge& edge, const ActionSpace& space) {
  std::size_t n = 1;
  for (std::size_t v : edge.vertices()) n *= space.cardinality(v);
  return n;
}

std::size_t edge_local_index(const Hyperedge& edge, const ActionSpace& space,
                             std::span<const std::size_t> a) {
  if (!space.contains(a)) throw Error(ErrorCode::invalid_action, "tuple not in action space");
  std::size_t local = 0;
  for (std::size_t v : edge.vertices()) local = local * space.cardinality(v) + a[v];
  return local;
}

EdgeIndexer::EdgeIndexer(const Hyperedge& edge, const ActionSpace& space) {
  const auto& vs = edge.vertices();
  terms_.resize(vs.size());
  std::size_t local_stride = 1;
  for (std::size_t k = vs.size(); k-- > 0;) {
    if (vs[k] >= space.n_vertices()) {
      throw Error(ErrorCode::invalid_hypergraph, "edge vertex outside action space");
    }
    terms_[k] = {space.strides()[vs[k]], space.cardinality(vs[k]), local_stride};
    local_stride *= space.cardinality(vs[k]);
  }
  output_count_ = local_stride;
}

std::size_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  std::size_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace hyperq
