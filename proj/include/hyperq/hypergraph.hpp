#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hyperq/action_space.hpp"

namespace hyperq {

/// A set of action vertices, stored strictly increasing.
class Hyperedge {
 public:
  Hyperedge() = default;
  /// Sorts the given vertices; duplicates are kept so `validate` can report them.
  explicit Hyperedge(std::vector<std::size_t> vertices);

  const std::vector<std::size_t>& vertices() const { return vertices_; }
  std::size_t order() const { return vertices_.size(); }
  bool empty() const { return vertices_.empty(); }

  friend bool operator==(const Hyperedge&, const Hyperedge&) = default;
  /// (order, lexicographic)
  friend bool operator<(const Hyperedge& a, const Hyperedge& b);

 private:
  std::vector<std::size_t> vertices_;
};

enum class Violation {
  empty_edge,
  vertex_out_of_range,
  repeated_vertex,
  duplicate_edge,
  not_covering,
};

struct ValidationReport {
  std::optional<Violation> violation;
  std::string message;

  bool ok() const { return !violation.has_value(); }
};

/// Family of hyperedges over `n_vertices` action vertices. Edges are kept in
/// (order, lexicographic) order so block indices are stable across runs.
class Hypergraph {
 public:
  Hypergraph() = default;
  /// Unchecked: canonicalizes edge order only. Use `validate` or `checked`.
  Hypergraph(std::size_t n_vertices, std::vector<Hyperedge> edges);

  /// Validates and throws `invalid_hypergraph` on any violation.
  static Hypergraph checked(std::size_t n_vertices,
                            const std::vector<std::vector<std::size_t>>& edges);

  std::size_t n_vertices() const { return n_vertices_; }
  std::size_t n_edges() const { return edges_.size(); }
  const std::vector<Hyperedge>& edges() const { return edges_; }
  const Hyperedge& edge(std::size_t j) const { return edges_.at(j); }
  std::size_t rank() const;

  friend bool operator==(const Hypergraph&, const Hypergraph&) = default;

 private:
  std::size_t n_vertices_ = 0;
  std::vector<Hyperedge> edges_;
};

ValidationReport validate(const Hypergraph& h);

/// All C(n, c) edges of order c, lexicographic.
std::vector<Hyperedge> complete_uniform(std::size_t n_vertices, std::size_t c);
/// Union of the 1..r complete hypergraphs.
Hypergraph rank_hypergraph(std::size_t n_vertices, std::size_t r);
/// The hypergraph holding only the full-order edge (a standard flat model).
Hypergraph full_edge_hypergraph(std::size_t n_vertices);

std::vector<std::size_t> project_action(const Hyperedge& edge, std::span<const std::size_t> a);
std::size_t edge_output_count(const Hyperedge& edge, const ActionSpace& space);
std::size_t edge_local_index(const Hyperedge& edge, const ActionSpace& space,
                             std::span<const std::size_t> a);

/// Precomputed mapping from flat actions to a block's output slot.
class EdgeIndexer {
 public:
  EdgeIndexer(const Hyperedge& edge, const ActionSpace& space);

  std::size_t output_count() const { return output_count_; }
  std::size_t local_index(FlatActionIndex idx) const {
    std::size_t local = 0;
    for (const Term& t : terms_) local += ((idx / t.space_stride) % t.cardinality) * t.local_stride;
    return local;
  }

 private:
  struct Term {
    std::size_t space_stride;
    std::size_t cardinality;
    std::size_t local_stride;
  };
  std::vector<Term> terms_;
  std::size_t output_count_ = 1;
};

std::size_t binomial(std::size_t n, std::size_t k);

}  // namespace hyperq
