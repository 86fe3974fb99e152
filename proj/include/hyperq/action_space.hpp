#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace hyperq {

/// One sub-action index per action vertex.
using ActionTuple = std::vector<std::size_t>;
/// Position of an action in the mixed-radix enumeration of its space.
using FlatActionIndex = std::size_t;

/// Cartesian product of per-vertex sub-action sets.
///
/// Flat indices use row-major order: the last vertex varies fastest, so
/// `tuple_to_flat` is strictly monotone in lexicographic tuple order.
class ActionSpace {
 public:
  ActionSpace() = default;
  /// Throws `invalid_action` for an empty list or a zero cardinality and
  /// `overflow` when the product does not fit in 64 bits.
  explicit ActionSpace(std::vector<std::size_t> cardinalities);

  std::size_t n_vertices() const { return cardinalities_.size(); }
  std::size_t total_size() const { return total_size_; }
  std::size_t cardinality(std::size_t vertex) const { return cardinalities_.at(vertex); }
  const std::vector<std::size_t>& cardinalities() const { return cardinalities_; }
  const std::vector<std::size_t>& strides() const { return strides_; }

  bool contains(std::span<const std::size_t> a) const;

  /// Sub-action of `vertex` within flat action `idx` (no bounds check on idx).
  std::size_t digit(FlatActionIndex idx, std::size_t vertex) const {
    return (idx / strides_[vertex]) % cardinalities_[vertex];
  }

  friend bool operator==(const ActionSpace&, const ActionSpace&) = default;

 private:
  std::vector<std::size_t> cardinalities_;
  std::vector<std::size_t> strides_;
  std::size_t total_size_ = 0;
};

FlatActionIndex tuple_to_flat(const ActionSpace& space, std::span<const std::size_t> a);
ActionTuple flat_to_tuple(const ActionSpace& space, FlatActionIndex idx);
/// All tuples, in flat-index order.
std::vector<ActionTuple> enumerate_actions(const ActionSpace& space);

}  // namespace hyperq
