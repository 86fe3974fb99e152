#include "hyperq/action_space.hpp"

#include <string>

#include "hyperq/error.hpp"

namespace hyperq {

ActionSpace::ActionSpace(std::vector<std::size_t> cardinalities)
    : cardinalities_(std::move(cardinalities)) {
  if (cardinalities_.empty()) {
    throw Error(ErrorCode::invalid_action, "action space needs at least one vertex");
  }
  strides_.assign(cardinalities_.size(), 1);
  std::uint64_t total = 1;
  for (std::size_t i = cardinalities_.size(); i-- > 0;) {
    if (cardinalities_[i] == 0) {
      throw Error(ErrorCode::invalid_action,
                  "vertex " + std::to_string(i) + " has cardinality 0");
    }
    strides_[i] = static_cast<std::size_t>(total);
    std::uint64_t next = 0;
    if (__builtin_mul_overflow(total, static_cast<std::uint64_t>(cardinalities_[i]), &next)) {
      throw Error(ErrorCode::overflow, "action space size exceeds 64-bit range");
    }
    total = next;
  }
  total_size_ = static_cast<std::size_t>(total);
}

bool ActionSpace::contains(std::span<const std::size_t> a) const {
  if (a.size() != cardinalities_.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] >= cardinalities_[i]) return false;
  }
  return true;
}

FlatActionIndex tuple_to_flat(const ActionSpace& space, std::span<const std::size_t> a) {
  if (!space.contains(a)) {
    throw Error(ErrorCode::invalid_action, "tuple is not a member of the action space");
  }
  FlatActionIndex idx = 0;
  for (std::size_t i = 0; i < a.size(); ++i) idx += a[i] * space.strides()[i];
  return idx;
}

ActionTuple flat_to_tuple(const ActionSpace& space, FlatActionIndex idx) {
  if (idx >= space.total_size()) {
    throw Error(ErrorCode::invalid_index, "flat index " + std::to_string(idx) +
                                              " >= total size " +
                                              std::to_string(space.total_size()));
  }
  ActionTuple a(space.n_vertices());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = space.digit(idx, i);
  return a;
}

std::vector<ActionTuple> enumerate_actions(const ActionSpace& space) {
  std::vector<ActionTuple> out;
  out.reserve(space.total_size());
  ActionTuple a(space.n_vertices(), 0);
  for (std::size_t n = 0; n < space.total_size(); ++n) {
    out.push_back(a);
    // odometer increment, last vertex fastest
    for (std::size_t i = a.size(); i-- > 0;) {
      if (++a[i] < space.cardinality(i)) break;
      a[i] = 0;
    }
  }
  return out;
}

}  // namespace hyperq
