#pragma once

#include <cstddef>
#include <vector>

#include "mep/common.hpp"

namespace mep {

// Complete binary tree of partial sums over a power-of-two number of leaves.
// Node 1 is the root; leaf i lives at node capacity + i.
class SumTree {
 public:
  explicit SumTree(std::size_t min_capacity) {
    require(min_capacity > 0, "sum-tree capacity must be positive");
    capacity_ = 1;
    while (capacity_ < min_capacity) capacity_ <<= 1;
    nodes_.assign(2 * capacity_, 0.0);
  }

  std::size_t capacity() const { return capacity_; }
  double total() const { return nodes_[1]; }
  double get(std::size_t index) const { return nodes_.at(capacity_ + index); }

  // O(log capacity). Ancestors are recomputed from their children so the
  // sum invariant holds exactly after every update.
  void update(std::size_t index, double priority) {
    require(index < capacity_, "sum-tree index out of range");
    require(priority >= 0.0, "sum-tree priority must be non-negative");
    std::size_t node = capacity_ + index;
    nodes_[node] = priority;
    for (node >>= 1; node >= 1; node >>= 1) nodes_[node] = nodes_[2 * node] + nodes_[2 * node + 1];
  }

  // Leaf whose cumulative bin [c_i, c_i + p_i) contains value. Values at or
  // beyond total() select the last non-empty leaf.
  std::size_t find_prefix(double value) const {
    require(total() > 0.0, "sum-tree is empty");
    std::size_t node = 1;
    while (node < capacity_) {
      const std::size_t left = 2 * node;
      if (value < nodes_[left] || nodes_[left + 1] == 0.0) {
        node = left;
      } else {
        value -= nodes_[left];
        node = left + 1;
      }
    }
    return node - capacity_;
  }

  // Internal-node invariant, used by tests.
  bool consistent() const {
    for (std::size_t n = 1; n < capacity_; ++n)
      if (nodes_[n] != nodes_[2 * n] + nodes_[2 * n + 1]) return false;
    return true;
  }

 private:
  std::size_t capacity_ = 1;
  std::vector<double> nodes_;
};

}  // namespace mep
