#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mep {

using Vector = std::vector<double>;
using Rng = std::mt19937_64;

// Raised for violated preconditions: shape mismatches, invalid simplexes,
// malformed trajectories, stale priority tables.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

inline void require_shape(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace mep
