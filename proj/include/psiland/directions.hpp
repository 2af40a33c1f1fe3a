#pragma once

#include "psiland/types.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace psiland {

// Scrambled Sobol points mapped to the unit sphere, in antithetic pairs
// (w, -w). One set per (seed, replicate); the digital shift is drawn from
// the seed so replicates are independent randomizations.
class DirectionSet {
 public:
  DirectionSet(int dim, std::uint64_t seed, int replicate, std::size_t count);

  int dimension() const { return dim_; }
  std::size_t size() const { return data_.size() / dim_; }
  Eigen::Map<const Eigen::VectorXd> operator[](std::size_t k) const {
    return Eigen::Map<const Eigen::VectorXd>(data_.data() + k * dim_, dim_);
  }

 private:
  int dim_;
  std::vector<double> data_;
};

// Shared, immutable direction sets; built once per key.
std::shared_ptr<const DirectionSet> sphere_directions(int dim, std::uint64_t seed, int replicate,
                                                      std::size_t count);

// Deterministic 64-bit stream key derived from (seed, stream).
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace psiland
