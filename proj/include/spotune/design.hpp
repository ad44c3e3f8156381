#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "spotune/space.hpp"

namespace spotune {

enum class DesignKind { Lhs, Uniform };

// size x d points on the raw scale of a SearchSpace.
struct DesignMatrix {
  std::vector<std::vector<double>> points;
  std::uint64_t seed = 0;
  DesignKind kind = DesignKind::Lhs;

  std::size_t size() const { return points.size(); }
};

// Latin hypercube: per dimension, exactly one point in each of `size`
// equal-width strata, placed uniformly inside its stratum.
DesignMatrix lhs(const SearchSpace& space, std::size_t size, std::uint64_t seed);

// i.i.d. uniform points in the raw box.
DesignMatrix uniform_random(const SearchSpace& space, std::size_t size, std::uint64_t seed);

// Box-based variants used by the optimizers.
std::vector<std::vector<double>> lhs_box(std::span<const double> lower, std::span<const double> upper,
                                         std::size_t size, std::uint64_t seed);

// CSV with a header of parameter names; raw-scale values.
void write_design_csv(std::ostream& os, const SearchSpace& space, const DesignMatrix& design);

}  // namespace spotune
