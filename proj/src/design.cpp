#include "spotune/design.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "spotune/errors.hpp"
#include "spotune/rng.hpp"

namespace spotune {

std::vector<std::vector<double>> lhs_box(std::span<const double> lower, std::span<const double> upper,
                                         std::size_t size, std::uint64_t seed) {
  if (size == 0) throw ConfigError("design size must be at least 1");
  const std::size_t d = lower.size();
  Rng rng(seed);
  std::vector<std::vector<double>> pts(size, std::vector<double>(d));
  std::vector<std::size_t> strata(size);
  for (std::size_t j = 0; j < d; ++j) {
    std::iota(strata.begin(), strata.end(), std::size_t{0});
    rng.shuffle(strata.begin(), strata.end());
    const double width = upper[j] - lower[j];
    for (std::size_t i = 0; i < size; ++i) {
      const double u = (static_cast<double>(strata[i]) + rng.uniform()) / static_cast<double>(size);
      pts[i][j] = std::min(upper[j], lower[j] + width * u);
    }
  }
  return pts;
}

DesignMatrix lhs(const SearchSpace& space, std::size_t size, std::uint64_t seed) {
  const auto lo = space.lower_bounds();
  const auto hi = space.upper_bounds();
  return {lhs_box(lo, hi, size, seed), seed, DesignKind::Lhs};
}

DesignMatrix uniform_random(const SearchSpace& space, std::size_t size, std::uint64_t seed) {
  if (size == 0) throw ConfigError("design size must be at least 1");
  const auto lo = space.lower_bounds();
  const auto hi = space.upper_bounds();
  Rng rng(seed);
  DesignMatrix out{std::vector<std::vector<double>>(size, std::vector<double>(lo.size())), seed,
                   DesignKind::Uniform};
  for (auto& p : out.points) {
    for (std::size_t j = 0; j < lo.size(); ++j) p[j] = std::min(hi[j], rng.uniform(lo[j], hi[j]));
  }
  return out;
}

void write_design_csv(std::ostream& os, const SearchSpace& space, const DesignMatrix& design) {
  const auto& ps = space.params();
  for (std::size_t j = 0; j < ps.size(); ++j) os << (j ? "," : "") << ps[j].name;
  os << '\n';
  const auto old = os.precision(17);
  for (const auto& p : design.points) {
    for (std::size_t j = 0; j < p.size(); ++j) os << (j ? "," : "") << p[j];
    os << '\n';
  }
  os.precision(old);
}

}  // namespace spotune
