#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spotune/data.hpp"
#include "spotune/learners.hpp"
#include "spotune/space.hpp"
#include "spotune/tuner.hpp"

namespace spotune {

// ranks[i] is the rank (1..k) of subject i; must be a permutation of 1..k.
using Ranking = std::vector<int>;

void validate_ranking(const Ranking& r);

// Number of subject pairs ordered oppositely by the two rankings.
int kendall_tau(const Ranking& r1, const Ranking& r2);

struct Consensus {
  Ranking consensus;
  int total_distance = 0;
};

inline constexpr std::size_t kMaxKemenySubjects = 8;

// Exhaustive Kemeny-optimal ranking. Ties go to the lexicographically
// smallest rank vector. Throws UnsupportedError for more than 8 subjects.
Consensus kemeny_consensus(const std::vector<Ranking>& rankings);

struct RankingCase {
  std::vector<Ranking> rankings;
  Ranking consensus;
  int total_distance = 0;
};

RankingCase make_ranking_case(std::vector<Ranking> rankings);

// Rank 1 for the smallest loss; equal losses rank by subject order.
Ranking ranks_from_losses(const std::vector<double>& losses);

// freq[subject][rank - 1]: share of cases in which the subject's consensus
// rank equals `rank`.
std::vector<std::vector<double>> rank_frequencies(const std::vector<RankingCase>& cases);

struct FeatureOverlap {
  std::string feature;
  double overlap = 0.0;
};

struct OverlapReport {
  std::vector<FeatureOverlap> features;
  double total = 1.0;
};

// Per feature, the share of samples whose value could occur in both classes:
// inside the intersection of the class ranges (numeric) or in a level seen in
// both classes (categorical). NA cells are ignored. The total is the product.
// Throws DataError unless the target has exactly two observed classes.
OverlapReport sample_overlap_report(const Task& task);
inline double sample_overlap(const Task& task) { return sample_overlap_report(task).total; }

inline constexpr double kDifficultyAnchors[4] = {0.39, 0.54, 0.76, 1.00};

// Nearest anchor, 1 (hardest) to 4; a midpoint goes to the lower-overlap level.
int difficulty_level(double overlap);

struct SensitivityCurve {
  std::string param;
  std::vector<double> grid;  // raw values
  std::vector<double> mean;  // surrogate mean, other axes at the best point
};

struct SensitivityReport {
  std::vector<std::string> names;
  std::vector<std::vector<double>> parallel;  // normalized raw x, then loss
  bool surrogate_fitted = false;
  std::vector<SensitivityCurve> curves;
  std::optional<std::pair<std::size_t, std::size_t>> surface_pair;
  std::vector<double> surface_x;
  std::vector<double> surface_y;
  std::vector<std::vector<double>> surface;  // surface[i][j] at (surface_x[i], surface_y[j])
  CartTree tree;
  std::string tree_rules;
};

inline constexpr std::size_t kSensitivityGrid = 21;

// Tables behind the usual post-tuning plots, computed from the records that
// carry a raw point. The surface uses `pair` (default: the first two axes).
SensitivityReport sensitivity_export(const TuneResult& result, const SearchSpace& space,
                                     std::optional<std::pair<std::size_t, std::size_t>> pair = std::nullopt,
                                     std::uint64_t seed = 1);

void write_parallel_csv(std::ostream& os, const SensitivityReport& report);
void write_curves_csv(std::ostream& os, const SensitivityReport& report);
void write_surface_csv(std::ostream& os, const SensitivityReport& report);

}  // namespace spotune
