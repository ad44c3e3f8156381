#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spotune/common.hpp"

namespace spotune {

enum class ColumnType { Real, Integer, Categorical };

// One typed column. Numeric NA is NaN; categorical NA is code -1.
struct Column {
  std::string name;
  ColumnType type = ColumnType::Real;
  std::vector<double> values;
  std::vector<int> codes;
  std::vector<std::string> levels;

  static Column numeric(std::string name, std::vector<double> values, bool integer = false);
  // Levels are the sorted distinct non-empty labels; "" marks NA.
  static Column categorical(std::string name, const std::vector<std::string>& labels);
  static Column categorical(std::string name, std::vector<int> codes, std::vector<std::string> levels);

  bool is_categorical() const { return type == ColumnType::Categorical; }
  std::size_t size() const { return is_categorical() ? codes.size() : values.size(); }
  bool is_na(std::size_t i) const;
  std::size_t na_count() const;
  Column select(std::span<const std::size_t> rows) const;
};

class Table {
 public:
  Table() = default;
  explicit Table(std::vector<Column> columns);

  std::size_t rows() const { return columns_.empty() ? 0 : columns_.front().size(); }
  std::size_t cols() const { return columns_.size(); }
  const std::vector<Column>& columns() const { return columns_; }
  const Column& column(std::size_t i) const { return columns_.at(i); }
  const Column& column(const std::string& name) const;
  bool has_column(const std::string& name) const;

  void add(Column c);
  Column remove(const std::string& name);
  void replace(Column c);
  Table select(std::span<const std::size_t> rows) const;

 private:
  std::vector<Column> columns_;
};

// Dense row-major numeric matrix.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

struct Task {
  Table features;
  Column target;
  TaskType type = TaskType::Classification;

  std::size_t rows() const { return target.size(); }
  Task select(std::span<const std::size_t> rows) const;
};

// Splits `target` out of the table; classification targets must be categorical.
Task make_task(Table table, const std::string& target, TaskType type);

using SchemaHints = std::map<std::string, ColumnType>;

// Header required. Cells that are empty, "NA" or "?" become NA. Without a
// hint, a column is Integer if every value is integral, Real if every value
// parses as a number, Categorical otherwise.
Table read_csv(std::istream& in, const SchemaHints& hints = {});
Table load_csv(const std::string& path, const SchemaHints& hints = {});
void write_csv(std::ostream& out, const Table& table);

// Categorical -> mode (ties: lexicographically smallest label),
// Integer -> lower median, Real -> mean.
Table impute(const Table& table);

// One 0/1 column per level ("name=level"); numeric columns pass through.
Table dummy_encode(const Table& table);

// Numeric table without NA -> matrix. Throws DataError otherwise.
DenseMatrix to_matrix(const Table& table);

Table subsample(const Table& table, std::size_t m, std::uint64_t seed);

inline constexpr const char* kBelowLabel = "below";
inline constexpr const char* kAtOrAboveLabel = "at_or_above";

// Numeric column -> two-level categorical: value < threshold is "below".
Table discretize_target(const Table& table, const std::string& column, double threshold);

struct HoldoutIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// round(fraction * n) rows go to training, clamped so both parts are non-empty.
HoldoutIndices holdout_indices(std::size_t n, double fraction, std::uint64_t seed);
std::pair<Table, Table> holdout_split(const Table& table, double fraction, std::uint64_t seed);

struct SynthSpec {
  std::size_t m = 1000;
  std::size_t n_numeric = 4;
  std::size_t n_categorical = 2;
  std::size_t cardinality = 4;
  double separation = 1.0;
  std::uint64_t seed = 1;
};

// Two-class problem: numeric features are unit Gaussians shifted by
// +-separation/2 per class, categorical levels are drawn with class-dependent
// tilted probabilities. separation = 0 makes the classes indistinguishable.
Task synth_classification(const SynthSpec& spec);

}  // namespace spotune
