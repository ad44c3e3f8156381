#include "spotune/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "spotune/errors.hpp"
#include "spotune/rng.hpp"

namespace spotune {

namespace {

constexpr double kNA = std::numeric_limits<double>::quiet_NaN();

bool is_na_token(const std::string& s) { return s.empty() || s == "NA" || s == "?"; }

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

// RFC 4180 style: fields may be quoted; "" inside quotes is a literal quote.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool quoted = false, any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      break;
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (quoted) throw DataError("CSV: unterminated quoted field");
  if (!any) return false;
  fields.push_back(std::move(field));
  return true;
}

std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

Column Column::numeric(std::string name, std::vector<double> values, bool integer) {
  Column c;
  c.name = std::move(name);
  c.type = integer ? ColumnType::Integer : ColumnType::Real;
  c.values = std::move(values);
  return c;
}

Column Column::categorical(std::string name, const std::vector<std::string>& labels) {
  std::set<std::string> distinct;
  for (const auto& l : labels) {
    if (!l.empty()) distinct.insert(l);
  }
  std::vector<std::string> levels(distinct.begin(), distinct.end());
  std::vector<int> codes;
  codes.reserve(labels.size());
  for (const auto& l : labels) {
    codes.push_back(l.empty() ? -1
                              : static_cast<int>(std::lower_bound(levels.begin(), levels.end(), l) - levels.begin()));
  }
  return categorical(std::move(name), std::move(codes), std::move(levels));
}

Column Column::categorical(std::string name, std::vector<int> codes, std::vector<std::string> levels) {
  Column c;
  c.name = std::move(name);
  c.type = ColumnType::Categorical;
  c.codes = std::move(codes);
  c.levels = std::move(levels);
  for (int code : c.codes) {
    if (code < -1 || code >= static_cast<int>(c.levels.size()))
      throw DataError("column '" + c.name + "': category code out of range");
  }
  return c;
}

bool Column::is_na(std::size_t i) const {
  return is_categorical() ? codes[i] < 0 : std::isnan(values[i]);
}

std::size_t Column::na_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < size(); ++i) n += is_na(i);
  return n;
}

Column Column::select(std::span<const std::size_t> rows) const {
  Column c;
  c.name = name;
  c.type = type;
  c.levels = levels;
  if (is_categorical()) {
    c.codes.reserve(rows.size());
    for (auto r : rows) c.codes.push_back(codes.at(r));
  } else {
    c.values.reserve(rows.size());
    for (auto r : rows) c.values.push_back(values.at(r));
  }
  return c;
}

// ---------------------------------------------------------------------------

Table::Table(std::vector<Column> columns) {
  for (auto& c : columns) add(std::move(c));
}

const Column& Table::column(const std::string& name) const {
  for (const auto& c : columns_) {
    if (c.name == name) return c;
  }
  throw DataError("no column named '" + name + "'");
}

bool Table::has_column(const std::string& name) const {
  return std::any_of(columns_.begin(), columns_.end(), [&](const Column& c) { return c.name == name; });
}

void Table::add(Column c) {
  if (!columns_.empty() && c.size() != rows())
    throw DataError("column '" + c.name + "' has " + std::to_string(c.size()) + " rows, expected " +
                    std::to_string(rows()));
  if (has_column(c.name)) throw DataError("duplicate column '" + c.name + "'");
  columns_.push_back(std::move(c));
}

Column Table::remove(const std::string& name) {
  for (auto it = columns_.begin(); it != columns_.end(); ++it) {
    if (it->name == name) {
      Column c = std::move(*it);
      columns_.erase(it);
      return c;
    }
  }
  throw DataError("no column named '" + name + "'");
}

void Table::replace(Column c) {
  for (auto& col : columns_) {
    if (col.name == c.name) {
      if (c.size() != col.size()) throw DataError("replacement column has wrong length");
      col = std::move(c);
      return;
    }
  }
  throw DataError("no column named '" + c.name + "'");
}

Table Table::select(std::span<const std::size_t> rows) const {
  Table t;
  for (const auto& c : columns_) t.columns_.push_back(c.select(rows));
  return t;
}

Task Task::select(std::span<const std::size_t> rows) const {
  return Task{features.select(rows), target.select(rows), type};
}

Task make_task(Table table, const std::string& target, TaskType type) {
  Task t;
  t.target = table.remove(target);
  t.features = std::move(table);
  t.type = type;
  if (type == TaskType::Classification && !t.target.is_categorical())
    throw DataError("classification target '" + target + "' must be categorical");
  if (type == TaskType::Regression && t.target.is_categorical())
    throw DataError("regression target '" + target + "' must be numeric");
  if (t.target.na_count() > 0) throw DataError("target '" + target + "' contains missing values");
  return t;
}

// ---------------------------------------------------------------------------

Table read_csv(std::istream& in, const SchemaHints& hints) {
  std::vector<std::string> header, fields;
  if (!read_record(in, header)) throw DataError("CSV: missing header");
  std::vector<std::vector<std::string>> cells(header.size());
  std::size_t line = 1;
  while (read_record(in, fields)) {
    ++line;
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != header.size())
      throw DataError("CSV line " + std::to_string(line) + ": expected " + std::to_string(header.size()) +
                      " fields, got " + std::to_string(fields.size()));
    for (std::size_t j = 0; j < fields.size(); ++j) cells[j].push_back(std::move(fields[j]));
  }
  for (const auto& [name, type] : hints) {
    if (std::find(header.begin(), header.end(), name) == header.end())
      throw DataError("schema hint for unknown column '" + name + "'");
  }

  Table t;
  for (std::size_t j = 0; j < header.size(); ++j) {
    auto& col = cells[j];
    std::optional<ColumnType> type;
    if (auto it = hints.find(header[j]); it != hints.end()) type = it->second;

    std::vector<double> values(col.size(), kNA);
    bool numeric = true, integral = true;
    for (std::size_t i = 0; i < col.size(); ++i) {
      if (is_na_token(col[i])) continue;
      double v;
      if (!parse_double(col[i], v)) {
        if (type && *type != ColumnType::Categorical)
          throw DataError("CSV line " + std::to_string(i + 2) + ", column '" + header[j] +
                          "': cannot parse '" + col[i] + "' as a number");
        numeric = false;
        break;
      }
      values[i] = v;
      integral = integral && std::nearbyint(v) == v;
    }
    if (!type) type = !numeric ? ColumnType::Categorical : integral ? ColumnType::Integer : ColumnType::Real;

    if (*type == ColumnType::Categorical) {
      for (auto& s : col) {
        if (is_na_token(s)) s.clear();
      }
      t.add(Column::categorical(header[j], col));
    } else {
      t.add(Column::numeric(header[j], std::move(values), *type == ColumnType::Integer));
    }
  }
  return t;
}

Table load_csv(const std::string& path, const SchemaHints& hints) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_csv(in, hints);
}

void write_csv(std::ostream& out, const Table& table) {
  for (std::size_t j = 0; j < table.cols(); ++j) out << (j ? "," : "") << quote_csv(table.column(j).name);
  out << '\n';
  std::ostringstream cell;
  cell.precision(17);
  for (std::size_t i = 0; i < table.rows(); ++i) {
    for (std::size_t j = 0; j < table.cols(); ++j) {
      const auto& c = table.column(j);
      if (j) out << ',';
      if (c.is_na(i)) {
        out << "NA";
      } else if (c.is_categorical()) {
        out << quote_csv(c.levels[static_cast<std::size_t>(c.codes[i])]);
      } else {
        cell.str("");
        cell << c.values[i];
        out << cell.str();
      }
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

Table impute(const Table& table) {
  Table out;
  for (Column c : table.columns()) {
    if (c.na_count() == 0) {
      out.add(std::move(c));
      continue;
    }
    if (c.na_count() == c.size()) throw DataError("column '" + c.name + "' has no observed values to impute from");
    if (c.is_categorical()) {
      std::vector<std::size_t> counts(c.levels.size(), 0);
      for (int code : c.codes) {
        if (code >= 0) ++counts[static_cast<std::size_t>(code)];
      }
      std::size_t best = 0;
      for (std::size_t l = 1; l < counts.size(); ++l) {
        if (counts[l] > counts[best] || (counts[l] == counts[best] && c.levels[l] < c.levels[best])) best = l;
      }
      for (int& code : c.codes) {
        if (code < 0) code = static_cast<int>(best);
      }
    } else {
      std::vector<double> observed;
      for (double v : c.values) {
        if (!std::isnan(v)) observed.push_back(v);
      }
      double fill;
      if (c.type == ColumnType::Integer) {
        std::sort(observed.begin(), observed.end());
        fill = observed[(observed.size() - 1) / 2];
      } else {
        fill = std::accumulate(observed.begin(), observed.end(), 0.0) / static_cast<double>(observed.size());
      }
      for (double& v : c.values) {
        if (std::isnan(v)) v = fill;
      }
    }
    out.add(std::move(c));
  }
  return out;
}

Table dummy_encode(const Table& table) {
  Table out;
  for (const auto& c : table.columns()) {
    if (!c.is_categorical()) {
      out.add(c);
      continue;
    }
    for (std::size_t l = 0; l < c.levels.size(); ++l) {
      std::vector<double> v(c.size());
      for (std::size_t i = 0; i < c.size(); ++i) {
        v[i] = c.codes[i] < 0 ? kNA : (c.codes[i] == static_cast<int>(l) ? 1.0 : 0.0);
      }
      out.add(Column::numeric(c.name + "=" + c.levels[l], std::move(v), true));
    }
  }
  return out;
}

DenseMatrix to_matrix(const Table& table) {
  DenseMatrix m;
  m.rows = table.rows();
  m.cols = table.cols();
  m.data.resize(m.rows * m.cols);
  for (std::size_t j = 0; j < m.cols; ++j) {
    const auto& c = table.column(j);
    if (c.is_categorical()) throw DataError("column '" + c.name + "' is categorical; dummy-encode first");
    for (std::size_t i = 0; i < m.rows; ++i) {
      if (std::isnan(c.values[i])) throw DataError("column '" + c.name + "' has missing values; impute first");
      m.data[i * m.cols + j] = c.values[i];
    }
  }
  return m;
}

Table subsample(const Table& table, std::size_t m, std::uint64_t seed) {
  if (m == 0 || m > table.rows())
    throw DataError("subsample size " + std::to_string(m) + " not in [1, " + std::to_string(table.rows()) + "]");
  std::vector<std::size_t> idx(table.rows());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(idx.begin(), idx.end());
  idx.resize(m);
  return table.select(idx);
}

Table discretize_target(const Table& table, const std::string& column, double threshold) {
  const auto& src = table.column(column);
  if (src.is_categorical()) throw DataError("cannot discretize categorical column '" + column + "'");
  std::vector<int> codes(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    codes[i] = std::isnan(src.values[i]) ? -1 : (src.values[i] < threshold ? 0 : 1);
  }
  Table out = table;
  out.replace(Column::categorical(column, std::move(codes), {kBelowLabel, kAtOrAboveLabel}));
  return out;
}

HoldoutIndices holdout_indices(std::size_t n, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("holdout fraction must lie in (0, 1)");
  if (n < 2) throw DataError("holdout split needs at least two rows");
  auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(idx.begin(), idx.end());
  HoldoutIndices h;
  h.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  h.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(h.train.begin(), h.train.end());
  std::sort(h.test.begin(), h.test.end());
  return h;
}

std::pair<Table, Table> holdout_split(const Table& table, double fraction, std::uint64_t seed) {
  const auto h = holdout_indices(table.rows(), fraction, seed);
  return {table.select(h.train), table.select(h.test)};
}

Task synth_classification(const SynthSpec& spec) {
  if (spec.m == 0) throw ConfigError("synthetic data needs at least one row");
  if (spec.n_categorical > 0 && spec.cardinality < 2) throw ConfigError("cardinality must be at least 2");
  Rng rng(spec.seed);
  std::vector<int> cls(spec.m);
  for (auto& c : cls) c = rng.uniform() < 0.5 ? 0 : 1;

  Table features;
  for (std::size_t f = 0; f < spec.n_numeric; ++f) {
    std::vector<double> v(spec.m);
    for (std::size_t i = 0; i < spec.m; ++i) v[i] = rng.normal() + (cls[i] ? 0.5 : -0.5) * spec.separation;
    features.add(Column::numeric("num" + std::to_string(f + 1), std::move(v)));
  }
  const std::size_t L = spec.cardinality;
  for (std::size_t f = 0; f < spec.n_categorical; ++f) {
    // Level weights tilt towards opposite ends of the level list per class.
    std::vector<std::vector<double>> cdf(2, std::vector<double>(L));
    for (int c = 0; c < 2; ++c) {
      double total = 0.0;
      for (std::size_t l = 0; l < L; ++l) {
        const double pos = 2.0 * static_cast<double>(l) / static_cast<double>(L - 1) - 1.0;
        total += std::exp((c ? 2.0 : -2.0) * spec.separation * pos);
        cdf[c][l] = total;
      }
      for (auto& x : cdf[c]) x /= total;
    }
    std::vector<int> codes(spec.m);
    for (std::size_t i = 0; i < spec.m; ++i) {
      const double u = rng.uniform();
      const auto& row = cdf[cls[i]];
      codes[i] = static_cast<int>(std::min<std::size_t>(
          L - 1, static_cast<std::size_t>(std::upper_bound(row.begin(), row.end(), u) - row.begin())));
    }
    std::vector<std::string> levels;
    for (std::size_t l = 0; l < L; ++l) levels.push_back("L" + std::to_string(l + 1));
    features.add(Column::categorical("cat" + std::to_string(f + 1), std::move(codes), std::move(levels)));
  }
  Task t;
  t.features = std::move(features);
  t.target = Column::categorical("class", std::move(cls), {"class0", "class1"});
  t.type = TaskType::Classification;
  return t;
}

}  // namespace spotune
