#include "spotune/learners.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "spotune/errors.hpp"

namespace spotune {

namespace {

std::size_t class_count(std::span<const double> y) {
  double mx = 0.0;
  for (double v : y) mx = std::max(mx, v);
  return static_cast<std::size_t>(mx) + 1;
}

// Index of the largest count; ties go to the smallest class code.
double majority(const std::vector<double>& counts) {
  return static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

}  // namespace

double minkowski_distance(std::span<const double> a, std::span<const double> b, double p) {
  if (a.size() != b.size()) throw ConfigError("Minkowski distance: dimension mismatch");
  if (!(p > 0.0)) throw ConfigError("Minkowski distance: p must be positive");
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += std::pow(std::fabs(a[j] - b[j]), p);
  return std::pow(s, 1.0 / p);
}

std::vector<double> knn_predict(const DenseMatrix& train_x, std::span<const double> train_y, TaskType type,
                                const DenseMatrix& queries, int k, double p, std::stop_token stop) {
  if (k < 1) throw ConfigError("k-NN: k must be at least 1");
  if (static_cast<std::size_t>(k) > train_x.rows)
    throw ConfigError("k-NN: k = " + std::to_string(k) + " exceeds training size " + std::to_string(train_x.rows));
  if (!(p > 0.0)) throw ConfigError("k-NN: p must be positive");
  if (queries.cols != train_x.cols) throw ConfigError("k-NN: query dimension mismatch");
  if (train_y.size() != train_x.rows) throw ConfigError("k-NN: target length mismatch");

  const std::size_t m = train_x.rows;
  const auto kk = static_cast<std::size_t>(k);
  const std::size_t n_classes = type == TaskType::Classification ? class_count(train_y) : 0;
  // The 1/p root is monotone and does not change neighbour order.
  auto powered = [&](std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    if (p == 2.0) {
      for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    } else if (p == 1.0) {
      for (std::size_t j = 0; j < a.size(); ++j) s += std::fabs(a[j] - b[j]);
    } else {
      for (std::size_t j = 0; j < a.size(); ++j) s += std::pow(std::fabs(a[j] - b[j]), p);
    }
    return s;
  };

  std::vector<double> out(queries.rows);
  std::vector<std::pair<double, std::size_t>> dist(m);
  std::vector<double> counts(n_classes);
  std::vector<std::size_t> first_seen(n_classes);
  for (std::size_t q = 0; q < queries.rows; ++q) {
    if (q % 64 == 0 && stop.stop_requested()) throw Cancelled();
    const auto qrow = queries.row(q);
    for (std::size_t i = 0; i < m; ++i) dist[i] = {powered(qrow, train_x.row(i)), i};
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk - 1), dist.end());
    std::sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk));
    if (type == TaskType::Regression) {
      double s = 0.0;
      for (std::size_t i = 0; i < kk; ++i) s += train_y[dist[i].second];
      out[q] = s / static_cast<double>(kk);
    } else {
      std::fill(counts.begin(), counts.end(), 0.0);
      std::fill(first_seen.begin(), first_seen.end(), m);
      for (std::size_t i = 0; i < kk; ++i) {
        const auto c = static_cast<std::size_t>(train_y[dist[i].second]);
        counts[c] += 1.0;
        first_seen[c] = std::min(first_seen[c], dist[i].second);
      }
      std::size_t best = 0;
      for (std::size_t c = 1; c < n_classes; ++c) {
        if (counts[c] > counts[best] || (counts[c] == counts[best] && first_seen[c] < first_seen[best])) best = c;
      }
      out[q] = static_cast<double>(best);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

class CartBuilder {
 public:
  CartBuilder(const DenseMatrix& x, std::span<const double> y, TaskType type, const CartParams& params,
              std::stop_token stop)
      : x_(x), y_(y), type_(type), params_(params), stop_(std::move(stop)) {
    if (type_ == TaskType::Classification) n_classes_ = class_count(y);
  }

  CartTree build() {
    tree_.type = type_;
    std::vector<std::size_t> rows(x_.rows);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    tree_.root_risk = risk_of(rows);
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  struct Stats {
    std::vector<double> counts;
    double sum = 0.0;
    double sum2 = 0.0;
    double n = 0.0;

    void add(double v, TaskType t) {
      n += 1.0;
      if (t == TaskType::Classification) {
        counts[static_cast<std::size_t>(v)] += 1.0;
      } else {
        sum += v;
        sum2 += v * v;
      }
    }
    void remove(double v, TaskType t) {
      n -= 1.0;
      if (t == TaskType::Classification) {
        counts[static_cast<std::size_t>(v)] -= 1.0;
      } else {
        sum -= v;
        sum2 -= v * v;
      }
    }
    double risk(TaskType t) const {
      if (n <= 0.0) return 0.0;
      if (t == TaskType::Classification) {
        double sq = 0.0;
        for (double c : counts) sq += c * c;
        return n - sq / n;
      }
      return std::max(0.0, sum2 - sum * sum / n);
    }
  };

  Stats stats_of(const std::vector<std::size_t>& rows) const {
    Stats s;
    s.counts.assign(n_classes_, 0.0);
    for (auto r : rows) s.add(y_[r], type_);
    return s;
  }

  double risk_of(const std::vector<std::size_t>& rows) const { return stats_of(rows).risk(type_); }

  int grow(const std::vector<std::size_t>& rows, int depth) {
    if (stop_.stop_requested()) throw Cancelled();
    const Stats s = stats_of(rows);
    const int id = static_cast<int>(tree_.nodes.size());
    CartNode node;
    node.n = rows.size();
    node.depth = depth;
    node.risk = s.risk(type_);
    node.prediction = type_ == TaskType::Classification ? majority(s.counts) : s.sum / s.n;
    tree_.nodes.push_back(node);

    if (rows.size() < static_cast<std::size_t>(std::max(params_.minsplit, 2)) || depth >= params_.maxdepth ||
        rows.size() < 2 * static_cast<std::size_t>(std::max(params_.minbucket, 1)))
      return id;

    const auto split = best_split(rows, s);
    const double floor = std::max(params_.cp * tree_.root_risk, 1e-12 * tree_.root_risk);
    if (split.feature < 0 || !(split.improvement > floor)) return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows) (x_(r, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(r);
    tree_.nodes[static_cast<std::size_t>(id)].feature = split.feature;
    tree_.nodes[static_cast<std::size_t>(id)].threshold = split.threshold;
    tree_.nodes[static_cast<std::size_t>(id)].improvement = split.improvement;
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    tree_.nodes[static_cast<std::size_t>(id)].left = l;
    tree_.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double improvement = 0.0;
  };

  Split best_split(const std::vector<std::size_t>& rows, const Stats& parent) const {
    Split best;
    const double parent_risk = parent.risk(type_);
    const auto minb = static_cast<std::size_t>(std::max(params_.minbucket, 1));
    std::vector<std::pair<double, std::size_t>> order(rows.size());
    for (std::size_t f = 0; f < x_.cols; ++f) {
      for (std::size_t i = 0; i < rows.size(); ++i) order[i] = {x_(rows[i], f), rows[i]};
      std::sort(order.begin(), order.end());
      if (order.front().first == order.back().first) continue;
      Stats left;
      left.counts.assign(n_classes_, 0.0);
      Stats right = parent;
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const double v = y_[order[i].second];
        left.add(v, type_);
        right.remove(v, type_);
        if (order[i].first == order[i + 1].first) continue;
        const std::size_t nl = i + 1, nr = order.size() - nl;
        if (nl < minb || nr < minb) continue;
        const double imp = parent_risk - left.risk(type_) - right.risk(type_);
        if (imp > best.improvement) {
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (order[i].first + order[i + 1].first);
          best.improvement = imp;
        }
      }
    }
    return best;
  }

  const DenseMatrix& x_;
  std::span<const double> y_;
  TaskType type_;
  CartParams params_;
  std::stop_token stop_;
  std::size_t n_classes_ = 0;
  CartTree tree_;
};

}  // namespace

CartTree cart_fit(const DenseMatrix& x, std::span<const double> y, TaskType type, const CartParams& params,
                  std::stop_token stop) {
  if (x.rows == 0) throw ConfigError("CART: empty training data");
  if (y.size() != x.rows) throw ConfigError("CART: target length mismatch");
  if (params.maxdepth < 0) throw ConfigError("CART: maxdepth must be non-negative");
  return CartBuilder(x, y, type, params, std::move(stop)).build();
}

std::size_t CartTree::split_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const CartNode& n) { return !n.is_leaf(); }));
}

int CartTree::depth() const {
  int d = 0;
  for (const auto& n : nodes) d = std::max(d, n.depth);
  return d;
}

double CartTree::predict(std::span<const double> row) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes[i].prediction;
}

std::vector<double> CartTree::predict(const DenseMatrix& x) const {
  std::vector<double> out(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) out[i] = predict(x.row(i));
  return out;
}

std::string CartTree::to_rules(const std::vector<std::string>& feature_names) const {
  std::ostringstream os;
  os.precision(10);
  auto name = [&](int f) {
    const auto fi = static_cast<std::size_t>(f);
    return fi < feature_names.size() ? feature_names[fi] : "x" + std::to_string(f);
  };
  std::function<void(std::size_t, int)> emit = [&](std::size_t i, int indent) {
    const auto& n = nodes[i];
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    if (n.is_leaf()) {
      os << pad << "predict " << n.prediction << "  (n=" << n.n << ")\n";
      return;
    }
    os << pad << "if " << name(n.feature) << " <= " << n.threshold << ":  (n=" << n.n
       << ", improvement=" << n.improvement << ")\n";
    emit(static_cast<std::size_t>(n.left), indent + 1);
    os << pad << "else:\n";
    emit(static_cast<std::size_t>(n.right), indent + 1);
  };
  if (!nodes.empty()) emit(0, 0);
  return os.str();
}

}  // namespace spotune
