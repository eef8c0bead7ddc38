#include "vropt/dataset.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace vropt {

Dataset::Dataset(std::vector<std::int64_t> row_ptr, std::vector<std::int32_t> indices,
                 std::vector<double> values, std::vector<double> labels,
                 std::int32_t n_features)
    : row_ptr_(std::move(row_ptr)),
      indices_(std::move(indices)),
      values_(std::move(values)),
      labels_(std::move(labels)),
      n_features_(n_features) {
  if (labels_.empty() || n_features_ < 1)
    throw std::invalid_argument("Dataset: need N >= 1 and d >= 1");
  if (row_ptr_.size() != labels_.size() + 1 || row_ptr_.front() != 0 ||
      row_ptr_.back() != static_cast<std::int64_t>(indices_.size()) ||
      indices_.size() != values_.size())
    throw std::invalid_argument("Dataset: inconsistent CSR arrays");
  for (std::size_t r = 0; r + 1 < row_ptr_.size(); ++r) {
    std::int32_t prev = -1;
    for (std::int64_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
      if (indices_[p] <= prev || indices_[p] >= n_features_)
        throw std::invalid_argument("Dataset: row indices must be strictly increasing in [0, d)");
      if (values_[p] == 0.0)
        throw std::invalid_argument("Dataset: explicit zero value stored");
      prev = indices_[p];
    }
  }
  sq_norms_.resize(labels_.size());
  for (std::size_t r = 0; r < labels_.size(); ++r) {
    double s = 0.0;
    for (std::int64_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) s += values_[p] * values_[p];
    sq_norms_[r] = s;
  }
}

namespace {

[[noreturn]] void parse_fail(std::int64_t line_no, const std::string& what) {
  throw ParseError("parse error at line " + std::to_string(line_no) + ": " + what);
}

double parse_double_token(const char* begin, const char* end, std::int64_t line_no) {
  // std::from_chars<double> is incomplete in some libstdc++ builds; strtod
  // with a bounds check is portable and accepts the same grammar.
  std::string tok(begin, end);
  char* stop = nullptr;
  const double v = std::strtod(tok.c_str(), &stop);
  if (stop != tok.c_str() + tok.size() || tok.empty()) parse_fail(line_no, "malformed number '" + tok + "'");
  if (!std::isfinite(v)) parse_fail(line_no, "non-finite number '" + tok + "'");
  return v;
}

}  // namespace

Dataset parse_libsvm(std::istream& in, std::optional<std::int32_t> n_features_override) {
  std::vector<std::int64_t> row_ptr{0};
  std::vector<std::int32_t> indices;
  std::vector<double> values;
  std::vector<double> labels;
  std::int32_t max_index = 0;  // 1-based max seen

  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t pos = 0;
    auto skip_ws = [&] { while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos; };
    skip_ws();
    if (pos == line.size()) continue;  // blank line
    if (line[pos] == '#') parse_fail(line_no, "comment lines are not supported");

    auto next_token = [&]() -> std::pair<std::size_t, std::size_t> {
      skip_ws();
      const std::size_t b = pos;
      while (pos < line.size() && !std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
      return {b, pos};
    };

    auto [lb, le] = next_token();
    labels.push_back(parse_double_token(line.data() + lb, line.data() + le, line_no));

    std::int32_t prev_index = 0;
    while (true) {
      auto [tb, te] = next_token();
      if (tb == te) break;
      const std::string_view tok(line.data() + tb, te - tb);
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos) parse_fail(line_no, "expected idx:val, got '" + std::string(tok) + "'");
      std::int32_t idx = 0;
      const auto [iptr, ierr] = std::from_chars(tok.data(), tok.data() + colon, idx);
      if (ierr != std::errc{} || iptr != tok.data() + colon)
        parse_fail(line_no, "malformed index '" + std::string(tok.substr(0, colon)) + "'");
      if (idx < 1) parse_fail(line_no, "index " + std::to_string(idx) + " < 1");
      if (idx <= prev_index) parse_fail(line_no, "non-increasing index " + std::to_string(idx));
      const double val =
          parse_double_token(tok.data() + colon + 1, tok.data() + tok.size(), line_no);
      prev_index = idx;
      max_index = std::max(max_index, idx);
      if (val == 0.0) continue;  // never store explicit zeros
      indices.push_back(idx - 1);
      values.push_back(val);
    }
    row_ptr.push_back(static_cast<std::int64_t>(indices.size()));
  }
  if (labels.empty()) parse_fail(line_no == 0 ? 1 : line_no, "empty file, no data lines");

  std::int32_t d = max_index;
  if (n_features_override) {
    if (*n_features_override < max_index)
      throw ParseError("feature-dimension override " + std::to_string(*n_features_override) +
                       " is smaller than max index " + std::to_string(max_index));
    d = *n_features_override;
  }
  if (d < 1) d = 1;  // all-zero rows still need a dimension
  return Dataset(std::move(row_ptr), std::move(indices), std::move(values), std::move(labels), d);
}

Dataset parse_libsvm_file(const std::string& path, std::optional<std::int32_t> n_features_override) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return parse_libsvm(in, n_features_override);
}

void write_libsvm(const Dataset& ds, std::ostream& out) {
  char buf[64];
  for (std::int64_t i = 0; i < ds.n_samples(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", ds.label(i));
    out << buf;
    const auto r = ds.row(i);
    for (std::size_t p = 0; p < r.nnz(); ++p) {
      std::snprintf(buf, sizeof(buf), "%.17g", r.values[p]);
      out << ' ' << (r.indices[p] + 1) << ':' << buf;
    }
    out << '\n';
  }
}

DatasetStats dataset_stats(const Dataset& ds, double lambda) {
  double r2 = 0.0;
  for (std::int64_t i = 0; i < ds.n_samples(); ++i) r2 = std::max(r2, ds.sq_norm(i));
  return {r2, r2 + lambda, r2 / (4.0 * static_cast<double>(ds.n_samples()))};
}

std::string stats_json(const Dataset& ds, const DatasetStats& stats) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "{\"n\":%lld,\"d\":%d,\"radius_sq\":%.17g,\"l_max\":%.17g,"
                "\"default_lambda\":%.17g}",
                static_cast<long long>(ds.n_samples()), ds.n_features(), stats.radius_sq,
                stats.l_max, stats.default_lambda);
  return buf;
}

namespace {

Dataset from_dense_rows(const Eigen::MatrixXd& x, std::vector<double> labels) {
  std::vector<std::int64_t> row_ptr{0};
  std::vector<std::int32_t> indices;
  std::vector<double> values;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (x(i, j) != 0.0) {
        indices.push_back(static_cast<std::int32_t>(j));
        values.push_back(x(i, j));
      }
    }
    row_ptr.push_back(static_cast<std::int64_t>(indices.size()));
  }
  return Dataset(std::move(row_ptr), std::move(indices), std::move(values), std::move(labels),
                 static_cast<std::int32_t>(x.cols()));
}

Eigen::MatrixXd seeded_orthonormal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd g(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) g(i, j) = gauss(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  return q;
}

}  // namespace

Dataset synth_problem(SynthKind kind, std::int64_t n, std::int32_t d, double condition,
                      std::uint64_t seed) {
  if (n < 1 || d < 1) throw std::invalid_argument("synth_problem: need n, d >= 1");
  if (condition < 1.0) throw std::invalid_argument("synth_problem: condition must be >= 1");
  std::mt19937_64 rng(seed);

  // X = sqrt(N) V diag(s) Q^T with V^T V = I gives (1/N) X^T X = Q diag(s^2) Q^T
  // exactly, so the covariance condition number is `condition` up to roundoff.
  Eigen::VectorXd spectrum(d);
  for (std::int32_t j = 0; j < d; ++j) {
    const double t = (d == 1) ? 0.0 : static_cast<double>(j) / static_cast<double>(d - 1);
    spectrum[j] = std::pow(condition, -0.5 * t);  // singular values: 1 .. 1/sqrt(cond)
  }
  Eigen::MatrixXd v = seeded_orthonormal(n, d, rng);
  Eigen::MatrixXd q = seeded_orthonormal(d, d, rng);
  Eigen::MatrixXd x = std::sqrt(static_cast<double>(n)) * v * spectrum.asDiagonal() * q.transpose();

  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd planted(d);
  for (std::int32_t j = 0; j < d; ++j) planted[j] = gauss(rng);
  planted.normalize();

  std::vector<double> labels(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const double clean = x.row(i).dot(planted);
    const double noisy = clean + 0.1 * gauss(rng);
    if (kind == SynthKind::logistic)
      labels[i] = noisy >= 0.0 ? 1.0 : -1.0;
    else
      labels[i] = noisy;
  }
  return from_dense_rows(x, std::move(labels));
}

Dataset synth_onehot_problem(std::int64_t n, std::int32_t d, int groups, std::uint64_t seed,
                             double label_noise) {
  if (n < 1 || groups < 1 || d < groups)
    throw std::invalid_argument("synth_onehot_problem: need n >= 1 and d >= groups >= 1");
  std::mt19937_64 rng(seed);

  // Column blocks: distribute d over `groups` blocks, earlier blocks larger.
  std::vector<std::int32_t> block_begin(groups + 1, 0);
  const std::int32_t base = d / groups, rem = d % groups;
  for (int g = 0; g < groups; ++g) block_begin[g + 1] = block_begin[g] + base + (g < rem ? 1 : 0);

  // Category parities encode the class: the label is drawn first, the first
  // block's category always matches it (the data stays separable with margin
  // one on that block alone), and later blocks match it with decreasing
  // probability. The redundancy mirrors one-hot encoded UCI tasks, where many
  // attributes vote for the class and optimum margins are large for almost
  // every sample. Within a block, category frequencies are Zipf-skewed.
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto pick_category = [&](int g, int parity /* -1 for free */) {
    const int width = block_begin[g + 1] - block_begin[g];
    double total = 0.0;
    for (int c = 0; c < width; ++c)
      if (parity < 0 || c % 2 == parity) total += 1.0 / (1.0 + c);
    if (total == 0.0) parity = -1, total = 1.0;  // width-1 block cannot encode parity 1
    int last = 0;
    double u = unif(rng) * total;
    for (int c = 0; c < width; ++c) {
      if (parity >= 0 && c % 2 != parity) continue;
      last = c;
      u -= 1.0 / (1.0 + c);
      if (u <= 0.0) return c;
    }
    return last;
  };

  std::vector<double> informative(groups, 0.0);
  for (int g = 1; g < groups; ++g) informative[g] = 0.97 * std::pow(0.98, g - 1);

  // A small cluster of rows carries a dedicated first-block category and no
  // class signal anywhere, so its label is irreducibly 50/50. It pins a bit
  // of boundary curvature at the optimum, like the handful of genuinely
  // ambiguous records in categorical UCI data.
  const double ambiguous_rate = 0.0;
  const int width0 = block_begin[1] - block_begin[0];

  std::vector<std::int64_t> row_ptr{0};
  std::vector<std::int32_t> indices;
  std::vector<double> values;
  std::vector<double> labels(static_cast<std::size_t>(n));
  indices.reserve(static_cast<std::size_t>(n) * groups);
  values.reserve(static_cast<std::size_t>(n) * groups);
  for (std::int64_t i = 0; i < n; ++i) {
    double y = unif(rng) < 0.52 ? 1.0 : -1.0;
    const bool ambiguous = width0 > 1 && unif(rng) < ambiguous_rate;
    const int parity = y > 0.0 ? 0 : 1;
    for (int g = 0; g < groups; ++g) {
      int cat;
      if (ambiguous) {
        cat = g == 0 ? width0 - 1 : pick_category(g, -1);
      } else {
        const bool forced = g == 0 || unif(rng) < informative[g];
        cat = pick_category(g, forced ? parity : -1);
        if (g == 0 && cat == width0 - 1 && width0 > 2)
          cat -= 2;  // the dedicated category stays exclusive to the cluster
      }
      indices.push_back(block_begin[g] + cat);
      values.push_back(1.0);
    }
    row_ptr.push_back(static_cast<std::int64_t>(indices.size()));
    if (unif(rng) < label_noise) y = -y;
    labels[i] = y;
  }
  return Dataset(std::move(row_ptr), std::move(indices), std::move(values), std::move(labels), d);
}

}  // namespace vropt
