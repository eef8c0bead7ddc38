#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vropt {

struct SparseRowView {
  std::span<const std::int32_t> indices;
  std::span<const double> values;
  std::size_t nnz() const { return indices.size(); }
};

/// Immutable sparse design matrix with labels and cached per-row squared
/// norms. Row indices are 0-based, strictly increasing within a row, and
/// explicit zeros are never stored. Safe to share across threads.
class Dataset {
 public:
  Dataset(std::vector<std::int64_t> row_ptr, std::vector<std::int32_t> indices,
          std::vector<double> values, std::vector<double> labels,
          std::int32_t n_features);

  std::int64_t n_samples() const { return static_cast<std::int64_t>(labels_.size()); }
  std::int32_t n_features() const { return n_features_; }
  std::int64_t nnz() const { return static_cast<std::int64_t>(indices_.size()); }

  SparseRowView row(std::int64_t i) const {
    const auto b = row_ptr_[i], e = row_ptr_[i + 1];
    return {std::span(indices_).subspan(b, e - b), std::span(values_).subspan(b, e - b)};
  }
  double label(std::int64_t i) const { return labels_[i]; }
  const std::vector<double>& labels() const { return labels_; }
  double sq_norm(std::int64_t i) const { return sq_norms_[i]; }
  const std::vector<double>& sq_norms() const { return sq_norms_; }

  bool operator==(const Dataset&) const = default;

 private:
  std::vector<std::int64_t> row_ptr_;
  std::vector<std::int32_t> indices_;
  std::vector<double> values_;
  std::vector<double> labels_;
  std::vector<double> sq_norms_;
  std::int32_t n_features_ = 0;
};

struct DatasetStats {
  double radius_sq;       // R^2 = max_i ||x_i||^2
  double l_max;           // R^2 + lambda
  double default_lambda;  // R^2 / (4N)
};

class ParseError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parses the LIBSVM text format: `label idx:val idx:val ...` per line with
/// 1-based strictly increasing indices. Blank lines are skipped, `#` is
/// rejected. The feature dimension is the maximum index seen unless an
/// override is given. Errors name the offending line.
Dataset parse_libsvm(std::istream& in,
                     std::optional<std::int32_t> n_features_override = {});
Dataset parse_libsvm_file(const std::string& path,
                          std::optional<std::int32_t> n_features_override = {});

/// Writes `ds` back as LIBSVM text (1-based indices, 17 significant digits),
/// so that reparsing reproduces an identical Dataset.
void write_libsvm(const Dataset& ds, std::ostream& out);

DatasetStats dataset_stats(const Dataset& ds, double lambda);

/// JSON rendering of the stats: keys n, d, radius_sq, l_max, default_lambda.
std::string stats_json(const Dataset& ds, const DatasetStats& stats);

enum class SynthKind { ridge, logistic };

/// Seeded synthetic problem with a controlled covariance spectrum: the
/// eigenvalues of (1/N) sum x_i x_i^T decay geometrically from 1 to
/// 1/condition, so L and mu of the data term are known up to roundoff.
/// Labels come from a planted parameter plus seeded noise (sign-mapped for
/// logistic). Deterministic per seed.
Dataset synth_problem(SynthKind kind, std::int64_t n, std::int32_t d,
                      double condition, std::uint64_t seed);

/// Seeded sparse binary problem: `groups` one-hot blocks partitioning the
/// d columns, one active column per block per row with skewed category
/// frequencies, labels from a planted linear rule with `label_noise` flips
/// (none by default: the categorical UCI benchmarks this mimics are
/// separable). Every row has exactly `groups` nonzeros, so R^2 = groups.
/// Stands in for categorical LIBSVM benchmarks when those files are not on
/// disk.
Dataset synth_onehot_problem(std::int64_t n, std::int32_t d, int groups,
                             std::uint64_t seed, double label_noise = 0.0);

}  // namespace vropt
