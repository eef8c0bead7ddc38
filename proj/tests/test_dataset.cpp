#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "vropt/dataset.hpp"

using namespace vropt;

namespace {

Dataset parse(const std::string& text, std::optional<std::int32_t> d_override = {}) {
  std::istringstream in(text);
  return parse_libsvm(in, d_override);
}

}  // namespace

TEST_CASE("parse_libsvm basic lines") {
  const Dataset ds = parse("-1 3:4.5\n");
  CHECK(ds.n_samples() == 1);
  CHECK(ds.n_features() == 3);
  CHECK(ds.label(0) == -1.0);
  const auto row = ds.row(0);
  REQUIRE(row.nnz() == 1);
  CHECK(row.indices[0] == 2);
  CHECK(row.values[0] == 4.5);
  CHECK(ds.sq_norm(0) == doctest::Approx(20.25).epsilon(0));

  const Dataset two = parse("+1 1:1\n-1 2:2\n");
  CHECK(two.n_samples() == 2);
  CHECK(two.n_features() == 2);
  CHECK(two.sq_norm(0) == 1.0);
  CHECK(two.sq_norm(1) == 4.0);
  CHECK(two.label(0) == 1.0);
  CHECK(two.label(1) == -1.0);
}

TEST_CASE("parse_libsvm blank lines, overrides, zero drop") {
  const Dataset ds = parse("\n1 1:1 4:2\n\n-1 2:3\n");
  CHECK(ds.n_samples() == 2);
  CHECK(ds.n_features() == 4);

  const Dataset padded = parse("1 1:1\n", 7);
  CHECK(padded.n_features() == 7);
  CHECK_THROWS_AS(parse("1 5:1\n", 3), ParseError);

  // explicit zero values are parsed but never stored
  const Dataset z = parse("1 1:0 2:5\n");
  CHECK(z.row(0).nnz() == 1);
  CHECK(z.row(0).indices[0] == 1);
}

TEST_CASE("parse_libsvm errors name the line") {
  auto message_of = [](const std::string& text) {
    try {
      parse(text);
    } catch (const ParseError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message_of("1 2:1 2:2\n").find("line 1") != std::string::npos);
  CHECK(message_of("1 2:1 2:2\n").find("non-increasing") != std::string::npos);
  CHECK(message_of("1 1:1\n1 0:2\n").find("line 2") != std::string::npos);
  CHECK(message_of("1 1:1\n-1 3:2 1:9\n").find("line 2") != std::string::npos);
  CHECK(message_of("1 1:abc\n").find("line 1") != std::string::npos);
  CHECK(message_of("dog 1:1\n").find("line 1") != std::string::npos);
  CHECK(message_of("# header\n1 1:1\n").find("line 1") != std::string::npos);
  CHECK(message_of("").find("empty") != std::string::npos);
  CHECK(message_of("\n\n").find("empty") != std::string::npos);
}

TEST_CASE("libsvm round trip reproduces the dataset") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    auto ds = oracles::random_dataset(rng, 20, 6, trial % 2 == 0);
    std::ostringstream text;
    write_libsvm(*ds, text);
    std::istringstream in(text.str());
    const Dataset back = parse_libsvm(in, ds->n_features());
    CHECK(back == *ds);
  }
}

TEST_CASE("dataset_stats") {
  const Dataset ds = parse("1 1:1\n-1 2:2\n");  // rows (1,0), (0,2)
  const DatasetStats s0 = dataset_stats(ds, 0.0);
  CHECK(s0.radius_sq == 4.0);
  CHECK(s0.l_max == 4.0);
  CHECK(s0.default_lambda == doctest::Approx(0.5).epsilon(0));

  const DatasetStats s1 = dataset_stats(ds, 0.25);
  CHECK(s1.l_max == 4.25);

  // zero row: R^2 = 0, default lambda 0
  const Dataset zero = parse("1 2:0\n", 3);
  const DatasetStats sz = dataset_stats(zero, 0.0);
  CHECK(sz.radius_sq == 0.0);
  CHECK(sz.default_lambda == 0.0);

  // invariant to row order
  const Dataset swapped = parse("-1 2:2\n1 1:1\n");
  const DatasetStats ss = dataset_stats(swapped, 0.0);
  CHECK(ss.radius_sq == s0.radius_sq);
  CHECK(ss.l_max == s0.l_max);
  CHECK(ss.default_lambda == s0.default_lambda);
}

TEST_CASE("sq_norms match brute force") {
  std::mt19937_64 rng(11);
  auto ds = oracles::random_dataset(rng, 30, 8, false);
  for (std::int64_t i = 0; i < ds->n_samples(); ++i) {
    const auto r = ds->row(i);
    double s = 0.0;
    for (std::size_t p = 0; p < r.nnz(); ++p) s += r.values[p] * r.values[p];
    CHECK(ds->sq_norm(i) == s);
  }
}

TEST_CASE("dataset invariants rejected") {
  // non-increasing indices inside a row
  CHECK_THROWS(Dataset({0, 2}, {1, 1}, {1.0, 2.0}, {1.0}, 3));
  // index out of range
  CHECK_THROWS(Dataset({0, 1}, {5}, {1.0}, {1.0}, 3));
  // stored zero
  CHECK_THROWS(Dataset({0, 1}, {0}, {0.0}, {1.0}, 3));
  // empty dataset
  CHECK_THROWS(Dataset({0}, {}, {}, {}, 3));
}

TEST_CASE("stats_json keys") {
  const Dataset ds = parse("1 1:1\n-1 2:2\n");
  const std::string j = stats_json(ds, dataset_stats(ds, 0.5));
  CHECK(j.find("\"n\":2") != std::string::npos);
  CHECK(j.find("\"d\":2") != std::string::npos);
  CHECK(j.find("\"radius_sq\":4") != std::string::npos);
  CHECK(j.find("\"l_max\":4.5") != std::string::npos);
  CHECK(j.find("\"default_lambda\":0.5") != std::string::npos);
}

TEST_CASE("synth_problem determinism") {
  const Dataset a = synth_problem(SynthKind::ridge, 50, 5, 10.0, 1);
  const Dataset b = synth_problem(SynthKind::ridge, 50, 5, 10.0, 1);
  CHECK(a == b);
  const Dataset c = synth_problem(SynthKind::ridge, 50, 5, 10.0, 2);
  CHECK(!(a == c));
}

TEST_CASE("synth_problem covariance condition matches the request") {
  for (const double cond : {1.0, 10.0, 100.0}) {
    const Dataset ds = synth_problem(SynthKind::ridge, 50, 5, cond, 2);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(5, 5);
    for (std::int64_t i = 0; i < ds.n_samples(); ++i) {
      Eigen::VectorXd x = Eigen::VectorXd::Zero(5);
      const auto r = ds.row(i);
      for (std::size_t p = 0; p < r.nnz(); ++p) x[r.indices[p]] = r.values[p];
      cov += x * x.transpose() / static_cast<double>(ds.n_samples());
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const double measured = es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
    CHECK(measured == doctest::Approx(cond).epsilon(0.10));
    if (cond == 1.0) CHECK(measured <= 1.1);
  }
}

TEST_CASE("synth_problem logistic labels are plus-minus one") {
  const Dataset ds = synth_problem(SynthKind::logistic, 20, 3, 5.0, 3);
  for (std::int64_t i = 0; i < ds.n_samples(); ++i)
    CHECK((ds.label(i) == 1.0 || ds.label(i) == -1.0));
}

TEST_CASE("synth_onehot_problem shape and labels") {
  const Dataset ds = synth_onehot_problem(500, 112, 22, 9);
  CHECK(ds.n_samples() == 500);
  CHECK(ds.n_features() == 112);
  for (std::int64_t i = 0; i < ds.n_samples(); ++i) {
    CHECK(ds.row(i).nnz() == 22);  // one active column per group
    CHECK(ds.sq_norm(i) == 22.0);
    CHECK((ds.label(i) == 1.0 || ds.label(i) == -1.0));
  }
  CHECK(dataset_stats(ds, 0.0).radius_sq == 22.0);
  // deterministic
  CHECK(ds == synth_onehot_problem(500, 112, 22, 9));
}
