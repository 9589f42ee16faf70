#include <catch2/catch.hpp>

#include <random>

#include "ragtag/crf.hpp"
#include "oracles.hpp"

using namespace ragtag;
using nn::Mat;

namespace {

Mat random_mat(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = d(rng);
  return m;
}

}  // namespace

TEST_CASE("uniform one-step case has logZ = ln 2") {
  Mat emissions = Mat::Zero(1, 2);
  Mat trans = Mat::Zero(4, 4);
  CHECK(crf::log_partition(emissions, trans) == Approx(std::log(2.0)).margin(1e-12));
  CHECK(crf::nll(emissions, trans, {0}) == Approx(std::log(2.0)).margin(1e-12));
  CHECK(crf::nll(emissions, trans, {1}) == Approx(std::log(2.0)).margin(1e-12));
}

TEST_CASE("three-step logZ matches brute-force enumeration") {
  std::mt19937_64 rng(5);
  const Mat emissions = random_mat(rng, 3, 3);
  const Mat trans = random_mat(rng, 5, 5);
  const double want = oracles::crf_logz_bruteforce(emissions, trans);
  CHECK(crf::log_partition(emissions, trans) == Approx(want).margin(1e-9));
}

TEST_CASE("random instances match enumeration for logZ and viterbi") {
  std::mt19937_64 rng(17);
  for (int iter = 0; iter < 60; ++iter) {
    std::uniform_int_distribution<int> n_d(1, 5), t_d(1, 5);
    const int n = n_d(rng), T = t_d(rng);
    const Mat emissions = random_mat(rng, n, T, 1.5);
    const Mat trans = random_mat(rng, T + 2, T + 2, 1.5);
    CHECK(crf::log_partition(emissions, trans) ==
          Approx(oracles::crf_logz_bruteforce(emissions, trans)).margin(1e-9));
    CHECK(crf::viterbi(emissions, trans) == oracles::crf_best_path_bruteforce(emissions, trans));
  }
}

TEST_CASE("viterbi tie breaking picks the lowest tag at the latest difference") {
  // all-zero scores: every path ties, so the all-zeros path must win
  Mat emissions = Mat::Zero(3, 3);
  Mat trans = Mat::Zero(5, 5);
  CHECK(crf::viterbi(emissions, trans) == std::vector<int>{0, 0, 0});
  CHECK(oracles::crf_best_path_bruteforce(emissions, trans) == std::vector<int>{0, 0, 0});
}

TEST_CASE("dominant emissions with zero transitions decode positionwise") {
  Mat emissions = Mat::Zero(3, 3);
  emissions(0, 2) = 5.0;
  emissions(1, 0) = 5.0;
  emissions(2, 1) = 5.0;
  Mat trans = Mat::Zero(5, 5);
  CHECK(crf::viterbi(emissions, trans) == std::vector<int>{2, 0, 1});
}

TEST_CASE("probabilities normalize: exp(-nll) sums to one over all paths") {
  std::mt19937_64 rng(23);
  const int n = 3, T = 3;
  const Mat emissions = random_mat(rng, n, T);
  const Mat trans = random_mat(rng, T + 2, T + 2);
  double total = 0.0;
  std::vector<int> cur;
  oracles::enumerate_paths(n, T, cur, [&](const std::vector<int>& path) {
    total += std::exp(-crf::nll(emissions, trans, path));
  });
  CHECK(total == Approx(1.0).margin(1e-9));
}

TEST_CASE("non-finite inputs are rejected") {
  Mat emissions = Mat::Zero(2, 2);
  Mat trans = Mat::Zero(4, 4);
  emissions(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH(crf::log_partition(emissions, trans), Catch::Contains("NaN"));
  emissions(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(crf::viterbi(emissions, trans), std::invalid_argument);
  emissions(0, 0) = 0.0;
  trans(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(crf::nll(emissions, trans, {0, 0}), std::invalid_argument);
}

TEST_CASE("nll gradients match central finite differences") {
  std::mt19937_64 rng(31);
  const int n = 4, T = 3;
  const Mat emissions0 = random_mat(rng, n, T);
  const Mat trans0 = random_mat(rng, T + 2, T + 2);
  const std::vector<int> gold{0, 2, 1, 1};

  nn::Tape tape;
  nn::Var e = tape.leaf(emissions0, true);
  nn::Var w = tape.leaf(trans0, true);
  nn::Var loss = crf::nll_node(tape, e, w, gold);
  tape.backward(loss);
  CHECK(loss.value()(0, 0) == Approx(crf::nll(emissions0, trans0, gold)).margin(1e-12));

  const double eps = 1e-5;
  auto check_grad = [&](const Mat& base, const Mat& grad, bool is_emissions) {
    std::uniform_int_distribution<Eigen::Index> ri(0, base.rows() - 1), ci(0, base.cols() - 1);
    for (int probe = 0; probe < 20; ++probe) {
      const Eigen::Index r = ri(rng), c = ci(rng);
      Mat plus = base, minus = base;
      plus(r, c) += eps;
      minus(r, c) -= eps;
      const double fd = is_emissions
                            ? (crf::nll(plus, trans0, gold) - crf::nll(minus, trans0, gold)) / (2 * eps)
                            : (crf::nll(emissions0, plus, gold) - crf::nll(emissions0, minus, gold)) /
                                  (2 * eps);
      CHECK(grad(r, c) == Approx(fd).margin(1e-6));
    }
  };
  check_grad(emissions0, e.grad(), true);
  check_grad(trans0, w.grad(), false);
}

TEST_CASE("marginals sum to one per position") {
  std::mt19937_64 rng(41);
  const Mat emissions = random_mat(rng, 4, 5);
  const Mat trans = random_mat(rng, 7, 7);
  const Mat m = crf::marginals(emissions, trans);
  for (Eigen::Index t = 0; t < m.rows(); ++t) CHECK(m.row(t).sum() == Approx(1.0).margin(1e-9));
}
