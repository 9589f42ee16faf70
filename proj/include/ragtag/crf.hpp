#pragma once

// Linear-chain CRF over T tags plus start/stop states. The transition
// matrix is (T+2)x(T+2) with start = T and stop = T+1; a path scores
//   trans(start, y0) + sum_i emis(i, yi) + sum_{i>0} trans(y_{i-1}, yi)
//   + trans(y_{n-1}, stop).
// Log-partition runs the forward recursion in log space; gradients come
// from forward-backward marginals.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ragtag/autograd.hpp"

namespace ragtag::crf {

using nn::Mat;

namespace detail {

inline void check_finite(const Mat& m, const char* what) {
  if (!m.allFinite()) throw std::invalid_argument(std::string(what) + " contains NaN or Inf");
}

inline void check_shapes(const Mat& emissions, const Mat& transitions) {
  if (emissions.rows() < 1) throw std::invalid_argument("emissions must have n >= 1 rows");
  const auto T = emissions.cols();
  if (transitions.rows() != T + 2 || transitions.cols() != T + 2)
    throw std::invalid_argument("transitions must be (T+2) x (T+2)");
  check_finite(emissions, "emissions");
  check_finite(transitions, "transitions");
}

inline double logsumexp(const Eigen::VectorXd& v) {
  const double mx = v.maxCoeff();
  return mx + std::log((v.array() - mx).exp().sum());
}

/// alpha(t, j) = log sum of scores of all prefixes ending in tag j at t.
inline Mat forward_lattice(const Mat& emissions, const Mat& transitions) {
  const auto n = emissions.rows();
  const auto T = emissions.cols();
  Mat alpha(n, T);
  alpha.row(0) = transitions.row(T).head(T) + emissions.row(0);
  for (Eigen::Index t = 1; t < n; ++t)
    for (Eigen::Index j = 0; j < T; ++j) {
      Eigen::VectorXd prev = alpha.row(t - 1).transpose() + transitions.col(j).head(T);
      alpha(t, j) = logsumexp(prev) + emissions(t, j);
    }
  return alpha;
}

/// beta(t, i) = log sum of scores of all suffixes starting from tag i at t
/// (emission at t excluded, stop transition included).
inline Mat backward_lattice(const Mat& emissions, const Mat& transitions) {
  const auto n = emissions.rows();
  const auto T = emissions.cols();
  Mat beta(n, T);
  beta.row(n - 1) = transitions.col(T + 1).head(T).transpose();
  for (Eigen::Index t = n - 2; t >= 0; --t)
    for (Eigen::Index i = 0; i < T; ++i) {
      Eigen::VectorXd next = transitions.row(i).head(T).transpose() +
                             emissions.row(t + 1).transpose() + beta.row(t + 1).transpose();
      beta(t, i) = logsumexp(next);
    }
  return beta;
}

}  // namespace detail

inline double log_partition(const Mat& emissions, const Mat& transitions) {
  detail::check_shapes(emissions, transitions);
  const auto n = emissions.rows();
  const auto T = emissions.cols();
  const Mat alpha = detail::forward_lattice(emissions, transitions);
  Eigen::VectorXd fin = alpha.row(n - 1).transpose() + transitions.col(T + 1).head(T);
  return detail::logsumexp(fin);
}

inline double path_score(const Mat& emissions, const Mat& transitions,
                         const std::vector<int>& tags) {
  const auto n = emissions.rows();
  const auto T = emissions.cols();
  if (static_cast<Eigen::Index>(tags.size()) != n)
    throw std::invalid_argument("gold tag length does not match emissions");
  for (int y : tags)
    if (y < 0 || y >= T) throw std::invalid_argument("gold tag index out of range");
  double s = transitions(T, tags[0]);
  for (Eigen::Index t = 0; t < n; ++t) {
    s += emissions(t, tags[static_cast<std::size_t>(t)]);
    if (t > 0) s += transitions(tags[static_cast<std::size_t>(t - 1)], tags[static_cast<std::size_t>(t)]);
  }
  s += transitions(tags.back(), T + 1);
  return s;
}

inline double nll(const Mat& emissions, const Mat& transitions, const std::vector<int>& tags) {
  return log_partition(emissions, transitions) - path_score(emissions, transitions, tags);
}

/// Max-score path. Argmax ties resolve to the lowest tag index, which
/// yields the path with the lowest tag index at the latest differing
/// position among co-optimal paths.
inline std::vector<int> viterbi(const Mat& emissions, const Mat& transitions) {
  detail::check_shapes(emissions, transitions);
  const auto n = emissions.rows();
  const auto T = emissions.cols();
  Mat delta(n, T);
  Eigen::MatrixXi back(n, T);
  delta.row(0) = transitions.row(T).head(T) + emissions.row(0);
  back.row(0).setZero();
  for (Eigen::Index t = 1; t < n; ++t)
    for (Eigen::Index j = 0; j < T; ++j) {
      double best = -std::numeric_limits<double>::infinity();
      int arg = 0;
      for (Eigen::Index i = 0; i < T; ++i) {
        const double s = delta(t - 1, i) + transitions(i, j);
        if (s > best) {
          best = s;
          arg = static_cast<int>(i);
        }
      }
      delta(t, j) = best + emissions(t, j);
      back(t, j) = arg;
    }
  double best = -std::numeric_limits<double>::infinity();
  int arg = 0;
  for (Eigen::Index j = 0; j < T; ++j) {
    const double s = delta(n - 1, j) + transitions(j, T + 1);
    if (s > best) {
      best = s;
      arg = static_cast<int>(j);
    }
  }
  std::vector<int> path(static_cast<std::size_t>(n));
  path[static_cast<std::size_t>(n - 1)] = arg;
  for (Eigen::Index t = n - 2; t >= 0; --t)
    path[static_cast<std::size_t>(t)] = back(t + 1, path[static_cast<std::size_t>(t + 1)]);
  return path;
}

/// Tag marginals m(t, j) = P(y_t = j).
inline Mat marginals(const Mat& emissions, const Mat& transitions) {
  detail::check_shapes(emissions, transitions);
  const Mat alpha = detail::forward_lattice(emissions, transitions);
  const Mat beta = detail::backward_lattice(emissions, transitions);
  const auto n = emissions.rows();
  const auto T = emissions.cols();
  Eigen::VectorXd fin = alpha.row(n - 1).transpose() + transitions.col(T + 1).head(T);
  const double logz = detail::logsumexp(fin);
  Mat m(n, T);
  for (Eigen::Index t = 0; t < n; ++t)
    for (Eigen::Index j = 0; j < T; ++j) m(t, j) = std::exp(alpha(t, j) + beta(t, j) - logz);
  return m;
}

/// Autograd node: nll as a 1x1 Var differentiable w.r.t. emissions and
/// transitions. d nll / d emissions = marginals - onehot(gold);
/// d nll / d transitions = expected transition counts - gold counts.
inline nn::Var nll_node(nn::Tape& tape, nn::Var emissions, nn::Var transitions,
                        std::vector<int> gold) {
  const Mat& E = emissions.value();
  const Mat& W = transitions.value();
  detail::check_shapes(E, W);
  const double loss = nll(E, W, gold);
  Mat out(1, 1);
  out(0, 0) = loss;
  return tape.make_node(
      std::move(out), {emissions, transitions},
      [emissions, transitions, gold = std::move(gold)](nn::Tape& t, int self) {
        const double g = t.grad(self)(0, 0);
        const Mat& E = t.value(emissions.id);
        const Mat& W = t.value(transitions.id);
        const auto n = E.rows();
        const auto T = E.cols();
        const Mat alpha = detail::forward_lattice(E, W);
        const Mat beta = detail::backward_lattice(E, W);
        Eigen::VectorXd fin = alpha.row(n - 1).transpose() + W.col(T + 1).head(T);
        const double logz = detail::logsumexp(fin);

        if (t.requires_grad(emissions.id)) {
          Mat de(n, T);
          for (Eigen::Index tt = 0; tt < n; ++tt)
            for (Eigen::Index j = 0; j < T; ++j)
              de(tt, j) = std::exp(alpha(tt, j) + beta(tt, j) - logz);
          for (Eigen::Index tt = 0; tt < n; ++tt) de(tt, gold[static_cast<std::size_t>(tt)]) -= 1.0;
          t.grad_mut(emissions.id) += g * de;
        }

        if (t.requires_grad(transitions.id)) {
          Mat dw = Mat::Zero(T + 2, T + 2);
          // start row: P(y_0 = j)
          for (Eigen::Index j = 0; j < T; ++j)
            dw(T, j) += std::exp(alpha(0, j) + beta(0, j) - logz);
          // stop column: P(y_{n-1} = i)
          for (Eigen::Index i = 0; i < T; ++i)
            dw(i, T + 1) += std::exp(alpha(n - 1, i) + beta(n - 1, i) - logz);
          // adjacent pairs
          for (Eigen::Index tt = 0; tt + 1 < n; ++tt)
            for (Eigen::Index i = 0; i < T; ++i)
              for (Eigen::Index j = 0; j < T; ++j)
                dw(i, j) += std::exp(alpha(tt, i) + W(i, j) + E(tt + 1, j) + beta(tt + 1, j) - logz);
          // minus gold counts
          dw(T, gold[0]) -= 1.0;
          dw(gold.back(), T + 1) -= 1.0;
          for (std::size_t tt = 0; tt + 1 < gold.size(); ++tt) dw(gold[tt], gold[tt + 1]) -= 1.0;
          t.grad_mut(transitions.id) += g * dw;
        }
      });
}

}  // namespace ragtag::crf
