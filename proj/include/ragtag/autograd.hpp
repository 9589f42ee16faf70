#pragma once

// Reverse-mode autodiff over Eigen matrices. A Tape owns the nodes of one
// forward pass; ops append nodes with a backward closure that scatters the
// node's gradient into its parents. Everything is double precision and
// single threaded, so a fixed seed gives bit-identical runs.

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace ragtag::nn {

using Mat = Eigen::MatrixXd;

class Tape;

struct Var {
  int id = -1;
  Tape* tape = nullptr;
  bool valid() const { return id >= 0 && tape != nullptr; }
  const Mat& value() const;
  const Mat& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

class Tape {
 public:
  Var leaf(Mat value, bool requires_grad = false) {
    return push(std::move(value), requires_grad, {});
  }

  // -- generic node construction (used by the CRF extension too) --
  // `back` runs during the reverse sweep; it may read any node value/grad
  // and must accumulate (+=) into parent grads.
  Var make_node(Mat value, const std::vector<Var>& parents, std::function<void(Tape&, int)> back) {
    bool req = false;
    for (const auto& p : parents) req = req || nodes_[p.id].needs_grad;
    Var v = push(std::move(value), req, std::move(back));
    return v;
  }

  const Mat& value(int id) const { return nodes_[id].value; }
  Mat& grad_mut(int id) { return nodes_[id].grad; }
  const Mat& grad(int id) const { return nodes_[id].grad; }
  bool requires_grad(int id) const { return nodes_[id].needs_grad; }

  // -- ops --

  Var matmul(Var a, Var b) {
    check(a), check(b);
    Mat out = a.value() * b.value();
    return make_node(std::move(out), {a, b}, [a, b](Tape& t, int self) {
      const Mat& g = t.grad(self);
      if (t.requires_grad(a.id)) t.grad_mut(a.id) += g * t.value(b.id).transpose();
      if (t.requires_grad(b.id)) t.grad_mut(b.id) += t.value(a.id).transpose() * g;
    });
  }

  /// a * b^T
  Var matmul_nt(Var a, Var b) {
    check(a), check(b);
    Mat out = a.value() * b.value().transpose();
    return make_node(std::move(out), {a, b}, [a, b](Tape& t, int self) {
      const Mat& g = t.grad(self);
      if (t.requires_grad(a.id)) t.grad_mut(a.id) += g * t.value(b.id);
      if (t.requires_grad(b.id)) t.grad_mut(b.id) += g.transpose() * t.value(a.id);
    });
  }

  Var add(Var a, Var b) {
    check(a), check(b);
    Mat out = a.value() + b.value();
    return make_node(std::move(out), {a, b}, [a, b](Tape& t, int self) {
      const Mat& g = t.grad(self);
      if (t.requires_grad(a.id)) t.grad_mut(a.id) += g;
      if (t.requires_grad(b.id)) t.grad_mut(b.id) += g;
    });
  }

  /// Broadcasts a 1 x D row over every row of a.
  Var add_rowvec(Var a, Var row) {
    check(a), check(row);
    Mat out = a.value();
    out.rowwise() += Eigen::RowVectorXd(row.value().row(0));
    return make_node(std::move(out), {a, row}, [a, row](Tape& t, int self) {
      const Mat& g = t.grad(self);
      if (t.requires_grad(a.id)) t.grad_mut(a.id) += g;
      if (t.requires_grad(row.id)) t.grad_mut(row.id).row(0) += g.colwise().sum();
    });
  }

  Var scale(Var a, double s) {
    check(a);
    Mat out = a.value() * s;
    return make_node(std::move(out), {a}, [a, s](Tape& t, int self) {
      if (t.requires_grad(a.id)) t.grad_mut(a.id) += t.grad(self) * s;
    });
  }

  /// Picks rows by index; duplicate indices accumulate gradient.
  Var gather_rows(Var a, std::vector<int> rows) {
    check(a);
    Mat out(static_cast<Eigen::Index>(rows.size()), a.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = a.value().row(rows[i]);
    return make_node(std::move(out), {a}, [a, rows = std::move(rows)](Tape& t, int self) {
      if (!t.requires_grad(a.id)) return;
      const Mat& g = t.grad(self);
      for (std::size_t i = 0; i < rows.size(); ++i)
        t.grad_mut(a.id).row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
    });
  }

  Var concat_rows(const std::vector<Var>& parts) {
    Eigen::Index total = 0, cols = parts.at(0).cols();
    for (const auto& p : parts) {
      check(p);
      total += p.rows();
    }
    Mat out(total, cols);
    Eigen::Index off = 0;
    for (const auto& p : parts) {
      out.middleRows(off, p.rows()) = p.value();
      off += p.rows();
    }
    return make_node(std::move(out), parts, [parts](Tape& t, int self) {
      const Mat& g = t.grad(self);
      Eigen::Index off = 0;
      for (const auto& p : parts) {
        const Eigen::Index r = t.value(p.id).rows();
        if (t.requires_grad(p.id)) t.grad_mut(p.id) += g.middleRows(off, r);
        off += r;
      }
    });
  }

  Var slice_cols(Var a, Eigen::Index start, Eigen::Index n) {
    check(a);
    Mat out = a.value().middleCols(start, n);
    return make_node(std::move(out), {a}, [a, start, n](Tape& t, int self) {
      if (t.requires_grad(a.id)) t.grad_mut(a.id).middleCols(start, n) += t.grad(self);
    });
  }

  Var concat_cols(const std::vector<Var>& parts) {
    Eigen::Index total = 0, rows = parts.at(0).rows();
    for (const auto& p : parts) {
      check(p);
      total += p.cols();
    }
    Mat out(rows, total);
    Eigen::Index off = 0;
    for (const auto& p : parts) {
      out.middleCols(off, p.cols()) = p.value();
      off += p.cols();
    }
    return make_node(std::move(out), parts, [parts](Tape& t, int self) {
      const Mat& g = t.grad(self);
      Eigen::Index off = 0;
      for (const auto& p : parts) {
        const Eigen::Index c = t.value(p.id).cols();
        if (t.requires_grad(p.id)) t.grad_mut(p.id) += g.middleCols(off, c);
        off += c;
      }
    });
  }

  Var softmax_rows(Var a) {
    check(a);
    Mat out = a.value();
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      const double mx = out.row(r).maxCoeff();
      out.row(r) = (out.row(r).array() - mx).exp();
      out.row(r) /= out.row(r).sum();
    }
    return make_node(std::move(out), {a}, [a](Tape& t, int self) {
      if (!t.requires_grad(a.id)) return;
      const Mat& y = t.value(self);
      const Mat& g = t.grad(self);
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        const double dot = g.row(r).dot(y.row(r));
        t.grad_mut(a.id).row(r) +=
            (y.row(r).array() * (g.row(r).array() - dot)).matrix();
      }
    });
  }

  /// Per-row layer norm with 1 x D gain and bias.
  Var layer_norm_rows(Var x, Var gain, Var bias, double eps = 1e-5) {
    check(x), check(gain), check(bias);
    const Eigen::Index D = x.cols();
    Mat out(x.rows(), D);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const double mu = x.value().row(r).mean();
      const double var = (x.value().row(r).array() - mu).square().sum() / static_cast<double>(D);
      const double inv = 1.0 / std::sqrt(var + eps);
      out.row(r) = ((x.value().row(r).array() - mu) * inv * gain.value().row(0).array() +
                    bias.value().row(0).array())
                       .matrix();
    }
    return make_node(std::move(out), {x, gain, bias}, [x, gain, bias, eps](Tape& t, int self) {
      using RowArr = Eigen::Array<double, 1, Eigen::Dynamic>;
      const Mat& xv = t.value(x.id);
      const Mat& g = t.grad(self);
      const Eigen::Index D = xv.cols();
      const double n = static_cast<double>(D);
      for (Eigen::Index r = 0; r < xv.rows(); ++r) {
        const double mu = xv.row(r).mean();
        const double var = (xv.row(r).array() - mu).square().sum() / n;
        const double inv = 1.0 / std::sqrt(var + eps);
        const RowArr xc = xv.row(r).array() - mu;
        const RowArr xhat = xc * inv;
        const RowArr dy = g.row(r).array();
        if (t.requires_grad(gain.id))
          t.grad_mut(gain.id).row(0) += (dy * xhat).matrix();
        if (t.requires_grad(bias.id)) t.grad_mut(bias.id).row(0) += g.row(r);
        if (t.requires_grad(x.id)) {
          const RowArr dxhat = dy * t.value(gain.id).row(0).array();
          const double dvar = (dxhat * xc).sum() * -0.5 * inv * inv * inv;
          const double dmu = -inv * dxhat.sum() + dvar * (-2.0 / n) * xc.sum();
          t.grad_mut(x.id).row(r) +=
              (dxhat * inv + dvar * 2.0 / n * xc + dmu / n).matrix();
        }
      }
    });
  }

  /// Exact GELU: 0.5 x (1 + erf(x / sqrt(2))).
  Var gelu(Var a) {
    check(a);
    Mat out = a.value().unaryExpr(
        [](double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); });
    return make_node(std::move(out), {a}, [a](Tape& t, int self) {
      if (!t.requires_grad(a.id)) return;
      const Mat& xv = t.value(a.id);
      Mat d = xv.unaryExpr([](double x) {
        const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
        const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
        return cdf + x * pdf;
      });
      t.grad_mut(a.id) += t.grad(self).cwiseProduct(d);
    });
  }

  /// Elementwise max of same-shape inputs; gradient routes to the first
  /// input attaining the max at each coordinate.
  Var cwise_max(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("cwise_max: no inputs");
    check(parts[0]);
    Mat out = parts[0].value();
    for (std::size_t i = 1; i < parts.size(); ++i) {
      check(parts[i]);
      out = out.cwiseMax(parts[i].value());
    }
    return make_node(std::move(out), parts, [parts](Tape& t, int self) {
      const Mat& y = t.value(self);
      const Mat& g = t.grad(self);
      Eigen::ArrayXXd taken = Eigen::ArrayXXd::Zero(y.rows(), y.cols());
      for (const auto& p : parts) {
        Eigen::ArrayXXd is_max =
            ((t.value(p.id).array() == y.array()) && (taken == 0.0)).cast<double>();
        taken += is_max;
        if (t.requires_grad(p.id))
          t.grad_mut(p.id).array() += g.array() * is_max;
      }
    });
  }

  /// Column-wise mean over all rows -> 1 x D.
  Var mean_rows(Var a) {
    check(a);
    const double n = static_cast<double>(a.rows());
    Mat out = a.value().colwise().mean();
    return make_node(std::move(out), {a}, [a, n](Tape& t, int self) {
      if (!t.requires_grad(a.id)) return;
      const Mat& g = t.grad(self);
      t.grad_mut(a.id) += (Mat::Ones(t.value(a.id).rows(), 1) * g.row(0)) / n;
    });
  }

  /// Inverted dropout; identity when rate == 0.
  Var dropout(Var a, double rate, std::mt19937_64& rng) {
    check(a);
    if (rate <= 0.0) return a;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Mat mask(a.rows(), a.cols());
    const double keep = 1.0 - rate;
    for (Eigen::Index r = 0; r < mask.rows(); ++r)
      for (Eigen::Index c = 0; c < mask.cols(); ++c)
        mask(r, c) = u(rng) < rate ? 0.0 : 1.0 / keep;
    Mat out = a.value().cwiseProduct(mask);
    return make_node(std::move(out), {a}, [a, mask = std::move(mask)](Tape& t, int self) {
      if (t.requires_grad(a.id)) t.grad_mut(a.id) += t.grad(self).cwiseProduct(mask);
    });
  }

  /// Seeds d(out)=1 for a 1x1 node and runs the reverse sweep.
  void backward(Var out) {
    check(out);
    if (out.rows() != 1 || out.cols() != 1)
      throw std::invalid_argument("backward: output must be a scalar node");
    nodes_[out.id].grad(0, 0) = 1.0;
    for (int i = out.id; i >= 0; --i)
      if (nodes_[i].back && nodes_[i].needs_grad) nodes_[i].back(*this, i);
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void(Tape&, int)> back;
    bool needs_grad = false;
  };

  Var push(Mat value, bool needs_grad, std::function<void(Tape&, int)> back) {
    Node n;
    n.grad = Mat::Zero(value.rows(), value.cols());
    n.value = std::move(value);
    n.back = std::move(back);
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1, this};
  }

  void check(const Var& v) const {
    if (!v.valid() || v.tape != this) throw std::invalid_argument("Var from a different tape");
  }

  std::vector<Node> nodes_;
};

inline const Mat& Var::value() const { return tape->value(id); }
inline const Mat& Var::grad() const { return tape->grad(id); }

}  // namespace ragtag::nn
