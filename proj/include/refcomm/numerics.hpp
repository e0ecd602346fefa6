#ifndef REFCOMM_NUMERICS_HPP
#define REFCOMM_NUMERICS_HPP

#include "refcomm/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace refcomm {

// ---------------------------------------------------------------------------
// Linear layer: out[i] = W * X[i] + b, rows of X are samples.

template <typename Scalar>
Matrix<Scalar> linear_forward(const Matrix<Scalar>& weight, const Vector<Scalar>& bias,
                              const Matrix<Scalar>& input) {
  if (input.cols() != weight.cols() || bias.size() != weight.rows()) {
    throw ShapeError("linear_forward: weight " + shape_of(weight) + ", bias " +
                     std::to_string(bias.size()) + ", input " + shape_of(input));
  }
  Matrix<Scalar> out = input * weight.transpose();
  out.rowwise() += bias.transpose();
  return out;
}

template <typename Scalar>
struct LinearGrads {
  Matrix<Scalar> weight;
  Vector<Scalar> bias;
  Matrix<Scalar> input;
};

template <typename Scalar>
LinearGrads<Scalar> linear_backward(const Matrix<Scalar>& grad_out, const Matrix<Scalar>& input,
                                    const Matrix<Scalar>& weight) {
  if (grad_out.rows() != input.rows() || grad_out.cols() != weight.rows() ||
      input.cols() != weight.cols()) {
    throw ShapeError("linear_backward: grad_out " + shape_of(grad_out) + ", input " +
                     shape_of(input) + ", weight " + shape_of(weight));
  }
  LinearGrads<Scalar> g;
  g.weight = grad_out.transpose() * input;
  g.bias = grad_out.colwise().sum().transpose();
  g.input = grad_out * weight;
  return g;
}

// ---------------------------------------------------------------------------
// ReLU

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.cwiseMax(Scalar(0));
}

template <typename Scalar>
Matrix<Scalar> relu_backward(const Matrix<Scalar>& grad_out, const Matrix<Scalar>& input) {
  if (grad_out.rows() != input.rows() || grad_out.cols() != input.cols()) {
    throw ShapeError("relu_backward: grad_out " + shape_of(grad_out) + ", input " + shape_of(input));
  }
  return (input.array() > Scalar(0)).select(grad_out, Scalar(0));
}

// ---------------------------------------------------------------------------
// Cosine similarity

template <typename Scalar>
Scalar cosine_similarity(const Vector<Scalar>& u, const Vector<Scalar>& v) {
  if (u.size() != v.size()) {
    throw ShapeError("cosine_similarity: lengths " + std::to_string(u.size()) + " and " +
                     std::to_string(v.size()));
  }
  const Scalar nu = u.norm();
  const Scalar nv = v.norm();
  if (!(nu > Scalar(0)) || !(nv > Scalar(0))) {
    throw DegenerateInputError("cosine_similarity: zero-norm vector");
  }
  return std::clamp(u.dot(v) / (nu * nv), Scalar(-1), Scalar(1));
}

template <typename Scalar>
struct CosineGrads {
  Vector<Scalar> u;
  Vector<Scalar> v;
};

/// Gradient of grad * cos(u, v) with respect to both arguments.
template <typename Scalar>
CosineGrads<Scalar> cosine_backward(const Vector<Scalar>& u, const Vector<Scalar>& v, Scalar grad) {
  const Scalar nu = u.norm();
  const Scalar nv = v.norm();
  if (!(nu > Scalar(0)) || !(nv > Scalar(0))) {
    throw DegenerateInputError("cosine_backward: zero-norm vector");
  }
  const Scalar c = u.dot(v) / (nu * nv);
  CosineGrads<Scalar> g;
  g.u = grad * (v / (nu * nv) - c * u / (nu * nu));
  g.v = grad * (u / (nu * nv) - c * v / (nv * nv));
  return g;
}

/// L2-normalizes every row; zero rows are a degenerate input.
template <typename Scalar>
Matrix<Scalar> normalize_rows(const Matrix<Scalar>& x, Vector<Scalar>& norms) {
  norms = x.rowwise().norm();
  for (Index i = 0; i < norms.size(); ++i) {
    if (!std::isfinite(static_cast<double>(norms[i]))) {
      throw NumericError("normalize_rows: row " + std::to_string(i) + " is not finite");
    }
    if (!(norms[i] > Scalar(0))) {
      throw DegenerateInputError("normalize_rows: row " + std::to_string(i) + " has zero norm");
    }
  }
  return norms.cwiseInverse().asDiagonal() * x;
}

/// Backward of normalize_rows given the normalized rows and their original norms.
template <typename Scalar>
Matrix<Scalar> normalize_rows_backward(const Matrix<Scalar>& grad_normalized,
                                       const Matrix<Scalar>& normalized,
                                       const Vector<Scalar>& norms) {
  Vector<Scalar> proj = (grad_normalized.array() * normalized.array()).rowwise().sum();
  Matrix<Scalar> g = grad_normalized - proj.asDiagonal() * normalized;
  return norms.cwiseInverse().asDiagonal() * g;
}

// ---------------------------------------------------------------------------
// Softmax family. Max-subtraction keeps every finite input finite.

template <typename Scalar>
Matrix<Scalar> softmax_rows(const Matrix<Scalar>& logits) {
  Matrix<Scalar> out = logits.colwise() - logits.rowwise().maxCoeff();
  out = out.array().exp();
  Vector<Scalar> sums = out.rowwise().sum();
  return sums.cwiseInverse().asDiagonal() * out;
}

template <typename Scalar>
Matrix<Scalar> log_softmax_rows(const Matrix<Scalar>& logits) {
  Matrix<Scalar> shifted = logits.colwise() - logits.rowwise().maxCoeff();
  Vector<Scalar> lse = shifted.array().exp().rowwise().sum().log();
  return shifted.colwise() - lse;
}

template <typename Scalar>
Vector<Scalar> softmax(const Vector<Scalar>& logits) {
  Vector<Scalar> out = (logits.array() - logits.maxCoeff()).exp();
  return out / out.sum();
}

template <typename Scalar>
struct CrossEntropy {
  double loss = 0.0;
  Matrix<Scalar> grad;  ///< d(mean loss)/d(logits)
};

template <typename Scalar>
CrossEntropy<Scalar> softmax_cross_entropy(const Matrix<Scalar>& logits, std::span<const Index> targets) {
  if (static_cast<Index>(targets.size()) != logits.rows()) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     shape_of(logits) + " logits");
  }
  CrossEntropy<Scalar> ce;
  if (logits.rows() == 0) {
    ce.grad = logits;
    return ce;
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] < 0 || targets[i] >= logits.cols()) {
      throw IndexError("softmax_cross_entropy: target " + std::to_string(targets[i]) + " at row " +
                       std::to_string(i) + " outside [0, " + std::to_string(logits.cols()) + ")");
    }
  }
  const Matrix<Scalar> logp = log_softmax_rows(logits);
  ce.grad = logp.array().exp();
  double total = 0.0;
  for (Index i = 0; i < logits.rows(); ++i) {
    total -= static_cast<double>(logp(i, targets[i]));
    ce.grad(i, targets[i]) -= Scalar(1);
  }
  const auto n = static_cast<double>(logits.rows());
  ce.loss = total / n;
  ce.grad /= static_cast<Scalar>(n);
  return ce;
}

// ---------------------------------------------------------------------------
// Gumbel-Softmax

inline constexpr double kGumbelEpsilon = 1e-10;

/// Standard Gumbel(0, 1) draws, -log(-log(U)) with U clamped away from 0 and 1.
template <typename Scalar>
Matrix<Scalar> sample_gumbel_noise(Index rows, Index cols, Rng& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Matrix<Scalar> g(rows, cols);
  for (Index i = 0; i < g.size(); ++i) {
    const double u = std::clamp(uniform(rng), kGumbelEpsilon, 1.0 - kGumbelEpsilon);
    g.data()[i] = static_cast<Scalar>(-std::log(-std::log(u)));
  }
  return g;
}

template <typename Scalar>
struct GumbelSample {
  Matrix<Scalar> sample;  ///< forward value: soft sample, or one-hot in hard mode
  Matrix<Scalar> soft;    ///< relaxed sample, used by the backward pass
  Scalar tau{};
  bool hard = false;
};

/// Row-wise Gumbel-Softmax with caller-supplied noise; deterministic.
template <typename Scalar>
GumbelSample<Scalar> gumbel_softmax(const Matrix<Scalar>& logits, const Matrix<Scalar>& noise, Scalar tau,
                                    bool hard) {
  if (!(tau > Scalar(0))) {
    throw ParameterError("gumbel_softmax: tau must be > 0, got " + std::to_string(double(tau)));
  }
  if (noise.rows() != logits.rows() || noise.cols() != logits.cols()) {
    throw ShapeError("gumbel_softmax: logits " + shape_of(logits) + ", noise " + shape_of(noise));
  }
  GumbelSample<Scalar> s;
  s.tau = tau;
  s.hard = hard;
  s.soft = softmax_rows<Scalar>((logits + noise) / tau);
  if (hard) {
    s.sample = Matrix<Scalar>::Zero(logits.rows(), logits.cols());
    for (Index i = 0; i < logits.rows(); ++i) {
      Index k = 0;
      s.soft.row(i).maxCoeff(&k);
      s.sample(i, k) = Scalar(1);
    }
  } else {
    s.sample = s.soft;
  }
  return s;
}

template <typename Scalar>
GumbelSample<Scalar> gumbel_softmax_sample(const Matrix<Scalar>& logits, Scalar tau, Rng& rng, bool hard) {
  if (!(tau > Scalar(0))) {
    throw ParameterError("gumbel_softmax_sample: tau must be > 0, got " + std::to_string(double(tau)));
  }
  return gumbel_softmax(logits, sample_gumbel_noise<Scalar>(logits.rows(), logits.cols(), rng), tau, hard);
}

/// Vector convenience overload.
template <typename Scalar>
GumbelSample<Scalar> gumbel_softmax_sample(const Vector<Scalar>& logits, Scalar tau, Rng& rng, bool hard) {
  Matrix<Scalar> row = logits.transpose();
  return gumbel_softmax_sample<Scalar>(row, tau, rng, hard);
}

/// Backward through the relaxed sample (straight-through in hard mode).
template <typename Scalar>
Matrix<Scalar> gumbel_softmax_backward(const GumbelSample<Scalar>& s, const Matrix<Scalar>& grad_sample) {
  const Matrix<Scalar>& y = s.soft;
  Vector<Scalar> dot = (grad_sample.array() * y.array()).rowwise().sum();
  Matrix<Scalar> g = (y.array() * (grad_sample.colwise() - dot).array()).matrix();
  return g / s.tau;
}

// ---------------------------------------------------------------------------
// Parameters

/// Mutable flat view over one parameter tensor.
template <typename Scalar>
struct ParamView {
  std::string name;
  Scalar* data = nullptr;
  Index size = 0;

  Eigen::Map<Vector<Scalar>> values() const { return Eigen::Map<Vector<Scalar>>(data, size); }
};

template <typename Scalar, typename Derived>
ParamView<Scalar> param_view(std::string name, Eigen::PlainObjectBase<Derived>& m) {
  return ParamView<Scalar>{std::move(name), m.data(), m.size()};
}

}  // namespace refcomm

#endif  // REFCOMM_NUMERICS_HPP
