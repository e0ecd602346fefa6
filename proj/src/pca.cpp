#include "refcomm/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace refcomm {

SymmetricEigen jacobi_eigen(const MatrixD& symmetric, double tolerance, int max_sweeps) {
  const Index n = symmetric.rows();
  if (symmetric.cols() != n) {
    throw ShapeError("jacobi_eigen: matrix must be square, got " + shape_of(symmetric));
  }
  MatrixD a = 0.5 * (symmetric + symmetric.transpose());
  MatrixD v = MatrixD::Identity(n, n);

  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= tolerance * scale) break;

    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        // Rotation angle zeroing a(p,q): tan(2θ) = 2 a_pq / (a_qq - a_pp).
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) { return a(i, i) > a(j, j); });

  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Index j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    out.vectors.col(j) = v.col(order[j]);
  }
  out.sweeps = sweep;
  return out;
}

PcaResult pca(const MatrixD& rows) {
  if (rows.rows() < 2) {
    throw InsufficientDataError("pca: need at least 2 rows, got " + std::to_string(rows.rows()));
  }
  const Index n = rows.rows();
  const Index d = rows.cols();
  const Eigen::RowVectorXd mean = rows.colwise().mean();
  const MatrixD centered = rows.rowwise() - mean;
  const MatrixD cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

  const SymmetricEigen eig = jacobi_eigen(cov);
  PcaResult r;
  r.samples = n;
  r.eigenvalues = eig.values.cwiseMax(0.0);
  const double total = r.eigenvalues.sum();
  if (!(total > 0.0)) {
    throw DegenerateInputError("pca: rows have zero total variance");
  }
  r.explained_ratio = r.eigenvalues / total;
  r.components = eig.vectors.transpose();

  r.correlation = MatrixD::Identity(d, d);
  const VectorD sd = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  for (Index i = 0; i < d; ++i) {
    for (Index j = i + 1; j < d; ++j) {
      const double denom = sd[i] * sd[j];
      const double c = denom > 0.0 ? std::clamp(cov(i, j) / denom, -1.0, 1.0) : 0.0;
      r.correlation(i, j) = c;
      r.correlation(j, i) = c;
    }
  }
  return r;
}

}  // namespace refcomm
