#ifndef REFCOMM_PCA_HPP
#define REFCOMM_PCA_HPP

#include "refcomm/core.hpp"

namespace refcomm {

struct SymmetricEigen {
  VectorD values;   ///< descending
  MatrixD vectors;  ///< column j pairs with values[j]
  int sweeps = 0;
};

/// Cyclic Jacobi eigendecomposition of a small symmetric matrix.
SymmetricEigen jacobi_eigen(const MatrixD& symmetric, double tolerance = 1e-12, int max_sweeps = 100);

struct PcaResult {
  VectorD eigenvalues;        ///< covariance eigenvalues, descending, clamped at 0
  VectorD explained_ratio;    ///< eigenvalues / total variance
  MatrixD components;         ///< row j is the j-th principal direction
  MatrixD correlation;        ///< Pearson correlation of the raw dimensions
  Index samples = 0;
};

/// PCA over rows (samples) of `rows`. Needs at least two rows and nonzero total variance.
PcaResult pca(const MatrixD& rows);

inline PcaResult pca(const MatrixF& rows) { return pca(MatrixD(rows.cast<double>())); }

}  // namespace refcomm

#endif  // REFCOMM_PCA_HPP
