#pragma once

#include "most/tensor.hpp"

namespace most {

/// Solve A X = B for symmetric positive definite A via Cholesky.
/// Returns false (X untouched) when a pivot is not positive.
bool cholesky_solve(const Tensor& A, const Tensor& B, Tensor& X);

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// eigvals come out ascending; eigvecs holds the matching eigenvectors as
/// columns.
void sym_eig(const Tensor& A, Tensor& eigvals, Tensor& eigvecs);

/// Least-squares solve through the eigendecomposition of A, dropping
/// near-null directions (used as the pseudo-inverse fallback for an
/// ill-conditioned ridge system at lambda = 0).
Tensor eig_pinv_solve(const Tensor& A, const Tensor& B, double rel_threshold = 1e-12);

/// Project the rows of X (n,d) onto their top-2 principal components -> (n,2).
Tensor pca_project_2d(const Tensor& X);

}  // namespace most
