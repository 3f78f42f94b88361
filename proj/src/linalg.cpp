#include "most/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace most {

bool cholesky_solve(const Tensor& A, const Tensor& B, Tensor& X) {
    size_t n = A.rows();
    if (A.cols() != n || B.rows() != n) {
        throw std::invalid_argument("cholesky_solve: shape mismatch " + shape_str(A.shape) +
                                    " vs " + shape_str(B.shape));
    }
    Tensor L({n, n});
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j <= i; ++j) {
            double s = A(i, j);
            for (size_t k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
            if (i == j) {
                if (s <= 0.0) return false;
                L(i, i) = std::sqrt(s);
            } else {
                L(i, j) = s / L(j, j);
            }
        }
    }
    size_t m = B.cols();
    X = Tensor({n, m});
    Tensor Y({n, m});
    for (size_t c = 0; c < m; ++c) {
        for (size_t i = 0; i < n; ++i) {  // forward: L y = b
            double s = B(i, c);
            for (size_t k = 0; k < i; ++k) s -= L(i, k) * Y(k, c);
            Y(i, c) = s / L(i, i);
        }
        for (size_t ii = n; ii-- > 0;) {  // backward: L^T x = y
            double s = Y(ii, c);
            for (size_t k = ii + 1; k < n; ++k) s -= L(k, ii) * X(k, c);
            X(ii, c) = s / L(ii, ii);
        }
    }
    return true;
}

void sym_eig(const Tensor& A, Tensor& eigvals, Tensor& eigvecs) {
    size_t n = A.rows();
    if (A.cols() != n) throw std::invalid_argument("sym_eig: matrix must be square");
    Tensor M = A;
    Tensor V({n, n});
    for (size_t i = 0; i < n; ++i) V(i, i) = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (size_t p = 0; p < n; ++p)
            for (size_t q = p + 1; q < n; ++q) off += M(p, q) * M(p, q);
        if (off < 1e-24) break;
        for (size_t p = 0; p < n; ++p) {
            for (size_t q = p + 1; q < n; ++q) {
                double apq = M(p, q);
                if (std::abs(apq) < 1e-300) continue;
                double theta = (M(q, q) - M(p, p)) / (2.0 * apq);
                double t = (theta >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (size_t k = 0; k < n; ++k) {
                    double mkp = M(k, p), mkq = M(k, q);
                    M(k, p) = c * mkp - s * mkq;
                    M(k, q) = s * mkp + c * mkq;
                }
                for (size_t k = 0; k < n; ++k) {
                    double mpk = M(p, k), mqk = M(q, k);
                    M(p, k) = c * mpk - s * mqk;
                    M(q, k) = s * mpk + c * mqk;
                }
                for (size_t k = 0; k < n; ++k) {
                    double vkp = V(k, p), vkq = V(k, q);
                    V(k, p) = c * vkp - s * vkq;
                    V(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    // sort ascending by eigenvalue
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return M(a, a) < M(b, b); });
    eigvals = Tensor({n, 1});
    eigvecs = Tensor({n, n});
    for (size_t c = 0; c < n; ++c) {
        eigvals.data[c] = M(idx[c], idx[c]);
        for (size_t r = 0; r < n; ++r) eigvecs(r, c) = V(r, idx[c]);
    }
}

Tensor eig_pinv_solve(const Tensor& A, const Tensor& B, double rel_threshold) {
    Tensor vals, vecs;
    sym_eig(A, vals, vecs);
    size_t n = A.rows(), m = B.cols();
    double vmax = 0.0;
    for (double v : vals.data) vmax = std::max(vmax, std::abs(v));
    double cut = vmax * rel_threshold;
    // X = V diag(1/w) V^T B over the kept spectrum
    Tensor VtB({n, m});
    for (size_t r = 0; r < n; ++r)
        for (size_t c = 0; c < m; ++c) {
            double s = 0.0;
            for (size_t k = 0; k < n; ++k) s += vecs(k, r) * B(k, c);
            VtB(r, c) = s;
        }
    for (size_t r = 0; r < n; ++r) {
        double w = vals.data[r];
        double inv = std::abs(w) > cut ? 1.0 / w : 0.0;
        for (size_t c = 0; c < m; ++c) VtB(r, c) *= inv;
    }
    Tensor X({n, m});
    for (size_t r = 0; r < n; ++r)
        for (size_t c = 0; c < m; ++c) {
            double s = 0.0;
            for (size_t k = 0; k < n; ++k) s += vecs(r, k) * VtB(k, c);
            X(r, c) = s;
        }
    return X;
}

Tensor pca_project_2d(const Tensor& X) {
    size_t n = X.rows(), d = X.cols();
    if (n == 0 || d == 0) throw std::invalid_argument("pca_project_2d: empty matrix");
    std::vector<double> mean(d, 0.0);
    for (size_t r = 0; r < n; ++r)
        for (size_t c = 0; c < d; ++c) mean[c] += X(r, c);
    for (double& m : mean) m /= static_cast<double>(n);
    Tensor cov({d, d});
    for (size_t r = 0; r < n; ++r) {
        for (size_t a = 0; a < d; ++a) {
            double xa = X(r, a) - mean[a];
            for (size_t b = a; b < d; ++b) cov(a, b) += xa * (X(r, b) - mean[b]);
        }
    }
    double inv = 1.0 / std::max<double>(1.0, static_cast<double>(n - 1));
    for (size_t a = 0; a < d; ++a)
        for (size_t b = a; b < d; ++b) {
            cov(a, b) *= inv;
            cov(b, a) = cov(a, b);
        }
    Tensor vals, vecs;
    sym_eig(cov, vals, vecs);
    // top-2 components; fix signs so the largest-magnitude entry is positive
    Tensor out({n, 2});
    for (size_t comp = 0; comp < 2; ++comp) {
        size_t col = d >= 2 ? d - 1 - comp : 0;
        double sign = 1.0;
        double best = 0.0;
        for (size_t r = 0; r < d; ++r) {
            if (std::abs(vecs(r, col)) > std::abs(best)) best = vecs(r, col);
        }
        if (best < 0.0) sign = -1.0;
        for (size_t r = 0; r < n; ++r) {
            double s = 0.0;
            for (size_t c = 0; c < d; ++c) s += (X(r, c) - mean[c]) * vecs(c, col);
            out(r, comp) = sign * s;
        }
    }
    return out;
}

}  // namespace most
