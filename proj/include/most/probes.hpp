#pragma once

#include <string>
#include <vector>

#include "most/tensor.hpp"

namespace most {

struct ProbeConfig {
    std::vector<double> lambda_grid = {1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0};
    size_t max_iters = 500;  // logistic probe
    double tol = 1e-8;       // logistic gradient stop
};

struct Metrics {
    double acc = 0.0;
    double mse = 0.0, mae = 0.0;
    double lambda = 0.0;  // selected penalty
    std::vector<double> per_horizon_mse, per_horizon_mae;
};

/// rows of x are per-sequence feature vectors (max-pooled representations)
struct LabeledData {
    Tensor x;            // (n, d)
    std::vector<int> y;  // class ids 0..K-1
    size_t size() const { return y.size(); }
};

/// forecasting design: rows of x are last-timestamp representations,
/// rows of y the flattened future observations
struct ForecastData {
    Tensor x;  // (n, d)
    Tensor y;  // (n, m)
    size_t size() const { return x.shape.empty() ? 0 : x.rows(); }
};

// ---- ridge (closed form) -------------------------------------------------------

struct RidgeSolution {
    Tensor weights;  // (d+1, m); last row is the intercept
    double rel_residual = 0.0;
    bool used_pseudo_inverse = false;
};

/// Normal equations with an unpenalized intercept. A non-SPD system (only
/// possible at lambda = 0) falls back to an eigenvalue pseudo-inverse and
/// flags it.
RidgeSolution ridge_fit(const Tensor& x, const Tensor& y, double lambda);
Tensor ridge_predict(const RidgeSolution& sol, const Tensor& x);

// ---- multinomial logistic (full-batch, line-searched) ---------------------------

struct LogisticModel {
    Tensor weights;  // (K, d+1)
    int classes = 0;
    std::vector<double> loss_trajectory;  // non-increasing by construction
};

LogisticModel logistic_fit(const Tensor& x, const std::vector<int>& y, double lambda,
                           size_t max_iters = 500, double tol = 1e-8);
std::vector<int> logistic_predict(const LogisticModel& model, const Tensor& x);

// ---- probe protocols -------------------------------------------------------------

/// L2 logistic regression on pooled representations; lambda picked on the
/// validation split by accuracy (train reused when valid is empty).
Metrics classify(const LabeledData& train, const LabeledData& valid, const LabeledData& test,
                 const ProbeConfig& cfg = {});

/// Closed-form ridge from last-timestamp representations to the future
/// window; lambda picked on the validation split by MSE. horizon groups the
/// target columns for the per-step metric breakdown.
Metrics forecast(const ForecastData& train, const ForecastData& valid, const ForecastData& test,
                 size_t horizon, const ProbeConfig& cfg = {});

// ---- metrics ----------------------------------------------------------------------

Metrics classification_metrics(const std::vector<int>& pred, const std::vector<int>& truth);
Metrics regression_metrics(const Tensor& pred, const Tensor& truth, size_t horizon = 1);

// ---- pooling helpers ---------------------------------------------------------------

std::vector<double> max_pool_time(const Tensor& rep);  // (h,w) -> h
std::vector<double> last_column(const Tensor& rep);    // (h,w) -> h

}  // namespace most
