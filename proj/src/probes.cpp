#include "most/probes.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

#include "most/linalg.hpp"

namespace most {

namespace {

Tensor with_intercept(const Tensor& x) {
    size_t n = x.rows(), d = x.cols();
    Tensor out({n, d + 1});
    for (size_t r = 0; r < n; ++r) {
        for (size_t c = 0; c < d; ++c) out(r, c) = x(r, c);
        out(r, d) = 1.0;
    }
    return out;
}

}  // namespace

RidgeSolution ridge_fit(const Tensor& x, const Tensor& y, double lambda) {
    if (x.rows() != y.rows()) {
        throw std::invalid_argument("ridge_fit: " + std::to_string(x.rows()) + " samples vs " +
                                    std::to_string(y.rows()) + " targets");
    }
    Tensor xa = with_intercept(x);
    size_t n = xa.rows(), d = xa.cols(), m = y.cols();
    Tensor gram({d, d});
    for (size_t r = 0; r < n; ++r)
        for (size_t a = 0; a < d; ++a) {
            double va = xa(r, a);
            if (va == 0.0) continue;
            for (size_t b = a; b < d; ++b) gram(a, b) += va * xa(r, b);
        }
    for (size_t a = 0; a < d; ++a)
        for (size_t b = 0; b < a; ++b) gram(a, b) = gram(b, a);
    for (size_t a = 0; a + 1 < d; ++a) gram(a, a) += lambda;  // intercept unpenalized
    Tensor xty({d, m});
    for (size_t r = 0; r < n; ++r)
        for (size_t a = 0; a < d; ++a) {
            double va = xa(r, a);
            if (va == 0.0) continue;
            for (size_t c = 0; c < m; ++c) xty(a, c) += va * y(r, c);
        }

    RidgeSolution sol;
    if (!cholesky_solve(gram, xty, sol.weights)) {
        std::cerr << "ridge_fit: system is not positive definite at lambda=" << lambda
                  << ", falling back to pseudo-inverse\n";
        sol.weights = eig_pinv_solve(gram, xty);
        sol.used_pseudo_inverse = true;
    }
    // relative residual of the normal equations
    double num = 0.0, den = 0.0;
    for (size_t a = 0; a < d; ++a) {
        for (size_t c = 0; c < m; ++c) {
            double lhs = 0.0;
            for (size_t b = 0; b < d; ++b) lhs += gram(a, b) * sol.weights(b, c);
            double r = lhs - xty(a, c);
            num += r * r;
            den += xty(a, c) * xty(a, c);
        }
    }
    sol.rel_residual = std::sqrt(num) / std::max(std::sqrt(den), 1e-30);
    return sol;
}

Tensor ridge_predict(const RidgeSolution& sol, const Tensor& x) {
    Tensor xa = with_intercept(x);
    if (xa.cols() != sol.weights.rows()) {
        throw std::invalid_argument("ridge_predict: feature width " + std::to_string(x.cols()) +
                                    " does not match fitted model");
    }
    return matmul_value(xa, sol.weights);
}

namespace {

struct LogisticObjective {
    const Tensor& xa;  // (n, d+1) with intercept column
    const std::vector<int>& y;
    int classes;
    double lambda;

    // mean NLL + (lambda/2) * ||W||^2 over non-intercept columns; fills grad
    // (same shape as w) when non-null
    double eval(const Tensor& w, Tensor* grad) const {
        size_t n = xa.rows(), d = xa.cols();
        size_t K = static_cast<size_t>(classes);
        if (grad) grad->fill(0.0);
        double nll = 0.0;
        std::vector<double> logits(K), probs(K);
        for (size_t r = 0; r < n; ++r) {
            double mx = -1e300;
            for (size_t k = 0; k < K; ++k) {
                double s = 0.0;
                for (size_t c = 0; c < d; ++c) s += w(k, c) * xa(r, c);
                logits[k] = s;
                mx = std::max(mx, s);
            }
            double z = 0.0;
            for (size_t k = 0; k < K; ++k) {
                probs[k] = std::exp(logits[k] - mx);
                z += probs[k];
            }
            for (size_t k = 0; k < K; ++k) probs[k] /= z;
            nll -= std::log(std::max(probs[static_cast<size_t>(y[r])], 1e-300));
            if (grad) {
                for (size_t k = 0; k < K; ++k) {
                    double coeff = probs[k] - (static_cast<size_t>(y[r]) == k ? 1.0 : 0.0);
                    for (size_t c = 0; c < d; ++c) (*grad)(k, c) += coeff * xa(r, c);
                }
            }
        }
        double inv_n = 1.0 / static_cast<double>(n);
        nll *= inv_n;
        double reg = 0.0;
        for (size_t k = 0; k < K; ++k)
            for (size_t c = 0; c + 1 < d; ++c) reg += w(k, c) * w(k, c);
        if (grad) {
            for (double& g : grad->data) g *= inv_n;
            for (size_t k = 0; k < K; ++k)
                for (size_t c = 0; c + 1 < d; ++c) (*grad)(k, c) += lambda * w(k, c);
        }
        return nll + 0.5 * lambda * reg;
    }
};

}  // namespace

LogisticModel logistic_fit(const Tensor& x, const std::vector<int>& y, double lambda,
                           size_t max_iters, double tol) {
    if (x.rows() != y.size()) {
        throw std::invalid_argument("logistic_fit: " + std::to_string(x.rows()) + " samples vs " +
                                    std::to_string(y.size()) + " labels");
    }
    std::set<int> distinct(y.begin(), y.end());
    if (distinct.size() < 2) {
        throw std::invalid_argument("logistic_fit: training labels are degenerate (single class)");
    }
    int classes = *distinct.rbegin() + 1;

    Tensor xa = with_intercept(x);
    LogisticModel model;
    model.classes = classes;
    model.weights = Tensor({static_cast<size_t>(classes), xa.cols()});
    LogisticObjective obj{xa, y, classes, lambda};

    Tensor grad(model.weights.shape);
    double loss = obj.eval(model.weights, &grad);
    model.loss_trajectory.push_back(loss);
    double step = 1.0;
    for (size_t it = 0; it < max_iters; ++it) {
        double gmax = 0.0, gnorm2 = 0.0;
        for (double g : grad.data) {
            gmax = std::max(gmax, std::abs(g));
            gnorm2 += g * g;
        }
        if (gmax < tol) break;
        // backtracking line search with the Armijo condition
        step = std::min(step * 2.0, 1e4);
        Tensor trial(model.weights.shape);
        double new_loss = loss;
        bool accepted = false;
        for (int half = 0; half < 60; ++half) {
            for (size_t k = 0; k < trial.data.size(); ++k) {
                trial.data[k] = model.weights.data[k] - step * grad.data[k];
            }
            new_loss = obj.eval(trial, nullptr);
            if (new_loss <= loss - 1e-4 * step * gnorm2) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // no descent step found at machine scale
        model.weights = trial;
        loss = new_loss;
        model.loss_trajectory.push_back(loss);
        obj.eval(model.weights, &grad);
    }
    return model;
}

std::vector<int> logistic_predict(const LogisticModel& model, const Tensor& x) {
    Tensor xa = with_intercept(x);
    if (xa.cols() != model.weights.cols()) {
        throw std::invalid_argument("logistic_predict: feature width mismatch");
    }
    size_t n = xa.rows(), d = xa.cols();
    size_t K = static_cast<size_t>(model.classes);
    std::vector<int> out(n, 0);
    for (size_t r = 0; r < n; ++r) {
        double best = -1e300;
        int arg = 0;
        for (size_t k = 0; k < K; ++k) {
            double s = 0.0;
            for (size_t c = 0; c < d; ++c) s += model.weights(k, c) * xa(r, c);
            if (s > best) {
                best = s;
                arg = static_cast<int>(k);
            }
        }
        out[r] = arg;
    }
    return out;
}

Metrics classification_metrics(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size()) {
        throw std::invalid_argument("classification_metrics: " + std::to_string(pred.size()) +
                                    " predictions vs " + std::to_string(truth.size()) + " labels");
    }
    size_t correct = 0;
    for (size_t i = 0; i < pred.size(); ++i) correct += pred[i] == truth[i] ? 1 : 0;
    Metrics m;
    m.acc = pred.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(pred.size());
    return m;
}

Metrics regression_metrics(const Tensor& pred, const Tensor& truth, size_t horizon) {
    if (!pred.same_shape(truth)) {
        throw std::invalid_argument("regression_metrics: shape mismatch " + shape_str(pred.shape) +
                                    " vs " + shape_str(truth.shape));
    }
    if (horizon < 1) throw std::invalid_argument("regression_metrics: horizon must be >= 1");
    Metrics m;
    m.per_horizon_mse.assign(horizon, 0.0);
    m.per_horizon_mae.assign(horizon, 0.0);
    std::vector<size_t> counts(horizon, 0);
    size_t n = pred.rows(), cols = pred.cols();
    for (size_t r = 0; r < n; ++r) {
        for (size_t c = 0; c < cols; ++c) {
            double e = pred(r, c) - truth(r, c);
            size_t s = c % horizon;  // target layout: (variable, step) with step innermost
            m.per_horizon_mse[s] += e * e;
            m.per_horizon_mae[s] += std::abs(e);
            ++counts[s];
        }
    }
    for (size_t s = 0; s < horizon; ++s) {
        double inv = counts[s] > 0 ? 1.0 / static_cast<double>(counts[s]) : 0.0;
        m.per_horizon_mse[s] *= inv;
        m.per_horizon_mae[s] *= inv;
        m.mse += m.per_horizon_mse[s];
        m.mae += m.per_horizon_mae[s];
    }
    m.mse /= static_cast<double>(horizon);
    m.mae /= static_cast<double>(horizon);
    return m;
}

Metrics classify(const LabeledData& train, const LabeledData& valid, const LabeledData& test,
                 const ProbeConfig& cfg) {
    const LabeledData& sel = valid.size() > 0 ? valid : train;
    double best_lambda = cfg.lambda_grid.front();
    double best_acc = -1.0;
    for (double lambda : cfg.lambda_grid) {
        LogisticModel m = logistic_fit(train.x, train.y, lambda, cfg.max_iters, cfg.tol);
        double acc = classification_metrics(logistic_predict(m, sel.x), sel.y).acc;
        if (acc > best_acc) {
            best_acc = acc;
            best_lambda = lambda;
        }
    }
    LogisticModel final_model = logistic_fit(train.x, train.y, best_lambda, cfg.max_iters, cfg.tol);
    Metrics m = classification_metrics(logistic_predict(final_model, test.x), test.y);
    m.lambda = best_lambda;
    return m;
}

Metrics forecast(const ForecastData& train, const ForecastData& valid, const ForecastData& test,
                 size_t horizon, const ProbeConfig& cfg) {
    const ForecastData& sel = valid.size() > 0 ? valid : train;
    double best_lambda = cfg.lambda_grid.front();
    double best_mse = 1e300;
    for (double lambda : cfg.lambda_grid) {
        RidgeSolution sol = ridge_fit(train.x, train.y, lambda);
        double mse = regression_metrics(ridge_predict(sol, sel.x), sel.y, horizon).mse;
        if (mse < best_mse) {
            best_mse = mse;
            best_lambda = lambda;
        }
    }
    RidgeSolution sol = ridge_fit(train.x, train.y, best_lambda);
    Metrics m = regression_metrics(ridge_predict(sol, test.x), test.y, horizon);
    m.lambda = best_lambda;
    return m;
}

std::vector<double> max_pool_time(const Tensor& rep) {
    size_t h = rep.rows(), w = rep.cols();
    std::vector<double> out(h, -1e300);
    for (size_t r = 0; r < h; ++r)
        for (size_t t = 0; t < w; ++t) out[r] = std::max(out[r], rep(r, t));
    return out;
}

std::vector<double> last_column(const Tensor& rep) {
    size_t h = rep.rows(), w = rep.cols();
    std::vector<double> out(h);
    for (size_t r = 0; r < h; ++r) out[r] = rep(r, w - 1);
    return out;
}

}  // namespace most
