#include "most/losses.hpp"

#include <stdexcept>
#include <string>

namespace most {

namespace {

Tape& batch_tape(const ContrastBatch& b) { return *b.view1[0].tape; }

// Optional preprocessing shared by both losses: L2-normalize columns and/or
// apply an inverse temperature to the logits (via a scale on one side).
Var prep_rep(Tape& t, Var v, const LossWeights& w) {
    if (!w.l2_normalize) return v;
    Var sq = dot_cols(v, v);                                  // (1,n) squared norms
    Var eps = t.constant(Tensor::full({1, t.value(sq).cols()}, 1e-12));
    Var inv_norm = exp_elem(scale(log_elem(add(sq, eps)), -0.5));
    return mul_cols(v, inv_norm);
}

Var logit(Var a, Var b, const LossWeights& w) {
    Var d = dot_cols(a, b);
    if (w.temperature != 1.0) d = scale(d, 1.0 / w.temperature);
    return d;
}

}  // namespace

void ContrastBatch::validate() const {
    if (view1.empty()) throw std::invalid_argument("contrast batch: empty");
    if (view1.size() != view2.size()) {
        throw std::invalid_argument("contrast batch: view sizes differ, " +
                                    std::to_string(view1.size()) + " vs " +
                                    std::to_string(view2.size()));
    }
    if (n == 0) throw std::invalid_argument("contrast batch: overlap length is zero");
    if (h_half == 0) throw std::invalid_argument("contrast batch: h_half is zero");
    Tape& t = *view1[0].tape;
    for (const Var& v : view1) {
        const Tensor& tv = t.value(v);
        if (tv.rank() != 2 || tv.rows() != 2 * h_half || tv.cols() != n) {
            throw std::invalid_argument("contrast batch: representation shape " +
                                        shape_str(tv.shape) + ", expected (" +
                                        std::to_string(2 * h_half) + "," + std::to_string(n) + ")");
        }
    }
    for (const Var& v : view2) {
        const Tensor& tv = t.value(v);
        if (tv.rank() != 2 || tv.rows() != 2 * h_half || tv.cols() != n) {
            throw std::invalid_argument("contrast batch: view2 representation shape " +
                                        shape_str(tv.shape));
        }
    }
}

Var logsumexp_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw std::invalid_argument("logsumexp_rows: empty list");
    if (rows.size() == 1) return rows[0];
    Var m = max_over(rows);
    Var acc;
    for (const Var& r : rows) {
        Var term = exp_elem(sub(r, m));
        acc = acc.valid() ? add(acc, term) : term;
    }
    return add(log_elem(acc), m);
}

Var instance_loss(const ContrastBatch& batch, const LossWeights& weights) {
    batch.validate();
    Tape& t = batch_tape(batch);
    size_t B = batch.batch_size();
    std::vector<Var> v1(B), v2(B);
    for (size_t i = 0; i < B; ++i) {
        v1[i] = prep_rep(t, batch.view1[i], weights);
        v2[i] = prep_rep(t, batch.view2[i], weights);
    }
    Var acc;
    for (size_t i = 0; i < B; ++i) {
        std::vector<Var> rows;
        rows.reserve(2 * B - 1);
        for (size_t j = 0; j < B; ++j) rows.push_back(logit(v1[i], v2[j], weights));
        Var positive = rows[i];
        for (size_t j = 0; j < B; ++j) {
            if (j != i) rows.push_back(logit(v1[i], v1[j], weights));
        }
        Var term = mean_all(sub(logsumexp_rows(rows), positive));
        acc = acc.valid() ? add(acc, term) : term;
    }
    return scale(acc, 1.0 / static_cast<double>(B));
}

Var mode_loss(const ContrastBatch& batch, int which_mode, const LossWeights& weights) {
    batch.validate();
    if (which_mode != 1 && which_mode != 2) {
        throw std::invalid_argument("mode_loss: which_mode must be 1 or 2");
    }
    Tape& t = batch_tape(batch);
    size_t B = batch.batch_size(), hd = batch.h_half;
    std::vector<Var> anchors(B), keys(B);
    for (size_t i = 0; i < B; ++i) {
        Var lo = slice_rows(batch.view1[i], 0, hd);
        Var hi = slice_rows(batch.view1[i], hd, 2 * hd);
        anchors[i] = prep_rep(t, which_mode == 1 ? lo : hi, weights);
        keys[i] = prep_rep(t, which_mode == 1 ? hi : lo, weights);
    }
    Var acc;
    for (size_t i = 0; i < B; ++i) {
        std::vector<Var> rows;
        rows.reserve(B);
        for (size_t j = 0; j < B; ++j) rows.push_back(logit(anchors[i], keys[j], weights));
        Var term = mean_all(sub(logsumexp_rows(rows), rows[i]));
        acc = acc.valid() ? add(acc, term) : term;
    }
    return scale(acc, 1.0 / static_cast<double>(B));
}

Var total_loss(Tape& tape, const ContrastBatch& batch, const LossWeights& weights) {
    Var acc;
    if (weights.enable_instance) acc = instance_loss(batch, weights);
    if (weights.enable_mode && weights.alpha != 0.0) {
        Var m = scale(add(mode_loss(batch, 1, weights), mode_loss(batch, 2, weights)),
                      weights.alpha);
        acc = acc.valid() ? add(acc, m) : m;
    }
    if (!acc.valid()) return tape.constant(Tensor::scalar(0.0));
    return acc;
}

Var mse_supervised_loss(Tape& tape, const std::vector<Var>& last_reps, Var head_w, Var head_b,
                        const std::vector<Tensor>& targets) {
    if (last_reps.empty()) throw std::invalid_argument("mse_supervised_loss: empty batch");
    if (last_reps.size() != targets.size()) {
        throw std::invalid_argument("mse_supervised_loss: " + std::to_string(last_reps.size()) +
                                    " representations vs " + std::to_string(targets.size()) +
                                    " targets");
    }
    size_t m = tape.value(head_b).rows();
    std::vector<Var> diffs;
    diffs.reserve(last_reps.size());
    for (size_t i = 0; i < last_reps.size(); ++i) {
        if (targets[i].rank() != 2 || targets[i].rows() != m || targets[i].cols() != 1) {
            throw std::invalid_argument("mse_supervised_loss: target shape " +
                                        shape_str(targets[i].shape) + ", expected (" +
                                        std::to_string(m) + ",1)");
        }
        Var pred = add(matmul(head_w, last_reps[i]), head_b);
        diffs.push_back(sub(pred, tape.constant(targets[i])));
    }
    Var stacked = concat_rows(diffs);
    return mean_all(mul(stacked, stacked));
}

double instance_loss_value(const std::vector<Tensor>& view1, const std::vector<Tensor>& view2,
                           const LossWeights& weights) {
    Tape tape;
    ContrastBatch b;
    if (view1.empty()) throw std::invalid_argument("instance_loss_value: empty batch");
    b.h_half = view1[0].rows() / 2;
    b.n = view1[0].cols();
    for (const Tensor& v : view1) b.view1.push_back(tape.input(v));
    for (const Tensor& v : view2) b.view2.push_back(tape.input(v));
    return tape.value(instance_loss(b, weights)).data[0];
}

double mode_loss_value(const std::vector<Tensor>& view1, size_t h_half, int which_mode,
                       const LossWeights& weights) {
    Tape tape;
    ContrastBatch b;
    if (view1.empty()) throw std::invalid_argument("mode_loss_value: empty batch");
    b.h_half = h_half;
    b.n = view1[0].cols();
    for (const Tensor& v : view1) {
        b.view1.push_back(tape.input(v));
        b.view2.push_back(tape.input(v));
    }
    return tape.value(mode_loss(b, which_mode, weights)).data[0];
}

}  // namespace most
