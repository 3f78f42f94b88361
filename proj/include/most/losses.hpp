#pragma once

#include <vector>

#include "most/tensor.hpp"

namespace most {

/// Loss combination switches. alpha weights the mode losses; the disable
/// flags make the corresponding term contribute exactly zero.
/// l2_normalize/temperature are off by default so the dot products enter
/// the losses raw.
struct LossWeights {
    double alpha = 0.5;
    bool enable_instance = true;
    bool enable_mode = true;
    bool l2_normalize = false;
    double temperature = 1.0;
};

/// A batch of representation pairs restricted to the crop overlap: column t
/// of view1[i] and view2[i] refer to the same absolute timestamp.
struct ContrastBatch {
    size_t h_half = 0;
    size_t n = 0;  // overlap length
    std::vector<Var> view1, view2;  // each (2*h_half, n), on one shared tape

    size_t batch_size() const { return view1.size(); }
    void validate() const;  // throws on empty batch / n == 0 / shape drift
};

/// Stabilized log-sum-exp over a list of (1,n) logit rows -> (1,n).
Var logsumexp_rows(const std::vector<Var>& rows);

/// InfoNCE over crop views: positives are same-sample same-timestamp pairs
/// across views; negatives are other samples at the same timestamp, both
/// cross-view and within view1.
Var instance_loss(const ContrastBatch& batch, const LossWeights& weights = {});

/// InfoNCE across the two mode halves of view1: the positive for sample i
/// is the other mode's representation of the same sample and timestamp.
/// which_mode selects the anchor half (1 or 2).
Var mode_loss(const ContrastBatch& batch, int which_mode, const LossWeights& weights = {});

/// L = L_I + alpha * (L_M1 + L_M2), with disabled parts contributing zero.
Var total_loss(Tape& tape, const ContrastBatch& batch, const LossWeights& weights);

/// Mean squared error of a linear head on last-timestamp representations.
/// last_reps are (h,1) columns; head_w is (m,h), head_b (m,1), targets (m,1).
Var mse_supervised_loss(Tape& tape, const std::vector<Var>& last_reps, Var head_w, Var head_b,
                        const std::vector<Tensor>& targets);

// ---- value-level conveniences (scratch tape inside) ----------------------------

double instance_loss_value(const std::vector<Tensor>& view1, const std::vector<Tensor>& view2,
                           const LossWeights& weights = {});
double mode_loss_value(const std::vector<Tensor>& view1, size_t h_half, int which_mode,
                       const LossWeights& weights = {});

}  // namespace most
