#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

namespace most {

/// Dense row-major f64 array. Rank 1-3 is all the encoder needs.
struct Tensor {
    std::vector<size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<size_t> s);
    Tensor(std::vector<size_t> s, std::vector<double> d);

    static Tensor zeros(std::vector<size_t> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<size_t> s, double v);
    static Tensor scalar(double v) { return Tensor({1, 1}, {v}); }

    size_t numel() const;
    size_t rank() const { return shape.size(); }
    size_t dim(size_t i) const { return shape[i]; }

    // 2-D accessors (rows, cols)
    size_t rows() const { return shape[0]; }
    size_t cols() const { return shape[1]; }
    double& operator()(size_t r, size_t c) { return data[r * shape[1] + c]; }
    double operator()(size_t r, size_t c) const { return data[r * shape[1] + c]; }

    // 3-D accessor
    double& at3(size_t i, size_t j, size_t k) {
        return data[(i * shape[1] + j) * shape[2] + k];
    }
    double at3(size_t i, size_t j, size_t k) const {
        return data[(i * shape[1] + j) * shape[2] + k];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    void fill(double v);
    bool all_finite() const;
};

std::string shape_str(const std::vector<size_t>& s);

/// Named trainable array. Gradients live here, outside any tape, so that
/// repeated backward passes accumulate.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Param() = default;
    Param(std::string n, Tensor v)
        : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros(value.shape)) {}

    void zero_grad() { grad.fill(0.0); }
};

class Tape;

/// Handle to a node on a tape.
struct Var {
    Tape* tape = nullptr;
    int id = -1;
    bool valid() const { return tape != nullptr && id >= 0; }
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so inputs
/// always precede their consumers; backward() walks the record once in
/// reverse.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf carrying data only; no gradient is tracked through it.
    Var input(Tensor value);
    /// Leaf bound to an external parameter; backward() accumulates into p.grad.
    Var param(Param& p);
    /// Alias of input(), used where the value is semantically a constant.
    Var constant(Tensor value) { return input(std::move(value)); }

    const Tensor& value(Var v) const;
    const Tensor& grad(Var v) const;

    /// Reverse pass from a scalar loss. Each node is visited exactly once.
    void backward(Var loss);

    size_t size() const { return nodes_.size(); }

    // --- internal surface used by the op constructors ---
    using BackFn = std::function<void(Tape&, int self)>;
    int emit(Tensor value, std::vector<int> inputs, BackFn back);
    bool needs_grad(int id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }
    Tensor& grad_buffer(int id);
    const Tensor& node_value(int id) const { return nodes_[static_cast<size_t>(id)].value; }

private:
    struct Node {
        Tensor value;
        Tensor grad;  // allocated lazily during backward
        bool needs_grad = false;
        Param* bound = nullptr;
        std::vector<int> inputs;
        BackFn back;
    };
    std::deque<Node> nodes_;  // deque: values/grads stay addressable as the tape grows
};

// ---- primitive operations -------------------------------------------------
// All binary elementwise ops require identical shapes and report both shapes
// on mismatch.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var exp_elem(Var a);
Var log_elem(Var a);
Var gelu(Var a);

/// (m,k) x (k,n) -> (m,n). Backward: da += g b^T, db += a^T g.
Var matmul(Var a, Var b);

/// x (c_in,w), kernel (c_out,c_in,ksize), bias (c_out) -> (c_out,w).
/// Left zero padding of ksize-1 keeps the output length at w and makes
/// column t a function of inputs at times <= t only.
Var causal_conv1d(Var x, Var kernel, Var bias);

/// Elementwise mean of a non-empty same-shape list.
Var mean_over(const std::vector<Var>& xs);
/// Elementwise max; gradient goes to the lowest-index argmax on ties.
Var max_over(const std::vector<Var>& xs);

/// Per-column dot product of two (h,n) matrices -> (1,n).
Var dot_cols(Var a, Var b);

/// Multiply every column of x (h,n) by the matching entry of row (1,n).
Var mul_cols(Var x, Var row);

Var sum_all(Var a);   // -> (1,1)
Var mean_all(Var a);  // -> (1,1)

/// Stack 2-D blocks with equal column counts along the row axis.
Var concat_rows(const std::vector<Var>& xs);
Var slice_rows(Var x, size_t r0, size_t r1);  // rows [r0, r1)
Var slice_cols(Var x, size_t c0, size_t c1);  // cols [c0, c1)

// ---- value-level helpers (no tape) ----------------------------------------
Tensor matmul_value(const Tensor& a, const Tensor& b);
Tensor random_normal(std::vector<size_t> shape, class Rng& rng, double stdev = 1.0);

}  // namespace most
