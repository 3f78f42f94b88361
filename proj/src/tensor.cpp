#include "most/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "most/rng.hpp"

namespace most {

namespace {

size_t shape_numel(const std::vector<size_t>& s) {
    size_t n = 1;
    for (size_t d : s) n *= d;
    return n;
}

void require_2d(const Tensor& t, const char* what) {
    if (t.rank() != 2) {
        throw std::invalid_argument(std::string(what) + ": expected rank-2 tensor, got shape " +
                                    shape_str(t.shape));
    }
}

[[noreturn]] void shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                                " vs " + shape_str(b.shape));
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

Tensor::Tensor(std::vector<size_t> s) : shape(std::move(s)), data(shape_numel(shape), 0.0) {}

Tensor::Tensor(std::vector<size_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != shape_numel(shape)) {
        throw std::invalid_argument("Tensor: data length " + std::to_string(data.size()) +
                                    " does not match shape " + shape_str(shape));
    }
}

Tensor Tensor::full(std::vector<size_t> s, double v) {
    Tensor t(std::move(s));
    t.fill(v);
    return t;
}

size_t Tensor::numel() const { return data.size(); }

void Tensor::fill(double v) { std::fill(data.begin(), data.end(), v); }

bool Tensor::all_finite() const {
    for (double x : data) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

std::string shape_str(const std::vector<size_t>& s) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << ",";
        os << s[i];
    }
    os << ")";
    return os.str();
}

// ---- Tape ------------------------------------------------------------------

Var Tape::input(Tensor value) {
    nodes_.push_back(Node{std::move(value), Tensor{}, false, nullptr, {}, nullptr});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(Param& p) {
    nodes_.push_back(Node{p.value, Tensor{}, true, &p, {}, nullptr});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

const Tensor& Tape::value(Var v) const {
    if (v.tape != this) throw std::invalid_argument("Tape::value: var from another tape");
    return nodes_.at(static_cast<size_t>(v.id)).value;
}

const Tensor& Tape::grad(Var v) const {
    if (v.tape != this) throw std::invalid_argument("Tape::grad: var from another tape");
    return nodes_.at(static_cast<size_t>(v.id)).grad;
}

int Tape::emit(Tensor value, std::vector<int> inputs, BackFn back) {
    bool needs = false;
    for (int i : inputs) {
        if (nodes_[static_cast<size_t>(i)].needs_grad) needs = true;
    }
    nodes_.push_back(Node{std::move(value), Tensor{}, needs, nullptr, std::move(inputs),
                          needs ? std::move(back) : BackFn{}});
    return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Tape::grad_buffer(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.shape.empty()) n.grad = Tensor::zeros(n.value.shape);
    return n.grad;
}

void Tape::backward(Var loss) {
    if (loss.tape != this) throw std::invalid_argument("backward: loss from another tape");
    Node& top = nodes_.at(static_cast<size_t>(loss.id));
    if (top.value.numel() != 1) {
        throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                    shape_str(top.value.shape));
    }
    grad_buffer(loss.id).data[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<size_t>(i)];
        if (!n.needs_grad || n.grad.shape.empty()) continue;
        if (n.back) n.back(*this, i);
    }
    // flush leaf gradients into their bound parameters
    for (Node& n : nodes_) {
        if (n.bound != nullptr && !n.grad.shape.empty()) {
            for (size_t k = 0; k < n.grad.data.size(); ++k) {
                n.bound->grad.data[k] += n.grad.data[k];
            }
        }
    }
}

// ---- op helpers ------------------------------------------------------------

namespace {

Tape& tape_of(Var v, const char* op) {
    if (!v.valid()) throw std::invalid_argument(std::string(op) + ": invalid var");
    return *v.tape;
}

void same_tape(Var a, Var b, const char* op) {
    if (a.tape != b.tape) throw std::invalid_argument(std::string(op) + ": vars from different tapes");
}

// accumulate g into input i's buffer if that input is tracked
void accum(Tape& t, int input_id, const Tensor& g) {
    if (!t.needs_grad(input_id)) return;
    Tensor& buf = t.grad_buffer(input_id);
    for (size_t k = 0; k < g.data.size(); ++k) buf.data[k] += g.data[k];
}

}  // namespace

Var add(Var a, Var b) {
    Tape& t = tape_of(a, "add");
    same_tape(a, b, "add");
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (!av.same_shape(bv)) shape_mismatch("add", av, bv);
    Tensor out = av;
    for (size_t k = 0; k < out.data.size(); ++k) out.data[k] += bv.data[k];
    int ia = a.id, ib = b.id;
    int id = t.emit(std::move(out), {ia, ib}, [ia, ib](Tape& tp, int self) {
        const Tensor& g = tp.grad_buffer(self);
        accum(tp, ia, g);
        accum(tp, ib, g);
    });
    return Var{&t, id};
}

Var sub(Var a, Var b) {
    Tape& t = tape_of(a, "sub");
    same_tape(a, b, "sub");
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (!av.same_shape(bv)) shape_mismatch("sub", av, bv);
    Tensor out = av;
    for (size_t k = 0; k < out.data.size(); ++k) out.data[k] -= bv.data[k];
    int ia = a.id, ib = b.id;
    int id = t.emit(std::move(out), {ia, ib}, [ia, ib](Tape& tp, int self) {
        const Tensor& g = tp.grad_buffer(self);
        accum(tp, ia, g);
        if (tp.needs_grad(ib)) {
            Tensor& buf = tp.grad_buffer(ib);
            for (size_t k = 0; k < g.data.size(); ++k) buf.data[k] -= g.data[k];
        }
    });
    return Var{&t, id};
}

Var mul(Var a, Var b) {
    Tape& t = tape_of(a, "mul");
    same_tape(a, b, "mul");
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    if (!av.same_shape(bv)) shape_mismatch("mul", av, bv);
    Tensor out = av;
    for (size_t k = 0; k < out.data.size(); ++k) out.data[k] *= bv.data[k];
    int ia = a.id, ib = b.id;
    int id = t.emit(std::move(out), {ia, ib}, [ia, ib](Tape& tp, int self) {
        const Tensor& g = tp.grad_buffer(self);
        const Tensor& av2 = tp.node_value(ia);
        const Tensor& bv2 = tp.node_value(ib);
        if (tp.needs_grad(ia)) {
            Tensor& buf = tp.grad_buffer(ia);
            for (size_t k = 0; k < g.data.size(); ++k) buf.data[k] += g.data[k] * bv2.data[k];
        }
        if (tp.needs_grad(ib)) {
            Tensor& buf = tp.grad_buffer(ib);
            for (size_t k = 0; k < g.data.size(); ++k) buf.data[k] += g.data[k] * av2.data[k];
        }
    });
    return Var{&t, id};
}

Var scale(Var a, double s) {
    Tape& t = tape_of(a, "scale");
    Tensor out = t.value(a);
    for (double& x : out.data) x *= s;
    int ia = a.id;
    int id = t.emit(std::move(out), {ia}, [ia, s](Tape& tp, int self) {
        if (!tp.needs_grad(ia)) return;
        const Tensor& g = tp.grad_buffer(self);
        Tensor& buf = tp.grad_buffer(ia);
        for (size_t k = 0; k < g.data.size(); ++k) buf.data[k] += s * g.data[k];
    });
    return Var{&t, id};
}

Var exp_elem(Var a) {
    Tape& t = tape_of(a, "exp");
    Tensor out = t.value(a);
    for (double& x : out.data) x = std::exp(x);
    int ia = a.id;
    int id = t.emit(std::move(out), {ia}, [ia](Tape& tp, int self) {
        if (!tp.needs_grad(ia)) return;
        const Tensor& g = tp.grad_buffer(self);
        const Tensor& y = tp.node_value(self);
        Tensor& buf = tp.grad_buffer(ia);
        for (size_t k = 0; k < g.data.size(); ++k) buf.data[k] += g.data[k] * y.data[k];
    });
    return Var{&t, id};
}

Var log_elem(Var a) {
    Tape& t = tape_of(a, "log");
    Tensor out = t.value(a);
    for (double& x : out.data) x = std::log(x);
    int ia = a.id;
    int id = t.emit(std::move(out), {ia}, [ia](Tape& tp, int self) {
        if (!tp.needs_grad(ia)) return;
        const Tensor& g = tp.grad_buffer(self);
        const Tensor& x = tp.node_value(ia);
        Tensor& buf = tp.grad_buffer(ia);
        for (size_t k = 0; k < g.data.size(); ++k) buf.data[k] += g.data[k] / x.data[k];
    });
    return Var{&t, id};
}

Var gelu(Var a) {
    Tape& t = tape_of(a, "gelu");
    Tensor out = t.value(a);
    for (double& x : out.data) x = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
    int ia = a.id;
    int id = t.emit(std::move(out), {ia}, [ia](Tape& tp, int self) {
        if (!tp.needs_grad(ia)) return;
        const Tensor& g = tp.grad_buffer(self);
        const Tensor& x = tp.node_value(ia);
        Tensor& buf = tp.grad_buffer(ia);
        for (size_t k = 0; k < g.data.size(); ++k) {
            double v = x.data[k];
            double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
            double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
            buf.data[k] += g.data[k] * (cdf + v * pdf);
        }
    });
    return Var{&t, id};
}

Var matmul(Var a, Var b) {
    Tape& t = tape_of(a, "matmul");
    same_tape(a, b, "matmul");
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    require_2d(av, "matmul lhs");
    require_2d(bv, "matmul rhs");
    if (av.cols() != bv.rows()) {
        throw std::invalid_argument("matmul: inner dimensions disagree, " + shape_str(av.shape) +
                                    " x " + shape_str(bv.shape));
    }
    Tensor out = matmul_value(av, bv);
    int ia = a.id, ib = b.id;
    int id = t.emit(std::move(out), {ia, ib}, [ia, ib](Tape& tp, int self) {
        const Tensor& g = tp.grad_buffer(self);
        const Tensor& av2 = tp.node_value(ia);
        const Tensor& bv2 = tp.node_value(ib);
        size_t m = av2.rows(), k = av2.cols(), n = bv2.cols();
        if (tp.needs_grad(ia)) {
            Tensor& da = tp.grad_buffer(ia);  // g (m,n) * b^T (n,k)
            for (size_t r = 0; r < m; ++r) {
                for (size_t c = 0; c < n; ++c) {
                    double gv = g(r, c);
                    if (gv == 0.0) continue;
                    for (size_t q = 0; q < k; ++q) da(r, q) += gv * bv2(q, c);
                }
            }
        }
        if (tp.needs_grad(ib)) {
            Tensor& db = tp.grad_buffer(ib);  // a^T (k,m) * g (m,n)
            for (size_t r = 0; r < m; ++r) {
                for (size_t q = 0; q < k; ++q) {
                    double avq = av2(r, q);
                    if (avq == 0.0) continue;
                    for (size_t c = 0; c < n; ++c) db(q, c) += avq * g(r, c);
                }
            }
        }
    });
    return Var{&t, id};
}

Var causal_conv1d(Var x, Var kernel, Var bias) {
    Tape& t = tape_of(x, "causal_conv1d");
    same_tape(x, kernel, "causal_conv1d");
    same_tape(x, bias, "causal_conv1d");
    const Tensor& xv = t.value(x);
    const Tensor& kv = t.value(kernel);
    const Tensor& bv = t.value(bias);
    require_2d(xv, "causal_conv1d input");
    if (kv.rank() != 3) {
        throw std::invalid_argument("causal_conv1d: kernel must be rank 3, got " +
                                    shape_str(kv.shape));
    }
    size_t c_in = xv.rows(), w = xv.cols();
    size_t c_out = kv.dim(0), ksize = kv.dim(2);
    if (kv.dim(1) != c_in) {
        throw std::invalid_argument("causal_conv1d: kernel expects " + std::to_string(kv.dim(1)) +
                                    " input channels, input has " + std::to_string(c_in));
    }
    if (bv.numel() != c_out) {
        throw std::invalid_argument("causal_conv1d: bias length " + std::to_string(bv.numel()) +
                                    " vs " + std::to_string(c_out) + " output channels");
    }
    if (ksize < 1 || w < 1) throw std::invalid_argument("causal_conv1d: ksize and w must be >= 1");

    Tensor out({c_out, w});
    for (size_t o = 0; o < c_out; ++o) {
        double* orow = &out.data[o * w];
        for (size_t tt = 0; tt < w; ++tt) orow[tt] = bv.data[o];
        for (size_t i = 0; i < c_in; ++i) {
            const double* xrow = &xv.data[i * w];
            const double* krow = &kv.data[(o * c_in + i) * ksize];
            for (size_t tau = 0; tau < ksize; ++tau) {
                double kval = krow[tau];
                if (kval == 0.0) continue;
                for (size_t tt = tau; tt < w; ++tt) orow[tt] += kval * xrow[tt - tau];
            }
        }
    }

    int ix = x.id, ik = kernel.id, ibias = bias.id;
    int id = t.emit(std::move(out), {ix, ik, ibias}, [ix, ik, ibias](Tape& tp, int self) {
        const Tensor& g = tp.grad_buffer(self);
        const Tensor& xv2 = tp.node_value(ix);
        const Tensor& kv2 = tp.node_value(ik);
        size_t c_in = xv2.rows(), w = xv2.cols();
        size_t c_out = kv2.dim(0), ksize = kv2.dim(2);
        if (tp.needs_grad(ibias)) {
            Tensor& db = tp.grad_buffer(ibias);
            for (size_t o = 0; o < c_out; ++o) {
                double s = 0.0;
                for (size_t tt = 0; tt < w; ++tt) s += g(o, tt);
                db.data[o] += s;
            }
        }
        if (tp.needs_grad(ix)) {
            Tensor& dx = tp.grad_buffer(ix);
            for (size_t o = 0; o < c_out; ++o) {
                const double* grow = &g.data[o * w];
                for (size_t i = 0; i < c_in; ++i) {
                    double* dxrow = &dx.data[i * w];
                    const double* krow = &kv2.data[(o * c_in + i) * ksize];
                    for (size_t tau = 0; tau < ksize; ++tau) {
                        double kval = krow[tau];
                        if (kval == 0.0) continue;
                        for (size_t tt = tau; tt < w; ++tt) dxrow[tt - tau] += kval * grow[tt];
                    }
                }
            }
        }
        if (tp.needs_grad(ik)) {
            Tensor& dk = tp.grad_buffer(ik);
            for (size_t o = 0; o < c_out; ++o) {
                const double* grow = &g.data[o * w];
                for (size_t i = 0; i < c_in; ++i) {
                    const double* xrow = &xv2.data[i * w];
                    double* dkrow = &dk.data[(o * c_in + i) * ksize];
                    for (size_t tau = 0; tau < ksize; ++tau) {
                        double s = 0.0;
                        for (size_t tt = tau; tt < w; ++tt) s += grow[tt] * xrow[tt - tau];
                        dkrow[tau] += s;
                    }
                }
            }
        }
    });
    return Var{&t, id};
}

namespace {

void check_list(const std::vector<Var>& xs, const char* op) {
    if (xs.empty()) throw std::invalid_argument(std::string(op) + ": empty list");
    Tape* t = xs[0].tape;
    const Tensor& first = t->value(xs[0]);
    for (const Var& v : xs) {
        if (v.tape != t) throw std::invalid_argument(std::string(op) + ": vars from different tapes");
        if (!t->value(v).same_shape(first)) shape_mismatch(op, first, t->value(v));
    }
}

}  // namespace

Var mean_over(const std::vector<Var>& xs) {
    check_list(xs, "mean_over");
    Tape& t = *xs[0].tape;
    Tensor out = t.value(xs[0]);
    for (size_t i = 1; i < xs.size(); ++i) {
        const Tensor& v = t.value(xs[i]);
        for (size_t k = 0; k < out.data.size(); ++k) out.data[k] += v.data[k];
    }
    double inv = 1.0 / static_cast<double>(xs.size());
    for (double& x : out.data) x *= inv;
    std::vector<int> ids;
    ids.reserve(xs.size());
    for (const Var& v : xs) ids.push_back(v.id);
    int id = t.emit(std::move(out), ids, [ids, inv](Tape& tp, int self) {
        const Tensor& g = tp.grad_buffer(self);
        for (int in : ids) {
            if (!tp.needs_grad(in)) continue;
            Tensor& buf = tp.grad_buffer(in);
            for (size_t k = 0; k < g.data.size(); ++k) buf.data[k] += inv * g.data[k];
        }
    });
    return Var{&t, id};
}

Var max_over(const std::vector<Var>& xs) {
    check_list(xs, "max_over");
    Tape& t = *xs[0].tape;
    Tensor out = t.value(xs[0]);
    std::vector<uint32_t> argmax(out.numel(), 0);
    for (size_t i = 1; i < xs.size(); ++i) {
        const Tensor& v = t.value(xs[i]);
        for (size_t k = 0; k < out.data.size(); ++k) {
            if (v.data[k] > out.data[k]) {  // strict: ties stay at the lowest index
                out.data[k] = v.data[k];
                argmax[k] = static_cast<uint32_t>(i);
            }
        }
    }
    std::vector<int> ids;
    ids.reserve(xs.size());
    for (const Var& v : xs) ids.push_back(v.id);
    int id = t.emit(std::move(out), ids, [ids, argmax](Tape& tp, int self) {
        const Tensor& g = tp.grad_buffer(self);
        for (size_t k = 0; k < g.data.size(); ++k) {
            int in = ids[argmax[k]];
            if (!tp.needs_grad(in)) continue;
            tp.grad_buffer(in).data[k] += g.data[k];
        }
    });
    return Var{&t, id};
}

Var dot_cols(Var a, Var b) {
    Tape& t = tape_of(a, "dot_cols");
    same_tape(a, b, "dot_cols");
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    require_2d(av, "dot_cols lhs");
    if (!av.same_shape(bv)) shape_mismatch("dot_cols", av, bv);
    size_t h = av.rows(), n = av.cols();
    Tensor out({1, n});
    for (size_t r = 0; r < h; ++r) {
        for (size_t c = 0; c < n; ++c) out.data[c] += av(r, c) * bv(r, c);
    }
    int ia = a.id, ib = b.id;
    int id = t.emit(std::move(out), {ia, ib}, [ia, ib](Tape& tp, int self) {
        const Tensor& g = tp.grad_buffer(self);
        const Tensor& av2 = tp.node_value(ia);
        const Tensor& bv2 = tp.node_value(ib);
        size_t h = av2.rows(), n = av2.cols();
        if (tp.needs_grad(ia)) {
            Tensor& da = tp.grad_buffer(ia);
            for (size_t r = 0; r < h; ++r)
                for (size_t c = 0; c < n; ++c) da(r, c) += g.data[c] * bv2(r, c);
        }
        if (tp.needs_grad(ib)) {
            Tensor& db = tp.grad_buffer(ib);
            for (size_t r = 0; r < h; ++r)
                for (size_t c = 0; c < n; ++c) db(r, c) += g.data[c] * av2(r, c);
        }
    });
    return Var{&t, id};
}

Var mul_cols(Var x, Var row) {
    Tape& t = tape_of(x, "mul_cols");
    same_tape(x, row, "mul_cols");
    const Tensor& xv = t.value(x);
    const Tensor& rv = t.value(row);
    require_2d(xv, "mul_cols lhs");
    if (rv.rank() != 2 || rv.rows() != 1 || rv.cols() != xv.cols()) {
        throw std::invalid_argument("mul_cols: row must be (1," + std::to_string(xv.cols()) +
                                    "), got " + shape_str(rv.shape));
    }
    size_t h = xv.rows(), n = xv.cols();
    Tensor out({h, n});
    for (size_t r = 0; r < h; ++r)
        for (size_t c = 0; c < n; ++c) out(r, c) = xv(r, c) * rv.data[c];
    int ix = x.id, ir = row.id;
    int id = t.emit(std::move(out), {ix, ir}, [ix, ir](Tape& tp, int self) {
        const Tensor& g = tp.grad_buffer(self);
        const Tensor& xv2 = tp.node_value(ix);
        const Tensor& rv2 = tp.node_value(ir);
        size_t h = xv2.rows(), n = xv2.cols();
        if (tp.needs_grad(ix)) {
            Tensor& dx = tp.grad_buffer(ix);
            for (size_t r = 0; r < h; ++r)
                for (size_t c = 0; c < n; ++c) dx(r, c) += g(r, c) * rv2.data[c];
        }
        if (tp.needs_grad(ir)) {
            Tensor& dr = tp.grad_buffer(ir);
            for (size_t r = 0; r < h; ++r)
                for (size_t c = 0; c < n; ++c) dr.data[c] += g(r, c) * xv2(r, c);
        }
    });
    return Var{&t, id};
}

Var sum_all(Var a) {
    Tape& t = tape_of(a, "sum_all");
    const Tensor& av = t.value(a);
    double s = 0.0;
    for (double x : av.data) s += x;
    int ia = a.id;
    int id = t.emit(Tensor::scalar(s), {ia}, [ia](Tape& tp, int self) {
        if (!tp.needs_grad(ia)) return;
        double g = tp.grad_buffer(self).data[0];
        Tensor& buf = tp.grad_buffer(ia);
        for (double& x : buf.data) x += g;
    });
    return Var{&t, id};
}

Var mean_all(Var a) {
    Tape& t = tape_of(a, "mean_all");
    size_t n = t.value(a).numel();
    return scale(sum_all(a), 1.0 / static_cast<double>(n));
}

Var concat_rows(const std::vector<Var>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_rows: empty list");
    Tape& t = *xs[0].tape;
    size_t cols = t.value(xs[0]).cols();
    size_t total_rows = 0;
    for (const Var& v : xs) {
        if (v.tape != &t) throw std::invalid_argument("concat_rows: vars from different tapes");
        const Tensor& tv = t.value(v);
        require_2d(tv, "concat_rows");
        if (tv.cols() != cols) {
            throw std::invalid_argument("concat_rows: column mismatch " + std::to_string(tv.cols()) +
                                        " vs " + std::to_string(cols));
        }
        total_rows += tv.rows();
    }
    Tensor out({total_rows, cols});
    std::vector<int> ids;
    std::vector<size_t> offsets;
    size_t r0 = 0;
    for (const Var& v : xs) {
        const Tensor& tv = t.value(v);
        std::copy(tv.data.begin(), tv.data.end(), out.data.begin() + static_cast<long>(r0 * cols));
        ids.push_back(v.id);
        offsets.push_back(r0);
        r0 += tv.rows();
    }
    int id = t.emit(std::move(out), ids, [ids, offsets, cols](Tape& tp, int self) {
        const Tensor& g = tp.grad_buffer(self);
        for (size_t i = 0; i < ids.size(); ++i) {
            if (!tp.needs_grad(ids[i])) continue;
            Tensor& buf = tp.grad_buffer(ids[i]);
            size_t base = offsets[i] * cols;
            for (size_t k = 0; k < buf.data.size(); ++k) buf.data[k] += g.data[base + k];
        }
    });
    return Var{&t, id};
}

Var slice_rows(Var x, size_t r0, size_t r1) {
    Tape& t = tape_of(x, "slice_rows");
    const Tensor& xv = t.value(x);
    require_2d(xv, "slice_rows");
    if (r0 >= r1 || r1 > xv.rows()) {
        throw std::invalid_argument("slice_rows: bad range [" + std::to_string(r0) + "," +
                                    std::to_string(r1) + ") for " + shape_str(xv.shape));
    }
    size_t cols = xv.cols();
    Tensor out({r1 - r0, cols});
    std::copy(xv.data.begin() + static_cast<long>(r0 * cols),
              xv.data.begin() + static_cast<long>(r1 * cols), out.data.begin());
    int ix = x.id;
    int id = t.emit(std::move(out), {ix}, [ix, r0, cols](Tape& tp, int self) {
        if (!tp.needs_grad(ix)) return;
        const Tensor& g = tp.grad_buffer(self);
        Tensor& buf = tp.grad_buffer(ix);
        size_t base = r0 * cols;
        for (size_t k = 0; k < g.data.size(); ++k) buf.data[base + k] += g.data[k];
    });
    return Var{&t, id};
}

Var slice_cols(Var x, size_t c0, size_t c1) {
    Tape& t = tape_of(x, "slice_cols");
    const Tensor& xv = t.value(x);
    require_2d(xv, "slice_cols");
    if (c0 >= c1 || c1 > xv.cols()) {
        throw std::invalid_argument("slice_cols: bad range [" + std::to_string(c0) + "," +
                                    std::to_string(c1) + ") for " + shape_str(xv.shape));
    }
    size_t rows = xv.rows(), cols = xv.cols(), width = c1 - c0;
    Tensor out({rows, width});
    for (size_t r = 0; r < rows; ++r) {
        for (size_t c = 0; c < width; ++c) out(r, c) = xv(r, c0 + c);
    }
    int ix = x.id;
    int id = t.emit(std::move(out), {ix}, [ix, c0, cols](Tape& tp, int self) {
        if (!tp.needs_grad(ix)) return;
        const Tensor& g = tp.grad_buffer(self);
        Tensor& buf = tp.grad_buffer(ix);
        size_t rows = g.rows(), width = g.cols();
        for (size_t r = 0; r < rows; ++r) {
            for (size_t c = 0; c < width; ++c) buf.data[r * cols + c0 + c] += g(r, c);
        }
    });
    return Var{&t, id};
}

Tensor matmul_value(const Tensor& a, const Tensor& b) {
    size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out({m, n});
    for (size_t r = 0; r < m; ++r) {
        for (size_t q = 0; q < k; ++q) {
            double av = a(r, q);
            if (av == 0.0) continue;
            const double* brow = &b.data[q * n];
            double* orow = &out.data[r * n];
            for (size_t c = 0; c < n; ++c) orow[c] += av * brow[c];
        }
    }
    return out;
}

Tensor random_normal(std::vector<size_t> shape, Rng& rng, double stdev) {
    Tensor t(std::move(shape));
    for (double& x : t.data) x = stdev * rng.normal();
    return t;
}

}  // namespace most
