#include "seqnas/ops.hpp"

#include "seqnas/errors.hpp"
#include "seqnas/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace seqnas {
namespace {

Tape* tracking(std::initializer_list<const Tensor*> inputs)
{
    Tape* tape = active_tape();
    if (tape == nullptr) {
        return nullptr;
    }
    for (const Tensor* t : inputs) {
        if (t->requires_grad()) {
            return tape;
        }
    }
    return nullptr;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op)
{
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op)
{
    if (t.rank() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
    }
}

void accumulate(const Tensor& dst, std::span<const double> g, double alpha = 1.0)
{
    kernels::active().axpy(alpha, g.data(), dst.grad().data(), g.size());
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b)
{
    require_same_shape(a, b, "add");
    Tensor out = a.clone();
    kernels::active().axpy(1.0, b.data().data(), out.data().data(), out.numel());
    if (Tape* tape = tracking({&a, &b})) {
        tape->record(out, [a, b, out]() mutable {
            if (a.requires_grad()) {
                accumulate(a, out.grad());
            }
            if (b.requires_grad()) {
                accumulate(b, out.grad());
            }
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b)
{
    require_same_shape(a, b, "sub");
    Tensor out = a.clone();
    kernels::active().axpy(-1.0, b.data().data(), out.data().data(), out.numel());
    if (Tape* tape = tracking({&a, &b})) {
        tape->record(out, [a, b, out]() mutable {
            if (a.requires_grad()) {
                accumulate(a, out.grad());
            }
            if (b.requires_grad()) {
                accumulate(b, out.grad(), -1.0);
            }
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b)
{
    require_same_shape(a, b, "mul");
    Tensor out = Tensor::zeros(a.shape());
    kernels::active().fma(a.data().data(), b.data().data(), out.data().data(), out.numel());
    if (Tape* tape = tracking({&a, &b})) {
        tape->record(out, [a, b, out]() mutable {
            const auto& k = kernels::active();
            const auto g = out.grad();
            if (a.requires_grad()) {
                k.fma(g.data(), b.data().data(), a.grad().data(), g.size());
            }
            if (b.requires_grad()) {
                k.fma(g.data(), a.data().data(), b.grad().data(), g.size());
            }
        });
    }
    return out;
}

Tensor scale(const Tensor& a, double s)
{
    Tensor out = Tensor::zeros(a.shape());
    kernels::active().axpy(s, a.data().data(), out.data().data(), out.numel());
    if (Tape* tape = tracking({&a})) {
        tape->record(out, [a, out, s]() mutable { accumulate(a, out.grad(), s); });
    }
    return out;
}

Tensor sum(const Tensor& a)
{
    double s = 0.0;
    for (const double v : a.data()) {
        s += v;
    }
    Tensor out = Tensor::scalar(s);
    if (Tape* tape = tracking({&a})) {
        tape->record(out, [a, out]() mutable {
            const double g = out.grad()[0];
            for (double& ga : a.grad()) {
                ga += g;
            }
        });
    }
    return out;
}

Tensor relu(const Tensor& x)
{
    Tensor out = x.clone();
    for (double& v : out.data()) {
        v = v > 0.0 ? v : 0.0;
    }
    if (Tape* tape = tracking({&x})) {
        tape->record(out, [x, out]() mutable {
            const auto g = out.grad();
            const auto xv = x.data();
            auto gx = x.grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (xv[i] > 0.0) {
                    gx[i] += g[i];
                }
            }
        });
    }
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b)
{
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const std::size_t m = a.dim(0);
    const std::size_t k = a.dim(1);
    const std::size_t n = b.dim(1);
    if (b.dim(0) != k) {
        throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    }
    Tensor out = Tensor::zeros({m, n});
    kernels::active().gemm_nn(m, n, k, a.data().data(), b.data().data(), out.data().data());
    if (Tape* tape = tracking({&a, &b})) {
        tape->record(out, [a, b, out, m, n, k]() mutable {
            const auto& kt = kernels::active();
            const double* g = out.grad().data();
            if (a.requires_grad()) {
                // dA[m,k] += G[m,n] * B[k,n]^T
                kt.gemm_nt(m, k, n, g, b.data().data(), a.grad().data());
            }
            if (b.requires_grad()) {
                // dB[k,n] += A[m,k]^T * G[m,n]
                kt.gemm_tn(k, n, m, a.data().data(), g, b.grad().data());
            }
        });
    }
    return out;
}

Tensor softmax(const Tensor& x, std::size_t axis)
{
    if (axis >= x.rank()) {
        throw ShapeError("softmax: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(x.shape()));
    }
    const Shape& s = x.shape();
    std::size_t outer = 1;
    std::size_t inner = 1;
    for (std::size_t i = 0; i < axis; ++i) {
        outer *= s[i];
    }
    for (std::size_t i = axis + 1; i < s.size(); ++i) {
        inner *= s[i];
    }
    const std::size_t len = s[axis];
    Tensor out = Tensor::zeros(s);
    const auto xv = x.data();
    auto ov = out.data();
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * len * inner + in;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < len; ++i) {
                const double v = xv[base + i * inner];
                if (std::isnan(v)) {
                    throw NumericError("softmax: NaN input");
                }
                mx = std::max(mx, v);
            }
            double z = 0.0;
            for (std::size_t i = 0; i < len; ++i) {
                const double e = std::exp(xv[base + i * inner] - mx);
                ov[base + i * inner] = e;
                z += e;
            }
            for (std::size_t i = 0; i < len; ++i) {
                ov[base + i * inner] /= z;
            }
        }
    }
    if (Tape* tape = tracking({&x})) {
        tape->record(out, [x, out, outer, inner, len]() mutable {
            const auto g = out.grad();
            const auto y = out.data();
            auto gx = x.grad();
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t in = 0; in < inner; ++in) {
                    const std::size_t base = o * len * inner + in;
                    double d = 0.0;
                    for (std::size_t i = 0; i < len; ++i) {
                        d += g[base + i * inner] * y[base + i * inner];
                    }
                    for (std::size_t i = 0; i < len; ++i) {
                        const std::size_t j = base + i * inner;
                        gx[j] += y[j] * (g[j] - d);
                    }
                }
            }
        });
    }
    return out;
}

Tensor conv1d(const Tensor& x, const Tensor& kernel, std::size_t dilation, std::size_t groups)
{
    require_rank(x, 3, "conv1d");
    require_rank(kernel, 3, "conv1d kernel");
    if (dilation == 0 || groups == 0) {
        throw ConfigError("conv1d: dilation and groups must be positive");
    }
    const std::size_t batch = x.dim(0);
    const std::size_t cin = x.dim(1);
    const std::size_t time = x.dim(2);
    const std::size_t cout = kernel.dim(0);
    const std::size_t width = kernel.dim(2);
    if (cin % groups != 0 || cout % groups != 0) {
        throw ConfigError("conv1d: channels (" + std::to_string(cin) + " in, " +
                          std::to_string(cout) + " out) not divisible by groups " +
                          std::to_string(groups));
    }
    const std::size_t cin_g = cin / groups;
    const std::size_t cout_g = cout / groups;
    if (kernel.dim(1) != cin_g) {
        throw ShapeError("conv1d: kernel " + shape_str(kernel.shape()) + " does not fit input " +
                         shape_str(x.shape()) + " with groups " + std::to_string(groups));
    }
    const auto left = static_cast<std::ptrdiff_t>(dilation * (width - 1) / 2);
    const auto T = static_cast<std::ptrdiff_t>(time);

    // Valid output range [lo, hi) for a tap with input offset `off`.
    auto range = [T](std::ptrdiff_t off) {
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -off);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(T, T - off);
        return std::pair{lo, std::max(lo, hi)};
    };

    const bool pointwise = width == 1 && groups == 1;
    Tensor out = Tensor::zeros({batch, cout, time});
    const auto& kt = kernels::active();
    const double* xd = x.data().data();
    const double* wd = kernel.data().data();
    double* od = out.data().data();
    for (std::size_t b = 0; b < batch; ++b) {
        const double* xb = xd + b * cin * time;
        double* ob = od + b * cout * time;
        if (pointwise) {
            kt.gemm_nn(cout, time, cin, wd, xb, ob);
            continue;
        }
        for (std::size_t o = 0; o < cout; ++o) {
            const std::size_t g = o / cout_g;
            for (std::size_t ci = 0; ci < cin_g; ++ci) {
                const double* xc = xb + (g * cin_g + ci) * time;
                for (std::size_t j = 0; j < width; ++j) {
                    const double w = wd[(o * cin_g + ci) * width + j];
                    const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(j * dilation) - left;
                    const auto [lo, hi] = range(off);
                    kt.axpy(w, xc + lo + off, ob + o * time + lo, static_cast<std::size_t>(hi - lo));
                }
            }
        }
    }

    if (Tape* tape = tracking({&x, &kernel})) {
        tape->record(out, [x, kernel, out, batch, cin, cout, time, width, dilation, cin_g, cout_g,
                           left, pointwise, range]() mutable {
            const auto& k = kernels::active();
            const double* g = out.grad().data();
            const double* xd = x.data().data();
            const double* wd = kernel.data().data();
            double* gx = x.requires_grad() ? x.grad().data() : nullptr;
            double* gw = kernel.requires_grad() ? kernel.grad().data() : nullptr;
            for (std::size_t b = 0; b < batch; ++b) {
                const double* gb = g + b * cout * time;
                const double* xb = xd + b * cin * time;
                if (pointwise) {
                    if (gx != nullptr) {
                        k.gemm_tn(cin, time, cout, wd, gb, gx + b * cin * time);
                    }
                    if (gw != nullptr) {
                        k.gemm_nt(cout, cin, time, gb, xb, gw);
                    }
                    continue;
                }
                for (std::size_t o = 0; o < cout; ++o) {
                    const std::size_t grp = o / cout_g;
                    for (std::size_t ci = 0; ci < cin_g; ++ci) {
                        const std::size_t chan = grp * cin_g + ci;
                        for (std::size_t j = 0; j < width; ++j) {
                            const std::size_t widx = (o * cin_g + ci) * width + j;
                            const std::ptrdiff_t off =
                                static_cast<std::ptrdiff_t>(j * dilation) - left;
                            const auto [lo, hi] = range(off);
                            const auto n = static_cast<std::size_t>(hi - lo);
                            if (gx != nullptr) {
                                k.axpy(wd[widx], gb + o * time + lo,
                                       gx + b * cin * time + chan * time + lo + off, n);
                            }
                            if (gw != nullptr) {
                                gw[widx] += k.dot(gb + o * time + lo, xb + chan * time + lo + off, n);
                            }
                        }
                    }
                }
            }
        });
    }
    return out;
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias)
{
    require_rank(x, 3, "add_channel_bias");
    const std::size_t batch = x.dim(0);
    const std::size_t ch = x.dim(1);
    const std::size_t time = x.dim(2);
    if (bias.numel() != ch) {
        throw ShapeError("add_channel_bias: bias " + shape_str(bias.shape()) + " for input " +
                         shape_str(x.shape()));
    }
    Tensor out = x.clone();
    auto ov = out.data();
    const auto bv = bias.data();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < ch; ++c) {
            double* row = ov.data() + (b * ch + c) * time;
            for (std::size_t t = 0; t < time; ++t) {
                row[t] += bv[c];
            }
        }
    }
    if (Tape* tape = tracking({&x, &bias})) {
        tape->record(out, [x, bias, out, batch, ch, time]() mutable {
            const auto g = out.grad();
            if (x.requires_grad()) {
                accumulate(x, g);
            }
            if (bias.requires_grad()) {
                auto gb = bias.grad();
                for (std::size_t b = 0; b < batch; ++b) {
                    for (std::size_t c = 0; c < ch; ++c) {
                        const double* row = g.data() + (b * ch + c) * time;
                        for (std::size_t t = 0; t < time; ++t) {
                            gb[c] += row[t];
                        }
                    }
                }
            }
        });
    }
    return out;
}

Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                    const Tensor& mask)
{
    require_rank(q, 3, "attention");
    require_same_shape(q, k, "attention");
    require_same_shape(q, v, "attention");
    const std::size_t batch = q.dim(0);
    const std::size_t time = q.dim(1);
    const std::size_t dim = q.dim(2);
    if (mask.shape() != Shape{batch, time}) {
        throw ShapeError("attention: mask " + shape_str(mask.shape()) + " for inputs " +
                         shape_str(q.shape()));
    }
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dim));
    const auto& kt = kernels::active();

    // Attention probabilities are kept for the backward pass.
    std::vector<double> probs(batch * time * time, 0.0);
    Tensor out = Tensor::zeros(q.shape());
    const auto md = mask.data();
    for (std::size_t b = 0; b < batch; ++b) {
        const double* qb = q.data().data() + b * time * dim;
        const double* kb = k.data().data() + b * time * dim;
        const double* vb = v.data().data() + b * time * dim;
        double* pb = probs.data() + b * time * time;
        kt.gemm_nt(time, time, dim, qb, kb, pb);
        const double* mb = md.data() + b * time;
        for (std::size_t i = 0; i < time; ++i) {
            double* row = pb + i * time;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < time; ++j) {
                if (mb[j] != 0.0) {
                    row[j] *= inv_sqrt;
                    mx = std::max(mx, row[j]);
                }
            }
            if (mx == -std::numeric_limits<double>::infinity()) {
                std::fill(row, row + time, 0.0);
                continue;
            }
            double z = 0.0;
            for (std::size_t j = 0; j < time; ++j) {
                row[j] = mb[j] != 0.0 ? std::exp(row[j] - mx) : 0.0;
                z += row[j];
            }
            for (std::size_t j = 0; j < time; ++j) {
                row[j] /= z;
            }
        }
        kt.gemm_nn(time, dim, time, pb, vb, out.data().data() + b * time * dim);
    }

    if (Tape* tape = tracking({&q, &k, &v})) {
        tape->record(out, [q, k, v, out, probs = std::move(probs), batch, time, dim,
                           inv_sqrt]() mutable {
            const auto& kt = kernels::active();
            std::vector<double> dp(time * time);
            for (std::size_t b = 0; b < batch; ++b) {
                const std::size_t off = b * time * dim;
                const double* g = out.grad().data() + off;
                const double* pb = probs.data() + b * time * time;
                if (v.requires_grad()) {
                    kt.gemm_tn(time, dim, time, pb, g, v.grad().data() + off);
                }
                if (!q.requires_grad() && !k.requires_grad()) {
                    continue;
                }
                std::fill(dp.begin(), dp.end(), 0.0);
                kt.gemm_nt(time, time, dim, g, v.data().data() + off, dp.data());
                for (std::size_t i = 0; i < time; ++i) {
                    double* row = dp.data() + i * time;
                    const double* prow = pb + i * time;
                    const double d = kt.dot(row, prow, time);
                    for (std::size_t j = 0; j < time; ++j) {
                        row[j] = prow[j] * (row[j] - d) * inv_sqrt;
                    }
                }
                if (q.requires_grad()) {
                    kt.gemm_nn(time, dim, time, dp.data(), k.data().data() + off,
                               q.grad().data() + off);
                }
                if (k.requires_grad()) {
                    kt.gemm_tn(time, dim, time, dp.data(), q.data().data() + off,
                               k.grad().data() + off);
                }
            }
        });
    }
    return out;
}

MaskedLoss cross_entropy_masked(const Tensor& logits, std::span<const int> labels, int ignore_id)
{
    require_rank(logits, 2, "cross_entropy_masked");
    const std::size_t tokens = logits.dim(0);
    const std::size_t classes = logits.dim(1);
    if (labels.size() != tokens) {
        throw ShapeError("cross_entropy_masked: " + std::to_string(labels.size()) +
                         " labels for logits " + shape_str(logits.shape()));
    }
    std::size_t counted = 0;
    for (const int l : labels) {
        if (l == ignore_id) {
            continue;
        }
        if (l < 0 || static_cast<std::size_t>(l) >= classes) {
            throw ConfigError("cross_entropy_masked: label " + std::to_string(l) +
                              " outside [0, " + std::to_string(classes) + ")");
        }
        ++counted;
    }
    MaskedLoss result;
    result.counted = counted;
    if (counted == 0) {
        result.value = Tensor::scalar(0.0);
        return result;
    }

    // Log-softmax rows of the counted positions.
    std::vector<double> log_probs(tokens * classes, 0.0);
    const auto lv = logits.data();
    double total = 0.0;
    for (std::size_t t = 0; t < tokens; ++t) {
        if (labels[t] == ignore_id) {
            continue;
        }
        const double* row = lv.data() + t * classes;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < classes; ++c) {
            mx = std::max(mx, row[c]);
        }
        double z = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            z += std::exp(row[c] - mx);
        }
        const double lz = mx + std::log(z);
        for (std::size_t c = 0; c < classes; ++c) {
            log_probs[t * classes + c] = row[c] - lz;
        }
        total -= log_probs[t * classes + static_cast<std::size_t>(labels[t])];
    }
    const double inv = 1.0 / static_cast<double>(counted);
    result.value = Tensor::scalar(total * inv);
    if (Tape* tape = tracking({&logits})) {
        std::vector<int> lab(labels.begin(), labels.end());
        tape->record(result.value, [logits, out = result.value, lab = std::move(lab),
                                    log_probs = std::move(log_probs), classes, inv,
                                    ignore_id]() mutable {
            const double g = out.grad()[0] * inv;
            auto gl = logits.grad();
            for (std::size_t t = 0; t < lab.size(); ++t) {
                if (lab[t] == ignore_id) {
                    continue;
                }
                for (std::size_t c = 0; c < classes; ++c) {
                    const double p = std::exp(log_probs[t * classes + c]);
                    const double y = static_cast<int>(c) == lab[t] ? 1.0 : 0.0;
                    gl[t * classes + c] += g * (p - y);
                }
            }
        });
    }
    return result;
}

Tensor weighted_sum(const Tensor& weights, std::span<const Tensor> inputs)
{
    if (inputs.empty()) {
        throw ConfigError("weighted_sum: no inputs");
    }
    if (weights.numel() != inputs.size()) {
        throw ShapeError("weighted_sum: " + std::to_string(weights.numel()) + " weights for " +
                         std::to_string(inputs.size()) + " inputs");
    }
    for (const Tensor& in : inputs) {
        require_same_shape(in, inputs[0], "weighted_sum");
    }
    const auto& kt = kernels::active();
    Tensor out = Tensor::zeros(inputs[0].shape());
    const auto w = weights.data();
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        kt.axpy(w[i], inputs[i].data().data(), out.data().data(), out.numel());
    }
    bool any = weights.requires_grad();
    for (const Tensor& in : inputs) {
        any = any || in.requires_grad();
    }
    Tape* tape = active_tape();
    if (tape != nullptr && any) {
        std::vector<Tensor> ins(inputs.begin(), inputs.end());
        tape->record(out, [weights, ins = std::move(ins), out]() mutable {
            const auto& kt = kernels::active();
            const auto g = out.grad();
            const auto w = weights.data();
            for (std::size_t i = 0; i < ins.size(); ++i) {
                if (weights.requires_grad()) {
                    weights.grad()[i] += kt.dot(g.data(), ins[i].data().data(), g.size());
                }
                if (ins[i].requires_grad()) {
                    kt.axpy(w[i], g.data(), ins[i].grad().data(), g.size());
                }
            }
        });
    }
    return out;
}

Tensor concat_channels(std::span<const Tensor> inputs)
{
    if (inputs.empty()) {
        throw ConfigError("concat_channels: no inputs");
    }
    const std::size_t batch = inputs[0].dim(0);
    const std::size_t time = inputs[0].dim(2);
    std::size_t total = 0;
    for (const Tensor& in : inputs) {
        require_rank(in, 3, "concat_channels");
        if (in.dim(0) != batch || in.dim(2) != time) {
            throw ShapeError("concat_channels: incompatible " + shape_str(in.shape()) + " and " +
                             shape_str(inputs[0].shape()));
        }
        total += in.dim(1);
    }
    Tensor out = Tensor::zeros({batch, total, time});
    auto od = out.data();
    std::size_t c0 = 0;
    for (const Tensor& in : inputs) {
        const std::size_t ch = in.dim(1);
        for (std::size_t b = 0; b < batch; ++b) {
            std::copy_n(in.data().data() + b * ch * time, ch * time,
                        od.data() + (b * total + c0) * time);
        }
        c0 += ch;
    }
    bool any = false;
    for (const Tensor& in : inputs) {
        any = any || in.requires_grad();
    }
    Tape* tape = active_tape();
    if (tape != nullptr && any) {
        std::vector<Tensor> ins(inputs.begin(), inputs.end());
        tape->record(out, [ins = std::move(ins), out, batch, total, time]() mutable {
            const auto g = out.grad();
            std::size_t c0 = 0;
            for (Tensor& in : ins) {
                const std::size_t ch = in.dim(1);
                if (in.requires_grad()) {
                    auto gi = in.grad();
                    for (std::size_t b = 0; b < batch; ++b) {
                        kernels::active().axpy(1.0, g.data() + (b * total + c0) * time,
                                               gi.data() + b * ch * time, ch * time);
                    }
                }
                c0 += ch;
            }
        });
    }
    return out;
}

Tensor transpose12(const Tensor& x)
{
    require_rank(x, 3, "transpose12");
    const std::size_t batch = x.dim(0);
    const std::size_t m = x.dim(1);
    const std::size_t n = x.dim(2);
    Tensor out = Tensor::zeros({batch, n, m});
    const auto xv = x.data();
    auto ov = out.data();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                ov[(b * n + j) * m + i] = xv[(b * m + i) * n + j];
            }
        }
    }
    if (Tape* tape = tracking({&x})) {
        tape->record(out, [x, out, batch, m, n]() mutable {
            const auto g = out.grad();
            auto gx = x.grad();
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t j = 0; j < n; ++j) {
                        gx[(b * m + i) * n + j] += g[(b * n + j) * m + i];
                    }
                }
            }
        });
    }
    return out;
}

Tensor reshape(const Tensor& x, Shape shape)
{
    if (shape_numel(shape) != x.numel()) {
        throw ShapeError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape));
    }
    Tensor out = Tensor::from(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()));
    if (Tape* tape = tracking({&x})) {
        tape->record(out, [x, out]() mutable { accumulate(x, out.grad()); });
    }
    return out;
}

Tensor apply_mask(const Tensor& x, const Tensor& mask)
{
    require_rank(x, 3, "apply_mask");
    const std::size_t batch = x.dim(0);
    const std::size_t ch = x.dim(1);
    const std::size_t time = x.dim(2);
    if (mask.shape() != Shape{batch, time}) {
        throw ShapeError("apply_mask: mask " + shape_str(mask.shape()) + " for " +
                         shape_str(x.shape()));
    }
    Tensor out = x.clone();
    auto ov = out.data();
    const auto mv = mask.data();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < ch; ++c) {
            for (std::size_t t = 0; t < time; ++t) {
                ov[(b * ch + c) * time + t] *= mv[b * time + t];
            }
        }
    }
    if (Tape* tape = tracking({&x})) {
        tape->record(out, [x, mask, out, batch, ch, time]() mutable {
            const auto g = out.grad();
            const auto mv = mask.data();
            auto gx = x.grad();
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t c = 0; c < ch; ++c) {
                    for (std::size_t t = 0; t < time; ++t) {
                        const std::size_t i = (b * ch + c) * time + t;
                        gx[i] += g[i] * mv[b * time + t];
                    }
                }
            }
        });
    }
    return out;
}

Tensor embedding(const Tensor& table, std::span<const int> ids, std::size_t batch, std::size_t time)
{
    require_rank(table, 2, "embedding");
    if (ids.size() != batch * time) {
        throw ShapeError("embedding: " + std::to_string(ids.size()) + " ids for [" +
                         std::to_string(batch) + "," + std::to_string(time) + "]");
    }
    const std::size_t dim = table.dim(1);
    Tensor out = Tensor::zeros({batch, dim, time});
    const auto tv = table.data();
    auto ov = out.data();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < time; ++t) {
            const auto id = static_cast<std::size_t>(ids[b * time + t]);
            for (std::size_t d = 0; d < dim; ++d) {
                ov[(b * dim + d) * time + t] = tv[id * dim + d];
            }
        }
    }
    if (Tape* tape = tracking({&table})) {
        std::vector<int> idv(ids.begin(), ids.end());
        tape->record(out, [table, out, idv = std::move(idv), batch, time, dim]() mutable {
            const auto g = out.grad();
            auto gt = table.grad();
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t t = 0; t < time; ++t) {
                    const auto id = static_cast<std::size_t>(idv[b * time + t]);
                    for (std::size_t d = 0; d < dim; ++d) {
                        gt[id * dim + d] += g[(b * dim + d) * time + t];
                    }
                }
            }
        });
    }
    return out;
}

Tensor dropout(const Tensor& x, double p, Rng& rng, bool training)
{
    if (!training || p <= 0.0) {
        return x;
    }
    if (p >= 1.0) {
        throw ConfigError("dropout: p must be < 1");
    }
    const double keep = 1.0 / (1.0 - p);
    std::vector<double> factor(x.numel());
    for (double& f : factor) {
        f = rng.uniform() < p ? 0.0 : keep;
    }
    Tensor out = x.clone();
    auto ov = out.data();
    for (std::size_t i = 0; i < ov.size(); ++i) {
        ov[i] *= factor[i];
    }
    if (Tape* tape = tracking({&x})) {
        tape->record(out, [x, out, factor = std::move(factor)]() mutable {
            kernels::active().fma(out.grad().data(), factor.data(), x.grad().data(), factor.size());
        });
    }
    return out;
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& mask,
                  BatchNormState& state, bool training)
{
    require_rank(x, 3, "batch_norm");
    const std::size_t batch = x.dim(0);
    const std::size_t ch = x.dim(1);
    const std::size_t time = x.dim(2);
    if (gamma.numel() != ch || beta.numel() != ch || state.running_mean.size() != ch) {
        throw ShapeError("batch_norm: parameters do not match " + shape_str(x.shape()));
    }
    if (mask.shape() != Shape{batch, time}) {
        throw ShapeError("batch_norm: mask " + shape_str(mask.shape()) + " for " +
                         shape_str(x.shape()));
    }
    const auto xv = x.data();
    const auto mv = mask.data();
    double count = 0.0;
    for (const double m : mv) {
        count += m;
    }
    const bool batch_stats = training && count > 0.0;

    std::vector<double> mean(ch);
    std::vector<double> inv_std(ch);
    for (std::size_t c = 0; c < ch; ++c) {
        if (batch_stats) {
            double s = 0.0;
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t t = 0; t < time; ++t) {
                    s += xv[(b * ch + c) * time + t] * mv[b * time + t];
                }
            }
            const double mu = s / count;
            double ss = 0.0;
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t t = 0; t < time; ++t) {
                    const double d = xv[(b * ch + c) * time + t] - mu;
                    ss += d * d * mv[b * time + t];
                }
            }
            const double var = ss / count;
            mean[c] = mu;
            inv_std[c] = 1.0 / std::sqrt(var + state.eps);
            const double unbiased = count > 1.0 ? ss / (count - 1.0) : var;
            state.running_mean[c] = (1.0 - state.momentum) * state.running_mean[c] + state.momentum * mu;
            state.running_var[c] =
                (1.0 - state.momentum) * state.running_var[c] + state.momentum * unbiased;
        } else {
            mean[c] = state.running_mean[c];
            inv_std[c] = 1.0 / std::sqrt(state.running_var[c] + state.eps);
        }
    }

    Tensor out = Tensor::zeros(x.shape());
    std::vector<double> xhat(x.numel(), 0.0);
    auto ov = out.data();
    const auto gv = gamma.data();
    const auto bv = beta.data();
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < ch; ++c) {
            for (std::size_t t = 0; t < time; ++t) {
                if (mv[b * time + t] == 0.0) {
                    continue;
                }
                const std::size_t i = (b * ch + c) * time + t;
                xhat[i] = (xv[i] - mean[c]) * inv_std[c];
                ov[i] = gv[c] * xhat[i] + bv[c];
            }
        }
    }

    if (Tape* tape = tracking({&x, &gamma, &beta})) {
        tape->record(out, [x, gamma, beta, mask, out, xhat = std::move(xhat),
                           inv_std = std::move(inv_std), batch, ch, time, count,
                           batch_stats]() mutable {
            const auto g = out.grad();
            const auto mv = mask.data();
            const auto gv = gamma.data();
            for (std::size_t c = 0; c < ch; ++c) {
                double sum_dy = 0.0;
                double sum_dy_xhat = 0.0;
                for (std::size_t b = 0; b < batch; ++b) {
                    for (std::size_t t = 0; t < time; ++t) {
                        if (mv[b * time + t] == 0.0) {
                            continue;
                        }
                        const std::size_t i = (b * ch + c) * time + t;
                        sum_dy += g[i];
                        sum_dy_xhat += g[i] * xhat[i];
                    }
                }
                if (gamma.requires_grad()) {
                    gamma.grad()[c] += sum_dy_xhat;
                }
                if (beta.requires_grad()) {
                    beta.grad()[c] += sum_dy;
                }
                if (!x.requires_grad()) {
                    continue;
                }
                auto gx = x.grad();
                const double k = gv[c] * inv_std[c];
                const double mean_dy = batch_stats ? sum_dy / count : 0.0;
                const double mean_dy_xhat = batch_stats ? sum_dy_xhat / count : 0.0;
                for (std::size_t b = 0; b < batch; ++b) {
                    for (std::size_t t = 0; t < time; ++t) {
                        if (mv[b * time + t] == 0.0) {
                            continue;
                        }
                        const std::size_t i = (b * ch + c) * time + t;
                        gx[i] += k * (g[i] - mean_dy - xhat[i] * mean_dy_xhat);
                    }
                }
            }
        });
    }
    return out;
}

}  // namespace seqnas
