#pragma once

// Differentiable tensor operations. Activations use the [batch, channels,
// time] layout unless an op says otherwise; masks are [batch, time] tensors of
// 0/1 values.

#include "seqnas/rng.hpp"
#include "seqnas/tensor.hpp"

#include <span>
#include <vector>

namespace seqnas {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor sum(const Tensor& a);
Tensor relu(const Tensor& x);

// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);

// Numerically stable softmax along `axis`. Throws NumericError on NaN input.
Tensor softmax(const Tensor& x, std::size_t axis);

// Grouped 1-D convolution with "same" zero padding.
//   x:      [batch, in_channels, time]
//   kernel: [out_channels, in_channels / groups, width]
// The padding is dilation * (width - 1), split with the smaller half on the
// left, so the output keeps the input time length.
Tensor conv1d(const Tensor& x, const Tensor& kernel, std::size_t dilation = 1,
              std::size_t groups = 1);

// x: [batch, channels, time], bias: [channels]
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

// q, k, v: [batch, time, dim]; mask: [batch, time] over key positions.
// Rows whose keys are all masked produce zeros.
Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                    const Tensor& mask);

struct MaskedLoss {
    Tensor value;             // scalar
    std::size_t counted = 0;  // positions that contributed
    bool all_ignored() const noexcept { return counted == 0; }
};

// Mean negative log-likelihood over positions whose label != ignore_id.
// logits: [tokens, classes]. When every label is ignored the loss is a
// constant 0 and all_ignored() is set.
MaskedLoss cross_entropy_masked(const Tensor& logits, std::span<const int> labels, int ignore_id);

// sum_k weights[k] * inputs[k]; weights: [K], inputs share one shape.
Tensor weighted_sum(const Tensor& weights, std::span<const Tensor> inputs);

// Concatenates [batch, c_i, time] tensors along the channel axis.
Tensor concat_channels(std::span<const Tensor> inputs);

// [b, m, n] -> [b, n, m]
Tensor transpose12(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);

// x: [batch, channels, time] scaled by mask [batch, time].
Tensor apply_mask(const Tensor& x, const Tensor& mask);

// table: [vocab, dim]; ids: batch*time row-major -> [batch, dim, time].
// Ids must already be range-checked.
Tensor embedding(const Tensor& table, std::span<const int> ids, std::size_t batch,
                 std::size_t time);

// Inverted dropout. Returns x itself when !training or p == 0.
Tensor dropout(const Tensor& x, double p, Rng& rng, bool training);

struct BatchNormState {
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double momentum = 0.1;
    double eps = 1e-5;

    explicit BatchNormState(std::size_t channels = 0)
        : running_mean(channels, 0.0), running_var(channels, 1.0)
    {
    }
};

// Per-channel normalization over the valid (mask == 1) batch x time
// positions. Training mode uses batch statistics and updates the running
// averages; eval mode uses the running averages. Masked positions output 0.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& mask,
                  BatchNormState& state, bool training);

}  // namespace seqnas
