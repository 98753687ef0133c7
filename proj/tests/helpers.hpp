#pragma once

#include "seqnas/model.hpp"
#include "seqnas/rng.hpp"
#include "seqnas/tensor.hpp"

#include <vector>

namespace seqnas::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = true, double lo = -1.0, double hi = 1.0)
{
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) {
        x = rng.uniform(lo, hi);
    }
    return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

inline Tensor mask_from(std::size_t batch, std::size_t time, const std::vector<std::size_t>& lengths)
{
    Tensor m = Tensor::zeros({batch, time});
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < lengths[b]; ++t) {
            m[b * time + t] = 1.0;
        }
    }
    return m;
}

// Deterministic weighted sum of all entries: a scalar that depends on every
// output element with distinct sensitivities.
inline Tensor probe(const Tensor& y, std::uint64_t seed = 99)
{
    Rng rng(seed);
    std::vector<double> w(y.numel());
    for (auto& x : w) {
        x = rng.uniform(-1.0, 1.0);
    }
    return sum(mul(y, Tensor::from(y.shape(), std::move(w))));
}

// Random padded batch; labels are valid tag ids on real tokens, some ignored.
inline BatchInput random_batch(std::size_t batch, std::size_t time, std::size_t vocab, std::size_t labels,
                               const std::vector<std::size_t>& lengths, Rng& rng)
{
    BatchInput in;
    in.batch = batch;
    in.time = time;
    in.token_ids.assign(batch * time, 0);
    in.attention_mask.assign(batch * time, 0);
    in.label_ids.assign(batch * time, kIgnoreLabel);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < lengths[b]; ++t) {
            const std::size_t i = b * time + t;
            in.token_ids[i] = static_cast<int>(2 + rng.below(vocab - 2));
            in.attention_mask[i] = 1;
            in.label_ids[i] = rng.bernoulli(0.2) ? kIgnoreLabel : static_cast<int>(rng.below(labels));
        }
    }
    return in;
}

inline ModelConfig tiny_config()
{
    ModelConfig c;
    c.vocab_size = 12;
    c.embed_dim = 4;
    c.channels = 4;
    c.num_cells = 1;
    c.num_labels = 7;
    c.dropout_p = 0.0;
    c.cell.nodes = 2;
    c.cell.channels = 4;
    return c;
}

}  // namespace seqnas::testing
