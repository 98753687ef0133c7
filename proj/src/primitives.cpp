#include "seqnas/primitives.hpp"

#include "seqnas/errors.hpp"
#include "seqnas/ops.hpp"

#include <cmath>
#include <charconv>
#include <optional>

namespace seqnas {
namespace {

constexpr std::size_t kDilatedRate = 2;

}  // namespace

std::string PrimitiveKind::name() const
{
    switch (family) {
    case PrimitiveFamily::attention:
        return "attention";
    case PrimitiveFamily::sep_conv:
        return "sep_conv" + std::to_string(kernel);
    case PrimitiveFamily::dil_conv:
        return "dil_conv" + std::to_string(kernel);
    case PrimitiveFamily::skip_connect:
        return "skip_connect";
    case PrimitiveFamily::zero:
        return "zero";
    }
    return "zero";
}

PrimitiveKind PrimitiveKind::parse(std::string_view name)
{
    if (name == "attention") {
        return {PrimitiveFamily::attention, 1, 1};
    }
    if (name == "skip_connect") {
        return {PrimitiveFamily::skip_connect, 1, 1};
    }
    if (name == "zero") {
        return {PrimitiveFamily::zero, 1, 1};
    }
    auto sized = [&](std::string_view prefix, PrimitiveFamily family,
                     std::size_t dilation) -> std::optional<PrimitiveKind> {
        if (!name.starts_with(prefix)) {
            return std::nullopt;
        }
        const std::string_view digits = name.substr(prefix.size());
        std::size_t k = 0;
        const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
        if (ec != std::errc{} || ptr != digits.data() + digits.size() || k == 0 || k % 2 == 0) {
            return std::nullopt;
        }
        return PrimitiveKind{family, k, dilation};
    };
    if (auto k = sized("sep_conv", PrimitiveFamily::sep_conv, 1)) {
        return *k;
    }
    if (auto k = sized("dil_conv", PrimitiveFamily::dil_conv, kDilatedRate)) {
        return *k;
    }
    throw FormatError("unknown primitive name '" + std::string(name) + "'");
}

const std::vector<PrimitiveKind>& canonical_primitives()
{
    static const std::vector<PrimitiveKind> kinds{
        {PrimitiveFamily::attention, 1, 1},
        {PrimitiveFamily::sep_conv, 3, 1},
        {PrimitiveFamily::dil_conv, 3, kDilatedRate},
        {PrimitiveFamily::skip_connect, 1, 1},
        {PrimitiveFamily::zero, 1, 1},
    };
    return kinds;
}

std::vector<std::string> canonical_primitive_names()
{
    std::vector<std::string> names;
    for (const auto& k : canonical_primitives()) {
        names.push_back(k.name());
    }
    return names;
}

Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng)
{
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> values(shape_numel(shape));
    for (double& v : values) {
        v = rng.uniform(-bound, bound);
    }
    return Tensor::from(std::move(shape), std::move(values), true);
}

Primitive::Primitive(PrimitiveKind kind, std::size_t channels, Rng& rng)
    : kind_(kind), channels_(channels)
{
    if (channels == 0) {
        throw ConfigError("primitive needs at least one channel");
    }
    const std::size_t c = channels;
    switch (kind.family) {
    case PrimitiveFamily::attention:
        for (const char* n : {"query", "key", "value"}) {
            weights_.push_back(init_uniform({c, c, 1}, c, rng));
            weight_names_.emplace_back(n);
        }
        break;
    case PrimitiveFamily::sep_conv:
    case PrimitiveFamily::dil_conv:
        weights_.push_back(init_uniform({c, 1, kind.kernel}, kind.kernel, rng));
        weight_names_.emplace_back("depthwise");
        weights_.push_back(init_uniform({c, c, 1}, c, rng));
        weight_names_.emplace_back("pointwise");
        break;
    case PrimitiveFamily::skip_connect:
    case PrimitiveFamily::zero:
        break;
    }
}

Tensor Primitive::apply(const Tensor& x, const Tensor& mask) const
{
    if (x.rank() != 3 || x.dim(1) != channels_) {
        throw ConfigError(name() + ": expected [batch," + std::to_string(channels_) +
                          ",time] input, got " + shape_str(x.shape()));
    }
    switch (kind_.family) {
    case PrimitiveFamily::attention: {
        const Tensor q = transpose12(conv1d(x, weights_[0]));
        const Tensor k = transpose12(conv1d(x, weights_[1]));
        const Tensor v = transpose12(conv1d(x, weights_[2]));
        return transpose12(scaled_dot_product_attention(q, k, v, mask));
    }
    case PrimitiveFamily::sep_conv:
        return relu(conv1d(conv1d(x, weights_[0], 1, channels_), weights_[1]));
    case PrimitiveFamily::dil_conv:
        return conv1d(conv1d(x, weights_[0], kind_.dilation, channels_), weights_[1]);
    case PrimitiveFamily::skip_connect:
        return x;
    case PrimitiveFamily::zero:
        return Tensor::zeros(x.shape());
    }
    return x;
}

std::size_t Primitive::parameter_count() const
{
    std::size_t n = 0;
    for (const Tensor& w : weights_) {
        n += w.numel();
    }
    return n;
}

void Primitive::collect_parameters(const std::string& prefix, NamedTensors& out) const
{
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        out.emplace_back(prefix + "." + name() + "." + weight_names_[i], weights_[i]);
    }
}

std::vector<Primitive> default_primitive_set(std::size_t channels, std::uint64_t seed)
{
    if (channels == 0) {
        throw ConfigError("default_primitive_set: channels must be positive");
    }
    Rng rng(seed);
    std::vector<Primitive> prims;
    for (const auto& kind : canonical_primitives()) {
        prims.emplace_back(kind, channels, rng);
    }
    return prims;
}

}  // namespace seqnas
