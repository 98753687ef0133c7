// Primitives, preprocessing blocks, the mixed operation and the cell DAG.

#include "helpers.hpp"

#include "seqnas/cell.hpp"
#include "seqnas/errors.hpp"
#include "seqnas/grad_check.hpp"

#include <doctest.h>

#include <cmath>

using namespace seqnas;
using namespace seqnas::testing;

namespace {

std::vector<double> values(const Tensor& t)
{
    return {t.data().begin(), t.data().end()};
}

// Logits on a 1/1024 grid so that integer shifts are exact in floating point.
Tensor grid_alphas(std::size_t k, Rng& rng)
{
    Tensor a = Tensor::zeros({k}, true);
    for (auto& v : a.data()) {
        v = std::round(rng.uniform(-3, 3) * 1024.0) / 1024.0;
    }
    return a;
}

}  // namespace

TEST_CASE("primitive names")
{
    CHECK(canonical_primitive_names() ==
          std::vector<std::string>{"attention", "sep_conv3", "dil_conv3", "skip_connect", "zero"});
    for (const auto& name : canonical_primitive_names()) {
        CHECK(PrimitiveKind::parse(name).name() == name);
    }
    CHECK_THROWS_AS(PrimitiveKind::parse("max_pool3"), FormatError);
}

TEST_CASE("default primitive set")
{
    const auto a = default_primitive_set(8, 0);
    REQUIRE(a.size() == 5);
    std::vector<std::string> names;
    for (const auto& p : a) {
        names.push_back(p.name());
    }
    CHECK(names == canonical_primitive_names());
    const auto b = default_primitive_set(8, 0);
    for (std::size_t i = 0; i < 5; ++i) {
        REQUIRE(a[i].weights().size() == b[i].weights().size());
        for (std::size_t w = 0; w < a[i].weights().size(); ++w) {
            CHECK(values(a[i].weights()[w]) == values(b[i].weights()[w]));
        }
    }
    CHECK(a[3].parameter_count() == 0);
    CHECK(a[4].parameter_count() == 0);
    CHECK(a[0].parameter_count() == 3 * 8 * 8);
    CHECK(a[1].parameter_count() == 8 * 3 + 8 * 8);
}

TEST_CASE("primitive semantics")
{
    Rng rng(1);
    const auto prims = default_primitive_set(3, 4);
    const Tensor x = random_tensor({2, 3, 5}, rng);
    const Tensor mask = mask_from(2, 5, {5, 3});

    CHECK(values(prims[3].apply(x, mask)) == values(x));
    CHECK_THROWS_AS(prims[1].apply(random_tensor({2, 4, 5}, rng), mask), ConfigError);

    std::vector<Tensor> in{x};
    {
        Tape tape;
        TapeScope scope(tape);
        Tensor y = prims[4].apply(in[0], mask);
        for (const double v : y.data()) {
            CHECK(v == 0.0);
        }
        Tensor l = add(probe(y), sum(scale(in[0], 0.0)));
        tape.backward(l);
        for (const double g : in[0].grad()) {
            CHECK(g == 0.0);
        }
    }

    for (const auto& p : prims) {
        for (const std::size_t t : {1u, 2u, 6u}) {
            CHECK(p.apply(random_tensor({2, 3, t}, rng, false), mask_from(2, t, {t, 1})).shape() ==
                  Shape{2, 3, t});
        }
    }
}

TEST_CASE("dil_conv3 composes the dilated taps with the pointwise stage")
{
    Rng rng(2);
    Primitive dil(PrimitiveKind::parse("dil_conv3"), 1, rng);
    Tensor depth = dil.weights()[0];
    Tensor point = dil.weights()[1];
    depth[0] = 1.0;
    depth[1] = 0.0;
    depth[2] = 1.0;
    point[0] = 0.5;
    const Tensor y = dil.apply(Tensor::from({1, 1, 4}, {1, 2, 3, 4}), Tensor::full({1, 4}, 1.0));
    CHECK(values(y) == std::vector<double>{1.5, 2.0, 0.5, 1.0});
}

TEST_CASE("attention ignores masked positions")
{
    Rng rng(3);
    const auto prims = default_primitive_set(4, 9);
    const Tensor mask = mask_from(2, 6, {4, 6});
    const Tensor x = random_tensor({2, 4, 6}, rng, false);
    Tensor x2 = x.clone();
    for (std::size_t c = 0; c < 4; ++c) {
        x2[(0 * 4 + c) * 6 + 4] = 50.0;
        x2[(0 * 4 + c) * 6 + 5] = -7.0;
    }
    const Tensor y1 = prims[0].apply(x, mask);
    const Tensor y2 = prims[0].apply(x2, mask);
    for (std::size_t b = 0; b < 2; ++b) {
        for (std::size_t c = 0; c < 4; ++c) {
            for (std::size_t t = 0; t < (b == 0 ? 4u : 6u); ++t) {
                const std::size_t i = (b * 4 + c) * 6 + t;
                CHECK(y1[i] == y2[i]);
            }
        }
    }
}

TEST_CASE("primitive gradients")
{
    Rng rng(4);
    const auto prims = default_primitive_set(3, 5);
    const Tensor mask = mask_from(2, 5, {5, 3});
    for (const auto& p : prims) {
        CAPTURE(p.name());
        std::vector<Tensor> in{random_tensor({2, 3, 5}, rng)};
        for (const Tensor& w : p.weights()) {
            in.push_back(w);
        }
        CHECK(grad_check([&] { return probe(p.apply(in[0], mask)); }, in) < 1e-4);
    }
}

TEST_CASE("preprocessing block")
{
    Rng rng(5);
    ReluConvBn block(3, 3, rng);
    const Tensor mask = mask_from(2, 4, {4, 2});
    const Tensor zero_out = block.forward(Tensor::zeros({2, 3, 4}), mask, true);
    for (const double v : zero_out.data()) {
        CHECK(std::isfinite(v));
    }

    Tensor& w = block.conv_weight();
    for (std::size_t o = 0; o < 3; ++o) {
        for (std::size_t i = 0; i < 3; ++i) {
            w[o * 3 + i] = o == i ? 1.0 : 0.0;
        }
    }
    block.set_norm_enabled(false);
    const Tensor s = random_tensor({2, 3, 4}, rng, false);
    const Tensor y = block.forward(s, Tensor::full({2, 4}, 1.0), true);
    for (std::size_t i = 0; i < s.numel(); ++i) {
        CHECK(y[i] == std::max(0.0, s[i]));
    }

    block.set_norm_enabled(true);
    ReluConvBn fresh(3, 4, rng);
    NamedTensors params;
    fresh.collect_parameters("pre", params);
    std::vector<Tensor> in{random_tensor({2, 3, 4}, rng)};
    for (auto& [name, t] : params) {
        in.push_back(t);
    }
    CHECK(grad_check([&] { return probe(fresh.forward(in[0], mask, true)); }, in) < 1e-4);
}

TEST_CASE("mixed op")
{
    Rng rng(6);
    const auto prims = default_primitive_set(3, 6);
    const Tensor mask = mask_from(2, 5, {5, 4});
    const Tensor x = random_tensor({2, 3, 5}, rng, false);

    // equal logits -> arithmetic mean; explicit weighted-sum oracle
    const Tensor mean = mixed_op(x, Tensor::zeros({5}), prims, mask);
    std::vector<std::vector<double>> outs;
    for (const auto& p : prims) {
        outs.push_back(values(p.apply(x, mask)));
    }
    for (std::size_t i = 0; i < x.numel(); ++i) {
        double ref = 0.0;
        for (std::size_t k = 0; k < 5; ++k) {
            ref += 0.2 * outs[k][i];
        }
        CHECK(mean[i] == doctest::Approx(ref).epsilon(1e-14));
        CHECK(0.2 * outs[4][i] == 0.0);
    }

    const Tensor peak = mixed_op(x, Tensor::from({5}, {-40, -40, -40, 40, -40}), prims, mask);
    for (std::size_t i = 0; i < x.numel(); ++i) {
        CHECK(std::abs(peak[i] - x[i]) < 1e-12);
    }

    CHECK_THROWS_AS(mixed_op(x, Tensor::zeros({0}), std::span<const Primitive>{}, mask), ConfigError);
    CHECK_THROWS_AS(mixed_op(x, Tensor::zeros({4}), prims, mask), ConfigError);

    std::vector<Tensor> in{random_tensor({2, 3, 5}, rng), random_tensor({5}, rng)};
    for (const auto& p : prims) {
        for (const Tensor& w : p.weights()) {
            in.push_back(w);
        }
    }
    CHECK(grad_check([&] { return probe(mixed_op(in[0], in[1], prims, mask)); }, in) < 1e-5);
}

TEST_CASE("cell config")
{
    CellConfig c;
    for (std::size_t n = 1; n <= 5; ++n) {
        c.nodes = n;
        std::size_t expected = 0;
        for (std::size_t j = 0; j < n; ++j) {
            expected += j + 2;
        }
        CHECK(c.edge_count() == expected);
    }
    c.nodes = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

namespace {

std::vector<Tensor> saturated(std::size_t edges, std::size_t hot)
{
    std::vector<Tensor> out;
    for (std::size_t e = 0; e < edges; ++e) {
        std::vector<double> v(5, -60.0);
        v[hot] = 60.0;
        out.push_back(Tensor::from({5}, v));
    }
    return out;
}

// mask(W [C, nodes*C] . concat(nodes)) written with plain loops.
std::vector<double> project(const Tensor& w, const std::vector<std::vector<double>>& nodes, const Tensor& mask,
                            std::size_t B, std::size_t C, std::size_t T)
{
    const std::size_t in = nodes.size() * C;
    std::vector<double> out(B * C * T, 0.0);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t o = 0; o < C; ++o) {
            for (std::size_t t = 0; t < T; ++t) {
                double acc = 0.0;
                for (std::size_t i = 0; i < in; ++i) {
                    acc += w[o * in + i] * nodes[i / C][(b * C + i % C) * T + t];
                }
                out[(b * C + o) * T + t] = acc * mask[b * T + t];
            }
        }
    }
    return out;
}

}  // namespace

TEST_CASE("cell forward: saturated skip and zero cells")
{
    Rng rng(7);
    CellConfig cfg;
    cfg.nodes = 1;
    cfg.channels = 3;
    Cell cell(cfg, 3, 3, rng);
    const Tensor mask = mask_from(2, 4, {4, 3});
    const Tensor s0 = random_tensor({2, 3, 4}, rng, false);
    const Tensor s1 = random_tensor({2, 3, 4}, rng, false);

    // preprocessing is deterministic given the batch, so rerun it directly
    const Tensor p0 = cell.preprocess0().forward(s0, mask, true);
    const Tensor p1 = cell.preprocess1().forward(s1, mask, true);
    std::vector<double> node(p0.numel());
    for (std::size_t i = 0; i < node.size(); ++i) {
        node[i] = (p0[i] + p1[i]) * mask[(i / 12) * 4 + i % 4];
    }
    const Tensor skip_out = cell.forward(s0, s1, saturated(2, 3), mask, true);
    const auto ref = project(cell.projection(), {node}, mask, 2, 3, 4);
    for (std::size_t i = 0; i < ref.size(); ++i) {
        CHECK(std::abs(skip_out[i] - ref[i]) < 1e-12);
    }

    const Tensor zero_out = cell.forward(s0, s1, saturated(2, 4), mask, true);
    for (const double v : zero_out.data()) {
        CHECK(std::abs(v) < 1e-40);
    }

    CHECK_THROWS_AS(cell.forward(s0, s1, saturated(3, 0), mask, true), ConfigError);
}

TEST_CASE("cell forward matches a straight-line DAG oracle")
{
    Rng rng(8);
    CellConfig cfg;
    cfg.nodes = 2;
    cfg.channels = 3;
    Cell cell(cfg, 3, 3, rng);
    const std::size_t B = 2, C = 3, T = 5;
    const Tensor mask = mask_from(B, T, {5, 2});
    const Tensor s0 = random_tensor({B, C, T}, rng, false);
    const Tensor s1 = random_tensor({B, C, T}, rng, false);
    std::vector<Tensor> alphas;
    for (std::size_t e = 0; e < cfg.edge_count(); ++e) {
        alphas.push_back(random_tensor({5}, rng, true, -2, 2));
    }
    const Tensor out = cell.forward(s0, s1, alphas, mask, true);

    std::vector<std::vector<double>> states{values(cell.preprocess0().forward(s0, mask, true)),
                                            values(cell.preprocess1().forward(s1, mask, true))};
    for (std::size_t j = 0; j < cfg.nodes; ++j) {
        std::vector<double> acc(B * C * T, 0.0);
        for (std::size_t from = 0; from < j + 2; ++from) {
            const std::size_t e = CellConfig::edge_offset(j) + from;
            const CellEdge& edge = cell.edges()[e];
            REQUIRE(edge.index == e);
            REQUIRE(edge.from == from);
            double z = 0.0;
            std::vector<double> w(5);
            double mx = -1e300;
            for (std::size_t k = 0; k < 5; ++k) {
                mx = std::max(mx, alphas[e][k]);
            }
            for (std::size_t k = 0; k < 5; ++k) {
                w[k] = std::exp(alphas[e][k] - mx);
                z += w[k];
            }
            const Tensor xin = Tensor::from({B, C, T}, states[from]);
            for (std::size_t k = 0; k < 5; ++k) {
                const auto y = values(edge.ops[k].apply(xin, mask));
                for (std::size_t i = 0; i < acc.size(); ++i) {
                    acc[i] += w[k] / z * y[i];
                }
            }
        }
        for (std::size_t i = 0; i < acc.size(); ++i) {
            acc[i] *= mask[(i / (C * T)) * T + i % T];
        }
        states.push_back(acc);
    }
    const auto ref = project(cell.projection(), {states[2], states[3]}, mask, B, C, T);
    for (std::size_t i = 0; i < ref.size(); ++i) {
        CHECK(out[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
}

TEST_CASE("cell output is invariant to per-edge logit shifts")
{
    Rng rng(9);
    CellConfig cfg;
    cfg.nodes = 3;
    cfg.channels = 4;
    Cell cell(cfg, 4, 4, rng);
    const Tensor mask = mask_from(2, 6, {6, 4});
    const Tensor s0 = random_tensor({2, 4, 6}, rng, false);
    const Tensor s1 = random_tensor({2, 4, 6}, rng, false);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Tensor> a;
        std::vector<Tensor> shifted;
        for (std::size_t e = 0; e < cfg.edge_count(); ++e) {
            a.push_back(grid_alphas(5, rng));
            Tensor s = a.back().clone();
            const double c = std::round(rng.uniform(-500, 500));
            for (auto& v : s.data()) {
                v += c;
            }
            shifted.push_back(s);
        }
        CHECK(values(cell.forward(s0, s1, a, mask, true)) == values(cell.forward(s0, s1, shifted, mask, true)));
    }
}

TEST_CASE("architecture gradients flow through the cell")
{
    Rng rng(10);
    CellConfig cfg;
    cfg.nodes = 2;
    cfg.channels = 3;
    Cell cell(cfg, 3, 3, rng);
    const Tensor mask = mask_from(2, 4, {4, 3});
    const Tensor s0 = random_tensor({2, 3, 4}, rng, false);
    const Tensor s1 = random_tensor({2, 3, 4}, rng, false);
    std::vector<Tensor> alphas;
    for (std::size_t e = 0; e < cfg.edge_count(); ++e) {
        alphas.push_back(random_tensor({5}, rng, true, -1, 1));
    }
    CHECK(grad_check([&] { return probe(cell.forward(s0, s1, alphas, mask, true)); }, alphas) < 1e-4);
    Tape tape;
    {
        TapeScope scope(tape);
        Tensor l = probe(cell.forward(s0, s1, alphas, mask, true));
        tape.backward(l);
    }
    for (const Tensor& a : alphas) {
        double norm = 0.0;
        for (const double g : a.grad()) {
            norm += std::abs(g);
        }
        CHECK(norm > 0.0);
    }
}

TEST_CASE("discrete cell keeps only the listed edges")
{
    Rng rng(11);
    CellConfig cfg;
    cfg.nodes = 2;
    cfg.channels = 3;
    const std::vector<NodeInputs> nodes{{{0, PrimitiveKind::parse("sep_conv3")}},
                                        {{1, PrimitiveKind::parse("dil_conv3")}, {2, PrimitiveKind::parse("skip_connect")}}};
    Cell cell(cfg, 3, 3, nodes, rng);
    CHECK(cell.discrete());
    REQUIRE(cell.edges().size() == 3);
    CHECK(cell.edges()[1].index == CellConfig::edge_offset(1) + 1);
    for (const auto& e : cell.edges()) {
        CHECK(e.ops.size() == 1);
    }
    const Tensor mask = mask_from(1, 4, {4});
    CHECK(cell.forward(random_tensor({1, 3, 4}, rng), random_tensor({1, 3, 4}, rng), {}, mask, false).shape() ==
          Shape{1, 3, 4});
}
