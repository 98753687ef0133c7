#include "seqnas/arch.hpp"

#include "seqnas/errors.hpp"
#include "seqnas/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace seqnas {

using nlohmann::json;
using nlohmann::ordered_json;

ArchParameters ArchParameters::gaussian(const CellConfig& config, double sigma, std::uint64_t seed)
{
    Rng rng(seed);
    ArchParameters a;
    const std::size_t k = config.primitives.size();
    for (std::size_t e = 0; e < config.edge_count(); ++e) {
        std::vector<double> v(k);
        for (double& x : v) {
            x = sigma * rng.normal();
        }
        a.edges.push_back(Tensor::from({k}, std::move(v), true));
    }
    a.init_scheme = "gaussian(sigma=" + std::to_string(sigma) + ",seed=" + std::to_string(seed) + ")";
    return a;
}

ArchParameters ArchParameters::zeros(const CellConfig& config)
{
    ArchParameters a;
    for (std::size_t e = 0; e < config.edge_count(); ++e) {
        a.edges.push_back(Tensor::zeros({config.primitives.size()}, true));
    }
    a.init_scheme = "zeros";
    return a;
}

ArchParameters ArchParameters::from_values(const std::vector<std::vector<double>>& values)
{
    ArchParameters a;
    for (const auto& v : values) {
        a.edges.push_back(Tensor::from({v.size()}, v, true));
    }
    a.init_scheme = "explicit";
    return a;
}

std::vector<std::vector<double>> ArchParameters::values() const
{
    std::vector<std::vector<double>> out;
    for (const Tensor& t : edges) {
        out.emplace_back(t.data().begin(), t.data().end());
    }
    return out;
}

void ArchParameters::zero_grad()
{
    for (Tensor& t : edges) {
        t.zero_grad();
    }
}

void ArchParameters::validate(const CellConfig& config) const
{
    if (edges.size() != config.edge_count()) {
        throw ConfigError("architecture parameters cover " + std::to_string(edges.size()) +
                          " edges, cell has " + std::to_string(config.edge_count()));
    }
    for (const Tensor& t : edges) {
        if (t.numel() != config.primitives.size()) {
            throw ConfigError("edge alphas have " + std::to_string(t.numel()) + " entries for " +
                              std::to_string(config.primitives.size()) + " primitives");
        }
        for (const double v : t.data()) {
            if (!std::isfinite(v)) {
                throw NumericError("architecture parameters contain a non-finite value");
            }
        }
    }
}

ordered_json arch_to_json(const ArchParameters& alphas, const CellConfig& config)
{
    ordered_json j;
    j["version"] = 1;
    j["primitives"] = config.primitives;
    j["nodes"] = config.nodes;
    j["channels"] = config.channels;
    j["init_scheme"] = alphas.init_scheme;
    j["alphas"] = alphas.values();
    j["optimizer"] = {{"steps", alphas.optimizer.steps},
                      {"second_moment", alphas.optimizer.second_moment}};
    return j;
}

ArchParameters arch_from_json(const json& j, CellConfig* config)
{
    try {
        CellConfig cfg;
        cfg.primitives = j.at("primitives").get<std::vector<std::string>>();
        cfg.nodes = j.at("nodes").get<std::size_t>();
        cfg.channels = j.at("channels").get<std::size_t>();
        ArchParameters a =
            ArchParameters::from_values(j.at("alphas").get<std::vector<std::vector<double>>>());
        a.init_scheme = j.value("init_scheme", std::string{});
        if (j.contains("optimizer")) {
            a.optimizer.steps = j["optimizer"].at("steps").get<std::size_t>();
            a.optimizer.second_moment =
                j["optimizer"].at("second_moment").get<std::vector<std::vector<double>>>();
        }
        a.validate(cfg);
        if (config != nullptr) {
            *config = cfg;
        }
        return a;
    } catch (const json::exception& e) {
        throw FormatError(std::string("architecture parameter file: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("architecture parameter file: ") + e.what());
    }
}

void Genotype::validate() const
{
    if (version != 1) {
        throw FormatError("genotype: unsupported version " + std::to_string(version));
    }
    for (const auto& p : primitives) {
        (void)PrimitiveKind::parse(p);
    }
    if (nodes.empty()) {
        throw FormatError("genotype: no nodes");
    }
    for (std::size_t j = 0; j < nodes.size(); ++j) {
        const auto& inputs = nodes[j];
        if (inputs.empty() || inputs.size() > 2) {
            throw FormatError("genotype: node " + std::to_string(j) + " keeps " +
                              std::to_string(inputs.size()) + " inputs");
        }
        for (const auto& in : inputs) {
            const auto kind = PrimitiveKind::parse(in.op);
            if (kind.family == PrimitiveFamily::zero) {
                throw FormatError("genotype: node " + std::to_string(j) + " keeps a zero edge");
            }
            if (!primitives.empty() &&
                std::find(primitives.begin(), primitives.end(), in.op) == primitives.end()) {
                throw FormatError("genotype: op '" + in.op + "' is not in the primitive list");
            }
            if (in.from >= j + 2) {
                throw FormatError("genotype: node " + std::to_string(j) + " reads input " +
                                  std::to_string(in.from));
            }
        }
    }
}

std::vector<NodeInputs> Genotype::node_inputs() const
{
    std::vector<NodeInputs> out;
    for (const auto& node : nodes) {
        NodeInputs ni;
        for (const auto& in : node) {
            ni.emplace_back(in.from, PrimitiveKind::parse(in.op));
        }
        out.push_back(std::move(ni));
    }
    return out;
}

std::string genotype_to_json(const Genotype& g)
{
    ordered_json j;
    j["version"] = g.version;
    j["primitives"] = g.primitives;
    ordered_json nodes = ordered_json::array();
    for (const auto& node : g.nodes) {
        ordered_json inputs = ordered_json::array();
        for (const auto& in : node) {
            ordered_json e;
            e["from"] = in.from;
            e["op"] = in.op;
            inputs.push_back(std::move(e));
        }
        ordered_json n;
        n["inputs"] = std::move(inputs);
        nodes.push_back(std::move(n));
    }
    j["nodes"] = std::move(nodes);
    j["channels"] = g.channels;
    return j.dump(2) + "\n";
}

Genotype genotype_from_json(std::string_view text)
{
    Genotype g;
    try {
        const json j = json::parse(text);
        g.version = j.at("version").get<int>();
        g.primitives = j.at("primitives").get<std::vector<std::string>>();
        g.channels = j.at("channels").get<std::size_t>();
        for (const auto& node : j.at("nodes")) {
            std::vector<GenotypeInput> inputs;
            for (const auto& in : node.at("inputs")) {
                inputs.push_back({in.at("from").get<std::size_t>(), in.at("op").get<std::string>()});
            }
            g.nodes.push_back(std::move(inputs));
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("genotype file: ") + e.what());
    }
    g.validate();
    return g;
}

std::vector<std::size_t> select_edge_ops(const ArchParameters& alphas, const CellConfig& config)
{
    alphas.validate(config);
    const auto kinds = config.kinds();
    std::vector<std::size_t> chosen;
    for (const Tensor& edge : alphas.edges) {
        const auto v = edge.data();
        std::size_t best = v.size();
        for (std::size_t k = 0; k < v.size(); ++k) {
            if (kinds[k].family == PrimitiveFamily::zero) {
                continue;
            }
            if (best == v.size() || v[k] > v[best]) {
                best = k;
            }
        }
        if (best == v.size()) {
            throw ConfigError("primitive set has no op other than zero");
        }
        chosen.push_back(best);
    }
    return chosen;
}

Genotype derive_genotype(const ArchParameters& alphas, const CellConfig& config)
{
    const auto chosen = select_edge_ops(alphas, config);
    Genotype g;
    g.primitives = config.primitives;
    g.channels = config.channels;
    for (std::size_t j = 0; j < config.nodes; ++j) {
        struct Candidate {
            std::size_t from;
            std::size_t edge;
            double strength;
        };
        std::vector<Candidate> cands;
        for (std::size_t i = 0; i < j + 2; ++i) {
            const std::size_t e = CellConfig::edge_offset(j) + i;
            const auto v = alphas.edges[e].data();
            const double mx = *std::max_element(v.begin(), v.end());
            double z = 0.0;
            for (const double x : v) {
                z += std::exp(x - mx);
            }
            cands.push_back({i, e, std::exp(v[chosen[e]] - mx) / z});
        }
        std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
            return a.strength > b.strength;
        });
        cands.resize(std::min<std::size_t>(2, cands.size()));
        std::sort(cands.begin(), cands.end(),
                  [](const Candidate& a, const Candidate& b) { return a.from < b.from; });
        std::vector<GenotypeInput> inputs;
        for (const auto& c : cands) {
            inputs.push_back({c.from, config.primitives[chosen[c.edge]]});
        }
        g.nodes.push_back(std::move(inputs));
    }
    return g;
}

}  // namespace seqnas
