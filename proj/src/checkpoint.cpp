#include "seqnas/checkpoint.hpp"

#include "seqnas/errors.hpp"

#include <fstream>
#include <sstream>

namespace seqnas {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json model_config_to_json(const ModelConfig& c)
{
    ordered_json j;
    j["vocab_size"] = c.vocab_size;
    j["embed_dim"] = c.embed_dim;
    j["channels"] = c.channels;
    j["num_cells"] = c.num_cells;
    j["num_labels"] = c.num_labels;
    j["dropout_p"] = c.dropout_p;
    j["cell"] = {{"nodes", c.cell.nodes}, {"channels", c.cell.channels}, {"primitives", c.cell.primitives}};
    return j;
}

ModelConfig model_config_from_json(const json& j)
{
    ModelConfig c;
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.channels = j.at("channels").get<std::size_t>();
    c.num_cells = j.at("num_cells").get<std::size_t>();
    c.num_labels = j.at("num_labels").get<std::size_t>();
    c.dropout_p = j.at("dropout_p").get<double>();
    c.cell.nodes = j.at("cell").at("nodes").get<std::size_t>();
    c.cell.channels = j.at("cell").at("channels").get<std::size_t>();
    c.cell.primitives = j.at("cell").at("primitives").get<std::vector<std::string>>();
    return c;
}

ordered_json checkpoint_to_json(Model& model, const ArchParameters* alphas)
{
    ordered_json j;
    j["format"] = "seqnas-checkpoint";
    j["version"] = 1;
    j["config"] = model_config_to_json(model.config());
    if (model.genotype()) {
        j["genotype"] = json::parse(genotype_to_json(*model.genotype()));
    }
    ordered_json tensors = ordered_json::object();
    for (const auto& [name, t] : model.parameters()) {
        ordered_json e;
        e["shape"] = t.shape();
        e["data"] = std::vector<double>(t.data().begin(), t.data().end());
        tensors[name] = std::move(e);
    }
    j["tensors"] = std::move(tensors);
    ordered_json buffers = ordered_json::object();
    for (const auto& b : model.buffers()) {
        buffers[b.name] = *b.values;
    }
    j["buffers"] = std::move(buffers);
    if (alphas != nullptr) {
        j["alphas"] = arch_to_json(*alphas, model.config().cell);
    }
    return j;
}

Checkpoint checkpoint_from_json(const json& j)
{
    try {
        if (j.at("version").get<int>() != 1) {
            throw FormatError("checkpoint: unsupported version");
        }
        const ModelConfig config = model_config_from_json(j.at("config"));
        std::optional<Model> model;
        if (j.contains("genotype")) {
            model.emplace(Model::discrete(config, genotype_from_json(j["genotype"].dump()), 0));
        } else {
            model.emplace(Model::search_network(config, 0));
        }
        const json& tensors = j.at("tensors");
        for (auto& [name, t] : model->parameters()) {
            if (!tensors.contains(name)) {
                throw FormatError("checkpoint: missing tensor '" + name + "'");
            }
            const auto& e = tensors[name];
            if (e.at("shape").get<Shape>() != t.shape()) {
                throw FormatError("checkpoint: tensor '" + name + "' has the wrong shape");
            }
            const auto values = e.at("data").get<std::vector<double>>();
            if (values.size() != t.numel()) {
                throw FormatError("checkpoint: tensor '" + name + "' has the wrong size");
            }
            std::copy(values.begin(), values.end(), t.data().begin());
        }
        const json& buffers = j.at("buffers");
        for (auto& b : model->buffers()) {
            auto values = buffers.at(b.name).get<std::vector<double>>();
            if (values.size() != b.values->size()) {
                throw FormatError("checkpoint: buffer '" + b.name + "' has the wrong size");
            }
            *b.values = std::move(values);
        }
        Checkpoint cp{std::move(*model), std::nullopt};
        if (j.contains("alphas")) {
            cp.alphas = arch_from_json(j["alphas"]);
        }
        return cp;
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
}

void save_checkpoint(const std::string& path, Model& model, const ArchParameters* alphas)
{
    write_text_file(path, checkpoint_to_json(model, alphas).dump() + "\n");
}

Checkpoint load_checkpoint(const std::string& path)
{
    const std::string text = read_text_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError("checkpoint " + path + ": " + e.what());
    }
    return checkpoint_from_json(j);
}

std::string read_text_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write " + path);
    }
    out << text;
    if (!out) {
        throw DataError("failed writing " + path);
    }
}

}  // namespace seqnas
