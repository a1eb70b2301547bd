// shield-cvae-1 weight files (JSON).
//
// {
//   "format_version": "shield-cvae-1",
//   "context_len": N,
//   "latent_dim": Z,
//   "normalization": {
//     "input":  {"mean": [6N], "scale": [6N]},
//     "output": {"mean": [3],  "scale": [3]}
//   },
//   "layers": [{"rows": r, "cols": c, "weights": [r*c, row-major],
//               "bias": [r], "activation": "relu" | "linear"}, ...]
// }

#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "shield/disturbance.hpp"
#include "shield/errors.hpp"

namespace shield {

using ordered_json = nlohmann::ordered_json;

void DecoderWeights::validate() const {
    if (context_len < 1) throw ShapeError("weights: context_len must be >= 1");
    if (static_cast<std::size_t>(input.mean.size()) != context_dim() ||
        static_cast<std::size_t>(input.scale.size()) != context_dim())
        throw ShapeError("weights: input normalization must have " + std::to_string(context_dim()) + " entries");
    if (output.mean.size() != 3 || output.scale.size() != 3)
        throw ShapeError("weights: output normalization must have 3 entries");
    if ((input.scale.array() == 0.0).any() || !input.scale.allFinite() || !input.mean.allFinite())
        throw ShapeError("weights: input normalization must be finite with nonzero scale");
    if (!output.scale.allFinite() || !output.mean.allFinite())
        throw ShapeError("weights: output normalization must be finite");
    if (layers.empty()) throw ShapeError("weights: no layers");
    auto expected = static_cast<Eigen::Index>(input_dim());
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& L = layers[i];
        const std::string name = "layer " + std::to_string(i);
        if (L.weights.cols() != expected)
            throw ShapeError("weights: " + name + " has " + std::to_string(L.weights.cols()) + " columns, expected " +
                             std::to_string(expected));
        if (L.bias.size() != L.weights.rows())
            throw ShapeError("weights: " + name + " bias length does not match its rows");
        if (!L.weights.allFinite() || !L.bias.allFinite()) throw ShapeError("weights: " + name + " is not finite");
        expected = L.weights.rows();
    }
    if (expected != 3)
        throw ShapeError("weights: layer " + std::to_string(layers.size() - 1) + " outputs " +
                         std::to_string(expected) + " values, expected 3");
}

namespace {

Eigen::VectorXd to_vector(const ordered_json& j, const std::string& what) {
    if (!j.is_array()) throw ModelFormatError("weights: " + what + " must be an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ModelFormatError("weights: " + what + " must hold numbers");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

ordered_json from_vector(const Eigen::VectorXd& v) {
    ordered_json a = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

const ordered_json& field(const ordered_json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ModelFormatError(std::string("weights: missing field '") + key + "'");
    return j.at(key);
}

std::size_t to_count(const ordered_json& j, const char* what) {
    if (!j.is_number_unsigned()) throw ModelFormatError(std::string("weights: ") + what + " must be a non-negative integer");
    return j.get<std::size_t>();
}

Normalization parse_norm(const ordered_json& j, const std::string& what) {
    return {to_vector(field(j, "mean"), what + ".mean"), to_vector(field(j, "scale"), what + ".scale")};
}

}  // namespace

DecoderWeights parse_weights(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError(std::string("weights: malformed file: ") + e.what());
    }
    const auto& version = field(j, "format_version");
    if (!version.is_string() || version.get<std::string>() != kWeightFormatVersion)
        throw VersionMismatchError("weights: unsupported format_version " + version.dump() + ", expected " +
                                   kWeightFormatVersion);
    DecoderWeights w;
    w.context_len = to_count(field(j, "context_len"), "context_len");
    w.latent_dim = to_count(field(j, "latent_dim"), "latent_dim");
    const auto& norm = field(j, "normalization");
    w.input = parse_norm(field(norm, "input"), "normalization.input");
    w.output = parse_norm(field(norm, "output"), "normalization.output");
    const auto& layers = field(j, "layers");
    if (!layers.is_array()) throw ModelFormatError("weights: layers must be an array");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& lj = layers[i];
        const std::string name = "layer " + std::to_string(i);
        const auto rows = to_count(field(lj, "rows"), "rows");
        const auto cols = to_count(field(lj, "cols"), "cols");
        const Eigen::VectorXd flat = to_vector(field(lj, "weights"), name + ".weights");
        if (static_cast<std::size_t>(flat.size()) != rows * cols)
            throw ShapeError("weights: " + name + " has " + std::to_string(flat.size()) + " weights, expected rows*cols = " +
                             std::to_string(rows * cols));
        DenseLayer L;
        L.weights.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c)
                L.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    flat[static_cast<Eigen::Index>(r * cols + c)];
        L.bias = to_vector(field(lj, "bias"), name + ".bias");
        const auto& act = field(lj, "activation");
        const std::string a = act.is_string() ? act.get<std::string>() : "";
        if (a == "relu")
            L.activation = Activation::Relu;
        else if (a == "linear")
            L.activation = Activation::Linear;
        else
            throw ModelFormatError("weights: " + name + " has unknown activation " + act.dump());
        w.layers.push_back(std::move(L));
    }
    w.validate();
    return w;
}

DecoderWeights load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFileError("weights: cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_weights(ss.str());
}

std::string serialize_weights(const DecoderWeights& w) {
    w.validate();
    ordered_json j;
    j["format_version"] = kWeightFormatVersion;
    j["context_len"] = w.context_len;
    j["latent_dim"] = w.latent_dim;
    j["normalization"]["input"]["mean"] = from_vector(w.input.mean);
    j["normalization"]["input"]["scale"] = from_vector(w.input.scale);
    j["normalization"]["output"]["mean"] = from_vector(w.output.mean);
    j["normalization"]["output"]["scale"] = from_vector(w.output.scale);
    j["layers"] = ordered_json::array();
    for (const auto& L : w.layers) {
        ordered_json lj;
        lj["rows"] = L.weights.rows();
        lj["cols"] = L.weights.cols();
        ordered_json flat = ordered_json::array();
        for (Eigen::Index r = 0; r < L.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < L.weights.cols(); ++c) flat.push_back(L.weights(r, c));
        lj["weights"] = std::move(flat);
        lj["bias"] = from_vector(L.bias);
        lj["activation"] = L.activation == Activation::Relu ? "relu" : "linear";
        j["layers"].push_back(std::move(lj));
    }
    return j.dump(2) + "\n";
}

void save_weights(const DecoderWeights& w, const std::filesystem::path& path) {
    const std::string text = serialize_weights(w);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("weights: cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("weights: write failed for " + path.string());
}

}  // namespace shield
