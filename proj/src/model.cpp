#include "fewmol/model.hpp"

#include <cmath>

#include <json.hpp>

#include "fewmol/context.hpp"
#include "fewmol/errors.hpp"

namespace fewmol {

std::string ModelConfig::to_json() const {
    nlohmann::ordered_json j;
    j["d1"] = enc.d1;
    j["d2"] = d2;
    j["enc_layers"] = enc.layers;
    j["ctx_layers"] = ctx_layers;
    j["atom_vocab"] = enc.atom_vocab;
    j["bond_vocab"] = enc.bond_vocab;
    j["readout"] = enc.readout == Readout::Mean ? "mean" : "sum";
    j["n_properties"] = n_properties;
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& s) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(s);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("bad model config json: ") + e.what());
    }
    ModelConfig cfg;
    cfg.enc.d1 = j.value("d1", cfg.enc.d1);
    cfg.d2 = j.value("d2", cfg.d2);
    cfg.enc.layers = j.value("enc_layers", cfg.enc.layers);
    cfg.ctx_layers = j.value("ctx_layers", cfg.ctx_layers);
    cfg.enc.atom_vocab = j.value("atom_vocab", cfg.enc.atom_vocab);
    cfg.enc.bond_vocab = j.value("bond_vocab", cfg.enc.bond_vocab);
    cfg.enc.readout = j.value("readout", "mean") == std::string("sum") ? Readout::Sum : Readout::Mean;
    cfg.n_properties = j.value("n_properties", cfg.n_properties);
    return cfg;
}

Tensor init_linear(int64_t in, int64_t out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::vector<double> w(static_cast<size_t>(in * out));
    for (double& x : w) x = rng.uniform(-bound, bound);
    return Tensor::from({in, out}, std::move(w));
}

Tensor init_embedding(int64_t rows, int64_t d, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<double> w(static_cast<size_t>(rows * d));
    for (double& x : w) x = rng.uniform(-bound, bound);
    return Tensor::from({rows, d}, std::move(w));
}

ParameterSet init_model_params(const ModelConfig& cfg, Rng& rng) {
    if (cfg.n_properties < 1) throw ConfigError("model needs at least one property");
    ParameterSet p;
    add_encoder_params(p, cfg.enc, rng);
    add_context_params(p, cfg.enc.d1, cfg.d2, cfg.ctx_layers, rng);
    p.insert("props/embed", init_embedding(cfg.n_properties, cfg.enc.d1, rng));

    p.insert("pred/w1", init_linear(2 * cfg.d2, cfg.d2, rng));
    p.insert("pred/b1", Tensor::zeros({cfg.d2}));
    p.insert("pred/w2", init_linear(cfg.d2, 1, rng));
    p.insert("pred/b2", Tensor::zeros({1}));

    p.insert("rel/w1", init_linear(2 * cfg.d2, cfg.d2, rng));
    p.insert("rel/b1", Tensor::zeros({cfg.d2}));
    p.insert("rel/w2", init_linear(cfg.d2, 1, rng));
    p.insert("rel/b2", Tensor::zeros({1}));

    p.insert("gate/w1", init_linear(2 * cfg.enc.d1, cfg.enc.d1, rng));
    p.insert("gate/b1", Tensor::zeros({cfg.enc.d1}));
    p.insert("gate/w2", init_linear(cfg.enc.d1, 1, rng));
    // Gates start mostly open so the perturbed-graph objective trains on real
    // context before the bottleneck closes anything.
    p.insert("gate/b2", Tensor::from({1}, {2.0}));
    return p;
}

Tensor mlp2(const Tensor& x, const ParameterSet& params, const std::string& prefix) {
    const int64_t n = x.dim(0);
    Tensor hidden = relu(add(matmul(x, params.at(prefix + "/w1")),
                             broadcast_rows(params.at(prefix + "/b1"), n)));
    return add(matmul(hidden, params.at(prefix + "/w2")),
               broadcast_rows(params.at(prefix + "/b2"), n));
}

Tensor predict_property(const Tensor& h_i, const Tensor& h_tau, const ParameterSet& params) {
    Tensor in = reshape(concat({h_i, h_tau}, 0), {1, h_i.dim(0) + h_tau.dim(0)});
    return reshape(sigmoid(mlp2(in, params, "pred")), {});
}

Tensor predict_rows(const Tensor& h, int64_t start, int64_t count, int64_t target_node,
                    const ParameterSet& params) {
    Tensor rows = slice(h, 0, start, count);
    Tensor target = broadcast_rows(row(h, target_node), count);
    Tensor probs = sigmoid(mlp2(concat({rows, target}, 1), params, "pred"));
    return reshape(probs, {count});
}

}  // namespace fewmol
