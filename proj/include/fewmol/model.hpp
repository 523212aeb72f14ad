#pragma once

#include <string>

#include "fewmol/encoder.hpp"
#include "fewmol/params.hpp"
#include "fewmol/rng.hpp"
#include "fewmol/tensor.hpp"

namespace fewmol {

struct ModelConfig {
    EncoderConfig enc;
    int64_t d2 = 32;
    int64_t ctx_layers = 2;
    int64_t n_properties = 0;

    std::string to_json() const;
    static ModelConfig from_json(const std::string& s);
};

// Uniform fan-in initialization for a [in, out] weight matrix.
Tensor init_linear(int64_t in, int64_t out, Rng& rng);
Tensor init_embedding(int64_t rows, int64_t d, Rng& rng);

// Full parameter set: encoder, context encoder, property embeddings, and the
// three heads (prediction, relation, gate).
ParameterSet init_model_params(const ModelConfig& cfg, Rng& rng);

// Two-layer MLP with ReLU between the layers; weights under `prefix`.
Tensor mlp2(const Tensor& x, const ParameterSet& params, const std::string& prefix);

// Probability that molecule i is active for the target, from context rows.
Tensor predict_property(const Tensor& h_i, const Tensor& h_tau, const ParameterSet& params);

// Batched prediction for rows [start, start+count) of H against the target
// node's row; returns [count] probabilities.
Tensor predict_rows(const Tensor& h, int64_t start, int64_t count, int64_t target_node,
                    const ParameterSet& params);

}  // namespace fewmol
