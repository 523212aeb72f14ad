#pragma once

#include "fewmol/context.hpp"
#include "fewmol/params.hpp"
#include "fewmol/rng.hpp"
#include "fewmol/tensor.hpp"

namespace fewmol {

// Retain-probability and gate clamping bounds.
constexpr double kGateEps = 1e-6;

// Per-dimension noise statistics over the auxiliary-property node features of
// the current batch.
struct BatchStats {
    std::vector<double> mu;
    std::vector<double> sigma;  // sqrt of variance, floored at 1e-8
    bool fallback = false;      // fewer than two rows were available
};

// Stats over the (detached) auxiliary embedding rows referenced by the batch.
BatchStats compute_env_stats(const ParameterSet& params,
                             const std::vector<std::vector<int64_t>>& batch_aux_ids, int64_t d1);

// Retain probability for one auxiliary node, conditioned on the task-subgraph
// readout z = mean of the task rows of the initial features. Clamped into
// (0, 1).
Tensor gate_probability(const Tensor& x_aux, const Tensor& z_task, const ParameterSet& params);

// Gumbel-Sigmoid relaxation: sigma((logit p + logit u) / t) with u uniform.
Tensor gumbel_sigmoid(const Tensor& p, double t, double u);

// lambda * x + (1 - lambda) * eps with eps a Gaussian draw from the batch
// statistics; returns the perturbed row.
Tensor perturb_row(const Tensor& x_row, const Tensor& lambda, const std::vector<double>& eps);

// Draws one noise row from the stats.
std::vector<double> sample_noise_row(const BatchStats& stats, Rng& rng);

// Closed-form variational MI bound:
//   -(d1/2) log A + (d1/(2N)) A + (1/(2N)) ||B||^2
// with A = sum (1-lambda)^2 (clamped to [1e-6, N]) and
// B = sum lambda (x - mu) / sigma over the auxiliary rows (pre-perturbation).
// Zero when there are no auxiliaries.
Tensor mi_penalty(const std::vector<Tensor>& lambdas, const std::vector<Tensor>& x_rows,
                  const BatchStats& stats, int64_t d1);

// InfoNCE alignment of perturbed-environment and task readouts across a batch
// of episodes (ablation flag only; the default objective omits it).
Tensor contrastive_alignment(const std::vector<Tensor>& z_env, const std::vector<Tensor>& z_task,
                             double t);

}  // namespace fewmol
