#pragma once

#include <optional>
#include <string>

#include "fewmol/data.hpp"
#include "fewmol/meta.hpp"
#include "fewmol/metrics.hpp"

namespace fewmol {

struct PropertyEval {
    int64_t property = -1;
    bool skipped = false;
    std::string skip_reason;
    std::vector<double> roc_runs;
    std::vector<double> pr_runs;
    double roc_mean = 0.0, roc_std = 0.0;
    double pr_mean = 0.0, pr_std = 0.0;
};

struct EvalReport {
    std::vector<PropertyEval> properties;
    int64_t resamplings = 0;
    double mean_roc = 0.0;  // over non-skipped properties
    double mean_pr = 0.0;
};

// Scores from one support resampling: inner-adapt on the support set, then
// score every remaining molecule with a known target label. No outer updates.
struct ResampleOutcome {
    std::vector<double> scores;
    std::vector<int> labels;
    std::vector<int64_t> query;  // dataset rows, aligned with scores
};
ResampleOutcome score_resampling(const Dataset& ds, const ParameterSet& params,
                                 const ModelConfig& mc, const TrainConfig& cfg, int64_t target,
                                 const std::vector<int64_t>& aux_pool, Rng& rng,
                                 const Tensor* mol_embed_cache = nullptr);

// Adaptation and scoring for an already-sampled episode.
ResampleOutcome score_episode(const Dataset& ds, const ParameterSet& params, const ModelConfig& mc,
                              const TrainConfig& cfg, const Episode& ep,
                              const Tensor* mol_embed_cache = nullptr);

// Meta-test over R support resamplings per test property. Auxiliary context
// is drawn from `aux_pool` (the training properties).
EvalReport meta_test(const Dataset& ds, const ParameterSet& params, const ModelConfig& mc,
                     const TrainConfig& cfg, const std::vector<int64_t>& test_props,
                     const std::vector<int64_t>& aux_pool, int64_t resamplings, uint64_t seed);

// Dataset-wide molecular embeddings under fixed parameters; valid as a
// meta-test cache whenever the encoder is not inner-adapted.
Tensor encode_all_molecules(const Dataset& ds, const ParameterSet& params, const ModelConfig& mc);

std::string report_to_json(const EvalReport& report, const LabelMatrix& labels);
void save_report_csv(const EvalReport& report, const LabelMatrix& labels, const std::string& path);

// Spearman correlation between a target's retain probabilities at one epoch
// and its similarity row. nullopt marks an undefined correlation (constant
// gates).
struct GateAlignment {
    int64_t target = -1;
    std::optional<double> rho;
};
std::vector<GateAlignment> gate_similarity_analysis(const std::vector<GateRow>& gate_log,
                                                    const Matrix& similarity, int64_t epoch);

// Epochs present in a gate log, ascending.
std::vector<int64_t> gate_log_epochs(const std::vector<GateRow>& gate_log);

}  // namespace fewmol
