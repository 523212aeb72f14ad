#pragma once

#include <optional>
#include <string>

#include "fewmol/cgib.hpp"
#include "fewmol/context.hpp"
#include "fewmol/cprl.hpp"
#include "fewmol/data.hpp"
#include "fewmol/episodes.hpp"
#include "fewmol/model.hpp"

namespace fewmol {

enum class LossMode { Mse, Bce };
enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
    int64_t k = 5;
    int64_t m = 16;
    int64_t n_auxi = 5;
    int64_t batch = 5;
    int64_t epochs = 200;  // outer steps
    double inner_lr = 0.1;
    double outer_lr = 0.01;
    double beta = 0.05;
    double temperature = 1.0;
    int64_t inner_steps = 1;
    bool first_order = false;
    LossMode loss_mode = LossMode::Mse;
    bool no_cprl = false;
    bool no_cgib = false;
    bool contrastive = false;
    bool adapt_encoder = true;
    OptimizerKind optimizer = OptimizerKind::Sgd;
    uint64_t seed = 1;
    int64_t checkpoint_interval = 0;  // 0: final checkpoint only
    int64_t gate_log_interval = 0;    // 0: first and last step only
    int64_t threads = 0;              // 0: hardware default

    void validate() const;
};

// Clean-graph forward pass of one episode under the given parameters.
struct ContextForward {
    ContextGraph g;
    Tensor h;  // [n_nodes, d2]
};
ContextForward forward_context(const Episode& ep, const Dataset& ds, const ParameterSet& params,
                               const ModelConfig& mc, const Tensor* mol_embed_cache = nullptr);

// Summed binary cross-entropy with probabilities clamped to [1e-7, 1-1e-7].
Tensor bce_sum(const Tensor& probs, const std::vector<double>& targets);

// Support-set prediction loss on the clean context graph.
Tensor support_loss(const ContextForward& fwd, const Episode& ep, const ParameterSet& params);

// Inner-loop adaptation: `inner_steps` differentiable gradient steps on the
// support loss. Returns a functional view over the adapted parameters; the
// encoder entries stay fixed when adapt_encoder is off.
ParameterSet inner_adapt(Tape& tape, const ParameterSet& params, const Episode& ep,
                         const Dataset& ds, const ModelConfig& mc, const TrainConfig& cfg,
                         const Tensor* mol_embed_cache = nullptr);

struct LossTerms {
    Tensor total;
    double pred_query = 0.0;
    double rel = 0.0;
    double mi = 0.0;
    double pred_perturbed = 0.0;
    // clean-graph probabilities for step diagnostics
    std::vector<double> query_probs;
    std::vector<double> support_probs;
    // gate trace for the log (aux id, retain probability)
    std::vector<std::pair<int64_t, double>> gates;
    // batch-level readouts for the contrastive ablation
    Tensor z_env;
    Tensor z_task;
};

// Total episode objective under adapted parameters:
//   pred(query | clean graph) [+ relation loss] [+ beta * MI penalty
//   + pred(query | task U perturbed env)], per the ablation flags.
LossTerms outer_loss(const ParameterSet& adapted, const Episode& ep, const Dataset& ds,
                     const ModelConfig& mc, const TrainConfig& cfg, const BatchStats& stats,
                     Rng& episode_rng, const Tensor* mol_embed_cache = nullptr);

struct StepLog {
    int64_t step = 0;
    double total = 0.0, pred_query = 0.0, rel = 0.0, mi = 0.0, pred_perturbed = 0.0;
    double contrastive = 0.0;
    double support_auc = 0.0, query_auc = 0.0;
    bool skipped = false;
    std::string to_json() const;
};

struct GateRow {
    int64_t epoch = 0;
    int64_t target = -1;
    int64_t aux = -1;
    double p = 0.0;
};

class Trainer {
public:
    Trainer(const Dataset& ds, ModelConfig mc, TrainConfig cfg, std::vector<int64_t> train_props);

    // One outer step over a freshly sampled batch; returns its log record.
    StepLog step();
    // Full run: epochs steps with gate snapshots at the configured interval.
    void train();

    const ParameterSet& params() const { return params_; }
    ParameterSet& mutable_params() { return params_; }
    const std::vector<StepLog>& logs() const { return logs_; }
    const std::vector<GateRow>& gate_log() const { return gate_log_; }
    const std::vector<int64_t>& train_props() const { return train_props_; }
    int64_t current_step() const { return step_; }

    // Deterministic retain-probability snapshot: for each eligible train
    // property, a probe episode over the full auxiliary pool, expected gates.
    std::vector<GateRow> gate_snapshot(int64_t epoch) const;

    // Optional sinks wired by the CLI.
    std::function<void(const StepLog&)> on_step;
    std::function<void(int64_t step, const ParameterSet&)> on_checkpoint;

private:
    const Dataset& ds_;
    ModelConfig mc_;
    TrainConfig cfg_;
    std::vector<int64_t> train_props_;
    ParameterSet params_;
    Rng rng_;
    int64_t step_ = 0;
    std::vector<StepLog> logs_;
    std::vector<GateRow> gate_log_;

    // Adam state, lazily sized.
    std::vector<std::vector<double>> adam_m_, adam_v_;
    int64_t adam_t_ = 0;

    void apply_update(const std::vector<Tensor>& mean_grads);
};

void save_gate_log(const std::vector<GateRow>& rows, const LabelMatrix& labels,
                   const std::string& path);
std::vector<GateRow> load_gate_log(const std::string& path, const LabelMatrix& labels);

}  // namespace fewmol
