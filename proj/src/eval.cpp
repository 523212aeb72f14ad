#include "fewmol/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "fewmol/errors.hpp"
#include "fewmol/logging.hpp"
#include "fewmol/stats.hpp"

namespace fewmol {

Tensor encode_all_molecules(const Dataset& ds, const ParameterSet& params, const ModelConfig& mc) {
    std::vector<const MoleculeGraph*> mols;
    mols.reserve(ds.molecules.size());
    for (const MoleculeGraph& m : ds.molecules) mols.push_back(&m);
    return gin_encode(build_molecule_batch(mols, mc.enc), params, mc.enc).detached();
}

ResampleOutcome score_resampling(const Dataset& ds, const ParameterSet& params,
                                 const ModelConfig& mc, const TrainConfig& cfg, int64_t target,
                                 const std::vector<int64_t>& aux_pool, Rng& rng,
                                 const Tensor* mol_embed_cache) {
    const Episode ep =
        full_query_episode(ds.labels, target, cfg.k, cfg.n_auxi, aux_pool, rng);

    // Score the full query pool in training-sized slices so the context graph
    // at test matches the graph sizes the model was trained on. Every slice
    // shares the same support set and auxiliary selection.
    const int64_t chunk = cfg.m > 0 ? cfg.m : static_cast<int64_t>(ep.query.size());
    ResampleOutcome out;
    for (size_t off = 0; off < ep.query.size(); off += static_cast<size_t>(chunk)) {
        Episode part = ep;
        part.query.assign(ep.query.begin() + static_cast<int64_t>(off),
                          ep.query.begin() +
                              std::min(ep.query.size(), off + static_cast<size_t>(chunk)));
        const ResampleOutcome piece = score_episode(ds, params, mc, cfg, part, mol_embed_cache);
        out.scores.insert(out.scores.end(), piece.scores.begin(), piece.scores.end());
        out.labels.insert(out.labels.end(), piece.labels.begin(), piece.labels.end());
        out.query.insert(out.query.end(), piece.query.begin(), piece.query.end());
    }
    return out;
}

ResampleOutcome score_episode(const Dataset& ds, const ParameterSet& params, const ModelConfig& mc,
                              const TrainConfig& cfg, const Episode& ep,
                              const Tensor* mol_embed_cache) {
    // Value-space adaptation: each inner step differentiates the support loss
    // on a throwaway tape and applies the update to plain values. Nothing
    // here feeds an outer gradient, so no functional view is needed.
    ParameterSet cur = params;
    auto adaptable = [&cfg](const std::string& name) {
        return cfg.adapt_encoder || name.rfind("encoder/", 0) != 0;
    };
    for (int64_t s = 0; s < cfg.inner_steps; ++s) {
        Tape tape;
        ParameterSet watched = cur.watched(tape);
        const ContextForward f = forward_context(ep, ds, watched, mc, mol_embed_cache);
        const Tensor sl = support_loss(f, ep, watched);
        const ParameterSet sub = watched.filtered(adaptable);
        const std::vector<Tensor> grads = param_gradients(tape, sl, sub, false);
        ParameterSet stepped = adapted_forward(sub, grads, cfg.inner_lr, true);
        ParameterSet next;
        for (size_t i = 0; i < cur.size(); ++i) {
            const std::string& name = cur.names()[i];
            next.insert(name, stepped.contains(name) ? stepped.at(name).detached()
                                                     : cur.value(i).detached());
        }
        cur = std::move(next);
    }

    const ContextForward f = forward_context(ep, ds, cur, mc, mol_embed_cache);
    const int64_t n_sup = static_cast<int64_t>(ep.support.size());
    const int64_t n_query = static_cast<int64_t>(ep.query.size());
    const Tensor probs = predict_rows(f.h, n_sup, n_query, f.g.target_node(), cur);

    ResampleOutcome out;
    out.scores = probs.data();
    out.query = ep.query;
    out.labels.resize(ep.query.size());
    for (size_t i = 0; i < ep.query.size(); ++i)
        out.labels[i] = ds.labels.get(ep.query[i], ep.target) == Label::Active ? 1 : 0;
    return out;
}

namespace {

void mean_std(const std::vector<double>& v, double& mean_out, double& std_out) {
    mean_out = 0.0;
    std_out = 0.0;
    if (v.empty()) return;
    for (double x : v) mean_out += x;
    mean_out /= static_cast<double>(v.size());
    if (v.size() < 2) return;
    double s = 0.0;
    for (double x : v) s += (x - mean_out) * (x - mean_out);
    std_out = std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

EvalReport meta_test(const Dataset& ds, const ParameterSet& params, const ModelConfig& mc,
                     const TrainConfig& cfg, const std::vector<int64_t>& test_props,
                     const std::vector<int64_t>& aux_pool, int64_t resamplings, uint64_t seed) {
    EvalReport report;
    report.resamplings = resamplings;

    Tensor cache;
    const Tensor* cache_ptr = nullptr;
    if (!cfg.adapt_encoder) {
        cache = encode_all_molecules(ds, params, mc);
        cache_ptr = &cache;
    }

    for (int64_t target : test_props) {
        PropertyEval pe;
        pe.property = target;
        if (!ds.labels.eligible(target, cfg.k)) {
            pe.skipped = true;
            pe.skip_reason = "fewer than K labeled molecules per class";
            logging::warn("meta-test skipping property " +
                          ds.labels.property_ids()[static_cast<size_t>(target)] + ": " +
                          pe.skip_reason);
            report.properties.push_back(std::move(pe));
            continue;
        }
        for (int64_t r = 0; r < resamplings; ++r) {
            Rng rng(mix_seed(mix_seed(seed, static_cast<uint64_t>(target)),
                             static_cast<uint64_t>(r)));
            const ResampleOutcome out =
                score_resampling(ds, params, mc, cfg, target, aux_pool, rng, cache_ptr);
            try {
                pe.roc_runs.push_back(roc_auc(out.scores, out.labels));
                pe.pr_runs.push_back(pr_auc(out.scores, out.labels));
            } catch (const MetricError& e) {
                logging::warn("meta-test resampling skipped for property " +
                              ds.labels.property_ids()[static_cast<size_t>(target)] + ": " +
                              e.what());
            }
        }
        if (pe.roc_runs.empty()) {
            pe.skipped = true;
            pe.skip_reason = "metric undefined on every resampling";
        } else {
            mean_std(pe.roc_runs, pe.roc_mean, pe.roc_std);
            mean_std(pe.pr_runs, pe.pr_mean, pe.pr_std);
        }
        report.properties.push_back(std::move(pe));
    }

    int64_t n = 0;
    for (const PropertyEval& pe : report.properties) {
        if (pe.skipped) continue;
        report.mean_roc += pe.roc_mean;
        report.mean_pr += pe.pr_mean;
        ++n;
    }
    if (n > 0) {
        report.mean_roc /= static_cast<double>(n);
        report.mean_pr /= static_cast<double>(n);
    }
    return report;
}

std::string report_to_json(const EvalReport& report, const LabelMatrix& labels) {
    nlohmann::ordered_json j;
    j["resamplings"] = report.resamplings;
    auto props = nlohmann::ordered_json::array();
    for (const PropertyEval& pe : report.properties) {
        nlohmann::ordered_json p;
        p["property"] = labels.property_ids()[static_cast<size_t>(pe.property)];
        p["skipped"] = pe.skipped;
        if (pe.skipped) {
            p["skip_reason"] = pe.skip_reason;
        } else {
            p["roc_auc_mean"] = pe.roc_mean;
            p["roc_auc_std"] = pe.roc_std;
            p["pr_auc_mean"] = pe.pr_mean;
            p["pr_auc_std"] = pe.pr_std;
            p["roc_auc_runs"] = pe.roc_runs;
            p["pr_auc_runs"] = pe.pr_runs;
        }
        props.push_back(std::move(p));
    }
    j["properties"] = std::move(props);
    j["mean_roc_auc"] = report.mean_roc;
    j["mean_pr_auc"] = report.mean_pr;
    return j.dump(2);
}

void save_report_csv(const EvalReport& report, const LabelMatrix& labels, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write report: " + path);
    out << "property,roc_auc_mean,roc_auc_std,pr_auc_mean,pr_auc_std,resamplings,skipped\n";
    char buf[128];
    for (const PropertyEval& pe : report.properties) {
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f", pe.roc_mean, pe.roc_std, pe.pr_mean,
                      pe.pr_std);
        out << labels.property_ids()[static_cast<size_t>(pe.property)] << "," << buf << ","
            << (pe.skipped ? 0 : static_cast<int64_t>(pe.roc_runs.size())) << ","
            << (pe.skipped ? 1 : 0) << "\n";
    }
}

std::vector<int64_t> gate_log_epochs(const std::vector<GateRow>& gate_log) {
    std::set<int64_t> epochs;
    for (const GateRow& r : gate_log) epochs.insert(r.epoch);
    return {epochs.begin(), epochs.end()};
}

std::vector<GateAlignment> gate_similarity_analysis(const std::vector<GateRow>& gate_log,
                                                    const Matrix& similarity, int64_t epoch) {
    // Average retain probability per (target, aux) at the requested epoch.
    std::map<int64_t, std::map<int64_t, std::pair<double, int64_t>>> acc;
    for (const GateRow& r : gate_log) {
        if (r.epoch != epoch) continue;
        auto& slot = acc[r.target][r.aux];
        slot.first += r.p;
        slot.second += 1;
    }
    std::vector<GateAlignment> out;
    for (const auto& [target, aux_map] : acc) {
        std::vector<double> p, sim;
        for (const auto& [aux, v] : aux_map) {
            if (static_cast<size_t>(target) >= similarity.size() ||
                static_cast<size_t>(aux) >= similarity.size())
                throw UsageError("gate analysis: similarity matrix does not cover all properties");
            p.push_back(v.first / static_cast<double>(v.second));
            sim.push_back(similarity[static_cast<size_t>(target)][static_cast<size_t>(aux)]);
        }
        GateAlignment ga;
        ga.target = target;
        ga.rho = stats::spearman(p, sim);
        out.push_back(ga);
    }
    return out;
}

}  // namespace fewmol
