#include "fewmol/meta.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fewmol/errors.hpp"
#include "fewmol/kernels.hpp"
#include "fewmol/logging.hpp"
#include "fewmol/metrics.hpp"

namespace fewmol {

void TrainConfig::validate() const {
    if (k < 1 || m < 0 || n_auxi < 0 || batch < 1 || epochs < 0 || inner_steps < 0)
        throw ConfigError("train config: nonnegative sizes required, k and batch at least 1");
    if (inner_lr < 0 || outer_lr <= 0) throw ConfigError("train config: learning rates must be positive");
    if (beta < 0) throw ConfigError("train config: beta must be nonnegative");
    if (temperature <= 0) throw ConfigError("train config: temperature must be positive");
    if (contrastive && no_cgib)
        throw ConfigError("train config: the contrastive term needs the gating module enabled");
    if (contrastive && batch < 2)
        throw ConfigError("train config: contrastive alignment needs a batch of at least 2");
}

ContextForward forward_context(const Episode& ep, const Dataset& ds, const ParameterSet& params,
                               const ModelConfig& mc, const Tensor* mol_embed_cache) {
    Tensor mol_embed;
    if (mol_embed_cache) {
        mol_embed = gather_rows(*mol_embed_cache, ep.molecule_rows());
    } else {
        std::vector<const MoleculeGraph*> mols;
        for (int64_t r : ep.molecule_rows()) mols.push_back(&ds.molecules[static_cast<size_t>(r)]);
        mol_embed = gin_encode(build_molecule_batch(mols, mc.enc), params, mc.enc);
    }
    Tensor prop_rows = gather_rows(params.at("props/embed"), ep.property_ids());
    ContextForward f;
    f.g = build_context_graph(ep, ds.labels, mol_embed, prop_rows);
    f.h = context_encode(f.g, params, mc.ctx_layers);
    return f;
}

Tensor bce_sum(const Tensor& probs, const std::vector<double>& targets) {
    if (probs.numel() != static_cast<int64_t>(targets.size()))
        throw UsageError("bce_sum: probabilities misaligned with targets");
    const Tensor p = clamp(probs, 1e-7, 1.0 - 1e-7);
    const Tensor y = Tensor::from(probs.shape(), targets);
    const Tensor one_minus_y = add_scalar(neg(y), 1.0);
    const Tensor one_minus_p = add_scalar(neg(p), 1.0);
    return neg(sum(add(mul(y, log(p)), mul(one_minus_y, log(one_minus_p)))));
}

Tensor support_loss(const ContextForward& fwd, const Episode& ep, const ParameterSet& params) {
    const int64_t n_sup = static_cast<int64_t>(ep.support.size());
    Tensor probs = predict_rows(fwd.h, 0, n_sup, fwd.g.target_node(), params);
    std::vector<double> y(static_cast<size_t>(n_sup));
    for (size_t i = 0; i < y.size(); ++i)
        y[i] = ep.support_labels[i] == Label::Active ? 1.0 : 0.0;
    return bce_sum(probs, y);
}

ParameterSet inner_adapt(Tape& tape, const ParameterSet& params, const Episode& ep,
                         const Dataset& ds, const ModelConfig& mc, const TrainConfig& cfg,
                         const Tensor* mol_embed_cache) {
    auto adaptable = [&cfg](const std::string& name) {
        return cfg.adapt_encoder || name.rfind("encoder/", 0) != 0;
    };
    ParameterSet cur = params;
    for (int64_t s = 0; s < cfg.inner_steps; ++s) {
        const ContextForward f = forward_context(ep, ds, cur, mc, mol_embed_cache);
        const Tensor sl = support_loss(f, ep, cur);
        const ParameterSet sub = cur.filtered(adaptable);
        const std::vector<Tensor> grads = param_gradients(tape, sl, sub, !cfg.first_order);
        cur = cur.overlaid(adapted_forward(sub, grads, cfg.inner_lr, cfg.first_order));
    }
    return cur;
}

LossTerms outer_loss(const ParameterSet& adapted, const Episode& ep, const Dataset& ds,
                     const ModelConfig& mc, const TrainConfig& cfg, const BatchStats& stats,
                     Rng& episode_rng, const Tensor* mol_embed_cache) {
    LossTerms t;
    const ContextForward f = forward_context(ep, ds, adapted, mc, mol_embed_cache);
    const int64_t n_query = static_cast<int64_t>(ep.query.size());
    const int64_t n_sup = static_cast<int64_t>(ep.support.size());

    std::vector<double> qy(static_cast<size_t>(n_query));
    for (size_t i = 0; i < qy.size(); ++i)
        qy[i] = ds.labels.get(ep.query[i], ep.target) == Label::Active ? 1.0 : 0.0;

    Tensor qprobs = predict_rows(f.h, n_sup, n_query, f.g.target_node(), adapted);
    Tensor total = bce_sum(qprobs, qy);
    t.pred_query = total.value();
    t.query_probs = qprobs.data();
    t.support_probs = predict_rows(f.h, 0, n_sup, f.g.target_node(), adapted).data();

    const bool bce_rel = cfg.loss_mode == LossMode::Bce;
    if (!cfg.no_cprl) {
        const std::vector<RelationSample> samples = enumerate_relation_samples(ep, ds.labels);
        Tensor rel = samples.empty()
                         ? relation_loss(samples, Tensor::scalar(0.0), bce_rel)
                         : relation_loss(samples,
                                         predict_relations(f.g, f.h, samples, adapted, bce_rel),
                                         bce_rel);
        t.rel = rel.value();
        total = add(total, rel);
    }

    const int64_t n_aux = static_cast<int64_t>(ep.auxiliaries.size());
    if (!cfg.no_cgib && n_aux > 0) {
        const Tensor& x = f.g.x;
        const int64_t d1 = mc.enc.d1;
        Tensor z_task = mean_rows(slice(x, 0, 0, f.g.n_mol + 1));
        std::vector<Tensor> lambdas, x_rows, pert_rows;
        for (int64_t j = 0; j < n_aux; ++j) {
            Tensor xr = row(x, f.g.n_mol + 1 + j);
            Tensor p = gate_probability(xr, z_task, adapted);
            t.gates.emplace_back(ep.auxiliaries[static_cast<size_t>(j)], p.value());
            Tensor lam = gumbel_sigmoid(p, cfg.temperature, episode_rng.uniform01());
            lambdas.push_back(lam);
            x_rows.push_back(xr);
            pert_rows.push_back(perturb_row(xr, lam, sample_noise_row(stats, episode_rng)));
        }
        Tensor mi = mi_penalty(lambdas, x_rows, stats, d1);
        t.mi = mi.value();
        total = add(total, scale(mi, cfg.beta));

        Tensor x_pert = concat({slice(x, 0, 0, f.g.n_mol + 1), stack_rows(pert_rows)}, 0);
        Tensor h_pert = context_encode(f.g, x_pert, adapted, mc.ctx_layers);
        Tensor pp = predict_rows(h_pert, n_sup, n_query, f.g.target_node(), adapted);
        Tensor pred_pert = bce_sum(pp, qy);
        t.pred_perturbed = pred_pert.value();
        total = add(total, pred_pert);

        if (cfg.contrastive) {
            t.z_env = sum_rows(stack_rows(pert_rows));
            t.z_task = z_task;
        }
    }

    t.total = total;
    return t;
}

std::string StepLog::to_json() const {
    nlohmann::ordered_json j;
    j["step"] = step;
    auto num = [](double v) {
        return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
    };
    j["total"] = num(total);
    j["pred_query"] = num(pred_query);
    j["rel"] = num(rel);
    j["mi"] = num(mi);
    j["pred_perturbed"] = num(pred_perturbed);
    j["contrastive"] = num(contrastive);
    j["support_auc"] = num(support_auc);
    j["query_auc"] = num(query_auc);
    j["skipped"] = skipped;
    return j.dump();
}

Trainer::Trainer(const Dataset& ds, ModelConfig mc, TrainConfig cfg,
                 std::vector<int64_t> train_props)
    : ds_(ds), mc_(std::move(mc)), cfg_(cfg), train_props_(std::move(train_props)), rng_(cfg.seed) {
    cfg_.validate();
    if (cfg_.threads > 0) kernels::set_max_threads(static_cast<int>(cfg_.threads));
    if (train_props_.empty()) throw ConfigError("trainer: no training properties");
    bool any = false;
    for (int64_t p : train_props_) any = any || ds_.labels.eligible(p, cfg_.k);
    if (!any) throw EligibilityError("no training property is episode-eligible at this K");
    params_ = init_model_params(mc_, rng_);
}

namespace {

double safe_auc(const std::vector<double>& probs, const std::vector<double>& y) {
    std::vector<int> labels(y.size());
    bool pos = false, negv = false;
    for (size_t i = 0; i < y.size(); ++i) {
        labels[i] = y[i] > 0.5 ? 1 : 0;
        (labels[i] ? pos : negv) = true;
    }
    if (!pos || !negv) return std::nan("");
    return roc_auc(probs, labels);
}

}  // namespace

StepLog Trainer::step() {
    StepLog log;
    log.step = step_;

    std::vector<int64_t> eligible;
    for (int64_t p : train_props_) {
        if (ds_.labels.eligible(p, cfg_.k)) eligible.push_back(p);
    }

    std::vector<Episode> episodes;
    std::vector<uint64_t> seeds;
    for (int64_t b = 0; b < cfg_.batch; ++b) {
        const int64_t target = eligible[static_cast<size_t>(rng_.below(static_cast<int64_t>(eligible.size())))];
        episodes.push_back(sample_episode(ds_.labels, target, cfg_.k, cfg_.m, cfg_.n_auxi,
                                          train_props_, rng_));
        seeds.push_back(rng_.next_u64());
    }

    BatchStats stats;
    if (!cfg_.no_cgib) {
        std::vector<std::vector<int64_t>> aux_ids;
        for (const Episode& e : episodes) aux_ids.push_back(e.auxiliaries);
        stats = compute_env_stats(params_, aux_ids, mc_.enc.d1);
    }

    const int64_t B = cfg_.batch;
    std::vector<std::vector<Tensor>> grads(static_cast<size_t>(B));
    std::vector<LossTerms> terms(static_cast<size_t>(B));
    std::vector<std::exception_ptr> errors(static_cast<size_t>(B));
    double contrastive_value = 0.0;

    if (cfg_.contrastive) {
        // The alignment term couples episodes, so the whole batch shares one tape.
        Tape tape;
        ParameterSet watched = params_.watched(tape);
        Tensor total_sum;
        std::vector<Tensor> z_env, z_task;
        for (int64_t b = 0; b < B; ++b) {
            Rng ep_rng(seeds[static_cast<size_t>(b)]);
            ParameterSet adapted = inner_adapt(tape, watched, episodes[static_cast<size_t>(b)],
                                               ds_, mc_, cfg_);
            terms[static_cast<size_t>(b)] = outer_loss(adapted, episodes[static_cast<size_t>(b)],
                                                       ds_, mc_, cfg_, stats, ep_rng);
            const Tensor& tt = terms[static_cast<size_t>(b)].total;
            total_sum = total_sum.defined() ? add(total_sum, tt) : tt;
            if (terms[static_cast<size_t>(b)].z_env.defined()) {
                z_env.push_back(terms[static_cast<size_t>(b)].z_env);
                z_task.push_back(terms[static_cast<size_t>(b)].z_task);
            }
        }
        Tensor objective = scale(total_sum, 1.0 / static_cast<double>(B));
        if (static_cast<int64_t>(z_env.size()) >= 2) {
            Tensor cont = contrastive_alignment(z_env, z_task, cfg_.temperature);
            contrastive_value = cont.value();
            objective = add(objective, scale(cont, cfg_.beta));
        }
        std::vector<Tensor> g = param_gradients(tape, objective, watched, false);
        for (Tensor& t : g) t = t.detached();
        grads[0] = std::move(g);
    } else {
#pragma omp parallel for schedule(dynamic, 1)
        for (int64_t b = 0; b < B; ++b) {
            try {
                Tape tape;
                ParameterSet watched = params_.watched(tape);
                Rng ep_rng(seeds[static_cast<size_t>(b)]);
                ParameterSet adapted = inner_adapt(tape, watched, episodes[static_cast<size_t>(b)],
                                                   ds_, mc_, cfg_);
                terms[static_cast<size_t>(b)] = outer_loss(
                    adapted, episodes[static_cast<size_t>(b)], ds_, mc_, cfg_, stats, ep_rng);
                std::vector<Tensor> g = param_gradients(
                    tape, terms[static_cast<size_t>(b)].total, watched, false);
                for (Tensor& t : g) t = t.detached();
                grads[static_cast<size_t>(b)] = std::move(g);
            } catch (...) {
                errors[static_cast<size_t>(b)] = std::current_exception();
            }
        }
    }

    for (const auto& e : errors) {
        if (!e) continue;
        try {
            std::rethrow_exception(e);
        } catch (const DomainError& ex) {
            logging::warn(std::string("outer step ") + std::to_string(step_) +
                          " hit a numerical incident, skipping: " + ex.what());
            log.skipped = true;
            ++step_;
            return log;
        }
        // anything else is a bug or misconfiguration; surface it
    }

    // Batch-mean gradient, summed in episode order.
    std::vector<Tensor> mean_grads(params_.size());
    const int64_t grad_sets = cfg_.contrastive ? 1 : B;
    for (size_t i = 0; i < params_.size(); ++i) {
        Tensor acc = grads[0][i];
        for (int64_t b = 1; b < grad_sets; ++b) acc = add(acc, grads[static_cast<size_t>(b)][i]);
        mean_grads[i] = cfg_.contrastive ? acc : scale(acc, 1.0 / static_cast<double>(B));
    }

    bool finite = true;
    for (const LossTerms& t : terms) finite = finite && std::isfinite(t.total.value());
    for (const Tensor& g : mean_grads) finite = finite && g.all_finite();
    if (!finite) {
        logging::warn("outer step " + std::to_string(step_) + " produced non-finite values, skipping");
        log.skipped = true;
        ++step_;
        return log;
    }

    apply_update(mean_grads);

    double sauc = 0.0, qauc = 0.0;
    int64_t sauc_n = 0, qauc_n = 0;
    for (int64_t b = 0; b < B; ++b) {
        const LossTerms& t = terms[static_cast<size_t>(b)];
        const Episode& e = episodes[static_cast<size_t>(b)];
        log.total += t.total.value() / static_cast<double>(B);
        log.pred_query += t.pred_query / static_cast<double>(B);
        log.rel += t.rel / static_cast<double>(B);
        log.mi += t.mi / static_cast<double>(B);
        log.pred_perturbed += t.pred_perturbed / static_cast<double>(B);
        std::vector<double> sy(e.support.size()), qy(e.query.size());
        for (size_t i = 0; i < sy.size(); ++i)
            sy[i] = e.support_labels[i] == Label::Active ? 1.0 : 0.0;
        for (size_t i = 0; i < qy.size(); ++i)
            qy[i] = ds_.labels.get(e.query[i], e.target) == Label::Active ? 1.0 : 0.0;
        const double sa = safe_auc(t.support_probs, sy);
        const double qa = safe_auc(t.query_probs, qy);
        if (std::isfinite(sa)) {
            sauc += sa;
            ++sauc_n;
        }
        if (std::isfinite(qa)) {
            qauc += qa;
            ++qauc_n;
        }
    }
    log.contrastive = contrastive_value;
    log.support_auc = sauc_n ? sauc / static_cast<double>(sauc_n) : std::nan("");
    log.query_auc = qauc_n ? qauc / static_cast<double>(qauc_n) : std::nan("");
    ++step_;
    return log;
}

void Trainer::apply_update(const std::vector<Tensor>& mean_grads) {
    if (cfg_.optimizer == OptimizerKind::Sgd) {
        for (size_t i = 0; i < params_.size(); ++i) {
            params_.set_value(i, sub(params_.value(i), scale(mean_grads[i], cfg_.outer_lr)));
        }
        return;
    }
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    if (adam_m_.empty()) {
        adam_m_.resize(params_.size());
        adam_v_.resize(params_.size());
        for (size_t i = 0; i < params_.size(); ++i) {
            adam_m_[i].assign(params_.value(i).data().size(), 0.0);
            adam_v_[i].assign(params_.value(i).data().size(), 0.0);
        }
    }
    ++adam_t_;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(adam_t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(adam_t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        const std::vector<double>& g = mean_grads[i].data();
        std::vector<double> next = params_.value(i).data();
        for (size_t j = 0; j < next.size(); ++j) {
            adam_m_[i][j] = b1 * adam_m_[i][j] + (1.0 - b1) * g[j];
            adam_v_[i][j] = b2 * adam_v_[i][j] + (1.0 - b2) * g[j] * g[j];
            next[j] -= cfg_.outer_lr * (adam_m_[i][j] / c1) / (std::sqrt(adam_v_[i][j] / c2) + eps);
        }
        params_.set_value(i, Tensor::from(params_.value(i).shape(), std::move(next)));
    }
}

std::vector<GateRow> Trainer::gate_snapshot(int64_t epoch) const {
    std::vector<GateRow> rows;
    for (int64_t target : train_props_) {
        Episode ep;
        try {
            Rng probe(mix_seed(cfg_.seed ^ 0x9a7e5eedULL, static_cast<uint64_t>(target)));
            try {
                ep = sample_episode(ds_.labels, target, cfg_.k, cfg_.m, 0, train_props_, probe);
            } catch (const EligibilityError&) {
                Rng probe2(mix_seed(cfg_.seed ^ 0x9a7e5eedULL, static_cast<uint64_t>(target)));
                ep = sample_episode(ds_.labels, target, cfg_.k, 0, 0, train_props_, probe2);
            }
        } catch (const EligibilityError&) {
            continue;
        }
        Rng aux_rng(0);
        ep.auxiliaries = select_auxiliaries(train_props_, target, 0, AuxPolicy::All, aux_rng);
        if (ep.auxiliaries.empty()) continue;

        std::vector<const MoleculeGraph*> mols;
        for (int64_t r : ep.molecule_rows()) mols.push_back(&ds_.molecules[static_cast<size_t>(r)]);
        Tensor mol_embed = gin_encode(build_molecule_batch(mols, mc_.enc), params_, mc_.enc);
        Tensor prop_rows = gather_rows(params_.at("props/embed"), ep.property_ids());
        Tensor x = concat({mol_embed, prop_rows}, 0);
        Tensor z_task = mean_rows(slice(x, 0, 0, ep.n_molecules() + 1));
        for (size_t j = 0; j < ep.auxiliaries.size(); ++j) {
            Tensor xr = row(x, ep.n_molecules() + 1 + static_cast<int64_t>(j));
            const double p = gate_probability(xr, z_task, params_).value();
            rows.push_back(GateRow{epoch, target, ep.auxiliaries[j], p});
        }
    }
    return rows;
}

void Trainer::train() {
    auto snapshot = [&](int64_t epoch) {
        const std::vector<GateRow> rows = gate_snapshot(epoch);
        gate_log_.insert(gate_log_.end(), rows.begin(), rows.end());
    };
    snapshot(0);
    for (int64_t s = 0; s < cfg_.epochs; ++s) {
        StepLog l = step();
        logs_.push_back(l);
        if (on_step) on_step(l);
        if (cfg_.gate_log_interval > 0 && (s + 1) % cfg_.gate_log_interval == 0 && s + 1 < cfg_.epochs)
            snapshot(s + 1);
        if (cfg_.checkpoint_interval > 0 && (s + 1) % cfg_.checkpoint_interval == 0 && on_checkpoint)
            on_checkpoint(s + 1, params_);
    }
    if (cfg_.epochs > 0) snapshot(cfg_.epochs);
    if (on_checkpoint) on_checkpoint(cfg_.epochs, params_);
}

void save_gate_log(const std::vector<GateRow>& rows, const LabelMatrix& labels,
                   const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write gate log: " + path);
    out << "epoch,target,auxiliary,retain_p\n";
    char buf[32];
    for (const GateRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.17g", r.p);
        out << r.epoch << "," << labels.property_ids()[static_cast<size_t>(r.target)] << ","
            << labels.property_ids()[static_cast<size_t>(r.aux)] << "," << buf << "\n";
    }
}

std::vector<GateRow> load_gate_log(const std::string& path, const LabelMatrix& labels) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read gate log: " + path);
    std::map<std::string, int64_t> prop_index;
    for (int64_t p = 0; p < labels.num_properties(); ++p)
        prop_index[labels.property_ids()[static_cast<size_t>(p)]] = p;
    std::vector<GateRow> rows;
    std::string line;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 || line.empty()) continue;
        std::stringstream ss(line);
        std::string epoch, target, aux, p;
        if (!std::getline(ss, epoch, ',') || !std::getline(ss, target, ',') ||
            !std::getline(ss, aux, ',') || !std::getline(ss, p))
            throw DataError(path + ":" + std::to_string(lineno) + ": malformed gate row");
        auto ti = prop_index.find(target);
        auto ai = prop_index.find(aux);
        if (ti == prop_index.end() || ai == prop_index.end())
            throw DataError(path + ":" + std::to_string(lineno) + ": unknown property id");
        rows.push_back(GateRow{std::stoll(epoch), ti->second, ai->second, std::stod(p)});
    }
    return rows;
}

}  // namespace fewmol
