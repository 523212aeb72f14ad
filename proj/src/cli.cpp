#include "fewmol/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "fewmol/data.hpp"
#include "fewmol/errors.hpp"
#include "fewmol/eval.hpp"
#include "fewmol/kernels.hpp"
#include "fewmol/logging.hpp"
#include "fewmol/meta.hpp"

namespace fewmol::cli {

namespace {

namespace fs = std::filesystem;

// Flat key = value configuration file, # comments. Flags take precedence over
// file values, which take precedence over defaults.
std::map<std::string, std::string> load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    std::map<std::string, std::string> out;
    std::string line;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const size_t eq = line.find('=');
        auto trim = [](std::string s) {
            const char* ws = " \t\r";
            const size_t b = s.find_first_not_of(ws);
            if (b == std::string::npos) return std::string();
            const size_t e = s.find_last_not_of(ws);
            return s.substr(b, e - b + 1);
        };
        if (eq == std::string::npos) {
            if (!trim(line).empty())
                throw ConfigError("config file " + path + ":" + std::to_string(lineno) +
                                  ": expected key = value");
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config file " + path + ":" + std::to_string(lineno) +
                                           ": empty key");
        out[key] = value;
    }
    return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "off" || v == "no") return false;
    throw ConfigError("config key " + key + ": expected a boolean, got '" + v + "'");
}

// Options shared by the training-like commands, with config-file backfill.
struct RunOptions {
    TrainConfig tc;
    int64_t d1 = 32;
    int64_t d2 = 32;
    int64_t enc_layers = 3;
    int64_t ctx_layers = 2;
    std::string readout = "mean";
    int64_t test_props = 0;
    int64_t resamplings = 10;
    std::string graphs, labels, out_dir, config_path;

    std::string loss_mode_str = "mse";
    std::string optimizer_str = "sgd";

    void finalize() {
        if (loss_mode_str == "mse") {
            tc.loss_mode = LossMode::Mse;
        } else if (loss_mode_str == "bce") {
            tc.loss_mode = LossMode::Bce;
        } else {
            throw ConfigError("loss-mode must be mse or bce");
        }
        if (optimizer_str == "sgd") {
            tc.optimizer = OptimizerKind::Sgd;
        } else if (optimizer_str == "adam") {
            tc.optimizer = OptimizerKind::Adam;
        } else {
            throw ConfigError("optimizer must be sgd or adam");
        }
        if (readout != "mean" && readout != "sum") throw ConfigError("readout must be mean or sum");
        tc.validate();
    }
};

struct Binder {
    std::string key;
    CLI::Option* opt = nullptr;
    std::function<void(const std::string&)> apply;
};

void add_train_options(CLI::App* cmd, RunOptions& o, std::vector<Binder>& binders) {
    auto bind_i64 = [&](const std::string& flag, int64_t& slot, const std::string& desc) {
        CLI::Option* opt = cmd->add_option(flag, slot, desc);
        const std::string key = flag.substr(2);
        binders.push_back({key, opt, [&slot, key](const std::string& v) {
                               try {
                                   slot = std::stoll(v);
                               } catch (const std::exception&) {
                                   throw ConfigError("config key " + key + ": bad integer '" + v + "'");
                               }
                           }});
    };
    auto bind_f64 = [&](const std::string& flag, double& slot, const std::string& desc) {
        CLI::Option* opt = cmd->add_option(flag, slot, desc);
        const std::string key = flag.substr(2);
        binders.push_back({key, opt, [&slot, key](const std::string& v) {
                               try {
                                   slot = std::stod(v);
                               } catch (const std::exception&) {
                                   throw ConfigError("config key " + key + ": bad number '" + v + "'");
                               }
                           }});
    };
    auto bind_b = [&](const std::string& flag, bool& slot, const std::string& desc) {
        CLI::Option* opt = cmd->add_option(flag, slot, desc);
        const std::string key = flag.substr(2);
        binders.push_back(
            {key, opt, [&slot, key](const std::string& v) { slot = parse_bool(v, key); }});
    };
    auto bind_s = [&](const std::string& flag, std::string& slot, const std::string& desc) {
        CLI::Option* opt = cmd->add_option(flag, slot, desc);
        const std::string key = flag.substr(2);
        binders.push_back({key, opt, [&slot](const std::string& v) { slot = v; }});
    };

    bind_i64("--k", o.tc.k, "support molecules per class");
    bind_i64("--m", o.tc.m, "query molecules per training episode");
    bind_i64("--n-auxi", o.tc.n_auxi, "auxiliary properties per episode");
    bind_i64("--batch", o.tc.batch, "episodes per outer step");
    bind_i64("--epochs", o.tc.epochs, "outer steps");
    bind_f64("--inner-lr", o.tc.inner_lr, "inner-loop learning rate");
    bind_f64("--outer-lr", o.tc.outer_lr, "outer-loop learning rate");
    bind_f64("--beta", o.tc.beta, "information-bottleneck coefficient");
    bind_f64("--temperature", o.tc.temperature, "Gumbel-Sigmoid temperature");
    bind_i64("--inner-steps", o.tc.inner_steps, "inner-loop gradient steps");
    bind_b("--first-order", o.tc.first_order, "detach inner gradients (first-order mode)");
    bind_s("--loss-mode", o.loss_mode_str, "relation loss: mse or bce");
    bind_b("--no-cprl", o.tc.no_cprl, "drop the relation loss");
    bind_b("--no-cgib", o.tc.no_cgib, "drop the bottleneck terms");
    bind_b("--contrastive", o.tc.contrastive, "add the contrastive alignment term");
    bind_b("--adapt-encoder", o.tc.adapt_encoder, "inner-adapt the molecular encoder");
    bind_s("--optimizer", o.optimizer_str, "outer optimizer: sgd or adam");
    bind_i64("--checkpoint-interval", o.tc.checkpoint_interval, "steps between checkpoints (0: end only)");
    bind_i64("--gate-log-interval", o.tc.gate_log_interval, "steps between gate snapshots (0: ends only)");
    bind_i64("--threads", o.tc.threads, "worker cap (0: hardware default)");
    bind_i64("--d1", o.d1, "molecular embedding width");
    bind_i64("--d2", o.d2, "context embedding width");
    bind_i64("--enc-layers", o.enc_layers, "molecular encoder layers");
    bind_i64("--ctx-layers", o.ctx_layers, "context encoder layers");
    bind_s("--readout", o.readout, "molecular readout: mean or sum");
    bind_i64("--test-props", o.test_props, "hold out the last N properties for meta-test");
    bind_i64("--r", o.resamplings, "support resamplings per test property");
    {
        CLI::Option* opt = cmd->add_option("--seed", o.tc.seed, "global random seed");
        binders.push_back({"seed", opt, [&o](const std::string& v) {
                               o.tc.seed = static_cast<uint64_t>(std::stoull(v));
                           }});
    }
}

void apply_config_file(const RunOptions& o, std::vector<Binder>& binders) {
    if (o.config_path.empty()) return;
    const auto file = load_config_file(o.config_path);
    std::map<std::string, bool> known;
    for (Binder& b : binders) {
        known[b.key] = true;
        if (b.opt->count() > 0) continue;  // flags win
        auto it = file.find(b.key);
        if (it != file.end()) b.apply(it->second);
    }
    for (const auto& [key, value] : file) {
        if (!known.count(key)) throw ConfigError("config file: unknown key '" + key + "'");
    }
}

struct SplitProps {
    std::vector<int64_t> train;
    std::vector<int64_t> test;
};

SplitProps split_properties(const Dataset& ds, int64_t n_test) {
    const int64_t p = ds.labels.num_properties();
    if (n_test < 0 || n_test >= p)
        throw ConfigError("test-props must lie in [0, number of properties)");
    SplitProps s;
    for (int64_t i = 0; i < p - n_test; ++i) s.train.push_back(i);
    for (int64_t i = p - n_test; i < p; ++i) s.test.push_back(i);
    return s;
}

ModelConfig model_config_of(const RunOptions& o, const Dataset& ds) {
    ModelConfig mc;
    mc.enc.d1 = o.d1;
    mc.enc.layers = o.enc_layers;
    mc.enc.atom_vocab = ds.max_atom_type() + 1;
    mc.enc.bond_vocab = std::max<int64_t>(ds.max_bond_type() + 1, 1);
    mc.enc.readout = o.readout == "sum" ? Readout::Sum : Readout::Mean;
    mc.d2 = o.d2;
    mc.ctx_layers = o.ctx_layers;
    mc.n_properties = ds.labels.num_properties();
    return mc;
}

nlohmann::ordered_json train_meta_json(const RunOptions& o, const ModelConfig& mc) {
    nlohmann::ordered_json meta;
    meta["model"] = nlohmann::ordered_json::parse(mc.to_json());
    nlohmann::ordered_json t;
    t["k"] = o.tc.k;
    t["n_auxi"] = o.tc.n_auxi;
    t["inner_lr"] = o.tc.inner_lr;
    t["inner_steps"] = o.tc.inner_steps;
    t["adapt_encoder"] = o.tc.adapt_encoder;
    t["test_props"] = o.test_props;
    t["seed"] = o.tc.seed;
    meta["train"] = std::move(t);
    return meta;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory: " + dir);
}

int run_train(const RunOptions& o) {
    Dataset ds = load_dataset(o.graphs, o.labels);
    const SplitProps split = split_properties(ds, o.test_props);
    const ModelConfig mc = model_config_of(o, ds);
    ensure_dir(o.out_dir);

    Trainer trainer(ds, mc, o.tc, split.train);
    std::ofstream log(o.out_dir + "/train_log.jsonl", std::ios::binary);
    if (!log) throw DataError("cannot write train log in " + o.out_dir);
    trainer.on_step = [&](const StepLog& l) { log << l.to_json() << "\n"; };
    const std::string meta = train_meta_json(o, mc).dump();
    trainer.on_checkpoint = [&](int64_t step, const ParameterSet& p) {
        save_checkpoint(p, o.out_dir + "/checkpoint.json", meta);
        if (o.tc.checkpoint_interval > 0 && step < o.tc.epochs)
            save_checkpoint(p, o.out_dir + "/checkpoint_step" + std::to_string(step) + ".json", meta);
    };
    trainer.train();
    save_gate_log(trainer.gate_log(), ds.labels, o.out_dir + "/gates.csv");
    logging::info("training finished; wrote " + o.out_dir + "/checkpoint.json");
    return 0;
}

int run_eval(const RunOptions& o, const std::string& checkpoint, bool flags_override,
             const std::vector<Binder>& binders) {
    Dataset ds = load_dataset(o.graphs, o.labels);
    std::string meta_json;
    ParameterSet params = load_checkpoint(checkpoint, &meta_json);
    const nlohmann::json meta = nlohmann::json::parse(meta_json);
    if (!meta.contains("model")) throw DataError("checkpoint lacks a model block");
    const ModelConfig mc = ModelConfig::from_json(meta["model"].dump());

    RunOptions eo = o;
    if (meta.contains("train")) {
        const auto& t = meta["train"];
        auto flag_given = [&](const std::string& key) {
            if (!flags_override) return false;
            for (const Binder& b : binders)
                if (b.key == key && b.opt->count() > 0) return true;
            return false;
        };
        if (!flag_given("k")) eo.tc.k = t.value("k", eo.tc.k);
        if (!flag_given("n-auxi")) eo.tc.n_auxi = t.value("n_auxi", eo.tc.n_auxi);
        if (!flag_given("inner-lr")) eo.tc.inner_lr = t.value("inner_lr", eo.tc.inner_lr);
        if (!flag_given("inner-steps")) eo.tc.inner_steps = t.value("inner_steps", eo.tc.inner_steps);
        if (!flag_given("adapt-encoder"))
            eo.tc.adapt_encoder = t.value("adapt_encoder", eo.tc.adapt_encoder);
        if (!flag_given("test-props")) eo.test_props = t.value("test_props", eo.test_props);
    }
    const SplitProps split = split_properties(ds, eo.test_props);
    if (split.test.empty()) throw ConfigError("eval: no test properties (set --test-props)");
    ensure_dir(eo.out_dir);
    if (eo.tc.threads > 0) kernels::set_max_threads(static_cast<int>(eo.tc.threads));

    EvalReport report = meta_test(ds, params, mc, eo.tc, split.test, split.train, eo.resamplings,
                                  eo.tc.seed);
    std::ofstream js(eo.out_dir + "/report.json", std::ios::binary);
    js << report_to_json(report, ds.labels) << "\n";
    save_report_csv(report, ds.labels, eo.out_dir + "/report.csv");
    logging::info("wrote " + eo.out_dir + "/report.json");
    return 0;
}

TrainConfig apply_mode(TrainConfig tc, const std::string& mode) {
    if (mode == "full") return tc;
    if (mode == "no_cprl") {
        tc.no_cprl = true;
        return tc;
    }
    if (mode == "no_cgib") {
        tc.no_cgib = true;
        return tc;
    }
    if (mode == "no_cprl_no_cgib") {
        tc.no_cprl = true;
        tc.no_cgib = true;
        return tc;
    }
    if (mode == "bce") {
        tc.loss_mode = LossMode::Bce;
        return tc;
    }
    if (mode == "contrastive") {
        tc.contrastive = true;
        return tc;
    }
    throw ConfigError("unknown ablation mode: " + mode +
                      " (expected full, no_cprl, no_cgib, no_cprl_no_cgib, bce, contrastive)");
}

struct RunOutcome {
    double mean_roc = 0.0;
    double mean_pr = 0.0;
};

RunOutcome train_and_eval(const Dataset& ds, const RunOptions& o, const SplitProps& split) {
    const ModelConfig mc = model_config_of(o, ds);
    Trainer trainer(ds, mc, o.tc, split.train);
    trainer.train();
    EvalReport report = meta_test(ds, trainer.params(), mc, o.tc, split.test, split.train,
                                  o.resamplings, o.tc.seed);
    return {report.mean_roc, report.mean_pr};
}

int run_ablate(const RunOptions& o, const std::string& modes_csv, const std::string& seeds_csv) {
    Dataset ds = load_dataset(o.graphs, o.labels);
    const SplitProps split = split_properties(ds, o.test_props);
    if (split.test.empty()) throw ConfigError("ablate: no test properties (set --test-props)");
    ensure_dir(o.out_dir);

    std::vector<std::string> modes;
    for (std::stringstream ss(modes_csv); ss.good();) {
        std::string m;
        if (std::getline(ss, m, ',') && !m.empty()) modes.push_back(m);
    }
    std::vector<uint64_t> seeds;
    for (std::stringstream ss(seeds_csv); ss.good();) {
        std::string s;
        if (std::getline(ss, s, ',') && !s.empty()) seeds.push_back(std::stoull(s));
    }
    if (modes.empty() || seeds.empty()) throw ConfigError("ablate: empty --modes or --seeds");
    for (const std::string& m : modes) apply_mode(o.tc, m);  // validate up front

    std::ofstream csv(o.out_dir + "/ablation.csv", std::ios::binary);
    csv << "mode,seed,mean_roc_auc,mean_pr_auc\n";
    nlohmann::ordered_json summary = nlohmann::ordered_json::array();
    for (const std::string& mode : modes) {
        std::vector<double> rocs, prs;
        for (uint64_t seed : seeds) {
            RunOptions ro = o;
            ro.tc = apply_mode(o.tc, mode);
            ro.tc.seed = seed;
            const RunOutcome out = train_and_eval(ds, ro, split);
            rocs.push_back(out.mean_roc);
            prs.push_back(out.mean_pr);
            csv << mode << "," << seed << "," << out.mean_roc << "," << out.mean_pr << "\n";
            csv.flush();
        }
        auto mean_of = [](const std::vector<double>& v) {
            double m = 0;
            for (double x : v) m += x;
            return m / static_cast<double>(v.size());
        };
        auto std_of = [&](const std::vector<double>& v, double m) {
            if (v.size() < 2) return 0.0;
            double s = 0;
            for (double x : v) s += (x - m) * (x - m);
            return std::sqrt(s / static_cast<double>(v.size() - 1));
        };
        const double rm = mean_of(rocs), pm = mean_of(prs);
        summary.push_back({{"mode", mode},
                           {"roc_auc_mean", rm},
                           {"roc_auc_std", std_of(rocs, rm)},
                           {"pr_auc_mean", pm},
                           {"pr_auc_std", std_of(prs, pm)},
                           {"seeds", seeds.size()}});
    }
    std::ofstream js(o.out_dir + "/ablation.json", std::ios::binary);
    js << summary.dump(2) << "\n";
    return 0;
}

int run_sweep(const RunOptions& o, const std::string& axis, std::vector<double> values,
              bool use_preset) {
    Dataset ds = load_dataset(o.graphs, o.labels);
    const SplitProps split = split_properties(ds, o.test_props);
    if (split.test.empty()) throw ConfigError("sweep: no test properties (set --test-props)");

    if (use_preset) {
        if (axis == "beta") {
            values = {1e-2, 5e-2, 1e-1, 5e-1, 1.0};
        } else if (axis == "temperature") {
            values = {1e-1, 2e-1, 5e-1, 1.0, 2.0};
        } else {
            throw ConfigError("no preset grid for axis " + axis);
        }
    }
    if (values.empty()) throw ConfigError("sweep: no values given");
    for (double v : values) {
        if (axis == "beta" && v < 0) throw ConfigError("sweep: beta must be nonnegative");
        if (axis == "temperature" && v <= 0) throw ConfigError("sweep: temperature must be positive");
        if (axis == "n_auxi") {
            if (v < 0 || v != std::floor(v)) throw ConfigError("sweep: n_auxi must be a whole number");
            if (static_cast<int64_t>(v) > static_cast<int64_t>(split.train.size()) - 1)
                throw ConfigError("sweep: n_auxi " + std::to_string(static_cast<int64_t>(v)) +
                                  " exceeds the training property pool");
        }
    }
    ensure_dir(o.out_dir);

    std::ofstream csv(o.out_dir + "/sweep.csv", std::ios::binary);
    csv << "axis,value,mean_roc_auc,mean_pr_auc\n";
    for (double v : values) {
        RunOptions ro = o;
        if (axis == "beta") {
            ro.tc.beta = v;
        } else if (axis == "temperature") {
            ro.tc.temperature = v;
        } else if (axis == "n_auxi") {
            ro.tc.n_auxi = static_cast<int64_t>(v);
        } else {
            throw ConfigError("unknown sweep axis: " + axis);
        }
        const RunOutcome out = train_and_eval(ds, ro, split);
        csv << axis << "," << v << "," << out.mean_roc << "," << out.mean_pr << "\n";
        csv.flush();
    }
    return 0;
}

int run_export_gates(const std::string& graphs, const std::string& labels,
                     const std::string& gates, const std::string& similarity,
                     const std::string& out_path) {
    Dataset ds = load_dataset(graphs, labels);
    const std::vector<GateRow> rows = load_gate_log(gates, ds.labels);
    std::vector<std::string> sim_props;
    const Matrix sim = load_similarity(similarity, &sim_props);
    if (sim_props != ds.labels.property_ids())
        throw DataError("similarity property ids do not match the label file");

    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw DataError("cannot write " + out_path);
    out << "epoch,target,spearman_rho\n";
    for (int64_t epoch : gate_log_epochs(rows)) {
        for (const GateAlignment& ga : gate_similarity_analysis(rows, sim, epoch)) {
            out << epoch << "," << ds.labels.property_ids()[static_cast<size_t>(ga.target)] << ",";
            if (ga.rho) out << *ga.rho;
            out << "\n";
        }
    }
    return 0;
}

int dispatch(int argc, const char* const* argv) {
    CLI::App app{"Few-shot molecular property prediction on relational context graphs"};
    app.require_subcommand(1);

    // gen-synth
    auto* gen = app.add_subcommand("gen-synth", "generate a planted-correlation synthetic dataset");
    SyntheticSpec spec;
    std::string gen_out;
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--seed", spec.seed, "generator seed");
    gen->add_option("--molecules", spec.num_molecules, "number of molecules");
    gen->add_option("--properties", spec.num_properties, "number of properties");
    gen->add_option("--atom-types", spec.num_atom_types, "atom-type vocabulary");
    gen->add_option("--bond-types", spec.num_bond_types, "bond-type vocabulary");
    gen->add_option("--min-atoms", spec.atoms_min, "atoms per molecule, lower bound");
    gen->add_option("--max-atoms", spec.atoms_max, "atoms per molecule, upper bound");
    gen->add_option("--edge-prob", spec.edge_prob, "bond probability per atom pair");
    gen->add_option("--prototypes", spec.prototypes, "weight-vector clusters");
    gen->add_option("--jitter", spec.weight_jitter, "weight jitter around prototypes");
    gen->add_option("--jitter-alt", spec.weight_jitter_alt,
                    "jitter for off-stride properties (0: same as --jitter)");
    gen->add_option("--informative-stride", spec.informative_stride,
                    "every Nth property keeps the base jitter");
    gen->add_option("--noise", spec.label_noise, "independent per-cell label flip rate");
    gen->add_option("--correlated-noise", spec.correlated_noise,
                    "fraction of molecules inverted across every property");
    gen->add_option("--unknown-rate", spec.unknown_rate, "unknown-label rate");
    gen->add_option("--min-per-class", spec.min_per_class, "feasibility floor per property");

    // train
    auto* train = app.add_subcommand("train", "meta-train on the training properties");
    RunOptions topt;
    std::vector<Binder> tbind;
    train->add_option("--graphs", topt.graphs, "molecule JSON-lines file")->required();
    train->add_option("--labels", topt.labels, "label CSV file")->required();
    train->add_option("--out", topt.out_dir, "output directory")->required();
    train->add_option("--config", topt.config_path, "flat key = value config file");
    add_train_options(train, topt, tbind);

    // eval
    auto* eval = app.add_subcommand("eval", "meta-test a checkpoint");
    RunOptions eopt;
    std::vector<Binder> ebind;
    std::string eval_ckpt;
    eval->add_option("--graphs", eopt.graphs, "molecule JSON-lines file")->required();
    eval->add_option("--labels", eopt.labels, "label CSV file")->required();
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint to evaluate")->required();
    eval->add_option("--out", eopt.out_dir, "output directory")->required();
    eval->add_option("--config", eopt.config_path, "flat key = value config file");
    add_train_options(eval, eopt, ebind);

    // ablate
    auto* ablate = app.add_subcommand("ablate", "train + eval across module ablations");
    RunOptions aopt;
    std::vector<Binder> abind;
    std::string modes = "full,no_cgib,no_cprl_no_cgib";
    std::string seeds = "1,2,3";
    ablate->add_option("--graphs", aopt.graphs, "molecule JSON-lines file")->required();
    ablate->add_option("--labels", aopt.labels, "label CSV file")->required();
    ablate->add_option("--out", aopt.out_dir, "output directory")->required();
    ablate->add_option("--config", aopt.config_path, "flat key = value config file");
    ablate->add_option("--modes", modes, "comma list of ablation modes");
    ablate->add_option("--seeds", seeds, "comma list of seeds");
    add_train_options(ablate, aopt, abind);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "train + eval along one hyperparameter axis");
    RunOptions sopt;
    std::vector<Binder> sbind;
    std::string axis;
    std::vector<double> values;
    bool preset = false;
    sweep->add_option("--axis", axis, "beta, temperature, or n_auxi")->required();
    sweep->add_option("--values", values, "axis values")->delimiter(',');
    sweep->add_flag("--preset", preset, "use the built-in grid for the axis");
    sweep->add_option("--graphs", sopt.graphs, "molecule JSON-lines file")->required();
    sweep->add_option("--labels", sopt.labels, "label CSV file")->required();
    sweep->add_option("--out", sopt.out_dir, "output directory")->required();
    sweep->add_option("--config", sopt.config_path, "flat key = value config file");
    add_train_options(sweep, sopt, sbind);

    // export-gates
    auto* gates = app.add_subcommand("export-gates", "gate/similarity alignment per epoch");
    std::string g_graphs, g_labels, g_gates, g_sim, g_out;
    gates->add_option("--graphs", g_graphs, "molecule JSON-lines file")->required();
    gates->add_option("--labels", g_labels, "label CSV file")->required();
    gates->add_option("--gates", g_gates, "gate log CSV from training")->required();
    gates->add_option("--similarity", g_sim, "property similarity CSV")->required();
    gates->add_option("--out", g_out, "output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (gen->parsed()) {
        ensure_dir(gen_out);
        const SyntheticResult r = generate_synthetic(spec);
        save_molecules(r.dataset.molecules, gen_out + "/molecules.jsonl");
        save_labels(r.dataset.labels, gen_out + "/labels.csv");
        save_similarity(r.planted_similarity, r.dataset.labels.property_ids(),
                        gen_out + "/similarity.csv");
        logging::info("wrote synthetic dataset to " + gen_out);
        return 0;
    }
    if (train->parsed()) {
        apply_config_file(topt, tbind);
        topt.finalize();
        return run_train(topt);
    }
    if (eval->parsed()) {
        apply_config_file(eopt, ebind);
        eopt.finalize();
        return run_eval(eopt, eval_ckpt, true, ebind);
    }
    if (ablate->parsed()) {
        apply_config_file(aopt, abind);
        aopt.finalize();
        return run_ablate(aopt, modes, seeds);
    }
    if (sweep->parsed()) {
        apply_config_file(sopt, sbind);
        sopt.finalize();
        return run_sweep(sopt, axis, values, preset);
    }
    if (gates->parsed()) return run_export_gates(g_graphs, g_labels, g_gates, g_sim, g_out);
    return 1;
}

}  // namespace

int run(int argc, const char* const* argv) {
    try {
        return dispatch(argc, argv);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    } catch (const MetricError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}

}  // namespace fewmol::cli
