#include "fewmol/cgib.hpp"

#include <cmath>

#include "fewmol/errors.hpp"
#include "fewmol/logging.hpp"
#include "fewmol/model.hpp"

namespace fewmol {

BatchStats compute_env_stats(const ParameterSet& params,
                             const std::vector<std::vector<int64_t>>& batch_aux_ids, int64_t d1) {
    const Tensor& embed = params.at("props/embed");
    BatchStats stats;
    stats.mu.assign(static_cast<size_t>(d1), 0.0);
    stats.sigma.assign(static_cast<size_t>(d1), 0.0);

    int64_t rows = 0;
    for (const auto& aux : batch_aux_ids) rows += static_cast<int64_t>(aux.size());
    if (rows < 2) {
        logging::warn("fewer than two auxiliary rows in batch; noise variance floored");
        stats.fallback = true;
        if (rows == 1) {
            for (const auto& aux : batch_aux_ids)
                for (int64_t a : aux)
                    for (int64_t j = 0; j < d1; ++j)
                        stats.mu[static_cast<size_t>(j)] = embed.at(a, j);
        }
        for (int64_t j = 0; j < d1; ++j) stats.sigma[static_cast<size_t>(j)] = std::sqrt(1e-8);
        return stats;
    }

    for (const auto& aux : batch_aux_ids) {
        for (int64_t a : aux) {
            for (int64_t j = 0; j < d1; ++j) stats.mu[static_cast<size_t>(j)] += embed.at(a, j);
        }
    }
    for (double& m : stats.mu) m /= static_cast<double>(rows);
    for (const auto& aux : batch_aux_ids) {
        for (int64_t a : aux) {
            for (int64_t j = 0; j < d1; ++j) {
                const double dlt = embed.at(a, j) - stats.mu[static_cast<size_t>(j)];
                stats.sigma[static_cast<size_t>(j)] += dlt * dlt;
            }
        }
    }
    for (double& s : stats.sigma) s = std::sqrt(std::max(s / static_cast<double>(rows), 1e-8));
    return stats;
}

Tensor gate_probability(const Tensor& x_aux, const Tensor& z_task, const ParameterSet& params) {
    Tensor in = reshape(concat({x_aux, z_task}, 0), {1, x_aux.dim(0) + z_task.dim(0)});
    Tensor p = sigmoid(reshape(mlp2(in, params, "gate"), {}));
    return clamp(p, kGateEps, 1.0 - kGateEps);
}

Tensor gumbel_sigmoid(const Tensor& p, double t, double u) {
    if (t <= 0.0) throw ConfigError("gumbel_sigmoid: temperature must be positive");
    if (!(u > 0.0 && u < 1.0)) throw UsageError("gumbel_sigmoid: u must lie strictly in (0,1)");
    if (!p.is_scalar()) throw UsageError("gumbel_sigmoid: p must be scalar");
    Tensor logit_p = sub(log(p), log(add_scalar(neg(p), 1.0)));
    const double logit_u = std::log(u / (1.0 - u));
    Tensor z = scale(add_scalar(logit_p, logit_u), 1.0 / t);
    return clamp(sigmoid(z), kGateEps, 1.0 - kGateEps);
}

std::vector<double> sample_noise_row(const BatchStats& stats, Rng& rng) {
    std::vector<double> eps(stats.mu.size());
    for (size_t j = 0; j < eps.size(); ++j) eps[j] = rng.normal(stats.mu[j], stats.sigma[j]);
    return eps;
}

Tensor perturb_row(const Tensor& x_row, const Tensor& lambda, const std::vector<double>& eps) {
    if (x_row.rank() != 1) throw UsageError("perturb_row: rank-1 feature row required");
    if (static_cast<int64_t>(eps.size()) != x_row.dim(0))
        throw UsageError("perturb_row: noise width mismatch");
    Tensor lam = broadcast_to(lambda, {x_row.dim(0)});
    Tensor noise = Tensor::from({x_row.dim(0)}, eps);
    return add(mul(lam, x_row), mul(add_scalar(neg(lam), 1.0), noise));
}

Tensor mi_penalty(const std::vector<Tensor>& lambdas, const std::vector<Tensor>& x_rows,
                  const BatchStats& stats, int64_t d1) {
    if (lambdas.size() != x_rows.size()) throw UsageError("mi_penalty: gate/row count mismatch");
    const int64_t n_auxi = static_cast<int64_t>(lambdas.size());
    if (n_auxi == 0) return Tensor::scalar(0.0);

    Tensor a_sum;
    for (const Tensor& lam : lambdas) {
        Tensor term = square(add_scalar(neg(lam), 1.0));
        a_sum = a_sum.defined() ? add(a_sum, term) : term;
    }
    Tensor a = clamp(a_sum, kGateEps, static_cast<double>(n_auxi));

    std::vector<double> inv_sigma(stats.sigma.size());
    for (size_t j = 0; j < inv_sigma.size(); ++j) inv_sigma[j] = 1.0 / stats.sigma[j];
    const Tensor mu = Tensor::from({d1}, stats.mu);
    const Tensor isg = Tensor::from({d1}, inv_sigma);

    Tensor b_sum;
    for (size_t i = 0; i < x_rows.size(); ++i) {
        Tensor dev = mul(sub(x_rows[i], mu), isg);
        Tensor term = mul(broadcast_to(lambdas[i], {d1}), dev);
        b_sum = b_sum.defined() ? add(b_sum, term) : term;
    }

    const double n = static_cast<double>(n_auxi);
    const double dd = static_cast<double>(d1);
    Tensor out = scale(log(a), -dd / 2.0);
    out = add(out, scale(a, dd / (2.0 * n)));
    out = add(out, scale(sum(square(b_sum)), 1.0 / (2.0 * n)));
    return out;
}

Tensor contrastive_alignment(const std::vector<Tensor>& z_env, const std::vector<Tensor>& z_task,
                             double t) {
    if (z_env.size() != z_task.size()) throw UsageError("contrastive: batch size mismatch");
    const int64_t b = static_cast<int64_t>(z_env.size());
    if (b < 2) throw ConfigError("contrastive alignment needs a batch of at least 2 episodes");
    if (t <= 0.0) throw ConfigError("contrastive: temperature must be positive");

    auto cos_sim = [](const Tensor& x, const Tensor& y) {
        Tensor nx = sqrt(add_scalar(sum(square(x)), 1e-12));
        Tensor ny = sqrt(add_scalar(sum(square(y)), 1e-12));
        return mul(dot(x, y), reciprocal(mul(nx, ny)));
    };

    std::vector<Tensor> sims, exps;
    for (int64_t i = 0; i < b; ++i) {
        Tensor s = scale(cos_sim(z_env[static_cast<size_t>(i)], z_task[static_cast<size_t>(i)]),
                         1.0 / t);
        sims.push_back(s);
        exps.push_back(exp(s));
    }
    Tensor total;
    for (int64_t i = 0; i < b; ++i) {
        Tensor denom;
        for (int64_t j = 0; j < b; ++j) {
            if (j == i) continue;
            denom = denom.defined() ? add(denom, exps[static_cast<size_t>(j)])
                                    : exps[static_cast<size_t>(j)];
        }
        Tensor term = sub(sims[static_cast<size_t>(i)], log(denom));
        total = total.defined() ? add(total, term) : term;
    }
    return scale(total, -1.0 / static_cast<double>(b));
}

}  // namespace fewmol
