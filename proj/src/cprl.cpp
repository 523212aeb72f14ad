#include "fewmol/cprl.hpp"

#include "fewmol/errors.hpp"
#include "fewmol/logging.hpp"
#include "fewmol/model.hpp"

namespace fewmol {

namespace {

double label01(Label v) { return v == Label::Active ? 1.0 : 0.0; }

}  // namespace

std::vector<RelationSample> enumerate_relation_samples(const Episode& ep,
                                                       const LabelMatrix& labels) {
    std::vector<RelationSample> out;
    const std::vector<int64_t> props = ep.property_ids();
    const int64_t n_prop = static_cast<int64_t>(props.size());
    const int64_t n_sup = static_cast<int64_t>(ep.support.size());

    auto episode_label = [&](int64_t mrow, int64_t pi) -> Label {
        const bool is_support = mrow < n_sup;
        if (pi == 0) {
            // Query molecules never contribute target-property pairs.
            return is_support ? ep.support_labels[static_cast<size_t>(mrow)] : Label::Unknown;
        }
        const int64_t mol = is_support ? ep.support[static_cast<size_t>(mrow)]
                                       : ep.query[static_cast<size_t>(mrow - n_sup)];
        return labels.get(mol, props[static_cast<size_t>(pi)]);
    };

    const int64_t n_mol = ep.n_molecules();
    for (int64_t mrow = 0; mrow < n_mol; ++mrow) {
        const bool is_support = mrow < n_sup;
        const int64_t first = is_support ? 0 : 1;  // leakage guard: query skips the target
        for (int64_t a = first; a < n_prop; ++a) {
            const Label la = episode_label(mrow, a);
            if (la == Label::Unknown) continue;
            for (int64_t b = a + 1; b < n_prop; ++b) {
                const Label lb = episode_label(mrow, b);
                if (lb == Label::Unknown) continue;
                const double diff = label01(la) - label01(lb);
                out.push_back(RelationSample{mrow, a, b, diff * diff, is_support});
            }
        }
    }
    return out;
}

Tensor predict_relation(const Tensor& h_i, const Tensor& h_a, const Tensor& h_b,
                        const ParameterSet& params, bool bce_mode) {
    Tensor left = concat({h_i, h_a}, 0);
    Tensor right = concat({h_i, h_b}, 0);
    Tensor in = reshape(mul(left, right), {1, left.dim(0)});
    Tensor out = reshape(mlp2(in, params, "rel"), {});
    return bce_mode ? sigmoid(out) : out;
}

Tensor predict_relations(const ContextGraph& g, const Tensor& h,
                         const std::vector<RelationSample>& samples, const ParameterSet& params,
                         bool bce_mode) {
    if (samples.empty()) throw UsageError("predict_relations: empty sample list");
    std::vector<int64_t> mol_rows, a_rows, b_rows;
    mol_rows.reserve(samples.size());
    for (const RelationSample& s : samples) {
        mol_rows.push_back(s.molecule_row);
        a_rows.push_back(g.n_mol + s.prop_a);
        b_rows.push_back(g.n_mol + s.prop_b);
    }
    Tensor hi = gather_rows(h, mol_rows);
    Tensor left = concat({hi, gather_rows(h, a_rows)}, 1);
    Tensor right = concat({hi, gather_rows(h, b_rows)}, 1);
    Tensor out = reshape(mlp2(mul(left, right), params, "rel"),
                         {static_cast<int64_t>(samples.size())});
    return bce_mode ? sigmoid(out) : out;
}

Tensor relation_loss(const std::vector<RelationSample>& samples, const Tensor& predictions,
                     bool bce_mode) {
    if (samples.empty()) {
        logging::warn("relation loss over an empty sample set; contributing zero");
        return Tensor::scalar(0.0);
    }
    if (predictions.numel() != static_cast<int64_t>(samples.size()))
        throw UsageError("relation_loss: predictions misaligned with samples");

    std::vector<double> targets(samples.size());
    int64_t n_support = 0;
    for (size_t i = 0; i < samples.size(); ++i) {
        targets[i] = samples[i].y_rel;
        if (samples[i].from_support) ++n_support;
    }
    const int64_t n = static_cast<int64_t>(samples.size());
    const int64_t n_query = n - n_support;
    const Tensor y = Tensor::from({n}, std::move(targets));

    Tensor per_sample;
    if (!bce_mode) {
        per_sample = square(sub(predictions, y));
    } else {
        const Tensor p = clamp(predictions, 1e-7, 1.0 - 1e-7);
        const Tensor one_minus_y = add_scalar(neg(y), 1.0);
        const Tensor one_minus_p = add_scalar(neg(p), 1.0);
        per_sample = neg(add(mul(y, log(p)), mul(one_minus_y, log(one_minus_p))));
    }

    // Half the sum of the support-set and query-set mean errors. Samples are
    // enumerated support-first, so the two groups are contiguous slices.
    Tensor total;
    if (n_support > 0) {
        Tensor sup_mean = mean(slice(per_sample, 0, 0, n_support));
        total = sup_mean;
    }
    if (n_query > 0) {
        Tensor q_mean = mean(slice(per_sample, 0, n_support, n_query));
        total = total.defined() ? add(total, q_mean) : q_mean;
    }
    return scale(total, 0.5);
}

}  // namespace fewmol
