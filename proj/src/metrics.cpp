#include "fewmol/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "fewmol/errors.hpp"
#include "fewmol/stats.hpp"

namespace fewmol {

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty())
        throw UsageError("roc_auc: scores and labels must align");
    int64_t n_pos = 0, n_neg = 0;
    for (int y : labels) (y ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0)
        throw MetricError("roc_auc undefined: labels contain a single class");
    const std::vector<double> r = stats::ranks(scores);
    double pos_rank_sum = 0.0;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i]) pos_rank_sum += r[i];
    }
    const double np = static_cast<double>(n_pos);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double pr_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty())
        throw UsageError("pr_auc: scores and labels must align");
    int64_t n_pos = 0;
    for (int y : labels) n_pos += y ? 1 : 0;
    if (n_pos == 0) throw MetricError("pr_auc undefined: no positive labels");

    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    // Step-wise average precision over descending score thresholds; tied
    // scores form one threshold group.
    double ap = 0.0;
    double tp = 0.0, fp = 0.0, prev_recall = 0.0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        for (size_t k = i; k <= j; ++k) (labels[order[k]] ? tp : fp) += 1.0;
        const double recall = tp / static_cast<double>(n_pos);
        const double precision = tp / (tp + fp);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j + 1;
    }
    return ap;
}

}  // namespace fewmol
