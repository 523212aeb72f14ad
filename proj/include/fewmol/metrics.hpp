#pragma once

#include <vector>

namespace fewmol {

// Rank-based ROC-AUC with tie-averaged ranks: P(score_pos > score_neg) plus
// half credit for ties. Requires at least one label of each class.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Average precision (step-wise area under precision-recall). Requires at
// least one positive.
double pr_auc(const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace fewmol
