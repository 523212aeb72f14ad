#pragma once

#include "fewmol/context.hpp"
#include "fewmol/episodes.hpp"
#include "fewmol/params.hpp"
#include "fewmol/tensor.hpp"

namespace fewmol {

// One relation-regression target: molecule i against an unordered property
// pair, y = (y_{i,a} - y_{i,b})^2 with both labels known.
struct RelationSample {
    int64_t molecule_row;  // episode molecule ordering (support first)
    int64_t prop_a;        // episode property indices, a < b, 0 is the target
    int64_t prop_b;
    double y_rel;
    bool from_support;
};

// Support molecules pair over all episode properties; query molecules pair
// over auxiliaries only, never the target. Pairs with an unknown label are
// skipped.
std::vector<RelationSample> enumerate_relation_samples(const Episode& ep,
                                                       const LabelMatrix& labels);

// Relation head on [h_i || h_a] (.) [h_i || h_b]; symmetric in (a, b). In BCE
// mode the head output passes through a sigmoid.
Tensor predict_relation(const Tensor& h_i, const Tensor& h_a, const Tensor& h_b,
                        const ParameterSet& params, bool bce_mode = false);

// Batched head outputs for every sample, aligned with `samples`.
Tensor predict_relations(const ContextGraph& g, const Tensor& h,
                         const std::vector<RelationSample>& samples, const ParameterSet& params,
                         bool bce_mode = false);

// Half the sum of the support-group and query-group mean errors (squared
// error, or binary cross-entropy in BCE mode). An empty sample set yields
// zero with a logged warning.
Tensor relation_loss(const std::vector<RelationSample>& samples, const Tensor& predictions,
                     bool bce_mode = false);

}  // namespace fewmol
