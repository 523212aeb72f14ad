#pragma once

#include <string>
#include <vector>

#include "fewmol/data.hpp"
#include "fewmol/rng.hpp"

namespace fewmol {

// One 2-way K-shot task instance. Molecule entries are dataset row indices.
struct Episode {
    int64_t target = -1;
    int64_t k = 0;
    std::vector<int64_t> support;        // 2K rows, K actives then K inactives
    std::vector<Label> support_labels;   // aligned with support
    std::vector<int64_t> query;          // target labels held out for scoring
    std::vector<int64_t> auxiliaries;    // distinct, never the target

    int64_t n_molecules() const { return static_cast<int64_t>(support.size() + query.size()); }
    // Episode molecule ordering: support rows first, then query rows.
    std::vector<int64_t> molecule_rows() const;
    // Property ordering: target first, then auxiliaries.
    std::vector<int64_t> property_ids() const;

    void validate(const LabelMatrix& labels) const;
};

enum class AuxPolicy { Random, All, FixedList };

// Exactly n distinct auxiliary ids from the pool, never the target. The All
// policy returns the whole pool minus the target, ignoring n.
std::vector<int64_t> select_auxiliaries(const std::vector<int64_t>& pool, int64_t target,
                                        int64_t n, AuxPolicy policy, Rng& rng,
                                        const std::vector<int64_t>& fixed_list = {});

// Uniform support/query sampling without replacement within each class.
Episode sample_episode(const LabelMatrix& labels, int64_t target, int64_t k, int64_t m,
                       int64_t n_auxi, const std::vector<int64_t>& aux_pool, Rng& rng,
                       AuxPolicy policy = AuxPolicy::Random,
                       const std::vector<int64_t>& fixed_aux = {});

// Meta-test variant: the query is every molecule with a known target label
// that is not in the support set.
Episode full_query_episode(const LabelMatrix& labels, int64_t target, int64_t k, int64_t n_auxi,
                           const std::vector<int64_t>& aux_pool, Rng& rng,
                           AuxPolicy policy = AuxPolicy::Random,
                           const std::vector<int64_t>& fixed_aux = {});

// Debug dump with molecule and property ids.
std::string episode_to_json(const Episode& ep, const LabelMatrix& labels);

}  // namespace fewmol
