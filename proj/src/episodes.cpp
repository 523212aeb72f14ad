#include "fewmol/episodes.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "fewmol/errors.hpp"

namespace fewmol {

std::vector<int64_t> Episode::molecule_rows() const {
    std::vector<int64_t> rows = support;
    rows.insert(rows.end(), query.begin(), query.end());
    return rows;
}

std::vector<int64_t> Episode::property_ids() const {
    std::vector<int64_t> ids{target};
    ids.insert(ids.end(), auxiliaries.begin(), auxiliaries.end());
    return ids;
}

void Episode::validate(const LabelMatrix& labels) const {
    if (static_cast<int64_t>(support.size()) != 2 * k || support_labels.size() != support.size())
        throw UsageError("episode: support must hold exactly 2K labeled molecules");
    int64_t act = 0, inact = 0;
    for (size_t i = 0; i < support.size(); ++i) {
        if (labels.get(support[i], target) != support_labels[i])
            throw UsageError("episode: support label disagrees with the label matrix");
        if (support_labels[i] == Label::Active) ++act;
        if (support_labels[i] == Label::Inactive) ++inact;
    }
    if (act != k || inact != k) throw UsageError("episode: support is not class-balanced");
    std::set<int64_t> sup(support.begin(), support.end());
    for (int64_t q : query) {
        if (sup.count(q)) throw UsageError("episode: support and query overlap");
        if (!labels.known(q, target)) throw UsageError("episode: query molecule lacks a target label");
    }
    std::set<int64_t> aux(auxiliaries.begin(), auxiliaries.end());
    if (aux.size() != auxiliaries.size()) throw UsageError("episode: duplicate auxiliary");
    if (aux.count(target)) throw UsageError("episode: target listed as auxiliary");
}

std::vector<int64_t> select_auxiliaries(const std::vector<int64_t>& pool, int64_t target,
                                        int64_t n, AuxPolicy policy, Rng& rng,
                                        const std::vector<int64_t>& fixed_list) {
    std::vector<int64_t> candidates;
    for (int64_t p : pool) {
        if (p != target) candidates.push_back(p);
    }
    switch (policy) {
        case AuxPolicy::All:
            return candidates;
        case AuxPolicy::FixedList: {
            for (int64_t p : fixed_list) {
                if (p == target) throw ConfigError("fixed auxiliary list contains the target");
            }
            std::set<int64_t> dedup(fixed_list.begin(), fixed_list.end());
            if (dedup.size() != fixed_list.size())
                throw ConfigError("fixed auxiliary list has duplicates");
            return fixed_list;
        }
        case AuxPolicy::Random: {
            if (n > static_cast<int64_t>(candidates.size()))
                throw ConfigError("requested more auxiliaries than the property pool holds");
            std::vector<int64_t> picks = rng.sample_indices(static_cast<int64_t>(candidates.size()), n);
            std::vector<int64_t> out;
            for (int64_t i : picks) out.push_back(candidates[static_cast<size_t>(i)]);
            return out;
        }
    }
    throw ConfigError("unknown auxiliary policy");
}

namespace {

std::vector<int64_t> draw_from(const std::vector<int64_t>& pool, int64_t k, Rng& rng) {
    std::vector<int64_t> picks = rng.sample_indices(static_cast<int64_t>(pool.size()), k);
    std::vector<int64_t> out;
    for (int64_t i : picks) out.push_back(pool[static_cast<size_t>(i)]);
    return out;
}

Episode sample_core(const LabelMatrix& labels, int64_t target, int64_t k, int64_t n_auxi,
                    const std::vector<int64_t>& aux_pool, Rng& rng, AuxPolicy policy,
                    const std::vector<int64_t>& fixed_aux) {
    if (target < 0 || target >= labels.num_properties())
        throw UsageError("sample_episode: unknown target property");
    const std::vector<int64_t> actives = labels.molecules_with(target, Label::Active);
    const std::vector<int64_t> inactives = labels.molecules_with(target, Label::Inactive);
    if (static_cast<int64_t>(actives.size()) < k || static_cast<int64_t>(inactives.size()) < k)
        throw EligibilityError("property " + labels.property_ids()[static_cast<size_t>(target)] +
                               " lacks " + std::to_string(k) + " known molecules per class");

    Episode ep;
    ep.target = target;
    ep.k = k;
    for (int64_t i : draw_from(actives, k, rng)) {
        ep.support.push_back(i);
        ep.support_labels.push_back(Label::Active);
    }
    for (int64_t i : draw_from(inactives, k, rng)) {
        ep.support.push_back(i);
        ep.support_labels.push_back(Label::Inactive);
    }
    ep.auxiliaries = select_auxiliaries(aux_pool, target, n_auxi, policy, rng, fixed_aux);
    return ep;
}

}  // namespace

Episode sample_episode(const LabelMatrix& labels, int64_t target, int64_t k, int64_t m,
                       int64_t n_auxi, const std::vector<int64_t>& aux_pool, Rng& rng,
                       AuxPolicy policy, const std::vector<int64_t>& fixed_aux) {
    Episode ep = sample_core(labels, target, k, n_auxi, aux_pool, rng, policy, fixed_aux);
    std::set<int64_t> sup(ep.support.begin(), ep.support.end());
    std::vector<int64_t> pool;
    for (int64_t i = 0; i < labels.num_molecules(); ++i) {
        if (labels.known(i, target) && !sup.count(i)) pool.push_back(i);
    }
    if (static_cast<int64_t>(pool.size()) < m)
        throw EligibilityError("property " + labels.property_ids()[static_cast<size_t>(target)] +
                               " lacks " + std::to_string(m) + " labeled query molecules");
    ep.query = draw_from(pool, m, rng);
    ep.validate(labels);
    return ep;
}

Episode full_query_episode(const LabelMatrix& labels, int64_t target, int64_t k, int64_t n_auxi,
                           const std::vector<int64_t>& aux_pool, Rng& rng, AuxPolicy policy,
                           const std::vector<int64_t>& fixed_aux) {
    Episode ep = sample_core(labels, target, k, n_auxi, aux_pool, rng, policy, fixed_aux);
    std::set<int64_t> sup(ep.support.begin(), ep.support.end());
    for (int64_t i = 0; i < labels.num_molecules(); ++i) {
        if (labels.known(i, target) && !sup.count(i)) ep.query.push_back(i);
    }
    if (ep.query.empty())
        throw EligibilityError("no labeled query molecules remain for meta-test");
    ep.validate(labels);
    return ep;
}

std::string episode_to_json(const Episode& ep, const LabelMatrix& labels) {
    nlohmann::ordered_json j;
    j["target"] = labels.property_ids()[static_cast<size_t>(ep.target)];
    j["k"] = ep.k;
    auto sup = nlohmann::ordered_json::array();
    for (size_t i = 0; i < ep.support.size(); ++i) {
        sup.push_back({{"molecule", labels.molecule_ids()[static_cast<size_t>(ep.support[i])]},
                       {"label", ep.support_labels[i] == Label::Active ? 1 : 0}});
    }
    j["support"] = std::move(sup);
    auto q = nlohmann::ordered_json::array();
    for (int64_t i : ep.query) q.push_back(labels.molecule_ids()[static_cast<size_t>(i)]);
    j["query"] = std::move(q);
    auto aux = nlohmann::ordered_json::array();
    for (int64_t a : ep.auxiliaries) aux.push_back(labels.property_ids()[static_cast<size_t>(a)]);
    j["auxiliaries"] = std::move(aux);
    return j.dump();
}

}  // namespace fewmol
