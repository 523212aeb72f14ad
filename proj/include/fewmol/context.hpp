#pragma once

#include <array>
#include <memory>

#include "fewmol/episodes.hpp"
#include "fewmol/params.hpp"
#include "fewmol/tensor.hpp"

namespace fewmol {

// Molecule-property relation types carried on context-graph edges.
enum class Relation : int8_t { Active = 0, Inactive = 1, Unknown = 2 };
constexpr int64_t kNumRelations = 3;

// Heterogeneous bipartite graph over episode molecules and property nodes.
// Node order: molecules (support then query), then properties (target first).
// Every molecule-property pair carries exactly one typed edge.
struct ContextGraph {
    int64_t n_mol = 0;
    int64_t n_support = 0;
    std::vector<int64_t> prop_ids;  // property ids, target first
    std::array<std::shared_ptr<const Csr>, kNumRelations> rel_adj;
    std::array<std::shared_ptr<const std::vector<double>>, kNumRelations> rel_invdeg;
    std::vector<int8_t> relations;  // [n_mol x n_prop] edge relation lookup
    Tensor x;                       // [n_nodes, d1] initial node features

    int64_t n_prop() const { return static_cast<int64_t>(prop_ids.size()); }
    int64_t n_nodes() const { return n_mol + n_prop(); }
    int64_t target_node() const { return n_mol; }
    Relation relation(int64_t mol, int64_t prop) const {
        return static_cast<Relation>(relations[static_cast<size_t>(mol * n_prop() + prop)]);
    }
    int64_t edge_count() const { return n_mol * n_prop(); }
};

// Builds the typed bipartite graph. The (query, target) edges are always
// `unknown`, regardless of what the label matrix holds.
ContextGraph build_context_graph(const Episode& ep, const LabelMatrix& labels,
                                 const Tensor& mol_embed, const Tensor& prop_rows);

struct SubgraphSplit {
    ContextGraph task;  // molecules + target node
    ContextGraph env;   // molecules + auxiliary nodes
};
SubgraphSplit split_subgraphs(const ContextGraph& g);

// Registers context-encoder parameters under "context/".
void add_context_params(ParameterSet& params, int64_t d1, int64_t d2, int64_t layers, Rng& rng);

// Edge-typed message passing; messages use a separate linear transform per
// relation, averaged per relation over incident edges. With zero layers the
// result is the input projection alone.
Tensor context_encode(const ContextGraph& g, const Tensor& x, const ParameterSet& params,
                      int64_t layers);
inline Tensor context_encode(const ContextGraph& g, const ParameterSet& params, int64_t layers) {
    return context_encode(g, g.x, params, layers);
}

std::string context_to_json(const ContextGraph& g, const LabelMatrix& labels);

}  // namespace fewmol
