#include "fewmol/context.hpp"

#include <json.hpp>

#include "fewmol/errors.hpp"
#include "fewmol/model.hpp"

namespace fewmol {

namespace {

Relation label_relation(Label v) {
    switch (v) {
        case Label::Active:
            return Relation::Active;
        case Label::Inactive:
            return Relation::Inactive;
        default:
            return Relation::Unknown;
    }
}

void finalize_adjacency(ContextGraph& g,
                        const std::array<std::vector<std::pair<int64_t, int64_t>>, kNumRelations>& edges) {
    const int64_t n = g.n_nodes();
    for (int64_t r = 0; r < kNumRelations; ++r) {
        g.rel_adj[static_cast<size_t>(r)] =
            std::make_shared<const Csr>(build_csr(n, edges[static_cast<size_t>(r)]));
        auto inv = std::make_shared<std::vector<double>>(static_cast<size_t>(n), 0.0);
        const Csr& adj = *g.rel_adj[static_cast<size_t>(r)];
        for (int64_t v = 0; v < n; ++v) {
            const int64_t deg = adj.offsets[static_cast<size_t>(v) + 1] - adj.offsets[static_cast<size_t>(v)];
            if (deg > 0) (*inv)[static_cast<size_t>(v)] = 1.0 / static_cast<double>(deg);
        }
        g.rel_invdeg[static_cast<size_t>(r)] = std::move(inv);
    }
}

}  // namespace

ContextGraph build_context_graph(const Episode& ep, const LabelMatrix& labels,
                                 const Tensor& mol_embed, const Tensor& prop_rows) {
    if (!mol_embed.defined() || !prop_rows.defined())
        throw UsageError("build_context_graph: missing embeddings");
    ContextGraph g;
    g.n_mol = ep.n_molecules();
    g.n_support = static_cast<int64_t>(ep.support.size());
    g.prop_ids = ep.property_ids();
    if (mol_embed.rank() != 2 || mol_embed.dim(0) != g.n_mol)
        throw UsageError("build_context_graph: molecule embedding rows do not match the episode");
    if (prop_rows.rank() != 2 || prop_rows.dim(0) != g.n_prop())
        throw UsageError("build_context_graph: property embedding rows do not match the episode");

    const std::vector<int64_t> mols = ep.molecule_rows();
    g.relations.resize(static_cast<size_t>(g.n_mol * g.n_prop()));
    std::array<std::vector<std::pair<int64_t, int64_t>>, kNumRelations> edges;
    for (int64_t mi = 0; mi < g.n_mol; ++mi) {
        for (int64_t pi = 0; pi < g.n_prop(); ++pi) {
            Relation rel;
            if (pi == 0) {
                // Target column: support edges carry the support label; query
                // edges are unknown by construction (label-leakage guard).
                rel = mi < g.n_support
                          ? label_relation(ep.support_labels[static_cast<size_t>(mi)])
                          : Relation::Unknown;
            } else {
                rel = label_relation(labels.get(mols[static_cast<size_t>(mi)],
                                                g.prop_ids[static_cast<size_t>(pi)]));
            }
            g.relations[static_cast<size_t>(mi * g.n_prop() + pi)] = static_cast<int8_t>(rel);
            edges[static_cast<size_t>(rel)].emplace_back(mi, g.n_mol + pi);
        }
    }
    finalize_adjacency(g, edges);
    g.x = concat({mol_embed, prop_rows}, 0);

    for (int64_t mi = g.n_support; mi < g.n_mol; ++mi) {
        if (g.relation(mi, 0) != Relation::Unknown)
            throw UsageError("context graph leakage: labeled (query, target) edge");
    }
    return g;
}

SubgraphSplit split_subgraphs(const ContextGraph& g) {
    SubgraphSplit s;

    s.task.n_mol = g.n_mol;
    s.task.n_support = g.n_support;
    s.task.prop_ids = {g.prop_ids[0]};
    s.task.relations.resize(static_cast<size_t>(g.n_mol));
    std::array<std::vector<std::pair<int64_t, int64_t>>, kNumRelations> tedges;
    for (int64_t mi = 0; mi < g.n_mol; ++mi) {
        const Relation rel = g.relation(mi, 0);
        s.task.relations[static_cast<size_t>(mi)] = static_cast<int8_t>(rel);
        tedges[static_cast<size_t>(rel)].emplace_back(mi, g.n_mol);
    }
    finalize_adjacency(s.task, tedges);
    s.task.x = slice(g.x, 0, 0, g.n_mol + 1);

    s.env.n_mol = g.n_mol;
    s.env.n_support = g.n_support;
    s.env.prop_ids.assign(g.prop_ids.begin() + 1, g.prop_ids.end());
    const int64_t n_aux = s.env.n_prop();
    s.env.relations.resize(static_cast<size_t>(g.n_mol * n_aux));
    std::array<std::vector<std::pair<int64_t, int64_t>>, kNumRelations> eedges;
    for (int64_t mi = 0; mi < g.n_mol; ++mi) {
        for (int64_t pi = 0; pi < n_aux; ++pi) {
            const Relation rel = g.relation(mi, pi + 1);
            s.env.relations[static_cast<size_t>(mi * n_aux + pi)] = static_cast<int8_t>(rel);
            eedges[static_cast<size_t>(rel)].emplace_back(mi, g.n_mol + pi);
        }
    }
    finalize_adjacency(s.env, eedges);
    if (n_aux > 0) {
        s.env.x = concat({slice(g.x, 0, 0, g.n_mol), slice(g.x, 0, g.n_mol + 1, n_aux)}, 0);
    } else {
        s.env.x = slice(g.x, 0, 0, g.n_mol);
    }
    return s;
}

void add_context_params(ParameterSet& params, int64_t d1, int64_t d2, int64_t layers, Rng& rng) {
    params.insert("context/w_in", init_linear(d1, d2, rng));
    for (int64_t l = 0; l < layers; ++l) {
        const std::string p = "context/l" + std::to_string(l);
        params.insert(p + "/self_w", init_linear(d2, d2, rng));
        params.insert(p + "/bias", Tensor::zeros({d2}));
        for (int64_t r = 0; r < kNumRelations; ++r)
            params.insert(p + "/rel" + std::to_string(r) + "_w", init_linear(d2, d2, rng));
    }
}

Tensor context_encode(const ContextGraph& g, const Tensor& x, const ParameterSet& params,
                      int64_t layers) {
    if (g.n_nodes() == 0) throw UsageError("context_encode: empty graph");
    const int64_t n = g.n_nodes();
    Tensor h = matmul(x, params.at("context/w_in"));
    for (int64_t l = 0; l < layers; ++l) {
        const std::string p = "context/l" + std::to_string(l);
        Tensor acc = add(matmul(h, params.at(p + "/self_w")),
                         broadcast_rows(params.at(p + "/bias"), n));
        for (int64_t r = 0; r < kNumRelations; ++r) {
            Tensor msg = matmul(h, params.at(p + "/rel" + std::to_string(r) + "_w"));
            Tensor agg = row_scale(csr_gather_sum(msg, g.rel_adj[static_cast<size_t>(r)]),
                                   g.rel_invdeg[static_cast<size_t>(r)]);
            acc = add(acc, agg);
        }
        h = relu(acc);
    }
    return h;
}

std::string context_to_json(const ContextGraph& g, const LabelMatrix& labels) {
    static const char* kRelNames[] = {"active", "inactive", "unknown"};
    nlohmann::ordered_json j;
    j["n_molecules"] = g.n_mol;
    j["n_support"] = g.n_support;
    auto props = nlohmann::ordered_json::array();
    for (int64_t p : g.prop_ids) props.push_back(labels.property_ids()[static_cast<size_t>(p)]);
    j["properties"] = std::move(props);
    auto edges = nlohmann::ordered_json::array();
    for (int64_t mi = 0; mi < g.n_mol; ++mi) {
        for (int64_t pi = 0; pi < g.n_prop(); ++pi) {
            edges.push_back({{"molecule", mi},
                             {"property", labels.property_ids()[static_cast<size_t>(
                                  g.prop_ids[static_cast<size_t>(pi)])]},
                             {"relation", kRelNames[static_cast<size_t>(g.relation(mi, pi))]}});
        }
    }
    j["edges"] = std::move(edges);
    return j.dump();
}

}  // namespace fewmol
