#include "fewmol/encoder.hpp"

#include "fewmol/errors.hpp"
#include "fewmol/model.hpp"

namespace fewmol {

MoleculeBatch build_molecule_batch(const std::vector<const MoleculeGraph*>& mols,
                                   const EncoderConfig& cfg) {
    if (mols.empty()) throw UsageError("build_molecule_batch: empty molecule list");
    MoleculeBatch b;
    b.offsets.push_back(0);
    std::vector<std::pair<int64_t, int64_t>> edges;
    int64_t base = 0;
    for (const MoleculeGraph* m : mols) {
        for (int64_t t : m->atoms) {
            if (t < 0 || t >= cfg.atom_vocab)
                throw DataError("molecule " + m->id + ": atom type " + std::to_string(t) +
                                " outside vocabulary of " + std::to_string(cfg.atom_vocab));
            b.atom_types.push_back(t);
        }
        for (const auto& bd : m->bonds) {
            if (bd[2] < 0 || bd[2] >= cfg.bond_vocab)
                throw DataError("molecule " + m->id + ": bond type " + std::to_string(bd[2]) +
                                " outside vocabulary of " + std::to_string(cfg.bond_vocab));
            edges.emplace_back(base + bd[0], base + bd[1]);
        }
        base += static_cast<int64_t>(m->atoms.size());
        b.offsets.push_back(base);
    }
    b.adj = std::make_shared<const Csr>(build_csr(base, edges));

    std::vector<double> counts(static_cast<size_t>(base * cfg.bond_vocab), 0.0);
    base = 0;
    for (const MoleculeGraph* m : mols) {
        for (const auto& bd : m->bonds) {
            counts[static_cast<size_t>((base + bd[0]) * cfg.bond_vocab + bd[2])] += 1.0;
            counts[static_cast<size_t>((base + bd[1]) * cfg.bond_vocab + bd[2])] += 1.0;
        }
        base += static_cast<int64_t>(m->atoms.size());
    }
    b.bond_counts = Tensor::from({base, cfg.bond_vocab}, std::move(counts));
    return b;
}

void add_encoder_params(ParameterSet& params, const EncoderConfig& cfg, Rng& rng) {
    params.insert("encoder/atom_embed", init_embedding(cfg.atom_vocab, cfg.d1, rng));
    params.insert("encoder/bond_embed", init_embedding(cfg.bond_vocab, cfg.d1, rng));
    for (int64_t l = 0; l < cfg.layers; ++l) {
        const std::string p = "encoder/l" + std::to_string(l);
        params.insert(p + "/eps", Tensor::scalar(0.0));
        params.insert(p + "/w1", init_linear(cfg.d1, cfg.d1, rng));
        params.insert(p + "/b1", Tensor::zeros({cfg.d1}));
        params.insert(p + "/w2", init_linear(cfg.d1, cfg.d1, rng));
        params.insert(p + "/b2", Tensor::zeros({cfg.d1}));
    }
}

Tensor gin_encode(const MoleculeBatch& batch, const ParameterSet& params, const EncoderConfig& cfg) {
    const int64_t n = static_cast<int64_t>(batch.atom_types.size());
    Tensor h = gather_rows(params.at("encoder/atom_embed"), batch.atom_types);
    const Tensor& bond_embed = params.at("encoder/bond_embed");
    for (int64_t l = 0; l < cfg.layers; ++l) {
        const std::string p = "encoder/l" + std::to_string(l);
        // m_v = (1 + eps) h_v + sum_{u in N(v)} h_u + sum of incident bond embeddings
        Tensor nb = csr_gather_sum(h, batch.adj);
        Tensor bsum = matmul(batch.bond_counts, bond_embed);
        Tensor eps_h = mul(h, broadcast_to(params.at(p + "/eps"), h.shape()));
        Tensor m = add(add(h, eps_h), add(nb, bsum));
        Tensor hidden = relu(add(matmul(m, params.at(p + "/w1")),
                                 broadcast_rows(params.at(p + "/b1"), n)));
        h = add(matmul(hidden, params.at(p + "/w2")), broadcast_rows(params.at(p + "/b2"), n));
    }
    return cfg.readout == Readout::Mean ? segment_mean(h, batch.offsets)
                                        : segment_sum(h, batch.offsets);
}

Tensor encode_molecule(const MoleculeGraph& mol, const ParameterSet& params,
                       const EncoderConfig& cfg) {
    const MoleculeBatch b = build_molecule_batch({&mol}, cfg);
    return row(gin_encode(b, params, cfg), 0);
}

}  // namespace fewmol
