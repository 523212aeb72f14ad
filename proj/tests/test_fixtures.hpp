#pragma once

#include <string>
#include <vector>

#include "fewmol/data.hpp"
#include "fewmol/episodes.hpp"
#include "fewmol/meta.hpp"
#include "fewmol/model.hpp"

namespace fewmol::testutil {

// Hand-built label matrix over generic ids m0..m{n-1} / p0..p{k-1}.
inline LabelMatrix make_labels(int64_t n_mol, int64_t n_prop) {
    std::vector<std::string> mols, props;
    for (int64_t i = 0; i < n_mol; ++i) mols.push_back("m" + std::to_string(i));
    for (int64_t p = 0; p < n_prop; ++p) props.push_back("p" + std::to_string(p));
    return LabelMatrix(std::move(mols), std::move(props));
}

// Random molecule over the vocabularies; always at least one atom.
inline MoleculeGraph random_molecule(Rng& rng, const std::string& id, int64_t min_atoms,
                                     int64_t max_atoms, int64_t atom_vocab, int64_t bond_vocab,
                                     double edge_prob = 0.4) {
    MoleculeGraph m;
    m.id = id;
    const int64_t n = min_atoms + rng.below(max_atoms - min_atoms + 1);
    for (int64_t i = 0; i < n; ++i) m.atoms.push_back(rng.below(atom_vocab));
    for (int64_t u = 0; u < n; ++u)
        for (int64_t v = u + 1; v < n; ++v)
            if (rng.uniform01() < edge_prob) m.bonds.push_back({u, v, rng.below(bond_vocab)});
    return m;
}

// Tiny dataset with random labels: every property gets a balanced block of
// known labels plus some unknowns, so episodes of small K always exist.
inline Dataset tiny_dataset(uint64_t seed, int64_t n_mol = 24, int64_t n_prop = 4,
                            int64_t atom_vocab = 5, int64_t bond_vocab = 3,
                            double unknown_rate = 0.15) {
    Rng rng(seed);
    Dataset ds;
    for (int64_t i = 0; i < n_mol; ++i)
        ds.molecules.push_back(
            random_molecule(rng, "m" + std::to_string(i), 2, 6, atom_vocab, bond_vocab));
    ds.labels = make_labels(n_mol, n_prop);
    for (int64_t p = 0; p < n_prop; ++p) {
        for (int64_t i = 0; i < n_mol; ++i) {
            // first half active-leaning, second half inactive-leaning
            Label v = (i % 2 == 0) ? Label::Active : Label::Inactive;
            if (rng.uniform01() < 0.3) v = v == Label::Active ? Label::Inactive : Label::Active;
            if (rng.uniform01() < unknown_rate) v = Label::Unknown;
            ds.labels.set(i, p, v);
        }
        // guarantee eligibility at K=3
        for (int64_t i = 0; i < 3; ++i) ds.labels.set(i, p, Label::Active);
        for (int64_t i = 3; i < 6; ++i) ds.labels.set(i, p, Label::Inactive);
    }
    return ds;
}

inline ModelConfig tiny_model_config(const Dataset& ds, int64_t d = 8, int64_t enc_layers = 2,
                                     int64_t ctx_layers = 2) {
    ModelConfig mc;
    mc.enc.d1 = d;
    mc.enc.layers = enc_layers;
    mc.enc.atom_vocab = std::max<int64_t>(ds.max_atom_type() + 1, 1);
    mc.enc.bond_vocab = std::max<int64_t>(ds.max_bond_type() + 1, 1);
    mc.d2 = d;
    mc.ctx_layers = ctx_layers;
    mc.n_properties = ds.labels.num_properties();
    return mc;
}

inline std::vector<int64_t> all_props(const Dataset& ds) {
    std::vector<int64_t> out;
    for (int64_t p = 0; p < ds.labels.num_properties(); ++p) out.push_back(p);
    return out;
}

}  // namespace fewmol::testutil
