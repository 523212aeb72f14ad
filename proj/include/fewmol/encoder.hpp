#pragma once

#include <memory>
#include <span>

#include "fewmol/data.hpp"
#include "fewmol/params.hpp"
#include "fewmol/tensor.hpp"

namespace fewmol {

enum class Readout { Mean, Sum };

struct EncoderConfig {
    int64_t layers = 3;
    int64_t d1 = 32;
    int64_t atom_vocab = 8;
    int64_t bond_vocab = 3;
    Readout readout = Readout::Mean;
};

// Several molecules packed as one block-diagonal graph so a whole episode
// encodes through a handful of matrix ops.
struct MoleculeBatch {
    std::vector<int64_t> atom_types;   // concatenated over molecules
    std::vector<int64_t> offsets;      // per-molecule atom ranges, size S+1
    std::shared_ptr<const Csr> adj;    // block adjacency
    Tensor bond_counts;                // [n_atoms, bond_vocab] incident bond-type counts

    int64_t n_molecules() const { return static_cast<int64_t>(offsets.size()) - 1; }
};

MoleculeBatch build_molecule_batch(const std::vector<const MoleculeGraph*>& mols,
                                   const EncoderConfig& cfg);

// Registers GIN parameters under "encoder/".
void add_encoder_params(ParameterSet& params, const EncoderConfig& cfg, Rng& rng);

// Message passing over the batch; one embedding row per molecule.
Tensor gin_encode(const MoleculeBatch& batch, const ParameterSet& params, const EncoderConfig& cfg);

Tensor encode_molecule(const MoleculeGraph& mol, const ParameterSet& params,
                       const EncoderConfig& cfg);

}  // namespace fewmol
