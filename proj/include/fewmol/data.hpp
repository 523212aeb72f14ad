#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fewmol/rng.hpp"

namespace fewmol {

// Ternary molecule-property label.
enum class Label : int8_t { Inactive = 0, Active = 1, Unknown = -1 };

struct MoleculeGraph {
    std::string id;
    std::vector<int64_t> atoms;                 // atom-type indices
    std::vector<std::array<int64_t, 3>> bonds;  // (u, v, bond-type), u < v

    // Normalizes endpoint order and enforces the structural invariants.
    void validate_and_normalize();
};

// Molecules x properties with ternary entries. Row order matches the owning
// dataset's molecule order.
class LabelMatrix {
public:
    LabelMatrix() = default;
    LabelMatrix(std::vector<std::string> molecule_ids, std::vector<std::string> property_ids);

    int64_t num_molecules() const { return static_cast<int64_t>(molecule_ids_.size()); }
    int64_t num_properties() const { return static_cast<int64_t>(property_ids_.size()); }
    const std::vector<std::string>& molecule_ids() const { return molecule_ids_; }
    const std::vector<std::string>& property_ids() const { return property_ids_; }

    Label get(int64_t mol, int64_t prop) const;
    void set(int64_t mol, int64_t prop, Label v);
    bool known(int64_t mol, int64_t prop) const { return get(mol, prop) != Label::Unknown; }

    std::vector<int64_t> molecules_with(int64_t prop, Label v) const;
    // Episode-eligible: at least k known actives and k known inactives.
    bool eligible(int64_t prop, int64_t k) const;

private:
    std::vector<std::string> molecule_ids_;
    std::vector<std::string> property_ids_;
    std::vector<int8_t> entries_;
};

struct Dataset {
    std::vector<MoleculeGraph> molecules;
    LabelMatrix labels;  // rows aligned with `molecules`

    int64_t max_atom_type() const;
    int64_t max_bond_type() const;
};

// ---- file ingestion ----------------------------------------------------------
// Graph file: JSON-lines, one object per molecule: {"id", "atoms", "bonds"}.
// Label file: CSV with header `molecule,<prop>,...`; cells 0, 1, or empty.
// Similarity sidecar: CSV square matrix with a property-id header column/row.

std::vector<MoleculeGraph> load_molecules(const std::string& path);
void save_molecules(const std::vector<MoleculeGraph>& mols, const std::string& path);

Dataset load_dataset(const std::string& graph_path, const std::string& label_path);
void save_labels(const LabelMatrix& labels, const std::string& path);

using Matrix = std::vector<std::vector<double>>;
void save_similarity(const Matrix& sim, const std::vector<std::string>& property_ids,
                     const std::string& path);
Matrix load_similarity(const std::string& path, std::vector<std::string>* property_ids = nullptr);

// ---- synthetic generator ------------------------------------------------------

// Planted-correlation multi-property generator. Property label = threshold of
// w_p . atom-type-count(m) at the per-property median, then flipped with the
// noise rate and masked with the unknown rate. Property weight vectors are
// drawn around a small set of orthonormal prototypes, so the planted cosine
// similarity has block structure.
struct SyntheticSpec {
    int64_t num_molecules = 2000;
    int64_t num_properties = 10;
    int64_t atoms_min = 4;
    int64_t atoms_max = 10;
    double edge_prob = 0.25;
    int64_t num_atom_types = 8;
    int64_t num_bond_types = 3;
    int64_t prototypes = 3;     // weight-vector clusters
    double weight_jitter = 0.2;
    // When positive, properties whose index is not a multiple of
    // informative_stride use this jitter instead, giving the pool a mix of
    // prototype-faithful and weakly related properties.
    double weight_jitter_alt = 0.0;
    int64_t informative_stride = 2;
    double label_noise = 0.0;
    // Fraction of molecules whose labels invert across every property at
    // once. Such inversions are invisible to structure but fully visible to
    // cross-property context.
    double correlated_noise = 0.0;
    double unknown_rate = 0.0;
    int64_t min_per_class = 10;  // feasibility floor per property
    uint64_t seed = 1;
    // When nonempty, used verbatim instead of prototype-drawn weights;
    // each inner vector must have num_atom_types entries.
    std::vector<std::vector<double>> explicit_weights;
};

struct SyntheticResult {
    Dataset dataset;
    Matrix planted_similarity;  // cosine of weight vectors, unit diagonal
};

SyntheticResult generate_synthetic(const SyntheticSpec& spec);

// Spearman correlation between planted similarity and the empirical label
// cosine similarity, over property pairs. The generator's self-test.
double planted_alignment(const LabelMatrix& labels, const Matrix& planted);

// Empirical property similarity: cosine of {-1,+1}-coded label columns over
// co-labeled molecules.
Matrix empirical_label_similarity(const LabelMatrix& labels);

}  // namespace fewmol
