#include "fewmol/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "fewmol/errors.hpp"
#include "fewmol/logging.hpp"
#include "fewmol/stats.hpp"

namespace fewmol {

void MoleculeGraph::validate_and_normalize() {
    const int64_t n = static_cast<int64_t>(atoms.size());
    if (n == 0) throw DataError("molecule " + id + ": no atoms");
    for (int64_t t : atoms) {
        if (t < 0) throw DataError("molecule " + id + ": negative atom type");
    }
    std::set<std::pair<int64_t, int64_t>> seen;
    for (auto& b : bonds) {
        if (b[0] == b[1]) throw DataError("molecule " + id + ": self-loop bond");
        if (b[0] < 0 || b[1] < 0 || b[0] >= n || b[1] >= n)
            throw DataError("molecule " + id + ": bond endpoint out of range");
        if (b[2] < 0) throw DataError("molecule " + id + ": negative bond type");
        if (b[0] > b[1]) std::swap(b[0], b[1]);
        if (!seen.insert({b[0], b[1]}).second)
            throw DataError("molecule " + id + ": duplicate bond");
    }
}

LabelMatrix::LabelMatrix(std::vector<std::string> molecule_ids, std::vector<std::string> property_ids)
    : molecule_ids_(std::move(molecule_ids)),
      property_ids_(std::move(property_ids)),
      entries_(molecule_ids_.size() * property_ids_.size(), static_cast<int8_t>(Label::Unknown)) {}

Label LabelMatrix::get(int64_t mol, int64_t prop) const {
    return static_cast<Label>(entries_[static_cast<size_t>(mol * num_properties() + prop)]);
}

void LabelMatrix::set(int64_t mol, int64_t prop, Label v) {
    entries_[static_cast<size_t>(mol * num_properties() + prop)] = static_cast<int8_t>(v);
}

std::vector<int64_t> LabelMatrix::molecules_with(int64_t prop, Label v) const {
    std::vector<int64_t> out;
    for (int64_t i = 0; i < num_molecules(); ++i) {
        if (get(i, prop) == v) out.push_back(i);
    }
    return out;
}

bool LabelMatrix::eligible(int64_t prop, int64_t k) const {
    int64_t act = 0, inact = 0;
    for (int64_t i = 0; i < num_molecules(); ++i) {
        const Label v = get(i, prop);
        if (v == Label::Active) ++act;
        if (v == Label::Inactive) ++inact;
        if (act >= k && inact >= k) return true;
    }
    return false;
}

int64_t Dataset::max_atom_type() const {
    int64_t m = -1;
    for (const auto& mol : molecules)
        for (int64_t t : mol.atoms) m = std::max(m, t);
    return m;
}

int64_t Dataset::max_bond_type() const {
    int64_t m = -1;
    for (const auto& mol : molecules)
        for (const auto& b : mol.bonds) m = std::max(m, b[2]);
    return m;
}

// ---- files ---------------------------------------------------------------------

std::vector<MoleculeGraph> load_molecules(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open graph file: " + path);
    std::vector<MoleculeGraph> mols;
    std::set<std::string> ids;
    std::string line;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
        }
        MoleculeGraph m;
        try {
            m.id = j.at("id").get<std::string>();
            m.atoms = j.at("atoms").get<std::vector<int64_t>>();
            for (const auto& b : j.at("bonds")) {
                auto v = b.get<std::vector<int64_t>>();
                if (v.size() != 3) throw DataError("bond needs 3 entries");
                m.bonds.push_back({v[0], v[1], v[2]});
            }
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": bad molecule object: " + e.what());
        }
        try {
            m.validate_and_normalize();
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!ids.insert(m.id).second)
            throw DataError(path + ":" + std::to_string(lineno) + ": duplicate molecule id " + m.id);
        mols.push_back(std::move(m));
    }
    return mols;
}

void save_molecules(const std::vector<MoleculeGraph>& mols, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write graph file: " + path);
    for (const auto& m : mols) {
        nlohmann::ordered_json j;
        j["id"] = m.id;
        j["atoms"] = m.atoms;
        auto bonds = nlohmann::ordered_json::array();
        for (const auto& b : m.bonds) bonds.push_back({b[0], b[1], b[2]});
        j["bonds"] = std::move(bonds);
        out << j.dump() << "\n";
    }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

Dataset load_dataset(const std::string& graph_path, const std::string& label_path) {
    Dataset ds;
    ds.molecules = load_molecules(graph_path);
    std::unordered_map<std::string, int64_t> index;
    std::vector<std::string> mol_ids;
    for (const auto& m : ds.molecules) {
        index[m.id] = static_cast<int64_t>(mol_ids.size());
        mol_ids.push_back(m.id);
    }

    std::ifstream in(label_path, std::ios::binary);
    if (!in) throw DataError("cannot open label file: " + label_path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(label_path + ": empty label file");
    std::vector<std::string> header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "molecule")
        throw DataError(label_path + ":1: header must start with 'molecule'");
    std::vector<std::string> props(header.begin() + 1, header.end());

    ds.labels = LabelMatrix(mol_ids, props);
    std::set<std::string> seen;
    int64_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw DataError(label_path + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
        auto it = index.find(cells[0]);
        if (it == index.end())
            throw DataError(label_path + ":" + std::to_string(lineno) + ": unknown molecule id '" +
                            cells[0] + "'");
        if (!seen.insert(cells[0]).second)
            throw DataError(label_path + ":" + std::to_string(lineno) + ": duplicate row for '" +
                            cells[0] + "'");
        for (size_t p = 0; p < props.size(); ++p) {
            const std::string& c = cells[p + 1];
            Label v;
            if (c.empty()) {
                v = Label::Unknown;
            } else if (c == "0") {
                v = Label::Inactive;
            } else if (c == "1") {
                v = Label::Active;
            } else {
                throw DataError(label_path + ":" + std::to_string(lineno) + ": bad label cell '" + c +
                                "'");
            }
            ds.labels.set(it->second, static_cast<int64_t>(p), v);
        }
    }
    return ds;
}

void save_labels(const LabelMatrix& labels, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write label file: " + path);
    out << "molecule";
    for (const auto& p : labels.property_ids()) out << "," << p;
    out << "\n";
    for (int64_t i = 0; i < labels.num_molecules(); ++i) {
        out << labels.molecule_ids()[static_cast<size_t>(i)];
        for (int64_t p = 0; p < labels.num_properties(); ++p) {
            const Label v = labels.get(i, p);
            out << ",";
            if (v == Label::Active) out << "1";
            if (v == Label::Inactive) out << "0";
        }
        out << "\n";
    }
}

void save_similarity(const Matrix& sim, const std::vector<std::string>& property_ids,
                     const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write similarity file: " + path);
    out << "property";
    for (const auto& p : property_ids) out << "," << p;
    out << "\n";
    for (size_t i = 0; i < sim.size(); ++i) {
        out << property_ids[i];
        char buf[32];
        for (double v : sim[i]) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out << "," << buf;
        }
        out << "\n";
    }
}

Matrix load_similarity(const std::string& path, std::vector<std::string>* property_ids) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open similarity file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty similarity file");
    std::vector<std::string> header = split_csv_line(line);
    if (header.size() < 2) throw DataError(path + ":1: bad similarity header");
    std::vector<std::string> props(header.begin() + 1, header.end());
    Matrix sim;
    int64_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw DataError(path + ":" + std::to_string(lineno) + ": bad row width");
        std::vector<double> rowv;
        for (size_t i = 1; i < cells.size(); ++i) {
            try {
                rowv.push_back(std::stod(cells[i]));
            } catch (const std::exception&) {
                throw DataError(path + ":" + std::to_string(lineno) + ": bad number '" + cells[i] + "'");
            }
        }
        sim.push_back(std::move(rowv));
    }
    if (sim.size() != props.size()) throw DataError(path + ": similarity matrix is not square");
    if (property_ids) *property_ids = props;
    return sim;
}

// ---- synthetic generator ----------------------------------------------------------

namespace {

std::vector<double> normalized(std::vector<double> v) {
    double n = 0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n == 0) throw GenerationError("zero weight vector");
    for (double& x : v) x /= n;
    return v;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double ab = 0, aa = 0, bb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0 || bb == 0) return 0.0;
    return ab / std::sqrt(aa * bb);
}

}  // namespace

SyntheticResult generate_synthetic(const SyntheticSpec& spec) {
    if (spec.num_molecules < 4 || spec.num_properties < 1 || spec.num_atom_types < 1 ||
        spec.atoms_min < 1 || spec.atoms_max < spec.atoms_min || spec.edge_prob < 0 ||
        spec.edge_prob > 1 || spec.label_noise < 0 || spec.label_noise > 0.5 ||
        spec.correlated_noise < 0 || spec.correlated_noise > 0.5 || spec.unknown_rate < 0 ||
        spec.unknown_rate >= 1 || spec.num_bond_types < 1)
        throw GenerationError("infeasible synthetic spec");

    Rng rng(spec.seed);

    // Property weight vectors around orthonormal prototypes.
    std::vector<std::vector<double>> weights;
    if (!spec.explicit_weights.empty()) {
        if (static_cast<int64_t>(spec.explicit_weights.size()) != spec.num_properties)
            throw GenerationError("explicit_weights count mismatch");
        for (const auto& w : spec.explicit_weights) {
            if (static_cast<int64_t>(w.size()) != spec.num_atom_types)
                throw GenerationError("explicit weight width mismatch");
            weights.push_back(w);
        }
    } else {
        const int64_t np = std::min(spec.prototypes, spec.num_atom_types);
        if (np < 1) throw GenerationError("at least one prototype required");
        std::vector<std::vector<double>> protos;
        for (int64_t p = 0; p < np; ++p) {
            std::vector<double> v(static_cast<size_t>(spec.num_atom_types));
            for (double& x : v) x = rng.normal(0, 1);
            for (const auto& q : protos) {  // Gram-Schmidt
                double d = 0;
                for (size_t i = 0; i < v.size(); ++i) d += v[i] * q[i];
                for (size_t i = 0; i < v.size(); ++i) v[i] -= d * q[i];
            }
            protos.push_back(normalized(std::move(v)));
        }
        for (int64_t j = 0; j < spec.num_properties; ++j) {
            const auto& base = protos[static_cast<size_t>(j % np)];
            // Unit-norm jitter direction keeps cos(w, prototype) near
            // 1/sqrt(1 + jitter^2) regardless of the vocabulary size.
            std::vector<double> dir(base.size());
            for (double& x : dir) x = rng.normal(0, 1);
            dir = normalized(std::move(dir));
            const int64_t stride = std::max<int64_t>(spec.informative_stride, 1);
            const double jitter = (spec.weight_jitter_alt > 0.0 && j % stride != 0)
                                      ? spec.weight_jitter_alt
                                      : spec.weight_jitter;
            std::vector<double> w(base);
            for (size_t i = 0; i < w.size(); ++i) w[i] += jitter * dir[i];
            weights.push_back(normalized(std::move(w)));
        }
    }

    Matrix sim(static_cast<size_t>(spec.num_properties),
               std::vector<double>(static_cast<size_t>(spec.num_properties)));
    for (int64_t i = 0; i < spec.num_properties; ++i) {
        for (int64_t j = 0; j < spec.num_properties; ++j) {
            sim[static_cast<size_t>(i)][static_cast<size_t>(j)] =
                i == j ? 1.0 : cosine(weights[static_cast<size_t>(i)], weights[static_cast<size_t>(j)]);
        }
    }

    // Molecules.
    Dataset ds;
    std::vector<std::string> mol_ids, prop_ids;
    std::vector<std::vector<double>> counts;
    for (int64_t i = 0; i < spec.num_molecules; ++i) {
        MoleculeGraph m;
        m.id = "m" + std::to_string(i);
        const int64_t n = spec.atoms_min + rng.below(spec.atoms_max - spec.atoms_min + 1);
        for (int64_t a = 0; a < n; ++a) m.atoms.push_back(rng.below(spec.num_atom_types));
        for (int64_t u = 0; u < n; ++u) {
            for (int64_t v = u + 1; v < n; ++v) {
                if (rng.uniform01() < spec.edge_prob)
                    m.bonds.push_back({u, v, rng.below(spec.num_bond_types)});
            }
        }
        std::vector<double> c(static_cast<size_t>(spec.num_atom_types), 0.0);
        for (int64_t t : m.atoms) c[static_cast<size_t>(t)] += 1.0;
        counts.push_back(std::move(c));
        mol_ids.push_back(m.id);
        ds.molecules.push_back(std::move(m));
    }
    for (int64_t j = 0; j < spec.num_properties; ++j) prop_ids.push_back("p" + std::to_string(j));
    ds.labels = LabelMatrix(mol_ids, prop_ids);

    // Labels: threshold at the per-property median score, then noise + masking.
    // A correlated-noise molecule inverts in every property at once.
    std::vector<char> inverted(static_cast<size_t>(spec.num_molecules), 0);
    for (int64_t i = 0; i < spec.num_molecules; ++i)
        inverted[static_cast<size_t>(i)] = rng.uniform01() < spec.correlated_noise ? 1 : 0;
    for (int64_t j = 0; j < spec.num_properties; ++j) {
        std::vector<double> scores(static_cast<size_t>(spec.num_molecules));
        for (int64_t i = 0; i < spec.num_molecules; ++i) {
            double s = 0;
            for (int64_t t = 0; t < spec.num_atom_types; ++t)
                s += weights[static_cast<size_t>(j)][static_cast<size_t>(t)] *
                     counts[static_cast<size_t>(i)][static_cast<size_t>(t)];
            scores[static_cast<size_t>(i)] = s;
        }
        std::vector<double> sorted = scores;
        std::sort(sorted.begin(), sorted.end());
        const size_t h = sorted.size() / 2;
        const double median =
            sorted.size() % 2 == 1 ? sorted[h] : 0.5 * (sorted[h - 1] + sorted[h]);
        for (int64_t i = 0; i < spec.num_molecules; ++i) {
            bool active = scores[static_cast<size_t>(i)] > median;
            if (rng.uniform01() < spec.label_noise) active = !active;
            if (inverted[static_cast<size_t>(i)]) active = !active;
            Label v = active ? Label::Active : Label::Inactive;
            if (rng.uniform01() < spec.unknown_rate) v = Label::Unknown;
            ds.labels.set(i, j, v);
        }
    }

    for (int64_t j = 0; j < spec.num_properties; ++j) {
        if (!ds.labels.eligible(j, spec.min_per_class))
            throw GenerationError("property " + prop_ids[static_cast<size_t>(j)] +
                                  " lacks " + std::to_string(spec.min_per_class) +
                                  " known molecules per class");
    }

    SyntheticResult res{std::move(ds), std::move(sim)};

    // Self-test: the planted structure must be recoverable from the labels.
    // Skipped below 500 molecules, where the empirical cosine estimate is too
    // noisy to rank reliably.
    if (spec.label_noise <= 0.05 && spec.num_properties >= 3 && spec.num_molecules >= 500 &&
        spec.explicit_weights.empty()) {
        const double rho = planted_alignment(res.dataset.labels, res.planted_similarity);
        if (rho < 0.7)
            throw GenerationError("generator self-test failed: label/planted Spearman " +
                                  std::to_string(rho) + " < 0.7");
    }
    return res;
}

Matrix empirical_label_similarity(const LabelMatrix& labels) {
    const int64_t p = labels.num_properties();
    Matrix sim(static_cast<size_t>(p), std::vector<double>(static_cast<size_t>(p), 0.0));
    for (int64_t a = 0; a < p; ++a) {
        sim[static_cast<size_t>(a)][static_cast<size_t>(a)] = 1.0;
        for (int64_t b = a + 1; b < p; ++b) {
            double ab = 0, aa = 0, bb = 0;
            for (int64_t i = 0; i < labels.num_molecules(); ++i) {
                const Label la = labels.get(i, a), lb = labels.get(i, b);
                if (la == Label::Unknown || lb == Label::Unknown) continue;
                const double xa = la == Label::Active ? 1.0 : -1.0;
                const double xb = lb == Label::Active ? 1.0 : -1.0;
                ab += xa * xb;
                aa += xa * xa;
                bb += xb * xb;
            }
            const double v = (aa == 0 || bb == 0) ? 0.0 : ab / std::sqrt(aa * bb);
            sim[static_cast<size_t>(a)][static_cast<size_t>(b)] = v;
            sim[static_cast<size_t>(b)][static_cast<size_t>(a)] = v;
        }
    }
    return sim;
}

double planted_alignment(const LabelMatrix& labels, const Matrix& planted) {
    const Matrix emp = empirical_label_similarity(labels);
    std::vector<double> a, b;
    for (size_t i = 0; i < emp.size(); ++i) {
        for (size_t j = i + 1; j < emp.size(); ++j) {
            a.push_back(planted[i][j]);
            b.push_back(emp[i][j]);
        }
    }
    const auto rho = stats::spearman(a, b);
    return rho.value_or(0.0);
}

}  // namespace fewmol
