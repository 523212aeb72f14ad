#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fewmol/context.hpp"
#include "fewmol/encoder.hpp"
#include "fewmol/errors.hpp"
#include "fewmol/meta.hpp"
#include "fewmol/model.hpp"
#include "test_fixtures.hpp"
#include "testutil.hpp"

using namespace fewmol;
using namespace fewmol::testutil;

namespace {

ParameterSet encoder_only_params(const EncoderConfig& cfg, uint64_t seed) {
    Rng rng(seed);
    ParameterSet p;
    add_encoder_params(p, cfg, rng);
    return p;
}

MoleculeGraph permuted(const MoleculeGraph& m, const std::vector<int64_t>& perm) {
    MoleculeGraph out;
    out.id = m.id + "_perm";
    out.atoms.resize(m.atoms.size());
    for (size_t i = 0; i < m.atoms.size(); ++i)
        out.atoms[static_cast<size_t>(perm[i])] = m.atoms[i];
    for (const auto& b : m.bonds) {
        int64_t u = perm[static_cast<size_t>(b[0])], v = perm[static_cast<size_t>(b[1])];
        if (u > v) std::swap(u, v);
        out.bonds.push_back({u, v, b[2]});
    }
    return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0;
    for (size_t i = 0; i < a.data().size(); ++i)
        m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
    return m;
}

}  // namespace

TEST_CASE("single-atom molecule: readout of one element is the embedding itself") {
    EncoderConfig cfg;
    cfg.d1 = 6;
    cfg.layers = 2;
    cfg.atom_vocab = 4;
    cfg.bond_vocab = 2;
    ParameterSet p = encoder_only_params(cfg, 1);
    MoleculeGraph m;
    m.id = "single";
    m.atoms = {2};
    Tensor mean_out = encode_molecule(m, p, cfg);
    EncoderConfig sum_cfg = cfg;
    sum_cfg.readout = Readout::Sum;
    Tensor sum_out = encode_molecule(m, p, sum_cfg);
    CHECK(max_abs_diff(mean_out, sum_out) == 0.0);
}

TEST_CASE("permutation invariance over random graphs") {
    EncoderConfig cfg;
    cfg.d1 = 8;
    cfg.layers = 3;
    cfg.atom_vocab = 5;
    cfg.bond_vocab = 3;
    ParameterSet p = encoder_only_params(cfg, 2);
    Rng rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        MoleculeGraph m = random_molecule(rng, "g", 3, 8, cfg.atom_vocab, cfg.bond_vocab, 0.5);
        std::vector<int64_t> perm(m.atoms.size());
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(perm);
        MoleculeGraph mp = permuted(m, perm);
        Tensor a = encode_molecule(m, p, cfg);
        Tensor b = encode_molecule(mp, p, cfg);
        CHECK(max_abs_diff(a, b) <= 1e-9);
    }
}

TEST_CASE("isomorphic triangles with different orderings encode identically") {
    EncoderConfig cfg;
    cfg.d1 = 8;
    cfg.layers = 2;
    cfg.atom_vocab = 4;
    cfg.bond_vocab = 2;
    ParameterSet p = encoder_only_params(cfg, 3);
    MoleculeGraph t1;
    t1.id = "t1";
    t1.atoms = {0, 1, 2};
    t1.bonds = {{0, 1, 1}, {1, 2, 0}, {0, 2, 1}};
    // same triangle, canonically relabeled 0->2, 1->0, 2->1
    MoleculeGraph t2;
    t2.id = "t2";
    t2.atoms = {1, 2, 0};
    t2.bonds = {{0, 2, 1}, {0, 1, 0}, {1, 2, 1}};
    Tensor a = encode_molecule(t1, p, cfg);
    Tensor b = encode_molecule(t2, p, cfg);
    CHECK(max_abs_diff(a, b) <= 1e-9);
}

TEST_CASE("gradients reach used embedding rows only") {
    EncoderConfig cfg;
    cfg.d1 = 4;
    cfg.layers = 1;
    cfg.atom_vocab = 6;
    cfg.bond_vocab = 3;
    Rng rng(4);
    ParameterSet base;
    add_encoder_params(base, cfg, rng);
    Tape tape;
    ParameterSet p = base.watched(tape);
    MoleculeGraph m;
    m.id = "g";
    m.atoms = {1, 3};
    m.bonds = {{0, 1, 2}};
    Tensor loss = sum(encode_molecule(m, p, cfg));
    auto grads = param_gradients(tape, loss, p);
    const Tensor& g_atom = grads[0];  // encoder/atom_embed is inserted first
    REQUIRE(base.names()[0] == "encoder/atom_embed");
    auto row_norm = [&](const Tensor& g, int64_t r) {
        double s = 0;
        for (int64_t j = 0; j < cfg.d1; ++j) s += std::fabs(g.at(r, j));
        return s;
    };
    CHECK(row_norm(g_atom, 1) > 0.0);
    CHECK(row_norm(g_atom, 3) > 0.0);
    CHECK(row_norm(g_atom, 0) == 0.0);
    CHECK(row_norm(g_atom, 5) == 0.0);
    REQUIRE(base.names()[1] == "encoder/bond_embed");
    const Tensor& g_bond = grads[1];
    CHECK(row_norm(g_bond, 2) > 0.0);
    CHECK(row_norm(g_bond, 0) == 0.0);
}

TEST_CASE("out-of-vocabulary indices are ingestion errors") {
    EncoderConfig cfg;
    cfg.atom_vocab = 3;
    cfg.bond_vocab = 2;
    MoleculeGraph m;
    m.id = "bad";
    m.atoms = {0, 5};
    CHECK_THROWS_AS(build_molecule_batch({&m}, cfg), DataError);
    MoleculeGraph m2;
    m2.id = "bad2";
    m2.atoms = {0, 1};
    m2.bonds = {{0, 1, 7}};
    CHECK_THROWS_AS(build_molecule_batch({&m2}, cfg), DataError);
}

// ---- context graph ---------------------------------------------------------------

namespace {

struct BuiltContext {
    Dataset ds;
    Episode ep;
    ParameterSet params;
    ModelConfig mc;
    ContextForward fwd;
};

BuiltContext build_fixture(uint64_t seed, int64_t k = 1, int64_t m = 1, int64_t n_auxi = 1) {
    BuiltContext b{tiny_dataset(seed), {}, {}, {}, {}};
    b.mc = tiny_model_config(b.ds, 8, 1, 2);
    Rng prng(seed + 100);
    b.params = init_model_params(b.mc, prng);
    Rng erng(seed + 200);
    b.ep = sample_episode(b.ds.labels, 0, k, m, n_auxi, all_props(b.ds), erng);
    b.fwd = forward_context(b.ep, b.ds, b.params, b.mc);
    return b;
}

}  // namespace

TEST_CASE("context graph counts: K=1, M=1, N_auxi=1") {
    BuiltContext b = build_fixture(10, 1, 1, 1);
    const ContextGraph& g = b.fwd.g;
    CHECK(g.n_mol == 3);  // 2K + M
    CHECK(g.n_prop() == 2);
    CHECK(g.edge_count() == 6);
    CHECK(g.n_nodes() == 5);
}

TEST_CASE("unknown auxiliary labels become unknown edges") {
    Dataset ds = tiny_dataset(11);
    // force a known-unknown pattern on the auxiliary for the first query pick
    ModelConfig mc = tiny_model_config(ds, 8, 1, 1);
    Rng prng(1);
    ParameterSet params = init_model_params(mc, prng);
    Rng erng(5);
    Episode ep = sample_episode(ds.labels, 0, 2, 4, 2, all_props(ds), erng);
    ContextForward f = forward_context(ep, ds, params, mc);
    for (int64_t mi = 0; mi < f.g.n_mol; ++mi) {
        const std::vector<int64_t> rows = ep.molecule_rows();
        for (int64_t pi = 1; pi < f.g.n_prop(); ++pi) {
            const Label lab = ds.labels.get(rows[static_cast<size_t>(mi)],
                                            f.g.prop_ids[static_cast<size_t>(pi)]);
            const Relation rel = f.g.relation(mi, pi);
            if (lab == Label::Unknown) CHECK(rel == Relation::Unknown);
            if (lab == Label::Active) CHECK(rel == Relation::Active);
            if (lab == Label::Inactive) CHECK(rel == Relation::Inactive);
        }
    }
}

TEST_CASE("leakage guard: 1000 fuzzed episodes have no labeled query-target edge") {
    Dataset ds = tiny_dataset(12, 30, 5);
    ModelConfig mc = tiny_model_config(ds, 4, 1, 1);
    Rng prng(2);
    ParameterSet params = init_model_params(mc, prng);
    Rng rng(77);
    int64_t checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int64_t target = rng.below(ds.labels.num_properties());
        if (!ds.labels.eligible(target, 2)) continue;
        Episode ep = sample_episode(ds.labels, target, 2, 3, 2, all_props(ds), rng);
        ContextForward f = forward_context(ep, ds, params, mc);
        for (int64_t mi = f.g.n_support; mi < f.g.n_mol; ++mi) {
            REQUIRE(f.g.relation(mi, 0) == Relation::Unknown);
            ++checked;
        }
    }
    CHECK(checked > 0);
}

TEST_CASE("zero-layer context encoding is the input projection") {
    BuiltContext b = build_fixture(13, 2, 2, 2);
    Tensor h0 = context_encode(b.fwd.g, b.params, 0);
    Tensor proj = matmul(b.fwd.g.x, b.params.at("context/w_in"));
    CHECK(max_abs_diff(h0, proj) == 0.0);
}

TEST_CASE("swapping two auxiliary property nodes permutes rows of H") {
    Dataset ds = tiny_dataset(14);
    ModelConfig mc = tiny_model_config(ds, 8, 1, 2);
    Rng prng(3);
    ParameterSet params = init_model_params(mc, prng);
    Rng erng(8);
    Episode ep = sample_episode(ds.labels, 0, 2, 3, 2, all_props(ds), erng);
    ContextForward f1 = forward_context(ep, ds, params, mc);
    Episode swapped = ep;
    std::swap(swapped.auxiliaries[0], swapped.auxiliaries[1]);
    ContextForward f2 = forward_context(swapped, ds, params, mc);
    const int64_t nm = f1.g.n_mol;
    for (int64_t i = 0; i < nm + 1; ++i)
        for (int64_t j = 0; j < mc.d2; ++j)
            CHECK(std::fabs(f1.h.at(i, j) - f2.h.at(i, j)) <= 1e-9);
    for (int64_t j = 0; j < mc.d2; ++j) {
        CHECK(std::fabs(f1.h.at(nm + 1, j) - f2.h.at(nm + 2, j)) <= 1e-9);
        CHECK(std::fabs(f1.h.at(nm + 2, j) - f2.h.at(nm + 1, j)) <= 1e-9);
    }
}

TEST_CASE("dropping unknown edges equals zeroing the unknown transform") {
    BuiltContext b = build_fixture(15, 2, 3, 2);
    ParameterSet zeroed = b.params;
    for (int64_t l = 0; l < b.mc.ctx_layers; ++l)
        zeroed.set("context/l" + std::to_string(l) + "/rel2_w",
                   Tensor::zeros({b.mc.d2, b.mc.d2}));
    Tensor h_zeroed = context_encode(b.fwd.g, zeroed, b.mc.ctx_layers);

    ContextGraph no_unknown = b.fwd.g;
    no_unknown.rel_adj[2] = std::make_shared<const Csr>(build_csr(b.fwd.g.n_nodes(), {}));
    no_unknown.rel_invdeg[2] = std::make_shared<const std::vector<double>>(
        static_cast<size_t>(b.fwd.g.n_nodes()), 0.0);
    Tensor h_dropped = context_encode(no_unknown, zeroed, b.mc.ctx_layers);
    CHECK(max_abs_diff(h_zeroed, h_dropped) <= 1e-9);
}

TEST_CASE("subgraph split partitions edges and property nodes") {
    BuiltContext b = build_fixture(16, 2, 3, 3);
    SubgraphSplit s = split_subgraphs(b.fwd.g);
    CHECK(s.task.n_prop() == 1);
    CHECK(s.env.n_prop() == 3);
    CHECK(s.task.edge_count() + s.env.edge_count() == b.fwd.g.edge_count());
    for (int64_t mi = 0; mi < b.fwd.g.n_mol; ++mi) {
        CHECK(s.task.relation(mi, 0) == b.fwd.g.relation(mi, 0));
        for (int64_t pi = 0; pi < 3; ++pi)
            CHECK(s.env.relation(mi, pi) == b.fwd.g.relation(mi, pi + 1));
    }
    CHECK(s.task.x.dim(0) == b.fwd.g.n_mol + 1);
    CHECK(s.env.x.dim(0) == b.fwd.g.n_mol + 3);
}

TEST_CASE("subgraph split with no auxiliaries leaves an empty environment") {
    BuiltContext b = build_fixture(17, 1, 2, 0);
    SubgraphSplit s = split_subgraphs(b.fwd.g);
    CHECK(s.env.n_prop() == 0);
    CHECK(s.env.edge_count() == 0);
    CHECK(s.env.x.dim(0) == b.fwd.g.n_mol);
}

TEST_CASE("context debug dump lists typed edges") {
    BuiltContext b = build_fixture(18, 1, 1, 1);
    const std::string j = context_to_json(b.fwd.g, b.ds.labels);
    CHECK(j.find("unknown") != std::string::npos);
    CHECK(j.find("\"n_molecules\":3") != std::string::npos);
}
