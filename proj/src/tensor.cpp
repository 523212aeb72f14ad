#include "fewmol/tensor.hpp"

#include <cmath>
#include <cstring>
#include <deque>

#include "fewmol/errors.hpp"

namespace fewmol {

int64_t shape_numel(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
}

// ---- Tensor -----------------------------------------------------------------

Tensor Tensor::zeros(std::vector<int64_t> shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(std::vector<int64_t> shape, double v) {
    for (int64_t d : shape) {
        if (d <= 0) throw ConfigError("tensor dimensions must be positive");
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::make_shared<const std::vector<double>>(static_cast<size_t>(shape_numel(t.shape_)), v);
    return t;
}

Tensor Tensor::from(std::vector<int64_t> shape, std::vector<double> data) {
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
        throw ConfigError("tensor data length does not match shape");
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::make_shared<const std::vector<double>>(std::move(data));
    return t;
}

Tensor Tensor::scalar(double v) { return from({}, {v}); }

int64_t Tensor::numel() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }

double Tensor::value() const {
    if (!is_scalar()) throw UsageError("value() requires a scalar tensor");
    return (*data_)[0];
}

double Tensor::at(int64_t i) const { return (*data_)[static_cast<size_t>(i)]; }

double Tensor::at(int64_t i, int64_t j) const {
    if (rank() != 2) throw UsageError("at(i,j) requires a rank-2 tensor");
    return (*data_)[static_cast<size_t>(i * shape_[1] + j)];
}

Tensor Tensor::detached() const {
    Tensor t = *this;
    t.tape_ = nullptr;
    t.node_ = -1;
    return t;
}

bool Tensor::all_finite() const {
    if (!data_) return false;
    for (double v : *data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

// ---- Tape -------------------------------------------------------------------

Tensor Tape::watch(const Tensor& t) {
    if (!t.defined()) throw UsageError("watch: undefined tensor");
    Tensor out = t.detached();
    out.tape_ = this;
    nodes_.push_back(Node{{}, nullptr, out.shape_});
    out.node_ = static_cast<int64_t>(nodes_.size()) - 1;
    return out;
}

int64_t Tape::record(std::vector<int64_t> input_nodes, BackwardFn backward, const Tensor& out_value) {
    nodes_.push_back(Node{std::move(input_nodes), std::move(backward), out_value.shape()});
    return static_cast<int64_t>(nodes_.size()) - 1;
}

namespace {

Tape* pick_tape(std::initializer_list<const Tensor*> ts) {
    Tape* tp = nullptr;
    for (const Tensor* t : ts) {
        if (!t->defined()) throw UsageError("op input is undefined");
        if (t->on_tape()) {
            if (tp && tp != t->tape()) throw UsageError("operands live on different tapes");
            tp = t->tape();
        }
    }
    return tp;
}

struct Attach {
    Tape* tape = nullptr;
    std::vector<int64_t> inputs;
};

Attach begin_attach(std::initializer_list<const Tensor*> ts) {
    Attach a{pick_tape(ts), {}};
    if (a.tape && a.tape->recording()) {
        a.inputs.reserve(ts.size());
        for (const Tensor* t : ts) a.inputs.push_back(t->node());
    } else {
        a.tape = nullptr;
    }
    return a;
}

}  // namespace

// Completes an op: adopts the freshly computed value onto the tape (when
// recording) and installs its backward closure, which receives the finished
// taped output so higher-order differentiation sees it.
template <typename MakeBackward>
static Tensor finish_op(const Attach& a, Tensor out, MakeBackward make_backward);

class TapeAccess {
public:
    static Tensor adopt(Tape& tape, const Tensor& value, std::vector<int64_t> inputs) {
        Tensor out = value.detached();
        out.tape_ = &tape;
        out.node_ = tape.record(std::move(inputs), nullptr, out);
        return out;
    }
    static void set_backward(Tape& tape, int64_t node, Tape::BackwardFn fn) {
        tape.nodes_[static_cast<size_t>(node)].backward = std::move(fn);
    }
    static const Tape::BackwardFn& backward_of(const Tape& tape, int64_t node) {
        return tape.nodes_[static_cast<size_t>(node)].backward;
    }
    static const std::vector<int64_t>& inputs_of(const Tape& tape, int64_t node) {
        return tape.nodes_[static_cast<size_t>(node)].inputs;
    }
    static const std::vector<int64_t>& shape_of(const Tape& tape, int64_t node) {
        return tape.nodes_[static_cast<size_t>(node)].shape;
    }
};

template <typename MakeBackward>
static Tensor finish_op(const Attach& a, Tensor out, MakeBackward make_backward) {
    if (!a.tape) return out;
    Tensor taped = TapeAccess::adopt(*a.tape, out, a.inputs);
    TapeAccess::set_backward(*a.tape, taped.node(), make_backward(taped));
    return taped;
}

std::vector<Tensor> Tape::gradients(const Tensor& loss, std::span<const int64_t> wrt,
                                    bool create_graph) {
    if (!loss.defined() || !loss.is_scalar()) throw UsageError("backward requires a scalar loss");
    if (loss.tape() != this || !loss.on_tape()) throw UsageError("loss is not recorded on this tape");

    const int64_t root = loss.node();
    std::vector<char> reachable(static_cast<size_t>(root) + 1, 0);
    std::deque<int64_t> frontier{root};
    reachable[static_cast<size_t>(root)] = 1;
    while (!frontier.empty()) {
        const int64_t id = frontier.front();
        frontier.pop_front();
        for (int64_t in : TapeAccess::inputs_of(*this, id)) {
            if (in >= 0 && !reachable[static_cast<size_t>(in)]) {
                reachable[static_cast<size_t>(in)] = 1;
                frontier.push_back(in);
            }
        }
    }

    std::vector<Tensor> grad(static_cast<size_t>(root) + 1);
    grad[static_cast<size_t>(root)] = Tensor::full(loss.shape(), 1.0);

    std::unique_ptr<NoRecord> pause;
    if (!create_graph) pause = std::make_unique<NoRecord>(*this);

    for (int64_t id = root; id >= 0; --id) {
        if (!reachable[static_cast<size_t>(id)]) continue;
        const Tensor& g = grad[static_cast<size_t>(id)];
        if (!g.defined()) continue;
        const BackwardFn& bw = TapeAccess::backward_of(*this, id);
        if (!bw) continue;
        std::vector<Tensor> input_grads = bw(g);
        const std::vector<int64_t>& inputs = TapeAccess::inputs_of(*this, id);
        for (size_t k = 0; k < inputs.size(); ++k) {
            const int64_t in = inputs[k];
            if (in < 0 || k >= input_grads.size() || !input_grads[k].defined()) continue;
            Tensor& slot = grad[static_cast<size_t>(in)];
            slot = slot.defined() ? add(slot, input_grads[k]) : input_grads[k];
        }
    }

    std::vector<Tensor> out;
    out.reserve(wrt.size());
    for (int64_t id : wrt) {
        if (id < 0 || id > root || !grad[static_cast<size_t>(id)].defined()) {
            if (id < 0 || id >= static_cast<int64_t>(nodes_.size()))
                throw UsageError("gradients: unknown node id");
            out.push_back(Tensor::zeros(TapeAccess::shape_of(*this, id)));
        } else {
            out.push_back(grad[static_cast<size_t>(id)]);
        }
    }
    return out;
}

// ---- op helpers --------------------------------------------------------------

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw ConfigError(msg);
}

Tensor unary_mask(const Tensor& x, bool (*keep)(double)) {
    std::vector<double> m(x.data().size());
    for (size_t i = 0; i < m.size(); ++i) m[i] = keep(x.data()[i]) ? 1.0 : 0.0;
    return Tensor::from(x.shape(), std::move(m));
}

}  // namespace

// ---- elementwise binary -------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    Attach at = begin_attach({&a, &b});
    require(a.shape() == b.shape(), "add: shape mismatch");
    std::vector<double> out(a.data().size());
    kernels::vadd(a.data().data(), b.data().data(), out.data(), static_cast<int64_t>(out.size()));
    return finish_op(at, Tensor::from(a.shape(), std::move(out)), [a, b](const Tensor&) {
        return Tape::BackwardFn([a, b](const Tensor& g) {
            std::vector<Tensor> gs(2);
            if (a.on_tape()) gs[0] = g;
            if (b.on_tape()) gs[1] = g;
            return gs;
        });
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    Attach at = begin_attach({&a, &b});
    require(a.shape() == b.shape(), "sub: shape mismatch");
    std::vector<double> out(a.data().size());
    kernels::vsub(a.data().data(), b.data().data(), out.data(), static_cast<int64_t>(out.size()));
    return finish_op(at, Tensor::from(a.shape(), std::move(out)), [a, b](const Tensor&) {
        return Tape::BackwardFn([a, b](const Tensor& g) {
            std::vector<Tensor> gs(2);
            if (a.on_tape()) gs[0] = g;
            if (b.on_tape()) gs[1] = neg(g);
            return gs;
        });
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    Attach at = begin_attach({&a, &b});
    require(a.shape() == b.shape(), "mul: shape mismatch");
    std::vector<double> out(a.data().size());
    kernels::vmul(a.data().data(), b.data().data(), out.data(), static_cast<int64_t>(out.size()));
    return finish_op(at, Tensor::from(a.shape(), std::move(out)), [a, b](const Tensor&) {
        return Tape::BackwardFn([a, b](const Tensor& g) {
            std::vector<Tensor> gs(2);
            if (a.on_tape()) gs[0] = mul(g, b);
            if (b.on_tape()) gs[1] = mul(g, a);
            return gs;
        });
    });
}

Tensor scale(const Tensor& a, double c) {
    Attach at = begin_attach({&a});
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
    return finish_op(at, Tensor::from(a.shape(), std::move(out)), [c](const Tensor&) {
        return Tape::BackwardFn([c](const Tensor& g) { return std::vector<Tensor>{scale(g, c)}; });
    });
}

Tensor add_scalar(const Tensor& a, double c) {
    Attach at = begin_attach({&a});
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + c;
    return finish_op(at, Tensor::from(a.shape(), std::move(out)), [](const Tensor&) {
        return Tape::BackwardFn([](const Tensor& g) { return std::vector<Tensor>{g}; });
    });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

// ---- elementwise unary --------------------------------------------------------

Tensor sigmoid(const Tensor& a) {
    Attach at = begin_attach({&a});
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) {
        const double x = a.data()[i];
        out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    }
    return finish_op(at, Tensor::from(a.shape(), std::move(out)), [](const Tensor& s) {
        return Tape::BackwardFn([s](const Tensor& g) {
            return std::vector<Tensor>{mul(g, mul(s, add_scalar(neg(s), 1.0)))};
        });
    });
}

Tensor relu(const Tensor& a) {
    Attach at = begin_attach({&a});
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
    Tensor mask = unary_mask(a, [](double x) { return x > 0.0; });
    return finish_op(at, Tensor::from(a.shape(), std::move(out)), [mask](const Tensor&) {
        return Tape::BackwardFn([mask](const Tensor& g) { return std::vector<Tensor>{mul(g, mask)}; });
    });
}

Tensor log(const Tensor& a) {
    Attach at = begin_attach({&a});
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) {
        if (a.data()[i] <= 0.0) throw DomainError("log: input must be positive");
        out[i] = std::log(a.data()[i]);
    }
    return finish_op(at, Tensor::from(a.shape(), std::move(out)), [a](const Tensor&) {
        return Tape::BackwardFn([a](const Tensor& g) {
            return std::vector<Tensor>{mul(g, reciprocal(a))};
        });
    });
}

Tensor exp(const Tensor& a) {
    Attach at = begin_attach({&a});
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.data()[i]);
    return finish_op(at, Tensor::from(a.shape(), std::move(out)), [](const Tensor& e) {
        return Tape::BackwardFn([e](const Tensor& g) { return std::vector<Tensor>{mul(g, e)}; });
    });
}

Tensor square(const Tensor& a) {
    Attach at = begin_attach({&a});
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * a.data()[i];
    return finish_op(at, Tensor::from(a.shape(), std::move(out)), [a](const Tensor&) {
        return Tape::BackwardFn([a](const Tensor& g) {
            return std::vector<Tensor>{mul(g, scale(a, 2.0))};
        });
    });
}

Tensor sqrt(const Tensor& a) {
    Attach at = begin_attach({&a});
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) {
        if (a.data()[i] < 0.0) throw DomainError("sqrt: input must be non-negative");
        out[i] = std::sqrt(a.data()[i]);
    }
    return finish_op(at, Tensor::from(a.shape(), std::move(out)), [](const Tensor& r) {
        return Tape::BackwardFn([r](const Tensor& g) {
            return std::vector<Tensor>{mul(g, scale(reciprocal(r), 0.5))};
        });
    });
}

Tensor reciprocal(const Tensor& a) {
    Attach at = begin_attach({&a});
    std::vector<double> out(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) {
        if (a.data()[i] == 0.0) throw DomainError("reciprocal: input must be nonzero");
        out[i] = 1.0 / a.data()[i];
    }
    return finish_op(at, Tensor::from(a.shape(), std::move(out)), [](const Tensor& r) {
        return Tape::BackwardFn([r](const Tensor& g) {
            return std::vector<Tensor>{neg(mul(g, square(r)))};
        });
    });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    require(lo <= hi, "clamp: lo must not exceed hi");
    Attach at = begin_attach({&a});
    std::vector<double> out(a.data().size());
    std::vector<double> m(a.data().size());
    for (size_t i = 0; i < out.size(); ++i) {
        const double x = a.data()[i];
        out[i] = x < lo ? lo : (x > hi ? hi : x);
        m[i] = (x > lo && x < hi) ? 1.0 : 0.0;
    }
    Tensor mask = Tensor::from(a.shape(), std::move(m));
    return finish_op(at, Tensor::from(a.shape(), std::move(out)), [mask](const Tensor&) {
        return Tape::BackwardFn([mask](const Tensor& g) { return std::vector<Tensor>{mul(g, mask)}; });
    });
}

// ---- reductions / broadcast ---------------------------------------------------

Tensor sum(const Tensor& a) {
    Attach at = begin_attach({&a});
    double s = 0.0;
    for (double v : a.data()) s += v;
    std::vector<int64_t> in_shape = a.shape();
    return finish_op(at, Tensor::scalar(s), [in_shape](const Tensor&) {
        return Tape::BackwardFn([in_shape](const Tensor& g) {
            return std::vector<Tensor>{broadcast_to(g, in_shape)};
        });
    });
}

Tensor mean(const Tensor& a) {
    Attach at = begin_attach({&a});
    double s = 0.0;
    for (double v : a.data()) s += v;
    const double n = static_cast<double>(a.numel());
    std::vector<int64_t> in_shape = a.shape();
    return finish_op(at, Tensor::scalar(s / n), [in_shape, n](const Tensor&) {
        return Tape::BackwardFn([in_shape, n](const Tensor& g) {
            return std::vector<Tensor>{broadcast_to(scale(g, 1.0 / n), in_shape)};
        });
    });
}

Tensor sum_rows(const Tensor& a) {
    require(a.rank() == 2, "sum_rows: rank-2 tensor required");
    Attach at = begin_attach({&a});
    const int64_t n = a.dim(0), d = a.dim(1);
    std::vector<double> out(static_cast<size_t>(d), 0.0);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < d; ++j) out[static_cast<size_t>(j)] += a.at(i, j);
    return finish_op(at, Tensor::from({d}, std::move(out)), [n](const Tensor&) {
        return Tape::BackwardFn([n](const Tensor& g) {
            return std::vector<Tensor>{broadcast_rows(g, n)};
        });
    });
}

Tensor mean_rows(const Tensor& a) {
    require(a.rank() == 2, "mean_rows: rank-2 tensor required");
    Attach at = begin_attach({&a});
    const int64_t n = a.dim(0), d = a.dim(1);
    std::vector<double> out(static_cast<size_t>(d), 0.0);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < d; ++j) out[static_cast<size_t>(j)] += a.at(i, j);
    for (double& v : out) v /= static_cast<double>(n);
    return finish_op(at, Tensor::from({d}, std::move(out)), [n](const Tensor&) {
        return Tape::BackwardFn([n](const Tensor& g) {
            return std::vector<Tensor>{broadcast_rows(scale(g, 1.0 / static_cast<double>(n)), n)};
        });
    });
}

Tensor broadcast_rows(const Tensor& v, int64_t n) {
    require(v.rank() == 1, "broadcast_rows: rank-1 tensor required");
    require(n >= 1, "broadcast_rows: n must be positive");
    Attach at = begin_attach({&v});
    const int64_t d = v.dim(0);
    std::vector<double> out(static_cast<size_t>(n * d));
    for (int64_t i = 0; i < n; ++i)
        std::memcpy(out.data() + i * d, v.data().data(), static_cast<size_t>(d) * sizeof(double));
    return finish_op(at, Tensor::from({n, d}, std::move(out)), [](const Tensor&) {
        return Tape::BackwardFn([](const Tensor& g) { return std::vector<Tensor>{sum_rows(g)}; });
    });
}

Tensor broadcast_to(const Tensor& s, std::vector<int64_t> shape) {
    if (!s.defined() || !s.is_scalar()) throw UsageError("broadcast_to: scalar source required");
    Attach at = begin_attach({&s});
    Tensor out = Tensor::full(shape, s.value());
    return finish_op(at, std::move(out), [](const Tensor&) {
        return Tape::BackwardFn([](const Tensor& g) { return std::vector<Tensor>{sum(g)}; });
    });
}

// ---- linear algebra -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.rank() == 2 && b.rank() == 2, "matmul: rank-2 tensors required");
    require(a.dim(1) == b.dim(0), "matmul: inner dimensions differ");
    Attach at = begin_attach({&a, &b});
    const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(static_cast<size_t>(m * n));
    kernels::matmul(a.data().data(), b.data().data(), out.data(), m, k, n);
    return finish_op(at, Tensor::from({m, n}, std::move(out)), [a, b](const Tensor&) {
        return Tape::BackwardFn([a, b](const Tensor& g) {
            std::vector<Tensor> gs(2);
            if (a.on_tape()) gs[0] = matmul(g, transpose(b));
            if (b.on_tape()) gs[1] = matmul(transpose(a), g);
            return gs;
        });
    });
}

Tensor transpose(const Tensor& a) {
    require(a.rank() == 2, "transpose: rank-2 tensor required");
    Attach at = begin_attach({&a});
    const int64_t m = a.dim(0), n = a.dim(1);
    std::vector<double> out(static_cast<size_t>(m * n));
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) out[static_cast<size_t>(j * m + i)] = a.at(i, j);
    return finish_op(at, Tensor::from({n, m}, std::move(out)), [](const Tensor&) {
        return Tape::BackwardFn([](const Tensor& g) { return std::vector<Tensor>{transpose(g)}; });
    });
}

Tensor reshape(const Tensor& a, std::vector<int64_t> shape) {
    require(shape_numel(shape) == a.numel(), "reshape: element count must be preserved");
    Attach at = begin_attach({&a});
    std::vector<int64_t> orig = a.shape();
    Tensor out = Tensor::from(std::move(shape), a.data());
    return finish_op(at, std::move(out), [orig](const Tensor&) {
        return Tape::BackwardFn([orig](const Tensor& g) {
            return std::vector<Tensor>{reshape(g, orig)};
        });
    });
}

// ---- slicing / assembly ---------------------------------------------------------

namespace {

// Inserts `g` into a zero tensor of shape `full_shape` at [start, start+len)
// along `axis`; the backward of slice.
Tensor embed_slice(const Tensor& g, int64_t axis, int64_t start, std::vector<int64_t> full_shape);

}  // namespace

Tensor slice(const Tensor& a, int64_t axis, int64_t start, int64_t len) {
    require(a.rank() >= 1, "slice: tensor must have rank >= 1");
    require(axis >= 0 && axis < a.rank(), "slice: axis out of range");
    require(start >= 0 && len >= 1 && start + len <= a.dim(axis), "slice: range out of bounds");
    Attach at = begin_attach({&a});

    std::vector<int64_t> out_shape = a.shape();
    out_shape[static_cast<size_t>(axis)] = len;
    int64_t outer = 1, inner = 1;
    for (int64_t i = 0; i < axis; ++i) outer *= a.dim(i);
    for (int64_t i = axis + 1; i < a.rank(); ++i) inner *= a.dim(i);
    const int64_t in_axis = a.dim(axis);

    std::vector<double> out(static_cast<size_t>(shape_numel(out_shape)));
    for (int64_t o = 0; o < outer; ++o) {
        const double* src = a.data().data() + (o * in_axis + start) * inner;
        double* dst = out.data() + o * len * inner;
        std::memcpy(dst, src, static_cast<size_t>(len * inner) * sizeof(double));
    }
    std::vector<int64_t> full_shape = a.shape();
    return finish_op(at, Tensor::from(out_shape, std::move(out)), [axis, start, full_shape](const Tensor&) {
        return Tape::BackwardFn([axis, start, full_shape](const Tensor& g) {
            return std::vector<Tensor>{embed_slice(g, axis, start, full_shape)};
        });
    });
}

namespace {

Tensor embed_slice(const Tensor& g, int64_t axis, int64_t start, std::vector<int64_t> full_shape) {
    Attach at = begin_attach({&g});
    int64_t outer = 1, inner = 1;
    const int64_t rank = static_cast<int64_t>(full_shape.size());
    for (int64_t i = 0; i < axis; ++i) outer *= full_shape[static_cast<size_t>(i)];
    for (int64_t i = axis + 1; i < rank; ++i) inner *= full_shape[static_cast<size_t>(i)];
    const int64_t full_axis = full_shape[static_cast<size_t>(axis)];
    const int64_t len = g.dim(axis);

    std::vector<double> out(static_cast<size_t>(shape_numel(full_shape)), 0.0);
    for (int64_t o = 0; o < outer; ++o) {
        const double* src = g.data().data() + o * len * inner;
        double* dst = out.data() + (o * full_axis + start) * inner;
        std::memcpy(dst, src, static_cast<size_t>(len * inner) * sizeof(double));
    }
    return finish_op(at, Tensor::from(full_shape, std::move(out)), [axis, start, len](const Tensor&) {
        return Tape::BackwardFn([axis, start, len](const Tensor& g2) {
            return std::vector<Tensor>{slice(g2, axis, start, len)};
        });
    });
}

}  // namespace

Tensor concat(const std::vector<Tensor>& parts, int64_t axis) {
    require(!parts.empty(), "concat: at least one part required");
    const int64_t rank = parts[0].rank();
    require(axis >= 0 && axis < rank, "concat: axis out of range");
    std::vector<const Tensor*> ptrs;
    for (const Tensor& p : parts) {
        require(p.rank() == rank, "concat: rank mismatch");
        for (int64_t i = 0; i < rank; ++i)
            require(i == axis || p.dim(i) == parts[0].dim(i), "concat: dimension mismatch");
        ptrs.push_back(&p);
    }
    Tape* tp = nullptr;
    for (const Tensor* p : ptrs) {
        if (p->on_tape()) {
            if (tp && tp != p->tape()) throw UsageError("operands live on different tapes");
            tp = p->tape();
        }
    }
    Attach at;
    at.tape = (tp && tp->recording()) ? tp : nullptr;
    if (at.tape) {
        for (const Tensor* p : ptrs) at.inputs.push_back(p->node());
    }

    std::vector<int64_t> out_shape = parts[0].shape();
    int64_t axis_total = 0;
    for (const Tensor& p : parts) axis_total += p.dim(axis);
    out_shape[static_cast<size_t>(axis)] = axis_total;

    int64_t outer = 1, inner = 1;
    for (int64_t i = 0; i < axis; ++i) outer *= out_shape[static_cast<size_t>(i)];
    for (int64_t i = axis + 1; i < rank; ++i) inner *= out_shape[static_cast<size_t>(i)];

    std::vector<double> out(static_cast<size_t>(shape_numel(out_shape)));
    int64_t pos = 0;
    for (const Tensor& p : parts) {
        const int64_t plen = p.dim(axis);
        for (int64_t o = 0; o < outer; ++o) {
            const double* src = p.data().data() + o * plen * inner;
            double* dst = out.data() + (o * axis_total + pos) * inner;
            std::memcpy(dst, src, static_cast<size_t>(plen * inner) * sizeof(double));
        }
        pos += plen;
    }

    std::vector<int64_t> lens;
    std::vector<char> taped;
    for (const Tensor& p : parts) {
        lens.push_back(p.dim(axis));
        taped.push_back(p.on_tape() ? 1 : 0);
    }
    return finish_op(at, Tensor::from(out_shape, std::move(out)), [axis, lens, taped](const Tensor&) {
        return Tape::BackwardFn([axis, lens, taped](const Tensor& g) {
            std::vector<Tensor> gs(lens.size());
            int64_t off = 0;
            for (size_t k = 0; k < lens.size(); ++k) {
                if (taped[k]) gs[k] = slice(g, axis, off, lens[k]);
                off += lens[k];
            }
            return gs;
        });
    });
}

Tensor row(const Tensor& a, int64_t i) {
    require(a.rank() == 2, "row: rank-2 tensor required");
    return reshape(slice(a, 0, i, 1), {a.dim(1)});
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
    require(!rows.empty(), "stack_rows: at least one row required");
    std::vector<Tensor> mats;
    mats.reserve(rows.size());
    for (const Tensor& r : rows) {
        require(r.rank() == 1, "stack_rows: rank-1 rows required");
        mats.push_back(reshape(r, {1, r.dim(0)}));
    }
    return concat(mats, 0);
}

// ---- gather / scatter / segments -----------------------------------------------

Tensor gather_rows(const Tensor& a, const std::vector<int64_t>& idx) {
    require(a.rank() == 2, "gather_rows: rank-2 tensor required");
    require(!idx.empty(), "gather_rows: empty index list");
    Attach at = begin_attach({&a});
    const int64_t n = a.dim(0), d = a.dim(1);
    std::vector<double> out(idx.size() * static_cast<size_t>(d));
    for (size_t k = 0; k < idx.size(); ++k) {
        require(idx[k] >= 0 && idx[k] < n, "gather_rows: index out of range");
        std::memcpy(out.data() + k * static_cast<size_t>(d), a.data().data() + idx[k] * d,
                    static_cast<size_t>(d) * sizeof(double));
    }
    return finish_op(at, Tensor::from({static_cast<int64_t>(idx.size()), d}, std::move(out)),
                     [idx, n](const Tensor&) {
                         return Tape::BackwardFn([idx, n](const Tensor& g) {
                             return std::vector<Tensor>{scatter_rows(g, idx, n)};
                         });
                     });
}

Tensor scatter_rows(const Tensor& a, const std::vector<int64_t>& idx, int64_t n) {
    require(a.rank() == 2, "scatter_rows: rank-2 tensor required");
    require(static_cast<int64_t>(idx.size()) == a.dim(0), "scatter_rows: index count mismatch");
    Attach at = begin_attach({&a});
    const int64_t d = a.dim(1);
    std::vector<double> out(static_cast<size_t>(n * d), 0.0);
    for (size_t k = 0; k < idx.size(); ++k) {
        require(idx[k] >= 0 && idx[k] < n, "scatter_rows: index out of range");
        double* dst = out.data() + idx[k] * d;
        const double* src = a.data().data() + static_cast<int64_t>(k) * d;
        for (int64_t j = 0; j < d; ++j) dst[j] += src[j];
    }
    return finish_op(at, Tensor::from({n, d}, std::move(out)), [idx](const Tensor&) {
        return Tape::BackwardFn([idx](const Tensor& g) {
            return std::vector<Tensor>{gather_rows(g, idx)};
        });
    });
}

namespace {

void check_offsets(const std::vector<int64_t>& offsets, int64_t n) {
    require(offsets.size() >= 2 && offsets.front() == 0 && offsets.back() == n,
            "segments: offsets must start at 0 and end at row count");
    for (size_t s = 0; s + 1 < offsets.size(); ++s)
        require(offsets[s] < offsets[s + 1], "segments: every segment must be non-empty");
}

// Expands [S,d] to [n,d], repeating each segment's row; divides by segment
// length when mean is set. The backward partner of the segment reductions.
Tensor segment_expand(const Tensor& g, const std::vector<int64_t>& offsets, bool mean_mode) {
    Attach at = begin_attach({&g});
    const int64_t d = g.dim(1);
    const int64_t n = offsets.back();
    std::vector<double> out(static_cast<size_t>(n * d));
    for (size_t s = 0; s + 1 < offsets.size(); ++s) {
        const double w = mean_mode ? 1.0 / static_cast<double>(offsets[s + 1] - offsets[s]) : 1.0;
        for (int64_t i = offsets[s]; i < offsets[s + 1]; ++i)
            for (int64_t j = 0; j < d; ++j)
                out[static_cast<size_t>(i * d + j)] = g.at(static_cast<int64_t>(s), j) * w;
    }
    return finish_op(at, Tensor::from({n, d}, std::move(out)), [offsets, mean_mode](const Tensor&) {
        return Tape::BackwardFn([offsets, mean_mode](const Tensor& g2) {
            return std::vector<Tensor>{mean_mode ? segment_mean(g2, offsets) : segment_sum(g2, offsets)};
        });
    });
}

Tensor segment_reduce(const Tensor& a, const std::vector<int64_t>& offsets, bool mean_mode) {
    require(a.rank() == 2, "segments: rank-2 tensor required");
    check_offsets(offsets, a.dim(0));
    Attach at = begin_attach({&a});
    const int64_t d = a.dim(1);
    const int64_t S = static_cast<int64_t>(offsets.size()) - 1;
    std::vector<double> out(static_cast<size_t>(S * d), 0.0);
    for (int64_t s = 0; s < S; ++s) {
        for (int64_t i = offsets[static_cast<size_t>(s)]; i < offsets[static_cast<size_t>(s) + 1]; ++i)
            for (int64_t j = 0; j < d; ++j) out[static_cast<size_t>(s * d + j)] += a.at(i, j);
        if (mean_mode) {
            const double len =
                static_cast<double>(offsets[static_cast<size_t>(s) + 1] - offsets[static_cast<size_t>(s)]);
            for (int64_t j = 0; j < d; ++j) out[static_cast<size_t>(s * d + j)] /= len;
        }
    }
    return finish_op(at, Tensor::from({S, d}, std::move(out)), [offsets, mean_mode](const Tensor&) {
        return Tape::BackwardFn([offsets, mean_mode](const Tensor& g) {
            return std::vector<Tensor>{segment_expand(g, offsets, mean_mode)};
        });
    });
}

}  // namespace

Tensor segment_sum(const Tensor& a, const std::vector<int64_t>& offsets) {
    return segment_reduce(a, offsets, false);
}

Tensor segment_mean(const Tensor& a, const std::vector<int64_t>& offsets) {
    return segment_reduce(a, offsets, true);
}

// csr_gather_sum requires a symmetric adjacency; its backward reuses the same
// CSR, which is only the transpose when the graph is undirected.
Tensor csr_gather_sum(const Tensor& a, std::shared_ptr<const Csr> adj) {
    require(a.rank() == 2, "csr_gather_sum: rank-2 tensor required");
    require(adj && adj->n() == a.dim(0), "csr_gather_sum: adjacency size mismatch");
    Attach at = begin_attach({&a});
    const int64_t d = a.dim(1);
    std::vector<double> out(static_cast<size_t>(a.dim(0) * d));
    kernels::csr_gather_sum(a.data().data(), out.data(), *adj, d);
    return finish_op(at, Tensor::from(a.shape(), std::move(out)), [adj](const Tensor&) {
        return Tape::BackwardFn([adj](const Tensor& g) {
            return std::vector<Tensor>{csr_gather_sum(g, adj)};
        });
    });
}

Tensor row_scale(const Tensor& a, std::shared_ptr<const std::vector<double>> w) {
    require(a.rank() == 2, "row_scale: rank-2 tensor required");
    require(w && static_cast<int64_t>(w->size()) == a.dim(0), "row_scale: weight count mismatch");
    Attach at = begin_attach({&a});
    const int64_t n = a.dim(0), d = a.dim(1);
    std::vector<double> out(static_cast<size_t>(n * d));
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < d; ++j)
            out[static_cast<size_t>(i * d + j)] = a.at(i, j) * (*w)[static_cast<size_t>(i)];
    return finish_op(at, Tensor::from(a.shape(), std::move(out)), [w](const Tensor&) {
        return Tape::BackwardFn([w](const Tensor& g) {
            return std::vector<Tensor>{row_scale(g, w)};
        });
    });
}

Tensor dot(const Tensor& a, const Tensor& b) { return sum(mul(a, b)); }

}  // namespace fewmol
