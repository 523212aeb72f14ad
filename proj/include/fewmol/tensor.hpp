#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fewmol/kernels.hpp"

namespace fewmol {

class Tape;

// Dense n-dimensional value of 64-bit floats. Immutable once built; copies
// share storage. A tensor may carry a handle into a Tape, in which case ops
// consuming it record entries for reverse-mode differentiation.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int64_t> shape);
    static Tensor full(std::vector<int64_t> shape, double v);
    static Tensor from(std::vector<int64_t> shape, std::vector<double> data);
    static Tensor scalar(double v);

    bool defined() const { return data_ != nullptr; }
    const std::vector<int64_t>& shape() const { return shape_; }
    int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
    int64_t numel() const;
    int64_t dim(int64_t i) const { return shape_[static_cast<size_t>(i)]; }
    bool is_scalar() const { return numel() == 1; }

    const std::vector<double>& data() const { return *data_; }
    double value() const;                       // scalar payload
    double at(int64_t i) const;                 // flat index
    double at(int64_t i, int64_t j) const;      // rank-2 index

    bool on_tape() const { return node_ >= 0; }
    int64_t node() const { return node_; }
    Tape* tape() const { return tape_; }
    Tensor detached() const;

    bool all_finite() const;

private:
    friend class Tape;
    friend class TapeAccess;

    std::vector<int64_t> shape_;
    std::shared_ptr<const std::vector<double>> data_;
    Tape* tape_ = nullptr;
    int64_t node_ = -1;
};

// Records operations in execution order, which is a topological order of the
// value graph. backward() walks the records once, newest to oldest.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Registers a constant as a differentiable leaf on this tape.
    Tensor watch(const Tensor& t);

    // Gradients of a scalar loss with respect to the given node ids. Nodes
    // outside the loss's ancestry get zero tensors of their recorded shape.
    // With create_graph the returned gradients are tape nodes themselves, so
    // a later backward differentiates through this one.
    std::vector<Tensor> gradients(const Tensor& loss, std::span<const int64_t> wrt,
                                  bool create_graph = false);

    size_t size() const { return nodes_.size(); }
    bool recording() const { return recording_; }

    // Scoped suspension of recording; ops executed inside produce constants.
    class NoRecord {
    public:
        explicit NoRecord(Tape& t) : tape_(t), prev_(t.recording_) { t.recording_ = false; }
        ~NoRecord() { tape_.recording_ = prev_; }

    private:
        Tape& tape_;
        bool prev_;
    };

    // Used by op implementations.
    using BackwardFn = std::function<std::vector<Tensor>(const Tensor& grad_out)>;
    int64_t record(std::vector<int64_t> input_nodes, BackwardFn backward, const Tensor& out_value);

private:
    friend class TapeAccess;

    struct Node {
        std::vector<int64_t> inputs;  // -1 entries mark constant operands
        BackwardFn backward;          // null for leaves
        std::vector<int64_t> shape;   // output shape, for zero gradients
    };
    std::vector<Node> nodes_;
    bool recording_ = true;
};

int64_t shape_numel(const std::vector<int64_t>& shape);

// ---- forward ops -----------------------------------------------------------
// Every op below is differentiable; consuming a taped tensor records a tape
// entry whose backward is itself expressed in these ops, so gradients of any
// order are available.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);

Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor reciprocal(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_rows(const Tensor& a);   // [n,d] -> [d]
Tensor mean_rows(const Tensor& a);  // [n,d] -> [d]
Tensor broadcast_rows(const Tensor& v, int64_t n);          // [d] -> [n,d]
Tensor broadcast_to(const Tensor& s, std::vector<int64_t> shape);  // scalar -> shape

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, std::vector<int64_t> shape);
Tensor concat(const std::vector<Tensor>& parts, int64_t axis);
Tensor slice(const Tensor& a, int64_t axis, int64_t start, int64_t len);
Tensor row(const Tensor& a, int64_t i);  // [n,d] -> [d]
Tensor stack_rows(const std::vector<Tensor>& rows);  // k x [d] -> [k,d]

Tensor gather_rows(const Tensor& a, const std::vector<int64_t>& idx);
Tensor scatter_rows(const Tensor& a, const std::vector<int64_t>& idx, int64_t n);
Tensor segment_sum(const Tensor& a, const std::vector<int64_t>& offsets);
Tensor segment_mean(const Tensor& a, const std::vector<int64_t>& offsets);
Tensor csr_gather_sum(const Tensor& a, std::shared_ptr<const Csr> adj);
Tensor row_scale(const Tensor& a, std::shared_ptr<const std::vector<double>> w);

Tensor dot(const Tensor& a, const Tensor& b);  // sum(mul(a, b))

}  // namespace fewmol
