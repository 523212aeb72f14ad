#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fewmol/tensor.hpp"

namespace fewmol {

// Named, ordered collection of parameter tensors. Entries are either plain
// constants (the persistent model state) or tape nodes (a functional view
// produced by watching or by a differentiable update), never a mix of tapes.
class ParameterSet {
public:
    void insert(std::string name, Tensor value);
    bool contains(const std::string& name) const;
    const Tensor& at(const std::string& name) const;
    void set(const std::string& name, Tensor value);

    size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    const Tensor& value(size_t i) const { return values_[i]; }
    void set_value(size_t i, Tensor v) { values_[i] = std::move(v); }

    // True when entries are tape nodes derived from base parameters, so a
    // backward pass through them reaches the base.
    bool functional_view() const;

    // Registers every entry as a leaf on the tape.
    ParameterSet watched(Tape& tape) const;

    // Node ids of all entries (usage error when not a view).
    std::vector<int64_t> node_ids() const;

    // Entries whose name matches the predicate, same order.
    ParameterSet filtered(const std::function<bool(const std::string&)>& keep) const;

    // Replaces entries present in `overrides` by name, keeping the rest.
    ParameterSet overlaid(const ParameterSet& overrides) const;

private:
    std::vector<std::string> names_;
    std::vector<Tensor> values_;
};

// Gradients of a scalar loss for every entry of a watched (or functional-view)
// parameter set, in set order. Entries outside the loss's ancestry get zeros.
std::vector<Tensor> param_gradients(Tape& tape, const Tensor& loss, const ParameterSet& params,
                                    bool create_graph = false);

// One gradient step producing a functional view: each entry becomes
// value - lr * grad as tape nodes, so an outer backward differentiates
// through the update. In first-order mode gradients are detached first.
ParameterSet adapted_forward(const ParameterSet& params, const std::vector<Tensor>& grads,
                             double lr, bool first_order = false);

// JSON checkpoint of parameter values: {path -> {shape, row-major data}}
// under "params", with an arbitrary metadata block preserved verbatim.
void save_checkpoint(const ParameterSet& params, const std::string& path,
                     const std::string& meta_json = "{}");
ParameterSet load_checkpoint(const std::string& path, std::string* meta_json = nullptr);

}  // namespace fewmol
