#include "fewmol/params.hpp"

#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "fewmol/errors.hpp"

namespace fewmol {

void ParameterSet::insert(std::string name, Tensor value) {
    if (contains(name)) throw UsageError("parameter name already present: " + name);
    names_.push_back(std::move(name));
    values_.push_back(std::move(value));
}

bool ParameterSet::contains(const std::string& name) const {
    for (const std::string& n : names_) {
        if (n == name) return true;
    }
    return false;
}

const Tensor& ParameterSet::at(const std::string& name) const {
    for (size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) return values_[i];
    }
    throw UsageError("unknown parameter: " + name);
}

void ParameterSet::set(const std::string& name, Tensor value) {
    for (size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) {
            values_[i] = std::move(value);
            return;
        }
    }
    throw UsageError("unknown parameter: " + name);
}

bool ParameterSet::functional_view() const {
    for (const Tensor& v : values_) {
        if (v.on_tape()) return true;
    }
    return false;
}

ParameterSet ParameterSet::watched(Tape& tape) const {
    ParameterSet out;
    for (size_t i = 0; i < names_.size(); ++i) out.insert(names_[i], tape.watch(values_[i]));
    return out;
}

std::vector<int64_t> ParameterSet::node_ids() const {
    std::vector<int64_t> ids;
    ids.reserve(values_.size());
    for (const Tensor& v : values_) {
        if (!v.on_tape()) throw UsageError("node_ids: parameter set is not a tape view");
        ids.push_back(v.node());
    }
    return ids;
}

ParameterSet ParameterSet::filtered(const std::function<bool(const std::string&)>& keep) const {
    ParameterSet out;
    for (size_t i = 0; i < names_.size(); ++i) {
        if (keep(names_[i])) out.insert(names_[i], values_[i]);
    }
    return out;
}

ParameterSet ParameterSet::overlaid(const ParameterSet& overrides) const {
    ParameterSet out;
    for (size_t i = 0; i < names_.size(); ++i) {
        out.insert(names_[i], overrides.contains(names_[i]) ? overrides.at(names_[i]) : values_[i]);
    }
    return out;
}

std::vector<Tensor> param_gradients(Tape& tape, const Tensor& loss, const ParameterSet& params,
                                    bool create_graph) {
    return tape.gradients(loss, params.node_ids(), create_graph);
}

ParameterSet adapted_forward(const ParameterSet& params, const std::vector<Tensor>& grads,
                             double lr, bool first_order) {
    if (grads.size() != params.size())
        throw UsageError("adapted_forward: gradient list does not match parameter set");
    ParameterSet out;
    for (size_t i = 0; i < params.size(); ++i) {
        if (!grads[i].defined())
            throw UsageError("adapted_forward: missing gradient for " + params.names()[i]);
        const Tensor g = first_order ? grads[i].detached() : grads[i];
        out.insert(params.names()[i], sub(params.value(i), scale(g, lr)));
    }
    return out;
}

void save_checkpoint(const ParameterSet& params, const std::string& path,
                     const std::string& meta_json) {
    nlohmann::ordered_json root;
    root["meta"] = nlohmann::ordered_json::parse(meta_json);
    nlohmann::ordered_json p = nlohmann::ordered_json::object();
    for (size_t i = 0; i < params.size(); ++i) {
        const Tensor& t = params.value(i);
        p[params.names()[i]] = {{"shape", t.shape()}, {"data", t.data()}};
    }
    root["params"] = std::move(p);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out << root.dump() << "\n";
}

ParameterSet load_checkpoint(const std::string& path, std::string* meta_json) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read checkpoint: " + path);
    nlohmann::ordered_json root;
    try {
        in >> root;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed checkpoint " + path + ": " + e.what());
    }
    if (meta_json) *meta_json = root.value("meta", nlohmann::ordered_json::object()).dump();
    ParameterSet out;
    if (!root.contains("params")) throw DataError("checkpoint lacks params block: " + path);
    for (const auto& [name, entry] : root["params"].items()) {
        std::vector<int64_t> shape = entry["shape"].get<std::vector<int64_t>>();
        std::vector<double> data = entry["data"].get<std::vector<double>>();
        out.insert(name, Tensor::from(std::move(shape), std::move(data)));
    }
    return out;
}

}  // namespace fewmol
