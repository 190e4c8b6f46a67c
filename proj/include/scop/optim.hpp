#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "scop/tensor.hpp"

namespace scop {

template <class T>
struct Parameter {
    std::string name;
    BasicTensor<T> tensor;
};

/// Named trainable tensors. Names are unique; iteration follows insertion order.
template <class T>
class ParameterSet {
   public:
    /// Returns a handle sharing storage with the registered tensor.
    BasicTensor<T> add(const std::string& name, BasicTensor<T> tensor) {
        if (index_.contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
        tensor.node()->requires_grad = true;
        index_.emplace(name, params_.size());
        params_.push_back({name, std::move(tensor)});
        return params_.back().tensor;
    }

    const BasicTensor<T>& get(const std::string& name) const { return params_.at(lookup(name)).tensor; }
    BasicTensor<T>& get(const std::string& name) { return params_.at(lookup(name)).tensor; }
    bool contains(const std::string& name) const { return index_.contains(name); }

    std::size_t size() const { return params_.size(); }
    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }
    Parameter<T>& operator[](std::size_t i) { return params_[i]; }
    const Parameter<T>& operator[](std::size_t i) const { return params_[i]; }

    /// Names in lexicographic order.
    std::vector<std::string> sorted_names() const {
        std::vector<std::string> out;
        for (const auto& [name, _] : index_) out.push_back(name);
        return out;
    }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.tensor.size();
        return n;
    }

    void zero_grad() {
        for (auto& p : params_) p.tensor.zero_grad();
    }

    /// FNV-1a over names, shapes and raw value bytes in lexicographic name order.
    std::uint64_t checksum() const {
        std::uint64_t h = 1469598103934665603ull;
        auto mix = [&h](const void* data, std::size_t n) {
            const auto* b = static_cast<const unsigned char*>(data);
            for (std::size_t i = 0; i < n; ++i) {
                h ^= b[i];
                h *= 1099511628211ull;
            }
        };
        for (const auto& [name, i] : index_) {
            const auto& t = params_[i].tensor;
            mix(name.data(), name.size());
            for (auto e : t.shape()) mix(&e, sizeof e);
            mix(t.values().data(), t.size() * sizeof(T));
        }
        return h;
    }

   private:
    std::size_t lookup(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
        return it->second;
    }

    std::vector<Parameter<T>> params_;
    std::map<std::string, std::size_t> index_;
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

template <class T>
struct AdamState {
    AdamConfig config;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    std::uint64_t step = 0;

    AdamState() = default;
    explicit AdamState(const ParameterSet<T>& params, AdamConfig cfg = {}) : config(cfg) {
        for (const auto& p : params) {
            first_moment.emplace_back(p.tensor.size(), 0.0);
            second_moment.emplace_back(p.tensor.size(), 0.0);
        }
    }
};

/// One bias-corrected Adam update from the gradients held in `params`.
/// Parameters without a gradient buffer are treated as having zero gradient.
template <class T>
void adam_step(ParameterSet<T>& params, AdamState<T>& state, double rate) {
    if (state.first_moment.size() != params.size())
        throw ShapeError("adam_step: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                         " parameters, model has " + std::to_string(params.size()));
    ++state.step;
    const auto& c = state.config;
    const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& tensor = params[k].tensor;
        auto& m = state.first_moment[k];
        auto& v = state.second_moment[k];
        if (m.size() != tensor.size() || v.size() != tensor.size())
            throw ShapeError("adam_step: moment shape mismatch for " + params[k].name);
        auto values = tensor.mutable_values();
        const bool has_grad = tensor.has_grad();
        auto grad = tensor.grad();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double g = has_grad ? static_cast<double>(grad[i]) : 0.0;
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
            if (rate == 0.0) continue;
            const double mhat = m[i] / correction1;
            const double vhat = v[i] / correction2;
            values[i] = static_cast<T>(values[i] - rate * mhat / (std::sqrt(vhat) + c.epsilon));
        }
    }
}

/// Linear warmup to base_rate, constant afterwards.
struct Schedule {
    double base_rate = 2e-5;
    std::uint64_t warmup_steps = 1000;

    void validate() const {
        if (!(base_rate > 0)) throw std::invalid_argument("schedule base rate must be positive");
    }
};

inline double lr_at(std::uint64_t step, const Schedule& s) {
    if (s.warmup_steps == 0) return s.base_rate;
    return s.base_rate * std::min(1.0, static_cast<double>(step) / static_cast<double>(s.warmup_steps));
}

}  // namespace scop
