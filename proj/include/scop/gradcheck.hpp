#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "scop/optim.hpp"
#include "scop/tensor.hpp"

namespace scop {

struct ParameterError {
    std::string name;
    double max_error = 0;
    std::size_t worst_element = 0;
    double analytic = 0;
    double numeric = 0;
};

struct GradCheckReport {
    std::vector<ParameterError> parameters;
    double max_error = 0;
    std::string worst_parameter;
    std::size_t worst_element = 0;
    double tolerance = 0;

    bool passed() const { return max_error < tolerance; }
};

class NondeterministicForward : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

struct GradCheckOptions {
    double step = 1e-3;
    /// Denominator floor for the relative error. Elements whose analytic and
    /// numeric gradients are both below it are compared absolutely against it;
    /// at step 1e-3 the central-difference truncation error is about 1e-7.
    double floor = 1e-4;
};

/// Compares backprop gradients of `forward()` against central differences,
/// element by element. Relative error is |a - n| / max(|a|, |n|, floor).
template <class T>
GradCheckReport grad_check(const std::function<BasicTensor<T>()>& forward, ParameterSet<T>& params,
                           double tolerance, GradCheckOptions options = {}) {
    auto eval = [&]() -> double { return static_cast<double>(forward().item()); };

    const double base = eval();
    if (eval() != base) throw NondeterministicForward("grad_check: forward is not deterministic");

    params.zero_grad();
    backprop(forward());

    GradCheckReport report;
    report.tolerance = tolerance;
    for (auto& p : params) {
        ParameterError pe{p.name};
        auto values = p.tensor.mutable_values();
        std::vector<double> analytic(values.size(), 0.0);
        if (p.tensor.has_grad())
            for (std::size_t i = 0; i < values.size(); ++i) analytic[i] = p.tensor.grad()[i];
        for (std::size_t i = 0; i < values.size(); ++i) {
            const T saved = values[i];
            values[i] = static_cast<T>(saved + options.step);
            const double up = eval();
            values[i] = static_cast<T>(saved - options.step);
            const double down = eval();
            values[i] = saved;
            const double numeric = (up - down) / (2.0 * options.step);
            const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), options.floor});
            const double err = std::abs(analytic[i] - numeric) / denom;
            if (err > pe.max_error || i == 0) {
                pe.max_error = err;
                pe.worst_element = i;
                pe.analytic = analytic[i];
                pe.numeric = numeric;
            }
        }
        if (pe.max_error > report.max_error || report.worst_parameter.empty()) {
            report.max_error = pe.max_error;
            report.worst_parameter = pe.name;
            report.worst_element = pe.worst_element;
        }
        report.parameters.push_back(std::move(pe));
    }
    params.zero_grad();
    return report;
}

}  // namespace scop
