#pragma once

#include <functional>
#include <string>

#include "foar/core/nn.hpp"

namespace foar::core {

struct GradCheckReport {
    double max_rel_err = 0.0;
    bool pass = false;
    std::string worst_param;
    std::size_t coords_checked = 0;
};

/// Compares analytic gradients of a scalar loss against central finite
/// differences with step h. The loss closure must rebuild its graph from the
/// current parameter values on every call and be deterministic.
/// max_coords_per_tensor < 0 checks every coordinate; otherwise a seeded
/// sample of coordinates per tensor is used.
template <class S>
GradCheckReport grad_check(const std::function<Tensor<S>()>& loss_fn, ParamStore<S>& params,
                           double tol, long max_coords_per_tensor = -1, double h = 1e-5,
                           std::uint64_t seed = 12345) {
    params.zero_grad();
    Tensor<S> loss = loss_fn();
    if (!loss.all_finite()) throw TrainingError("grad_check: non-finite loss");
    loss.backward();

    std::map<std::string, std::vector<double>> analytic;
    for (auto& [name, p] : params) {
        std::vector<double> g(p.numel());
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] = static_cast<double>(p.grad()[i]);
        analytic[name] = std::move(g);
    }

    // Central differences carry a fixed rounding floor (~eps*|f|/h absolute),
    // so coordinates whose gradient sits far below the gradient's overall
    // scale cannot be resolved relative to themselves at any h. Errors are
    // therefore judged against max(|a|+|fd|, 1e-3 * global gradient scale),
    // the usual gradcheck convention.
    double global_scale = 0.0;
    for (const auto& [name, g] : analytic)
        for (double v : g) global_scale = std::max(global_scale, std::abs(v));

    Rng rng(seed);
    GradCheckReport report;
    for (auto& [name, p] : params) {
        std::vector<std::size_t> coords;
        if (max_coords_per_tensor < 0 ||
            p.numel() <= static_cast<std::size_t>(max_coords_per_tensor)) {
            coords.resize(p.numel());
            for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
        } else {
            for (long i = 0; i < max_coords_per_tensor; ++i)
                coords.push_back(static_cast<std::size_t>(rng.uniform_int(p.numel())));
        }
        for (std::size_t i : coords) {
            S saved = p.value_mut()[i];
            p.value_mut()[i] = static_cast<S>(static_cast<double>(saved) + h);
            double f_plus = static_cast<double>(loss_fn().item());
            p.value_mut()[i] = static_cast<S>(static_cast<double>(saved) - h);
            double f_minus = static_cast<double>(loss_fn().item());
            p.value_mut()[i] = saved;
            double fd = (f_plus - f_minus) / (2.0 * h);
            double a = analytic[name][i];
            double denom = std::max(std::abs(a) + std::abs(fd), 1e-3 * global_scale) + 1e-8;
            double rel = std::abs(a - fd) / denom;
            ++report.coords_checked;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = name + "[" + std::to_string(i) + "]";
            }
        }
    }
    report.pass = report.max_rel_err <= tol;
    return report;
}

}  // namespace foar::core
