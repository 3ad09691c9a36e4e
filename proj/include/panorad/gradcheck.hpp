#pragma once

#include "panorad/nn.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace panorad::nn {

struct GradcheckOptions {
    double step = 1e-4;
    double tolerance = 1e-6;
    /// Entries sampled per parameter tensor; 0 checks every entry.
    int max_entries_per_tensor = 0;
    /// Denominator floor of the relative error, as a fraction of the largest
    /// numeric gradient magnitude in the tensor (0 = pure relative error).
    double relative_floor = 0.0;
    /// Denominator floor in absolute units.
    double absolute_floor = 1e-12;
    /// Multiplies the analytic gradient before comparison (negative controls).
    double analytic_scale = 1.0;
    std::uint64_t seed = 1;
};

struct GradcheckReport {
    double max_relative_error = 0.0;
    std::string worst_entry;
    int checked = 0;
    /// Entries whose +-step perturbation crossed a kink of a piecewise op;
    /// central differences are not valid there, so they are resampled.
    int skipped_kinks = 0;
    bool passed = false;
};

namespace detail {

template <typename Scalar>
std::pair<double, std::uint64_t> evaluate_with_pattern(const std::function<TensorT<Scalar>()>& loss) {
    PatternRecorder& rec = pattern_recorder();
    rec.active = true;
    rec.hash = 0;
    const double value = static_cast<double>(loss().item());
    rec.active = false;
    return {value, rec.hash};
}

}  // namespace detail

/// Compares the reverse-mode gradient of `analytic_loss` w.r.t.
/// `analytic_params` against central finite differences of `numeric_loss`
/// w.r.t. `numeric_params`. The two models must hold identical parameter
/// values; using a double-precision numeric model checks a single-precision
/// backward pass against a clean reference.
template <typename SA, typename SN>
GradcheckReport gradcheck(const std::function<TensorT<SA>()>& analytic_loss,
                          const ParameterList<SA>& analytic_params,
                          const std::function<TensorT<SN>()>& numeric_loss,
                          const ParameterList<SN>& numeric_params, const GradcheckOptions& opts) {
    if (analytic_params.size() != numeric_params.size()) {
        throw UsageError("gradcheck: parameter lists differ in length");
    }
    zero_grad(analytic_params);
    backward(analytic_loss());

    GradcheckReport report;
    const std::uint64_t base_pattern = detail::evaluate_with_pattern<SN>(numeric_loss).second;
    CounterRng rng(Seed{opts.seed}, 0x6C4EC);
    for (std::size_t t = 0; t < numeric_params.size(); ++t) {
        auto param = numeric_params[t].tensor;
        const auto& analytic = analytic_params[t].tensor.grad();
        const Eigen::Index n = param.numel();

        std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            order[static_cast<std::size_t>(i)] = i;
        }
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.below(i)]);
        }
        const std::size_t wanted = opts.max_entries_per_tensor > 0
                                       ? std::min<std::size_t>(order.size(), opts.max_entries_per_tensor)
                                       : order.size();

        struct Sample {
            Eigen::Index index;
            double analytic;
            double numeric;
        };
        std::vector<Sample> samples;
        for (std::size_t k = 0; k < order.size() && samples.size() < wanted; ++k) {
            const Eigen::Index i = order[k];
            const SN original = param.value()[i];
            param.mutable_value()[i] = original + static_cast<SN>(opts.step);
            const auto [fp, pp] = detail::evaluate_with_pattern<SN>(numeric_loss);
            param.mutable_value()[i] = original - static_cast<SN>(opts.step);
            const auto [fm, pm] = detail::evaluate_with_pattern<SN>(numeric_loss);
            param.mutable_value()[i] = original;
            if (pp != base_pattern || pm != base_pattern) {
                ++report.skipped_kinks;
                continue;
            }
            samples.push_back({i, opts.analytic_scale * static_cast<double>(analytic[i]),
                               (fp - fm) / (2 * opts.step)});
        }

        double scale = 0.0;
        for (const auto& s : samples) {
            scale = std::max(scale, std::abs(s.numeric));
        }
        const double floor = std::max(opts.absolute_floor, opts.relative_floor * scale);
        for (const auto& s : samples) {
            const double denom = std::max({std::abs(s.analytic), std::abs(s.numeric), floor});
            const double err = std::abs(s.analytic - s.numeric) / denom;
            ++report.checked;
            if (err > report.max_relative_error) {
                report.max_relative_error = err;
                report.worst_entry = numeric_params[t].name + "[" + std::to_string(s.index) + "]";
            }
        }
    }
    report.passed = report.checked > 0 && report.max_relative_error < opts.tolerance;
    return report;
}

/// Same-precision convenience overload.
template <typename Scalar>
GradcheckReport gradcheck(const std::function<TensorT<Scalar>()>& loss,
                          const ParameterList<Scalar>& params, const GradcheckOptions& opts) {
    return gradcheck<Scalar, Scalar>(loss, params, loss, params, opts);
}

}  // namespace panorad::nn
