#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "duet/graph.hpp"

namespace duet::nn {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t entries = 0;
};

// Compares tape gradients against central differences. `eval(true)` must build
// a fresh graph, run backward, accumulate into each Param::grad, and return the
// loss; `eval(false)` must return the loss for the current parameter values
// without touching grads.
inline GradCheckReport check_gradients(const std::function<double(bool)>& eval,
                                       const std::vector<Param*>& params,
                                       double h = 1e-5) {
    for (Param* p : params) p->zero_grad();
    eval(true);

    GradCheckReport report;
    for (Param* p : params) {
        for (std::size_t i = 0; i < p->value.numel(); ++i) {
            double saved = p->value[i];
            p->value[i] = saved + h;
            double up = eval(false);
            p->value[i] = saved - h;
            double down = eval(false);
            p->value[i] = saved;

            double numeric = (up - down) / (2.0 * h);
            double analytic = p->grad[i];
            double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-4});
            double rel = std::fabs(analytic - numeric) / denom;
            ++report.entries;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = p->name;
                report.worst_index = i;
                report.analytic = analytic;
                report.numeric = numeric;
            }
        }
    }
    return report;
}

}  // namespace duet::nn
