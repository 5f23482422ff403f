#include "bpl/grad_check.hpp"

#include <cmath>
#include <stdexcept>

namespace bpl {

GradCheckReport finite_diff_check(const std::vector<ParameterBlock*>& blocks,
                                  const std::function<double()>& loss,
                                  const std::function<void()>& compute_gradients, double step) {
    // Snapshot the analytic gradients before finite differences perturb
    // anything; the loss callback must not depend on gradient buffers.
    compute_gradients();
    std::vector<std::vector<double>> analytic;
    analytic.reserve(blocks.size());
    for (ParameterBlock* b : blocks) analytic.push_back(b->gradient);

    GradCheckReport report;
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        ParameterBlock& block = *blocks[k];
        GradCheckBlockReport br;
        br.name = block.name;
        for (std::size_t i = 0; i < block.size(); ++i) {
            const double saved = block.values[i];
            block.values[i] = saved + step;
            const double up = loss();
            block.values[i] = saved - step;
            const double down = loss();
            block.values[i] = saved;
            if (!std::isfinite(up) || !std::isfinite(down)) {
                throw std::runtime_error("non-finite loss while checking block " + block.name);
            }
            const double numeric = (up - down) / (2.0 * step);
            const double a = analytic[k][i];
            const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
            const double rel = std::fabs(a - numeric) / denom;
            if (rel > br.max_relative_error) {
                br.max_relative_error = rel;
                br.worst_index = i;
                br.analytic_at_worst = a;
                br.numeric_at_worst = numeric;
            }
        }
        report.max_relative_error = std::max(report.max_relative_error, br.max_relative_error);
        report.blocks.push_back(std::move(br));
    }
    // Leave gradients as the analytic values they held on entry.
    for (std::size_t k = 0; k < blocks.size(); ++k) blocks[k]->gradient = analytic[k];
    return report;
}

}  // namespace bpl
