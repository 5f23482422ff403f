#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bpl/parameters.hpp"

namespace bpl {

struct GradCheckBlockReport {
    std::string name;
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckBlockReport> blocks;
    double max_relative_error = 0.0;
    bool passed(double tolerance) const { return max_relative_error < tolerance; }
};

// Compares analytic gradients against central finite differences
// (f(x+h) - f(x-h)) / 2h coordinate by coordinate. compute_gradients must
// populate each block's gradient buffer at the current parameter values (it
// may zero them first); loss must be a pure evaluation with no side effects.
// Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport finite_diff_check(const std::vector<ParameterBlock*>& blocks,
                                  const std::function<double()>& loss,
                                  const std::function<void()>& compute_gradients, double step);

}  // namespace bpl
