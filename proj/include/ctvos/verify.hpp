// Gradient integrity suite: finite-difference checks for every
// differentiable primitive and for the complete training objective (encoders,
// attention, decoder, reconstruction + tagging losses) on a small two-frame
// instance. Everything runs in double; float rounding would drown the
// comparison.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ctvos/gradcheck.hpp"

namespace ctvos {

struct SuiteCheck {
    std::string name;
    GradCheckReport<double> report;
};

std::vector<SuiteCheck> run_gradient_suite();

// The end-to-end objective check alone (encoders + attention + decoder +
// losses on an 8x8 two-frame clip).
SuiteCheck check_full_objective_gradients();

// One line per check; returns overall pass.
bool print_gradient_suite(std::ostream& os);

}  // namespace ctvos
