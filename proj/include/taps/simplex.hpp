#pragma once

#include <cstdint>
#include <vector>

#include "taps/common.hpp"

namespace taps {

// Dense two-phase simplex for the small linear programs used by the
// minimax pair-selection analysis. Maximizes c'x subject to Ax <= b and
// Ax >= b and Ax == b row kinds, x >= 0. Bland's rule, so no cycling.

enum class RowKind { le, ge, eq };

struct LinearProgram {
    std::vector<std::vector<double>> a;  // one row per constraint
    std::vector<double> b;
    std::vector<RowKind> kind;
    std::vector<double> objective;  // maximize
};

struct LpSolution {
    bool feasible = false;
    bool bounded = true;
    double value = 0.0;
    std::vector<double> x;
};

LpSolution solve_lp(const LinearProgram& lp);

}  // namespace taps
