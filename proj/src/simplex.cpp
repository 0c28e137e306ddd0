#include "taps/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace taps {

namespace {

constexpr double kEps = 1e-10;

struct Tableau {
    std::size_t rows = 0;
    std::size_t cols = 0;  // variables, rhs excluded
    std::vector<std::vector<double>> t;  // rows x (cols + 1)
    std::vector<std::size_t> basis;

    void pivot(std::size_t pr, std::size_t pc) {
        double piv = t[pr][pc];
        for (double& v : t[pr]) v /= piv;
        for (std::size_t r = 0; r < rows; ++r) {
            if (r == pr) continue;
            double f = t[r][pc];
            if (std::fabs(f) < kEps) continue;
            for (std::size_t c = 0; c <= cols; ++c) t[r][c] -= f * t[pr][c];
        }
        basis[pr] = pc;
    }

    // Maximizes the given costs with Bland's rule over the allowed columns.
    // Returns false when unbounded.
    bool run(const std::vector<double>& cost, std::size_t allowed_cols) {
        for (;;) {
            std::size_t entering = cols;
            for (std::size_t j = 0; j < allowed_cols; ++j) {
                double rc = cost[j];
                for (std::size_t r = 0; r < rows; ++r) rc -= cost[basis[r]] * t[r][j];
                if (rc > kEps) {
                    entering = j;
                    break;  // Bland: smallest index
                }
            }
            if (entering == cols) return true;

            std::size_t leaving = rows;
            double best_ratio = std::numeric_limits<double>::infinity();
            for (std::size_t r = 0; r < rows; ++r) {
                if (t[r][entering] <= kEps) continue;
                double ratio = t[r][cols] / t[r][entering];
                if (ratio < best_ratio - kEps ||
                    (ratio < best_ratio + kEps &&
                     (leaving == rows || basis[r] < basis[leaving]))) {
                    best_ratio = ratio;
                    leaving = r;
                }
            }
            if (leaving == rows) return false;
            pivot(leaving, entering);
        }
    }
};

}  // namespace

LpSolution solve_lp(const LinearProgram& lp) {
    const std::size_t m = lp.a.size();
    const std::size_t n = lp.objective.size();
    if (lp.b.size() != m || lp.kind.size() != m)
        throw ArgumentError("solve_lp: inconsistent constraint sizes");
    for (const auto& row : lp.a)
        if (row.size() != n) throw ArgumentError("solve_lp: row length mismatch");

    // Normalize to b >= 0, then add one slack/surplus per inequality and
    // one artificial wherever the trivial basis is missing.
    std::vector<std::vector<double>> a = lp.a;
    std::vector<double> b = lp.b;
    std::vector<RowKind> kind = lp.kind;
    for (std::size_t r = 0; r < m; ++r) {
        if (b[r] < 0) {
            for (double& v : a[r]) v = -v;
            b[r] = -b[r];
            if (kind[r] == RowKind::le)
                kind[r] = RowKind::ge;
            else if (kind[r] == RowKind::ge)
                kind[r] = RowKind::le;
        }
    }

    std::size_t n_slack = 0;
    for (RowKind k : kind)
        if (k != RowKind::eq) ++n_slack;
    std::size_t n_art = 0;
    for (RowKind k : kind)
        if (k != RowKind::le) ++n_art;

    Tableau tab;
    tab.rows = m;
    tab.cols = n + n_slack + n_art;
    tab.t.assign(m, std::vector<double>(tab.cols + 1, 0.0));
    tab.basis.assign(m, 0);

    std::size_t slack_at = n;
    std::size_t art_at = n + n_slack;
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) tab.t[r][c] = a[r][c];
        tab.t[r][tab.cols] = b[r];
        if (kind[r] == RowKind::le) {
            tab.t[r][slack_at] = 1.0;
            tab.basis[r] = slack_at++;
        } else if (kind[r] == RowKind::ge) {
            tab.t[r][slack_at] = -1.0;
            ++slack_at;
            tab.t[r][art_at] = 1.0;
            tab.basis[r] = art_at++;
        } else {
            tab.t[r][art_at] = 1.0;
            tab.basis[r] = art_at++;
        }
    }

    LpSolution sol;

    if (n_art > 0) {
        std::vector<double> phase1(tab.cols, 0.0);
        for (std::size_t j = n + n_slack; j < tab.cols; ++j) phase1[j] = -1.0;
        tab.run(phase1, tab.cols);  // bounded below by zero, always returns
        double art_sum = 0.0;
        for (std::size_t r = 0; r < m; ++r)
            if (tab.basis[r] >= n + n_slack) art_sum += tab.t[r][tab.cols];
        if (art_sum > 1e-7) return sol;  // infeasible

        // Drive remaining (degenerate) artificials out of the basis.
        for (std::size_t r = 0; r < m; ++r) {
            if (tab.basis[r] < n + n_slack) continue;
            std::size_t pc = tab.cols;
            for (std::size_t j = 0; j < n + n_slack; ++j)
                if (std::fabs(tab.t[r][j]) > kEps) {
                    pc = j;
                    break;
                }
            if (pc != tab.cols) tab.pivot(r, pc);
            // else: redundant row; the artificial stays basic at zero and
            // is excluded from phase 2's entering columns, so it is inert.
        }
    }

    std::vector<double> phase2(tab.cols, 0.0);
    for (std::size_t j = 0; j < n; ++j) phase2[j] = lp.objective[j];
    if (!tab.run(phase2, n + n_slack)) {
        sol.feasible = true;
        sol.bounded = false;
        return sol;
    }

    sol.feasible = true;
    sol.x.assign(n, 0.0);
    for (std::size_t r = 0; r < m; ++r)
        if (tab.basis[r] < n) sol.x[tab.basis[r]] = tab.t[r][tab.cols];
    sol.value = 0.0;
    for (std::size_t j = 0; j < n; ++j) sol.value += lp.objective[j] * sol.x[j];
    return sol;
}

}  // namespace taps
