#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "storalloc/allocation.hpp"
#include "storalloc/instance.hpp"

namespace storalloc {

enum class Congestion { quadratic, hamming };

/// Parameters of the separable reward functional: per-row allocation and
/// aggregation rewards, per-resource congestion cost.
struct PotentialSpec {
    double c_all = 0.0;
    double c_agg = 0.0;
    std::vector<double> c_con;  // one entry per resource, > 0
    Congestion congestion = Congestion::quadratic;

    static PotentialSpec uniform(int n, double c_all, double c_agg, double c_con,
                                 Congestion variant = Congestion::quadratic) {
        PotentialSpec s;
        s.c_all = c_all;
        s.c_agg = c_agg;
        s.c_con.assign(static_cast<std::size_t>(n), c_con);
        s.congestion = variant;
        return s;
    }

    bool valid(int n) const {
        if (static_cast<int>(c_con.size()) != n) return false;
        for (double c : c_con)
            if (!(c > 0.0)) return false;
        return true;
    }
};

// g_y: congestion cost of one resource, from its column aggregates.
inline double resource_cost(const PotentialSpec& spec, int y, int col_sum, int col_support) {
    if (spec.congestion == Congestion::quadratic)
        return -spec.c_con[y] * static_cast<double>(col_sum) * col_sum;
    return -spec.c_con[y] * static_cast<double>(col_support);
}

// f_x: one unit's row reward.
inline double row_reward(const PotentialSpec& spec, int row_sum, long long row_sq_sum) {
    return spec.c_all * static_cast<double>(row_sum) + spec.c_agg * static_cast<double>(row_sq_sum);
}

/// Psi(W) = sum_x f_x + sum_y g_y, evaluated from the matrix caches.
inline double psi(const Instance& inst, const PotentialSpec& spec, const AllocationMatrix& w) {
    double total = 0.0;
    for (int x = 0; x < inst.n; ++x) total += row_reward(spec, w.row_sum(x), w.row_sq_sum(x));
    for (int y = 0; y < inst.n; ++y) total += resource_cost(spec, y, w.col_sum(y), w.col_support(y));
    return total;
}

/// Same value recomputed from raw cells, ignoring the caches. Cross-check API.
inline double psi_recompute(const Instance& inst, const PotentialSpec& spec,
                            const AllocationMatrix& w) {
    double total = 0.0;
    for (int x = 0; x < inst.n; ++x) {
        long long s = 0, sq = 0;
        for (int y = 0; y < inst.n; ++y) {
            const long long v = w.at(x, y);
            s += v;
            sq += v * v;
        }
        total += spec.c_all * static_cast<double>(s) + spec.c_agg * static_cast<double>(sq);
    }
    for (int y = 0; y < inst.n; ++y) {
        long long s = 0, supp = 0;
        for (int x = 0; x < inst.n; ++x) {
            s += w.at(x, y);
            supp += w.at(x, y) > 0 ? 1 : 0;
        }
        total += spec.congestion == Congestion::quadratic
                     ? -spec.c_con[y] * static_cast<double>(s) * static_cast<double>(s)
                     : -spec.c_con[y] * static_cast<double>(supp);
    }
    return total;
}

/// U_x(W): own row reward plus congestion of the resources in N^-_x.
inline double utility(const Instance& inst, const PotentialSpec& spec, const AllocationMatrix& w,
                      int x) {
    double u = row_reward(spec, w.row_sum(x), w.row_sq_sum(x));
    for (int y : inst.in[x]) u += resource_cost(spec, y, w.col_sum(y), w.col_support(y));
    return u;
}

/// C^all large enough that shrinking an allocation always hurts: three times
/// the quantity bounded in the monotonicity condition, which needs only twice.
inline double default_c_all(const std::vector<int>& alpha, const std::vector<int>& beta,
                            double c_agg, double c_con_max) {
    const int a_max = alpha.empty() ? 0 : *std::max_element(alpha.begin(), alpha.end());
    const int b_max = beta.empty() ? 0 : *std::max_element(beta.begin(), beta.end());
    return 3.0 * (a_max * std::abs(c_agg) + b_max * c_con_max);
}

inline double default_c_all(const Instance& inst, double c_agg, double c_con_max) {
    return default_c_all(inst.alpha, inst.beta, c_agg, c_con_max);
}

/// Maximum of Psi over allocation states, in closed form. Applies only to
/// homogeneous demand/capacity on an undirected regular graph with the
/// quadratic congestion term and uniform C^con; in that regime the optimum is
/// a matching allocation (C^agg >= 0) or the k/(k+1) spread over neighbors
/// (C^agg < 0).
inline std::optional<double> closed_form_optimum(const Instance& inst, const PotentialSpec& spec) {
    if (spec.congestion != Congestion::quadratic) return std::nullopt;
    if (inst.n == 0) return std::nullopt;
    if (!inst.homogeneous_alpha() || !inst.homogeneous_beta()) return std::nullopt;
    const double c_con = spec.c_con.empty() ? 0.0 : spec.c_con[0];
    for (double c : spec.c_con)
        if (c != c_con) return std::nullopt;
    const int s = inst.regular_degree();
    if (s < 0) return std::nullopt;
    const int a = inst.alpha[0], b = inst.beta[0];
    if (a > b) return std::nullopt;
    if (a == 0) return 0.0;
    if (s == 0) return std::nullopt;

    long long row_sq;
    if (spec.c_agg >= 0.0) {
        row_sq = static_cast<long long>(a) * a;  // all data on one resource
    } else {
        const int k = a / s, r = a % s;
        row_sq = static_cast<long long>(s - r) * k * k + static_cast<long long>(r) * (k + 1) * (k + 1);
    }
    const double per_unit = spec.c_all * a + spec.c_agg * static_cast<double>(row_sq) -
                            c_con * static_cast<double>(a) * a;
    return inst.n * per_unit;
}

}  // namespace storalloc
