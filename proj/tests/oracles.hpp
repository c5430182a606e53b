#pragma once

// Independent reference computations for the test suites. Nothing here calls
// into the library's algorithms beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "invrl/env.hpp"

namespace oracle {

/// Removes demand one unit at a time from the bucket with the least shelf life.
inline invrl::InventoryState fifo_unit_by_unit(invrl::InventoryState s, int demand) {
    int* buckets[3] = {&s.s1, &s.s2, &s.s3};
    for (int unit = 0; unit < demand; ++unit) {
        for (int* b : buckets) {
            if (*b > 0) {
                --*b;
                break;
            }
        }
    }
    return s;
}

/// Deterministic tabular MDP: next[s][a], cost[s][a].
struct DeterministicMdp {
    std::vector<std::vector<std::size_t>> next;
    std::vector<std::vector<double>> cost;
};

/// Iterates the cost-minimizing Bellman operator on Q until the sup-norm
/// change drops below `tol`.
inline std::vector<std::vector<double>> q_value_iteration(const DeterministicMdp& mdp, double gamma,
                                                          double tol = 1e-12) {
    const std::size_t ns = mdp.next.size();
    const std::size_t na = mdp.next[0].size();
    std::vector<std::vector<double>> q(ns, std::vector<double>(na, 0.0));
    for (int it = 0; it < 100000; ++it) {
        double delta = 0.0;
        auto fresh = q;
        for (std::size_t s = 0; s < ns; ++s)
            for (std::size_t a = 0; a < na; ++a) {
                const auto& row = q[mdp.next[s][a]];
                fresh[s][a] = mdp.cost[s][a] + gamma * *std::min_element(row.begin(), row.end());
                delta = std::max(delta, std::abs(fresh[s][a] - q[s][a]));
            }
        q = std::move(fresh);
        if (delta < tol) break;
    }
    return q;
}

inline std::vector<std::size_t> argmin_policy(const std::vector<std::vector<double>>& q) {
    std::vector<std::size_t> pi;
    for (const auto& row : q) pi.push_back(static_cast<std::size_t>(std::min_element(row.begin(), row.end()) - row.begin()));
    return pi;
}

/// Upper tail of Binomial(n, 1/2): P(X >= k).
inline double binomial_half_upper_tail(int n, int k) {
    double total = 0.0;
    for (int i = std::max(k, 0); i <= n; ++i)
        total += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - n * std::log(2.0));
    return total;
}

}  // namespace oracle
