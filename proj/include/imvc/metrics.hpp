#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace imvc {

// Counts of samples per (truth class, predicted cluster) cell. Labels are
// densified internally, so ids need not be contiguous.
std::vector<std::vector<std::int64_t>> contingency(std::span<const int> truth,
                                                   std::span<const int> pred);

// Exact maximum-total assignment of a square count matrix. Returns perm with
// perm[column] = assigned row.
std::vector<int> assignment_map(const std::vector<std::vector<std::int64_t>>& counts);

// Clustering accuracy under the optimal cluster-to-class assignment.
double acc(std::span<const int> truth, std::span<const int> pred);

// Normalized mutual information, natural log, 2*I/(H_t + H_p). A partition
// with zero entropy yields 0 unless both sides are the same trivial
// partition, which yields 1.
double nmi(std::span<const int> truth, std::span<const int> pred);

// Adjusted Rand index from contingency pair counts; 0 when the correction
// denominator vanishes.
double ari(std::span<const int> truth, std::span<const int> pred);

// Predicted labels plus scores for one clustering run.
struct ClusterReport {
    std::vector<int> labels;
    std::optional<double> acc, nmi, ari; // present when ground truth exists
    double inertia = 0.0;
    double effective_rank_sub = 0.0;
    double effective_rank_full = 0.0;
};

} // namespace imvc
