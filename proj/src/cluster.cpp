#include "imvc/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "imvc/error.hpp"
#include "imvc/rng.hpp"

namespace imvc {

namespace {

struct RunOutcome {
    std::vector<int> labels;
    Matrix centroids;
    double inertia = std::numeric_limits<double>::infinity();
    int iterations = 0;
    std::vector<double> history;
};

Matrix kmeanspp_init(const Matrix& x, int k, Rng& rng) {
    const std::size_t n = x.rows();
    Matrix centroids(k, x.cols());
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());

    std::size_t first = rng.below(n);
    for (std::size_t j = 0; j < x.cols(); ++j) centroids(0, j) = x(first, j);

    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = sq_distance(x.row(i), centroids.row(c - 1));
            dist[i] = std::min(dist[i], d);
            total += dist[i];
        }
        std::size_t pick;
        if (total <= 0.0) {
            pick = rng.below(n);
        } else {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += dist[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        }
        for (std::size_t j = 0; j < x.cols(); ++j) centroids(c, j) = x(pick, j);
    }
    return centroids;
}

double assign(const Matrix& x, const Matrix& centroids, std::vector<int>& labels) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        int best_c = 0;
        for (std::size_t c = 0; c < centroids.rows(); ++c) {
            const double d = sq_distance(x.row(i), centroids.row(c));
            if (d < best) {
                best = d;
                best_c = static_cast<int>(c);
            }
        }
        labels[i] = best_c;
        inertia += best;
    }
    return inertia;
}

// Give every empty cluster the point of the largest cluster farthest from
// its centroid; ties break on the lowest point index.
void repair_empty(const Matrix& x, const Matrix& centroids, std::vector<int>& labels,
                  int k) {
    std::vector<std::size_t> sizes(k, 0);
    for (int l : labels) ++sizes[l];
    for (int c = 0; c < k; ++c) {
        if (sizes[c] > 0) continue;
        const int donor = static_cast<int>(
            std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
        double far_d = -1.0;
        std::size_t far_i = 0;
        for (std::size_t i = 0; i < x.rows(); ++i) {
            if (labels[i] != donor) continue;
            const double d = sq_distance(x.row(i), centroids.row(donor));
            if (d > far_d) {
                far_d = d;
                far_i = i;
            }
        }
        labels[far_i] = c;
        --sizes[donor];
        ++sizes[c];
    }
}

RunOutcome run_once(const Matrix& x, int k, int max_iter, double tol, Rng& rng) {
    RunOutcome out;
    out.centroids = kmeanspp_init(x, k, rng);
    out.labels.assign(x.rows(), 0);

    double prev = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < max_iter; ++iter) {
        out.inertia = assign(x, out.centroids, out.labels);
        repair_empty(x, out.centroids, out.labels, k);

        // recompute after any repair so inertia matches the labels
        out.inertia = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i)
            out.inertia += sq_distance(x.row(i), out.centroids.row(out.labels[i]));

        if (out.inertia > prev * (1.0 + 1e-9) + 1e-12)
            throw ContractError("kmeans: inertia increased within a run");
        out.history.push_back(out.inertia);

        Matrix next(k, x.cols());
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < x.rows(); ++i) {
            ++counts[out.labels[i]];
            auto r = x.row(i);
            for (std::size_t j = 0; j < x.cols(); ++j) next(out.labels[i], j) += r[j];
        }
        double shift = 0.0;
        for (int c = 0; c < k; ++c) {
            for (std::size_t j = 0; j < x.cols(); ++j) {
                next(c, j) /= static_cast<double>(counts[c]);
                shift = std::max(shift, std::abs(next(c, j) - out.centroids(c, j)));
            }
        }
        out.centroids = next;
        out.iterations = iter + 1;
        if (shift < tol) break;
        prev = out.inertia;
    }
    // final assignment against the converged centroids
    out.inertia = assign(x, out.centroids, out.labels);
    repair_empty(x, out.centroids, out.labels, k);
    out.inertia = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i)
        out.inertia += sq_distance(x.row(i), out.centroids.row(out.labels[i]));
    return out;
}

} // namespace

KmeansResult kmeans(const Matrix& x, int k, const KmeansParams& params) {
    if (k < 1) throw ConfigError("kmeans: k must be positive");
    if (static_cast<std::size_t>(k) > x.rows())
        throw ConfigError("kmeans: k exceeds the number of samples");
    if (!all_finite(x)) throw ConfigError("kmeans: input contains non-finite values");
    if (params.restarts < 1) throw ConfigError("kmeans: needs at least one restart");

    RunOutcome best;
    for (int r = 0; r < params.restarts; ++r) {
        Rng rng(params.seed + static_cast<std::uint64_t>(r));
        RunOutcome cur = run_once(x, k, params.max_iter, params.tol, rng);
        if (cur.inertia < best.inertia) best = std::move(cur);
    }

    KmeansResult result;
    result.labels = std::move(best.labels);
    result.centroids = std::move(best.centroids);
    result.inertia = best.inertia;
    result.iterations = best.iterations;
    result.restarts_used = params.restarts;
    result.inertia_history = std::move(best.history);
    return result;
}

} // namespace imvc
