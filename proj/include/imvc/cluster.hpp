#pragma once

#include <cstdint>
#include <vector>

#include "imvc/matrix.hpp"

namespace imvc {

struct KmeansParams {
    std::uint64_t seed = 0;
    int restarts = 10;
    int max_iter = 300;
    double tol = 1e-6;
};

struct KmeansResult {
    std::vector<int> labels;
    Matrix centroids; // k x F
    double inertia = 0.0;
    int iterations = 0;    // of the winning restart
    int restarts_used = 0;
    std::vector<double> inertia_history; // winning restart, one entry per iteration
};

// Lloyd's algorithm with k-means++ seeding and restarts; the best restart by
// inertia wins, earliest restart on ties. Empty clusters are repaired by
// moving the farthest point out of the largest cluster.
KmeansResult kmeans(const Matrix& x, int k, const KmeansParams& params = {});

} // namespace imvc
