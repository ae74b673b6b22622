#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "imvc/matrix.hpp"
#include "imvc/rng.hpp"

namespace imvc::nn {

enum class Activation { relu, linear };

struct DenseLayer {
    Matrix weights; // out x in
    std::vector<double> bias;
    Activation activation = Activation::linear;

    std::size_t in_dim() const { return weights.cols(); }
    std::size_t out_dim() const { return weights.rows(); }

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Plain feed-forward stack of dense layers.
struct Mlp {
    std::vector<DenseLayer> layers;

    std::size_t in_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
    std::size_t out_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }
    std::size_t parameter_count() const;

    friend bool operator==(const Mlp&, const Mlp&) = default;
};

// relu hidden layers, linear output. He-uniform init for relu layers,
// Glorot-uniform for linear ones, zero biases.
Mlp make_mlp(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
             Rng& rng);

// Activations recorded by a forward pass, consumed by the matching backward
// pass. Tied to the network instance that produced it.
struct ForwardCache {
    const Mlp* net = nullptr;
    std::vector<Matrix> inputs; // input to each layer
    std::vector<Matrix> pre;    // pre-activation of each layer
};

// y = net(x), batch-major. Pass a cache to enable a backward pass.
Matrix mlp_forward(const Mlp& net, const Matrix& x, ForwardCache* cache = nullptr);

// Parameter gradients, same layout as Mlp.
struct MlpGrad {
    std::vector<Matrix> d_weights;
    std::vector<std::vector<double>> d_bias;

    static MlpGrad zeros_like(const Mlp& net);
    void accumulate(const MlpGrad& other, double scale = 1.0);
    void scale(double s);
};

// Backpropagates grad_out (dL/dy) through the cached pass. Accumulates
// parameter gradients into `grad` and returns dL/dx.
Matrix mlp_backward(const Mlp& net, const ForwardCache& cache, const Matrix& grad_out,
                    MlpGrad& grad);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// First/second moment accumulators for one network.
struct AdamState {
    AdamConfig cfg;
    long t = 0;
    std::vector<Matrix> m_w, v_w;
    std::vector<std::vector<double>> m_b, v_b;

    static AdamState for_net(const Mlp& net, const AdamConfig& cfg);
};

// Bias-corrected Adam update in place. `name` labels the network in error
// messages when a non-finite gradient or parameter shows up.
void adam_step(Mlp& net, const MlpGrad& grad, AdamState& state, const std::string& name);

// Pointers to every scalar parameter, layer by layer (weights then bias).
std::vector<double*> parameter_coords(Mlp& net);
// Matching flat view of a gradient.
std::vector<double> flatten_grad(const MlpGrad& grad);

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t coords_checked = 0;
    std::size_t worst_coord = 0;
    bool passed = true;
};

// Central-difference check of `analytic` against `loss` on a random
// subsample of coordinates (all of them when there are fewer than `sample`).
GradCheckReport grad_check(const std::function<double()>& loss,
                           std::span<double* const> coords,
                           std::span<const double> analytic, double h, double tol,
                           Rng& rng, std::size_t sample = 120);

// Checkpoint format: magic "MLP1", u32 layer count, per layer
// (u32 out, u32 in, u8 activation), then per layer f64 weights row-major
// followed by f64 bias. Little-endian.
void save_mlp(const Mlp& net, std::ostream& out);
Mlp load_mlp(std::istream& in);

} // namespace imvc::nn
