#include "imvc/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>

#include "imvc/error.hpp"

namespace imvc::nn {

namespace {

void fill_uniform(Matrix& w, double limit, Rng& rng) {
    for (double& x : w.data()) x = rng.uniform(-limit, limit);
}

template <typename T>
void write_le(std::ostream& out, T value) {
    std::uint64_t bits;
    if constexpr (std::is_floating_point_v<T>) {
        std::memcpy(&bits, &value, sizeof(T));
    } else {
        bits = static_cast<std::uint64_t>(value);
    }
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i)
        buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T)))
        throw DataError("truncated network checkpoint");
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    if constexpr (std::is_floating_point_v<T>) {
        T value;
        std::memcpy(&value, &bits, sizeof(T));
        return value;
    } else {
        return static_cast<T>(bits);
    }
}

} // namespace

std::size_t Mlp::parameter_count() const {
    std::size_t count = 0;
    for (const auto& l : layers) count += l.weights.size() + l.bias.size();
    return count;
}

Mlp make_mlp(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
             Rng& rng) {
    Mlp net;
    std::vector<std::size_t> dims;
    dims.push_back(in);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(out);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        DenseLayer layer;
        layer.weights = Matrix(dims[l + 1], dims[l]);
        layer.bias.assign(dims[l + 1], 0.0);
        const bool last = l + 2 == dims.size();
        layer.activation = last ? Activation::linear : Activation::relu;
        const double fan_in = static_cast<double>(dims[l]);
        const double fan_out = static_cast<double>(dims[l + 1]);
        const double limit = last ? std::sqrt(6.0 / (fan_in + fan_out))
                                  : std::sqrt(6.0 / fan_in);
        fill_uniform(layer.weights, limit, rng);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

Matrix mlp_forward(const Mlp& net, const Matrix& x, ForwardCache* cache) {
    if (net.layers.empty()) throw ContractError("mlp_forward: empty network");
    if (x.cols() != net.in_dim())
        throw ContractError("mlp_forward: input has " + std::to_string(x.cols()) +
                            " columns, network expects " + std::to_string(net.in_dim()));
    if (cache) {
        cache->net = &net;
        cache->inputs.clear();
        cache->pre.clear();
    }
    Matrix h = x;
    for (const auto& layer : net.layers) {
        if (cache) cache->inputs.push_back(h);
        Matrix pre = matmul_nt(h, layer.weights);
        for (std::size_t i = 0; i < pre.rows(); ++i) {
            auto r = pre.row(i);
            for (std::size_t j = 0; j < pre.cols(); ++j) r[j] += layer.bias[j];
        }
        if (cache) cache->pre.push_back(pre);
        if (layer.activation == Activation::relu) {
            for (double& v : pre.data()) v = v > 0.0 ? v : 0.0;
        }
        h = std::move(pre);
    }
    return h;
}

MlpGrad MlpGrad::zeros_like(const Mlp& net) {
    MlpGrad g;
    for (const auto& l : net.layers) {
        g.d_weights.emplace_back(l.weights.rows(), l.weights.cols());
        g.d_bias.emplace_back(l.bias.size(), 0.0);
    }
    return g;
}

void MlpGrad::accumulate(const MlpGrad& other, double scale) {
    if (other.d_weights.size() != d_weights.size())
        throw ContractError("MlpGrad::accumulate: layer count mismatch");
    for (std::size_t l = 0; l < d_weights.size(); ++l) {
        add_inplace(d_weights[l], other.d_weights[l], scale);
        for (std::size_t i = 0; i < d_bias[l].size(); ++i)
            d_bias[l][i] += scale * other.d_bias[l][i];
    }
}

void MlpGrad::scale(double s) {
    for (auto& w : d_weights) scale_inplace(w, s);
    for (auto& b : d_bias)
        for (double& x : b) x *= s;
}

Matrix mlp_backward(const Mlp& net, const ForwardCache& cache, const Matrix& grad_out,
                    MlpGrad& grad) {
    if (cache.net != &net || cache.inputs.size() != net.layers.size())
        throw ContractError("mlp_backward: cache does not belong to this network");
    if (grad.d_weights.size() != net.layers.size())
        throw ContractError("mlp_backward: gradient layout mismatch");
    if (grad_out.cols() != net.out_dim() || grad_out.rows() != cache.inputs.front().rows())
        throw ContractError("mlp_backward: grad_out shape mismatch");

    Matrix delta = grad_out;
    for (std::size_t l = net.layers.size(); l-- > 0;) {
        const auto& layer = net.layers[l];
        if (layer.activation == Activation::relu) {
            const Matrix& pre = cache.pre[l];
            for (std::size_t i = 0; i < delta.size(); ++i)
                if (pre.data()[i] <= 0.0) delta.data()[i] = 0.0;
        }
        // dW += delta^T x, db += column sums of delta
        add_inplace(grad.d_weights[l], matmul_tn(delta, cache.inputs[l]));
        auto& db = grad.d_bias[l];
        for (std::size_t i = 0; i < delta.rows(); ++i) {
            auto r = delta.row(i);
            for (std::size_t j = 0; j < delta.cols(); ++j) db[j] += r[j];
        }
        if (l > 0) delta = matmul(delta, layer.weights);
    }
    return matmul(delta, net.layers.front().weights);
}

AdamState AdamState::for_net(const Mlp& net, const AdamConfig& cfg) {
    AdamState st;
    st.cfg = cfg;
    for (const auto& l : net.layers) {
        st.m_w.emplace_back(l.weights.rows(), l.weights.cols());
        st.v_w.emplace_back(l.weights.rows(), l.weights.cols());
        st.m_b.emplace_back(l.bias.size(), 0.0);
        st.v_b.emplace_back(l.bias.size(), 0.0);
    }
    return st;
}

namespace {

void adam_update(std::span<double> p, std::span<const double> g, std::span<double> m,
                 std::span<double> v, const AdamConfig& cfg, long t,
                 const std::string& name) {
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!std::isfinite(g[i]))
            throw TrainingError("non-finite gradient in " + name);
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        const double m_hat = m[i] / c1;
        const double v_hat = v[i] / c2;
        p[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        if (!std::isfinite(p[i]))
            throw TrainingError("non-finite parameter after update in " + name);
    }
}

} // namespace

void adam_step(Mlp& net, const MlpGrad& grad, AdamState& state, const std::string& name) {
    if (grad.d_weights.size() != net.layers.size() ||
        state.m_w.size() != net.layers.size())
        throw ContractError("adam_step: layout mismatch for " + name);
    ++state.t;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        adam_update(net.layers[l].weights.data(), grad.d_weights[l].data(),
                    state.m_w[l].data(), state.v_w[l].data(), state.cfg, state.t,
                    name + ".layer" + std::to_string(l) + ".weights");
        adam_update(net.layers[l].bias, grad.d_bias[l], state.m_b[l], state.v_b[l],
                    state.cfg, state.t, name + ".layer" + std::to_string(l) + ".bias");
    }
}

std::vector<double*> parameter_coords(Mlp& net) {
    std::vector<double*> coords;
    for (auto& l : net.layers) {
        for (double& w : l.weights.data()) coords.push_back(&w);
        for (double& b : l.bias) coords.push_back(&b);
    }
    return coords;
}

std::vector<double> flatten_grad(const MlpGrad& grad) {
    std::vector<double> flat;
    for (std::size_t l = 0; l < grad.d_weights.size(); ++l) {
        flat.insert(flat.end(), grad.d_weights[l].data().begin(),
                    grad.d_weights[l].data().end());
        flat.insert(flat.end(), grad.d_bias[l].begin(), grad.d_bias[l].end());
    }
    return flat;
}

GradCheckReport grad_check(const std::function<double()>& loss,
                           std::span<double* const> coords,
                           std::span<const double> analytic, double h, double tol,
                           Rng& rng, std::size_t sample) {
    if (coords.size() != analytic.size())
        throw ContractError("grad_check: coordinate/gradient size mismatch");
    GradCheckReport report;
    if (coords.empty()) return report;

    std::vector<std::size_t> pick(coords.size());
    std::iota(pick.begin(), pick.end(), 0);
    if (coords.size() > sample) {
        rng.shuffle(pick);
        pick.resize(sample);
    }
    for (std::size_t idx : pick) {
        double* p = coords[idx];
        const double saved = *p;
        *p = saved + h;
        const double up = loss();
        *p = saved - h;
        const double down = loss();
        *p = saved;
        const double fd = (up - down) / (2.0 * h);
        const double err =
            std::abs(fd - analytic[idx]) / std::max({std::abs(fd), std::abs(analytic[idx]), 1.0});
        if (err > report.max_rel_error) {
            report.max_rel_error = err;
            report.worst_coord = idx;
        }
        ++report.coords_checked;
    }
    report.passed = report.max_rel_error < tol;
    return report;
}

void save_mlp(const Mlp& net, std::ostream& out) {
    out.write("MLP1", 4);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.layers.size()));
    for (const auto& l : net.layers) {
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(l.out_dim()));
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(l.in_dim()));
        write_le<std::uint8_t>(out, l.activation == Activation::relu ? 1 : 0);
    }
    for (const auto& l : net.layers) {
        for (double w : l.weights.data()) write_le<double>(out, w);
        for (double b : l.bias) write_le<double>(out, b);
    }
}

Mlp load_mlp(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "MLP1", 4) != 0)
        throw DataError("bad magic in network checkpoint");
    const auto count = read_le<std::uint32_t>(in);
    Mlp net;
    for (std::uint32_t l = 0; l < count; ++l) {
        DenseLayer layer;
        const auto out_dim = read_le<std::uint32_t>(in);
        const auto in_dim = read_le<std::uint32_t>(in);
        layer.activation = read_le<std::uint8_t>(in) ? Activation::relu : Activation::linear;
        layer.weights = Matrix(out_dim, in_dim);
        layer.bias.assign(out_dim, 0.0);
        net.layers.push_back(std::move(layer));
    }
    for (auto& l : net.layers) {
        for (double& w : l.weights.data()) w = read_le<double>(in);
        for (double& b : l.bias) b = read_le<double>(in);
    }
    return net;
}

} // namespace imvc::nn
