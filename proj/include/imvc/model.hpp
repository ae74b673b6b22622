#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "imvc/matrix.hpp"
#include "imvc/nn.hpp"

namespace imvc {

// Which representation feeds the consistency loss: the leading sub-vectors
// of the latents (default), the full latents, or both.
enum class ContrastTarget { sub_vector, full_latent, both };

struct ModelConfig {
    int latent_dim = 64; // D
    int sub_dim = 32;    // d0, leading coordinates used for consistency
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    std::vector<int> encoder_hidden = {512, 256};
    double lr = 1e-3;
    int epochs_pretrain = 100;
    int epochs_joint = 100;
    int batch = 0; // 0 = full batch up to 5000 rows, 256 beyond
    std::uint64_t seed = 0;

    bool use_reconstruction = true;
    ContrastTarget contrast_target = ContrastTarget::sub_vector;
    bool cross_view_negatives = false;
    bool stop_encoder_grad_on_predict = false;
    bool trace_metrics = false;

    void validate() const;
    std::size_t effective_batch(std::size_t n) const;
};

nlohmann::json config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const nlohmann::json& j);

// Per-view networks: autoencoder plus one outgoing predictor head per other
// view, every head mapping latent to latent.
struct ViewModel {
    std::size_t view = 0;
    nn::Mlp encoder; // M_v -> D
    nn::Mlp decoder; // D -> M_v
    std::vector<nn::Mlp> predictors; // indexed by target view; own slot unused

    std::size_t latent_dim() const { return encoder.out_dim(); }
    std::size_t feature_dim() const { return encoder.in_dim(); }
};

std::vector<ViewModel> make_view_models(const std::vector<std::size_t>& feature_dims,
                                        const ModelConfig& cfg, Rng& rng);

enum class Provenance : std::uint8_t { observed, recovered, absent };

// Per-view latent matrices plus where each entry came from.
struct LatentBundle {
    std::vector<Matrix> z; // V matrices, N x D
    std::size_t sub_dim = 0;

    std::size_t n() const { return z.empty() ? 0 : z.front().rows(); }
    std::size_t view_count() const { return z.size(); }

    // Leading sub_dim coordinates of view v.
    Matrix sub(std::size_t v) const;

    Provenance provenance(std::size_t row, std::size_t view) const {
        return prov_[row * z.size() + view];
    }
    void set_provenance(std::size_t row, std::size_t view, Provenance p) {
        prov_[row * z.size() + view] = p;
    }
    void init_provenance(Provenance fill);
    bool any_absent() const;

private:
    std::vector<Provenance> prov_;
};

// ---- losses ----

struct ReconLossResult {
    double loss = 0.0;
    nn::MlpGrad d_encoder, d_decoder;
};

// Squared reconstruction error summed over the selected rows of one view.
ReconLossResult loss_recon(const ViewModel& vm, const Matrix& x_view,
                           std::span<const std::size_t> rows);

struct ContrastLossResult {
    double loss = 0.0;
    double alignment = 0.0;  // positive-pair term
    double uniformity = 0.0; // squared inner-product term
    std::vector<Matrix> d_sub;
};

// Consistency loss over aligned rows of V sub-vector matrices (B x d0 each).
// For every view pair: alignment -(2/B) sum_i <a_i, b_i> plus, for each view
// of the pair, (1/(2*C(B,2))) sum_{i != j} <w_i, w_j>^2. The optional flag
// also penalizes cross-view inner products of non-matching samples.
ContrastLossResult loss_contrastive(const std::vector<Matrix>& sub,
                                    bool cross_view_negatives = false);

// Conceptual pair bookkeeping for one anchor in a batch of B samples.
struct ContrastPairCounts {
    std::size_t positives = 0;
    std::size_t negatives = 0;
    std::size_t total = 0;
};
ContrastPairCounts contrast_pair_counts(std::size_t views, std::size_t batch);

struct PredictLossResult {
    double loss = 0.0;
    // d_predictors[q][p]: gradient of the q -> p head.
    std::vector<std::vector<nn::MlpGrad>> d_predictors;
    // d_z[v]: gradient w.r.t. the selected latent rows of view v (B x D).
    std::vector<Matrix> d_z;
};

// Cross-view prediction loss: batch mean of |G_{q->p}(z_q) - z_p|^2 over the
// selected rows, summed over ordered view pairs.
PredictLossResult loss_predict(const std::vector<ViewModel>& models,
                               const std::vector<Matrix>& z,
                               std::span<const std::size_t> rows);

struct LossParts {
    double lz = 0.0, lc = 0.0, lr = 0.0;
};

// lz + lambda1*lc + lambda2*lr, with lz dropped when reconstruction is
// switched off. Throws TrainingError on a non-finite part.
double total_loss(const LossParts& parts, const ModelConfig& cfg);

struct AblationFlags {
    bool use_reconstruction = true;
    bool use_contrast = true;
    bool use_prediction = true;
};

// Switches loss terms off by zeroing their weights; at least one must stay.
ModelConfig ablation_config(const ModelConfig& base, const AblationFlags& flags);

// ---- composite gradients through the networks (used by the trainer) ----

struct ViewGrads {
    nn::MlpGrad encoder, decoder;
    std::vector<nn::MlpGrad> predictors;

    static ViewGrads zeros_like(const ViewModel& vm);
};
using ModelGrads = std::vector<ViewGrads>;

ModelGrads zero_grads(const std::vector<ViewModel>& models);

// Reconstruction over the given rows of every view; accumulates weight *
// gradient, returns the unweighted loss.
double recon_through_networks(const std::vector<ViewModel>& models,
                              const std::vector<Matrix>& views,
                              const std::vector<std::vector<std::size_t>>& rows_per_view,
                              double weight, ModelGrads& grads);

// Consistency loss on encoder outputs over complete rows.
double contrast_through_encoders(const std::vector<ViewModel>& models,
                                 const std::vector<Matrix>& views,
                                 std::span<const std::size_t> rows,
                                 const ModelConfig& cfg, double weight,
                                 ModelGrads& grads);

// Prediction loss through the predictor heads (and the encoders unless
// stop_encoder_grad_on_predict is set).
double predict_through_encoders(const std::vector<ViewModel>& models,
                                const std::vector<Matrix>& views,
                                std::span<const std::size_t> rows,
                                const ModelConfig& cfg, double weight,
                                ModelGrads& grads);

} // namespace imvc
