#pragma once

#include <filesystem>
#include <limits>

#include "imvc/data.hpp"
#include "imvc/diagnostics.hpp"
#include "imvc/model.hpp"

namespace imvc {

// Optimizer slots mirroring one ViewModel.
struct ViewOptimizer {
    nn::AdamState encoder, decoder;
    std::vector<nn::AdamState> predictors;
};

struct RunState {
    ModelConfig cfg;
    std::vector<ViewModel> models;
    std::vector<ViewOptimizer> optimizers;
    Rng rng{0};
    int epoch = 0;

    double best_loss = std::numeric_limits<double>::infinity();
    std::vector<ViewModel> best_models;
    RunTrace trace;

    // Best checkpoint when one was taken, current parameters otherwise.
    const std::vector<ViewModel>& eval_models() const {
        return best_models.empty() ? models : best_models;
    }
};

// Fresh models and optimizer state, deterministic in cfg.seed.
RunState init_state(const MultiViewDataset& ds, const ModelConfig& cfg);

// Stage one: autoencoder training on the observed entries of every view.
RunState pretrain(const MultiViewDataset& ds, const ObservationMask& mask,
                  const ModelConfig& cfg);

// Stage two: joint objective over reconstruction, consistency on complete
// samples, and cross-view prediction. Appends one trace row per epoch and
// keeps the best checkpoint by total loss.
void train_joint(RunState& state, const MultiViewDataset& ds,
                 const ObservationMask& mask);

// Loss values at the current parameters, no gradients.
LossParts eval_losses(const std::vector<ViewModel>& models, const MultiViewDataset& ds,
                      const ObservationMask& mask, const ModelConfig& cfg);

// Latents for observed entries; missing entries zeroed and flagged absent.
LatentBundle embed(const RunState& state, const MultiViewDataset& ds,
                   const ObservationMask& mask);
LatentBundle embed_with(const std::vector<ViewModel>& models, std::size_t sub_dim,
                        const MultiViewDataset& ds, const ObservationMask& mask);

void save_checkpoint(const std::vector<ViewModel>& models,
                     const std::filesystem::path& path);
std::vector<ViewModel> load_checkpoint(const std::filesystem::path& path);

} // namespace imvc
