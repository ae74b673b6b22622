#pragma once

#include <filesystem>

#include "imvc/data.hpp"
#include "imvc/model.hpp"

namespace imvc {

enum class FusionMode { concat_sub, concat_full };

struct FusedFeatures {
    Matrix x;
    FusionMode mode = FusionMode::concat_sub;
};

// Fills every absent latent entry by running the trained predictor heads
// from the sample's observed views; multiple observed sources are averaged.
// Observed entries are left untouched.
LatentBundle recover_latents(const std::vector<ViewModel>& models, LatentBundle bundle,
                             const ObservationMask& mask);

// Row-wise concatenation of the per-view sub-vectors (default) or full
// latents. Requires a fully recovered bundle.
FusedFeatures fuse(const LatentBundle& bundle, FusionMode mode);

// Long-format per-view latents: sample_id, view, coordinates, provenance.
void export_embeddings(const LatentBundle& bundle, const std::filesystem::path& csv_path);
// One row per sample of fused clustering features.
void export_fused(const FusedFeatures& fused, const std::filesystem::path& csv_path);

} // namespace imvc
