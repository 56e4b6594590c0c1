#pragma once

#include "mmkd/model.hpp"
#include "mmkd/trainer.hpp"

#include <filesystem>

namespace mmkd {

inline constexpr int kCheckpointVersion = 1;

/// File layout: the line "MMKD-CHECKPOINT v1", one line of JSON header
/// (format version, kind, every config value, training state, and a
/// manifest of tensor names, shapes and byte offsets), then the tensors as
/// little-endian float32 in manifest order.
///
/// Format or truncation problems raise DataError; a header that disagrees
/// with an expected configuration raises ConfigError.

void save_encoder_checkpoint(const std::filesystem::path& path, const Encoder<float>& encoder);

/// Loads a frozen encoder. When `expected` is given its config must match.
Encoder<float> load_encoder_checkpoint(const std::filesystem::path& path, const EncoderConfig* expected = nullptr);

void save_bundle_checkpoint(const std::filesystem::path& path, const ModelBundle<float>& bundle,
                            const TrainConfig& train, const TrainingState& state);

struct LoadedBundle {
  ModelBundle<float> bundle;
  TrainConfig train;
  TrainingState state;
};

LoadedBundle load_bundle_checkpoint(const std::filesystem::path& path, const BundleConfig* expected = nullptr);

}  // namespace mmkd
