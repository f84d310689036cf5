#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "inpaint_forge/losses.hpp"
#include "inpaint_forge/networks.hpp"
#include "json.hpp"

namespace inpaint_forge {

struct TrainConfig {
  int epochs = 200;
  int batch_size = 4;
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  std::uint64_t seed = 0;
  int log_every = 1;         // steps between log rows
  int checkpoint_every = 0;  // steps between checkpoints; 0 = final checkpoint only
  bool deterministic = true;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Everything a run needs, loaded from a strict JSON file: missing keys take
/// defaults, unknown keys are errors. Relative paths resolve against
/// base_dir (the config file's directory), which is not serialized.
struct RunConfig {
  std::string name = "ip-MedGAN";
  std::filesystem::path run_dir = "runs/default";
  std::filesystem::path manifest;
  std::optional<std::filesystem::path> vgg_weights;

  int image_size = 256;
  int region_size = 64;
  double fill_value = 0.0;
  bool compose_for_discriminators = true;
  int ssim_window = 8;

  GeneratorSpec generator;
  DiscriminatorSpec global_discriminator = DiscriminatorSpec::global_default();
  DiscriminatorSpec local_discriminator = DiscriminatorSpec::local_default();

  LossWeights loss;
  StyleDepth style_depth = StyleDepth::Volume;
  std::vector<int> style_stages = {0, 1, 2, 3, 4};

  TrainConfig train;

  std::filesystem::path base_dir = ".";

  /// Throws ConfigError (or SpecError for network specs) on the first violation.
  void validate() const;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& doc);
  static RunConfig from_file(const std::filesystem::path& file);
  void write(const std::filesystem::path& file) const;

  /// 16 hex digits of FNV-1a 64 over the canonical JSON dump.
  std::string hash() const;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
  std::filesystem::path resolved_run_dir() const { return resolve(run_dir); }

  /// True when the style term is active and the extractor must be loaded.
  bool needs_feature_extractor() const { return loss.style > 0.0; }
};

}  // namespace inpaint_forge
