#pragma once

#include <torch/torch.h>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "inpaint_forge/config.hpp"
#include "inpaint_forge/dataset.hpp"
#include "inpaint_forge/errors.hpp"
#include "inpaint_forge/feature_extractor.hpp"
#include "inpaint_forge/imaging.hpp"
#include "inpaint_forge/losses.hpp"
#include "inpaint_forge/networks.hpp"

namespace inpaint_forge {

/// Raised when a training step yields a non-finite loss.
class NonFiniteLossError : public NonFiniteError {
 public:
  NonFiniteLossError(std::int64_t step, std::string term, std::string detail);
  std::int64_t step() const { return step_; }
  const std::string& term() const { return term_; }

 private:
  std::int64_t step_;
  std::string term_;
};

/// Networks, optimizers and counters of one training run. Not copyable: the
/// optimizers hold references to the networks' parameters.
class TrainingState {
 public:
  /// Seeds torch with config.train.seed and builds G, D, D_L in that order.
  /// `extractor` may be null when the style term is disabled; otherwise it is
  /// loaded from the configured weights if not supplied.
  explicit TrainingState(RunConfig config, Vgg19Features extractor = nullptr);

  TrainingState(const TrainingState&) = delete;
  TrainingState& operator=(const TrainingState&) = delete;

  const RunConfig& config() const { return config_; }
  CasNet& generator() { return generator_; }
  PatchDiscriminator& global_discriminator() { return global_d_; }
  PatchDiscriminator& local_discriminator() { return local_d_; }
  Vgg19Features& extractor() { return extractor_; }

  torch::optim::Adam& generator_optimizer() { return *opt_g_; }
  torch::optim::Adam& global_optimizer() { return *opt_d_; }
  torch::optim::Adam& local_optimizer() { return *opt_l_; }

  std::int64_t step = 0;  // completed train steps

 private:
  RunConfig config_;
  CasNet generator_{nullptr};
  PatchDiscriminator global_d_{nullptr};
  PatchDiscriminator local_d_{nullptr};
  Vgg19Features extractor_{nullptr};
  std::unique_ptr<torch::optim::Adam> opt_g_;
  std::unique_ptr<torch::optim::Adam> opt_d_;
  std::unique_ptr<torch::optim::Adam> opt_l_;
};

struct StepResult {
  std::int64_t step = 0;  // 1-based index of the step just taken
  LossBreakdown generator;
  double d_global = 0.0;
  double d_local = 0.0;
};

/// Batched tensors for a list of samples (model range, N x 1 x H x W).
struct BatchTensors {
  torch::Tensor target;
  torch::Tensor context;
  torch::Tensor mask;  // 1 inside the region
  std::vector<RegionSpec> regions;
};

BatchTensors to_batch(std::span<const InpaintingSample> samples);
torch::Tensor image_to_tensor(const Image& img);  // 1 x 1 x H x W
Image tensor_to_image(const torch::Tensor& t, Range range);  // from 1 x 1 x H x W or H x W

/// Stacks the size x size crops of each batch element at its own region.
torch::Tensor crop_regions(const torch::Tensor& images, std::span<const RegionSpec> regions);

/// Generator input for a batch: the context, plus the mask channel when enabled.
torch::Tensor generator_input(const BatchTensors& batch, const GeneratorSpec& spec);

/// One update each of D, then D_L, then G. Discriminator updates see the
/// completed image detached; the G update minimises the weighted total with
/// both discriminators frozen.
StepResult train_step(TrainingState& state, std::span<const InpaintingSample> batch);

// --- epochs, logs, checkpoints ------------------------------------------------

struct TrainLogRow {
  std::int64_t step = 0;
  LossBreakdown losses;
  double d_global = 0.0;
  double d_local = 0.0;
  double elapsed_seconds = 0.0;
};

inline constexpr const char* kTrainLogHeader = "step,adv,local,style,percep,total,d_global,d_local,elapsed_s";
std::string format_log_row(const TrainLogRow& row);

/// Sample order of one epoch: a seeded permutation of [0, n).
std::vector<std::size_t> epoch_order(std::uint64_t seed, int epoch, std::size_t n);
/// Region of every dataset index for one epoch (fresh per epoch, seeded).
std::vector<RegionSpec> epoch_regions(std::uint64_t seed, int epoch, std::size_t n, int image_size,
                                      int region_size);

struct TrainOptions {
  std::optional<std::filesystem::path> resume;  // checkpoint to continue from
  bool force = false;                           // accept a config-hash mismatch on resume
  std::int64_t max_steps = -1;                  // cap on steps taken by this call; -1 = full schedule
  std::function<void(const TrainLogRow&)> on_log;
};

struct TrainResult {
  std::filesystem::path final_checkpoint;
  std::vector<TrainLogRow> log;
  std::int64_t steps = 0;
};

/// Loads every train-split image (center crop/pad to image_size), then runs
/// epochs x ceil(N / batch) steps. Writes config.json at step 0,
/// train_log.csv (one row per log_every steps, flushed), ckpt_<step>.bin at the
/// checkpoint cadence and at the end.
TrainResult train(const RunConfig& config, const DatasetManifest& manifest,
                  const TrainOptions& options = {});

/// Loads images of a split as model-range targets of the configured size.
std::vector<Image> load_split_images(const DatasetManifest& manifest, Split split, int image_size);

// Checkpoint container: tensor archive whose header holds the config, its hash,
// the network specs and the step counter; tensors cover G, D, D_L parameters
// and buffers plus Adam moments.

inline constexpr const char* kCheckpointFormat = "inpaint-forge-checkpoint";

void save_checkpoint(const TrainingState& state, const std::filesystem::path& path);

/// Restores `state` in place. Architecture differences are always a SpecError;
/// a config-hash difference is a ConfigHashMismatchError unless `force`.
void load_checkpoint(TrainingState& state, const std::filesystem::path& path, bool force = false);

/// Config embedded in a checkpoint.
RunConfig checkpoint_config(const std::filesystem::path& path);

/// Generator alone, rebuilt from the checkpoint's own config, in eval mode.
CasNet load_generator(const std::filesystem::path& path, RunConfig* config_out = nullptr);

std::filesystem::path checkpoint_path(const std::filesystem::path& run_dir, std::int64_t step);

}  // namespace inpaint_forge
