#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "inpaint_forge/config.hpp"
#include "inpaint_forge/dataset.hpp"
#include "inpaint_forge/imaging.hpp"
#include "inpaint_forge/metrics.hpp"
#include "inpaint_forge/networks.hpp"

namespace inpaint_forge {

/// Runs a generator in eval mode and composes its output into the context.
/// Throws SpecError if the sample size differs from the generator's image size.
Image inpaint(CasNet& generator, const InpaintingSample& sample);

/// Generator loaded from a checkpoint together with the config it was trained with.
class Inpainter {
 public:
  explicit Inpainter(const std::filesystem::path& checkpoint);
  Image operator()(const InpaintingSample& sample);
  const RunConfig& config() const { return config_; }

 private:
  RunConfig config_;
  CasNet generator_{nullptr};
};

/// Fills the region with the mean of the unmasked context pixels.
Image mean_fill_baseline(const InpaintingSample& sample);

using CompletionFn = std::function<Image(const InpaintingSample&)>;

struct EvalModel {
  std::string name;
  CompletionFn complete;
};

inline constexpr const char* kMeanFillName = "mean-fill";
EvalModel mean_fill_model();
/// Named after the checkpoint's config "name".
EvalModel checkpoint_model(const std::filesystem::path& checkpoint);

struct EvalSettings {
  int image_size = 256;
  int region_size = 64;
  float fill_value = kDefaultFill;
  int ssim_window = kDefaultWindow;
  std::uint64_t seed = 0;  // validation regions

  static EvalSettings from_config(const RunConfig& config);
};

/// Validation samples with fixed regions derived from settings.seed.
std::vector<InpaintingSample> validation_samples(const std::vector<Image>& targets,
                                                 const EvalSettings& settings);

struct SampleRow {
  std::string model;
  std::size_t index = 0;  // position in the validation split
  std::string path;
  RegionSpec region;
  RegionMetrics metrics;
};

struct ModelReport {
  std::string name;
  MetricReport full;
  MetricReport region;

  const MetricReport& at(Scope scope) const { return scope == Scope::FullImage ? full : region; }
};

struct ComparisonTable {
  std::vector<ModelReport> models;
  std::vector<SampleRow> samples;
};

/// Rebuilds the per-model aggregates from per-sample rows, models in first-seen order.
ComparisonTable aggregate_rows(std::vector<SampleRow> rows);

/// Scores every model on every sample. `paths` labels samples in the rows and
/// may be empty. Throws DatasetError when there are no samples and
/// std::invalid_argument when there are no models.
ComparisonTable evaluate(const std::vector<EvalModel>& models, const std::vector<InpaintingSample>& samples,
                         const std::vector<std::string>& paths, int ssim_window = kDefaultWindow);

/// Loads the validation split and scores the models on it.
ComparisonTable evaluate(const std::vector<EvalModel>& models, const DatasetManifest& manifest,
                         const EvalSettings& settings);

/// Models holding the best value of a column: highest SSIM, PSNR and UQI, lowest MSE.
/// Returns one flag per model per column, in SSIM, PSNR, MSE, UQI order.
std::vector<std::array<bool, 4>> best_flags(const ComparisonTable& table, Scope scope);

std::string format_report_csv(const ComparisonTable& table);
std::string format_report_text(const ComparisonTable& table);
std::string format_samples_csv(const ComparisonTable& table);
std::vector<SampleRow> parse_samples_csv(const std::string& text);

/// Writes eval_report.csv, eval_report.txt and eval_samples.csv into `dir`.
void write_reports(const ComparisonTable& table, const std::filesystem::path& dir);

/// Side-by-side grid PNG: input | one column per output | target, one row per sample.
Image make_grid(const std::vector<InpaintingSample>& samples,
                const std::vector<std::vector<Image>>& outputs_per_model, int gap = 2);

struct AblationOptions {
  bool train_missing = false;
  std::int64_t max_steps = -1;  // cap per training run
  std::function<void(const std::string&)> on_progress;
};

/// The two configs of the ablation: MedGAN weights and ip-MedGAN weights,
/// otherwise identical to `base` (same seeds, data order and architecture).
/// Run directories are <base run_dir>/medgan and <base run_dir>/ip-medgan.
std::vector<RunConfig> ablation_configs(const RunConfig& base);

/// Evaluates mean-fill, MedGAN and ip-MedGAN. Missing final checkpoints are a
/// FileNotFoundError unless options.train_missing, in which case they are trained.
ComparisonTable ablation_suite(const RunConfig& base, const DatasetManifest& manifest,
                               const AblationOptions& options = {});

/// Final checkpoint of a full training run of `config` on `manifest`.
std::filesystem::path final_checkpoint_path(const RunConfig& config, const DatasetManifest& manifest);

}  // namespace inpaint_forge
