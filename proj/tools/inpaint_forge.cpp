// inpaint-forge: dataset synthesis, training, inference and evaluation.
//
// Exit codes: 0 success, 2 invalid arguments or config, 3 I/O failure,
// 4 training aborted on a non-finite loss.

#include <CLI11.hpp>

#include <iomanip>
#include <iostream>
#include <sstream>

#include "inpaint_forge/config.hpp"
#include "inpaint_forge/dataset.hpp"
#include "inpaint_forge/errors.hpp"
#include "inpaint_forge/evaluation.hpp"
#include "inpaint_forge/imaging.hpp"
#include "inpaint_forge/png_io.hpp"
#include "inpaint_forge/rng.hpp"
#include "inpaint_forge/training.hpp"

namespace fs = std::filesystem;
using namespace inpaint_forge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitNonFinite = 4;

struct UsageError : Error {
  using Error::Error;
};

// --- make-dataset ------------------------------------------------------------------

struct MakeDatasetArgs {
  fs::path out;
  int count = 0;
  int size = 256;
  std::uint64_t seed = 0;
  double val_fraction = 0.2;
};

int cmd_make_dataset(const MakeDatasetArgs& a) {
  if (a.count < 2) throw UsageError("--count must be at least 2");
  if (a.size < kMinPhantomSize) throw UsageError("--size must be at least " + std::to_string(kMinPhantomSize));
  if (!(a.val_fraction > 0.0 && a.val_fraction < 1.0)) throw UsageError("--val-fraction must be in (0, 1)");

  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) throw IoError("cannot create " + a.out.string() + ": " + ec.message());
  const Rng seeds(a.seed, 0x64617461736574ULL);  // "dataset"
  const int digits = std::max(4, static_cast<int>(std::to_string(a.count - 1).size()));
  for (int i = 0; i < a.count; ++i) {
    Rng r = seeds.split(static_cast<std::uint64_t>(i));
    std::ostringstream name;
    name << "phantom_" << std::setw(digits) << std::setfill('0') << i << ".png";
    save_image(make_phantom(r.next(), a.size), a.out / name.str(), 16);
  }
  const auto manifest = build_manifest(a.out, a.val_fraction, a.seed);
  write_manifest(manifest, a.out / kManifestFileName);
  std::cout << "wrote " << a.count << " phantoms (" << manifest.count(Split::Train) << " train, "
            << manifest.count(Split::Val) << " val) to " << a.out.string() << '\n';
  return kExitOk;
}

// --- train -----------------------------------------------------------------------

struct TrainArgs {
  fs::path config;
  std::optional<fs::path> resume;
  bool force = false;
  std::int64_t max_steps = -1;
  bool quiet = false;
};

DatasetManifest manifest_of(const RunConfig& config) {
  if (config.manifest.empty()) throw ConfigError("config has no manifest");
  return read_manifest(config.resolve(config.manifest));
}

int cmd_train(const TrainArgs& a) {
  const auto config = RunConfig::from_file(a.config);
  const auto manifest = manifest_of(config);
  std::cout << "config " << config.name << " hash " << config.hash() << '\n'
            << "run dir " << config.resolved_run_dir().string() << '\n'
            << std::flush;

  TrainOptions options;
  options.resume = a.resume;
  options.force = a.force;
  options.max_steps = a.max_steps;
  if (!a.quiet) {
    options.on_log = [](const TrainLogRow& row) {
      std::cout << "step " << row.step << " total " << row.losses.total << " d_global " << row.d_global
                << " d_local " << row.d_local << '\n'
                << std::flush;
    };
  }
  const auto result = train(config, manifest, options);
  std::cout << "final checkpoint " << result.final_checkpoint.string() << '\n';
  return kExitOk;
}

// --- inpaint ---------------------------------------------------------------------

struct InpaintArgs {
  fs::path ckpt;
  fs::path input;
  fs::path out;
  std::string region;
  bool random_region = false;
  std::uint64_t seed = 0;
};

RegionSpec parse_region(const std::string& text) {
  std::array<int, 3> v{};
  std::istringstream in(text);
  char sep = 0;
  if (!(in >> v[0] >> sep) || sep != ',' || !(in >> v[1] >> sep) || sep != ',' || !(in >> v[2]) ||
      !(in >> std::ws).eof()) {
    throw UsageError("--region expects TOP,LEFT,SIZE, got '" + text + "'");
  }
  return {v[0], v[1], v[2]};
}

int cmd_inpaint(const InpaintArgs& a) {
  if (a.region.empty() == !a.random_region) throw UsageError("give exactly one of --region or --random-region");
  Inpainter inpainter(a.ckpt);
  const auto& cfg = inpainter.config();
  const Image input = load_image(a.input);
  if (input.height() != cfg.image_size || input.width() != cfg.image_size) {
    throw UsageError("input is " + std::to_string(input.height()) + "x" + std::to_string(input.width()) +
                     " but the checkpoint expects " + std::to_string(cfg.image_size) + "x" +
                     std::to_string(cfg.image_size));
  }
  RegionSpec region;
  if (a.random_region) {
    Rng rng(a.seed);
    region = sample_region(rng, input.height(), input.width(), cfg.region_size);
  } else {
    region = parse_region(a.region);
    validate_region(region, input.height(), input.width());
  }
  const auto sample = make_sample(to_model_range(input), region, static_cast<float>(cfg.fill_value));
  save_image(from_model_range(inpainter(sample)), a.out, 16);
  std::cout << "region " << region.top << ',' << region.left << ',' << region.size << '\n';
  return kExitOk;
}

// --- evaluate / ablation ---------------------------------------------------------

struct EvaluateArgs {
  fs::path config;
  std::vector<fs::path> ckpts;
  bool with_baseline = false;
  std::optional<fs::path> out;
  std::optional<fs::path> grid;
  int grid_count = 4;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const auto config = RunConfig::from_file(a.config);
  const auto settings = EvalSettings::from_config(config);
  for (const auto& c : a.ckpts) {
    if (!fs::exists(c)) throw UsageError("checkpoint not found: " + c.string());
  }
  if (a.ckpts.empty() && !a.with_baseline) throw UsageError("nothing to evaluate: give --ckpt or --with-baseline");

  std::vector<EvalModel> models;
  if (a.with_baseline) models.push_back(mean_fill_model());
  for (const auto& c : a.ckpts) {
    const auto ckpt_config = checkpoint_config(c);
    if (ckpt_config.image_size != config.image_size || ckpt_config.region_size != config.region_size) {
      throw UsageError("checkpoint " + c.string() + " was trained on " + std::to_string(ckpt_config.image_size) +
                       "px images with " + std::to_string(ckpt_config.region_size) +
                       "px regions; the evaluation config differs");
    }
    models.push_back(checkpoint_model(c));
  }
  const auto manifest = manifest_of(config);
  const auto table = evaluate(models, manifest, settings);
  const fs::path out = a.out ? *a.out : config.resolved_run_dir();
  write_reports(table, out);
  std::cout << format_report_text(table) << "reports written to " << out.string() << '\n';

  if (a.grid) {
    const auto images = load_split_images(manifest, Split::Val, settings.image_size);
    auto samples = validation_samples(images, settings);
    samples.erase(samples.begin() + std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(samples.size()),
                                                             std::max(1, a.grid_count)),
                  samples.end());
    std::vector<std::vector<Image>> outputs;
    for (const auto& m : models) {
      std::vector<Image> outs;
      for (const auto& s : samples) outs.push_back(m.complete(s));
      outputs.push_back(std::move(outs));
    }
    save_image(make_grid(samples, outputs), *a.grid, 8);
  }
  return kExitOk;
}

struct AblationArgs {
  fs::path config;
  bool train_missing = false;
  std::int64_t max_steps = -1;
};

int cmd_ablation(const AblationArgs& a) {
  const auto config = RunConfig::from_file(a.config);
  const auto manifest = manifest_of(config);
  AblationOptions options;
  options.train_missing = a.train_missing;
  options.max_steps = a.max_steps;
  options.on_progress = [](const std::string& msg) { std::cout << msg << '\n' << std::flush; };
  const auto table = ablation_suite(config, manifest, options);
  std::cout << format_report_text(table) << "reports written to " << config.resolved_run_dir().string() << '\n';
  return kExitOk;
}

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const NonFiniteError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNonFinite;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigHashMismatchError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const RegionError& e) {
    std::cerr << "region error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const SpecError& e) {
    std::cerr << "spec error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FileNotFoundError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DatasetError& e) {
    std::cerr << "dataset error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const RangeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    // NotAnImage, MultiChannel, Io, CorruptFile, Weights
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context-conditioned adversarial inpainting of grayscale images"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  MakeDatasetArgs make_args;
  auto* make = app.add_subcommand("make-dataset", "Synthesize a phantom dataset with a train/val manifest");
  make->add_option("--out", make_args.out, "Output directory")->required();
  make->add_option("--count", make_args.count, "Number of phantoms (>= 2)")->required();
  make->add_option("--size", make_args.size, "Image side length in pixels")->capture_default_str();
  make->add_option("--seed", make_args.seed, "Seed for phantoms and the split")->capture_default_str();
  make->add_option("--val-fraction", make_args.val_fraction, "Fraction of images in the val split")
      ->capture_default_str();

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train generator and discriminators from a run config");
  train_cmd->add_option("--config", train_args.config, "Run config JSON")->required();
  train_cmd->add_option("--resume", train_args.resume, "Checkpoint to continue from");
  train_cmd->add_flag("--force", train_args.force, "Resume even if the config hash differs");
  train_cmd->add_option("--max-steps", train_args.max_steps, "Stop after this many steps (-1: full schedule)")
      ->capture_default_str();
  train_cmd->add_flag("--quiet", train_args.quiet, "Do not echo log rows");

  InpaintArgs inpaint_args;
  auto* inpaint_cmd = app.add_subcommand("inpaint", "Complete one region of one image");
  inpaint_cmd->add_option("--ckpt", inpaint_args.ckpt, "Checkpoint")->required();
  inpaint_cmd->add_option("--input", inpaint_args.input, "Grayscale PNG of the checkpoint's image size")
      ->required();
  inpaint_cmd->add_option("--out", inpaint_args.out, "Output PNG")->required();
  auto* region_opt = inpaint_cmd->add_option("--region", inpaint_args.region, "Region as TOP,LEFT,SIZE");
  auto* random_opt =
      inpaint_cmd->add_flag("--random-region", inpaint_args.random_region, "Sample a region of the trained size");
  inpaint_cmd->add_option("--seed", inpaint_args.seed, "Seed for --random-region")->capture_default_str();
  region_opt->excludes(random_opt);

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score checkpoints on the validation split");
  eval_cmd->add_option("--config", eval_args.config, "Run config JSON (manifest, sizes, seed)")->required();
  eval_cmd->add_option("--ckpt", eval_args.ckpts, "Checkpoints, comma separated")->delimiter(',');
  eval_cmd->add_flag("--with-baseline", eval_args.with_baseline, "Include the mean-fill baseline");
  eval_cmd->add_option("--out", eval_args.out, "Report directory (default: the config's run dir)");
  eval_cmd->add_option("--grid", eval_args.grid, "Write an input | outputs | target PNG grid");
  eval_cmd->add_option("--grid-count", eval_args.grid_count, "Samples in the grid")->capture_default_str();

  AblationArgs ablation_args;
  auto* ablation_cmd =
      app.add_subcommand("ablation", "Compare mean-fill, MedGAN and ip-MedGAN weights on the validation split");
  ablation_cmd->add_option("--config", ablation_args.config, "Base run config JSON")->required();
  ablation_cmd->add_flag("--train-missing", ablation_args.train_missing, "Train configs without a checkpoint");
  ablation_cmd->add_option("--max-steps", ablation_args.max_steps, "Cap on steps per training run")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*make) return run_guarded([&] { return cmd_make_dataset(make_args); });
  if (*train_cmd) return run_guarded([&] { return cmd_train(train_args); });
  if (*inpaint_cmd) return run_guarded([&] { return cmd_inpaint(inpaint_args); });
  if (*eval_cmd) return run_guarded([&] { return cmd_evaluate(eval_args); });
  if (*ablation_cmd) return run_guarded([&] { return cmd_ablation(ablation_args); });
  return kExitUsage;
}
