// Acceptance suite: one PASS/FAIL line per criterion. Every threshold lives in
// the constants below. Pass criterion numbers to run a subset.

#include <torch/torch.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "inpaint_forge/evaluation.hpp"
#include "inpaint_forge/feature_extractor.hpp"
#include "inpaint_forge/losses.hpp"
#include "inpaint_forge/metrics.hpp"
#include "inpaint_forge/networks.hpp"
#include "inpaint_forge/training.hpp"
#include "support.hpp"

using namespace inpaint_forge;
namespace t = inpaint_forge::testing;

namespace {

// 1
constexpr int kIdentityPhantoms = 50;
constexpr int kPsnrPairs = 50;
constexpr double kPsnrTol = 1e-9;
constexpr double kIdentityTol = 1e-12;
constexpr double kC1Seconds = 10.0;
// 2
constexpr int kOraclePairs = 20;
constexpr double kOracleTol = 1e-6;
constexpr double kC2Seconds = 30.0;
// 3
constexpr int kGlobalRf = 70;
constexpr int kLocalRf = 34;
constexpr double kC3Seconds = 1.0;
// 4
constexpr double kGradTol = 1e-3;
constexpr double kC4Seconds = 30.0;
// 5
constexpr double kGoldenTol = 1e-9;
constexpr double kStyleGolden = 0.1875;
// 6
constexpr int kMaskImage = 256;
constexpr int kMaskRegion = 64;
constexpr int kMaskTrials = 200;
// 7
constexpr int kCapacityPairs = 8;
constexpr int kCapacitySize = 64;
constexpr int kCapacityRegion = 16;
constexpr int kCapacityMaxSteps = 200;
constexpr double kRealAbove = 0.9;
constexpr double kFakeBelow = 0.1;
constexpr double kC7Seconds = 300.0;
// 8
constexpr int kSmokeImages = 200;
constexpr double kSmokeValFraction = 0.2;
constexpr int kSmokeSize = 128;
constexpr int kSmokeRegion = 32;
constexpr int kSmokeEpochs = 15;
constexpr double kBelowMeanFill = 0.20;
constexpr double kBelowUntrained = 0.30;
constexpr double kC8Seconds = 45.0 * 60.0;
// 10
constexpr int kDeterminismSteps = 10;
constexpr int kResumeFrom = 5;
constexpr double kLossTol = 1e-6;

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

FeatureStack stack_of(std::vector<torch::Tensor> maps) {
  FeatureStack s;
  for (std::size_t i = 0; i < maps.size(); ++i) s.push_back({static_cast<int>(i), maps[i]});
  return s;
}

// --- 1 ---------------------------------------------------------------------------

Outcome metric_identities() {
  const auto t0 = Clock::now();
  Rng rng(1, 0x6964);
  double worst = 0.0;
  bool exact = true;
  for (int i = 0; i < kIdentityPhantoms; ++i) {
    const Image p = make_phantom(rng.next(), 64);
    worst = std::max({worst, std::abs(ssim(p, p) - 1.0), std::abs(uqi(p, p) - 1.0)});
    exact = exact && mse(p, p) == 0.0;
  }
  double psnr_err = 0.0;
  for (int i = 0; i < kPsnrPairs; ++i) {
    const Image a = make_phantom(rng.next(), 64);
    const Image b = t::perturb(a, rng.next(), 0.05);
    const double m = mse(a, b);
    psnr_err = std::max(psnr_err, std::abs(psnr(a, b) - 10.0 * std::log10(kPeak * kPeak / m)));
  }
  const double secs = seconds_since(t0);
  return {worst <= kIdentityTol && exact && psnr_err <= kPsnrTol && secs < kC1Seconds,
          "max |SSIM-1|,|UQI-1| " + fmt(worst) + ", MSE exact " + (exact ? "yes" : "no") +
              ", max PSNR err " + fmt(psnr_err) + ", " + fmt(secs, 3) + " s"};
}

// --- 2 ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int i = 0; i < kOraclePairs; ++i) {
    const Image a = t::random_image(1000 + i, 32, 32);
    Image b = (i % 2 == 0) ? t::perturb(a, 2000 + i, 0.2) : t::random_image(3000 + i, 32, 32);
    if (i % 5 == 0) {
      // Flat patches exercise the constant-window branches.
      std::vector<float> px(b.pixels().begin(), b.pixels().end());
      for (int r = 0; r < 12; ++r) {
        for (int c = 0; c < 12; ++c) px[r * 32 + c] = 0.25f;
      }
      b = Image(32, 32, Range::Storage, std::move(px));
    }
    worst = std::max(worst, std::abs(ssim(a, b) - t::brute_ssim(a, b, kDefaultWindow)));
    worst = std::max(worst, std::abs(uqi(a, b) - t::brute_uqi(a, b, kDefaultWindow)));
  }
  const double secs = seconds_since(t0);
  return {worst <= kOracleTol && secs < kC2Seconds, "max deviation " + fmt(worst) + ", " + fmt(secs, 3) + " s"};
}

// --- 3 ---------------------------------------------------------------------------

Outcome receptive_fields() {
  const auto t0 = Clock::now();
  const int g = receptive_field(DiscriminatorSpec::global_default());
  const int l = receptive_field(DiscriminatorSpec::local_default());
  const double secs = seconds_since(t0);
  return {g == kGlobalRf && l == kLocalRf && secs < kC3Seconds,
          "global " + std::to_string(g) + ", local " + std::to_string(l)};
}

// --- 4 ---------------------------------------------------------------------------

Outcome gradient_checks() {
  const auto t0 = Clock::now();
  torch::manual_seed(4);
  const auto opts = torch::kFloat64;
  const auto probe = torch::randn({2, 3, 3}, opts);
  const double gram_err = t::gradient_check([&](const torch::Tensor& x) { return (gram_matrix(x) * probe).sum(); },
                                            torch::rand({2, 3, 4, 4}, opts) * 2 - 1);

  const auto target = torch::rand({2, 3, 4, 4}, opts) * 2 - 1;
  const std::vector<double> w1{1.0};
  const double style_err = t::gradient_check(
      [&](const torch::Tensor& x) { return style_loss(stack_of({target}), stack_of({x}), w1); },
      torch::rand({2, 3, 4, 4}, opts) * 2 - 1);

  const auto conv_w = torch::randn({4, 3, 3, 3}, opts);
  const auto features = [&](const torch::Tensor& x) {
    return stack_of({x, torch::leaky_relu(torch::conv2d(x, conv_w, {}, 1, 1), 0.2)});
  };
  const std::vector<double> w2{0.5, 0.5};
  const auto x0 = target + 0.3 * torch::sign(torch::randn_like(target));
  const double percep_err = t::gradient_check(
      [&](const torch::Tensor& x) { return perceptual_loss(features(target), features(x), w2); }, x0);

  const double secs = seconds_since(t0);
  const double worst = std::max({gram_err, style_err, percep_err});
  return {worst < kGradTol && secs < kC4Seconds, "gram " + fmt(gram_err, 3) + ", style " + fmt(style_err, 3) +
                                                     ", perceptual " + fmt(percep_err, 3) + " (relative)"};
}

// --- 5 ---------------------------------------------------------------------------

Outcome goldens() {
  const auto fx = torch::ones({1, 2, 2, 2}, torch::kFloat64);
  auto fh = torch::ones({1, 2, 2, 2}, torch::kFloat64);
  fh.index_put_({0, 1}, 0.0);
  const std::vector<double> w{1.0};
  const double style = style_loss(stack_of({fx}), stack_of({fh}), w).item<double>();

  const PatchScoreMap half{torch::full({2, 1, 4, 4}, 0.5, torch::kFloat64), ScoreSource::Global};
  const PatchScoreMap half_local{torch::full({2, 1, 4, 4}, 0.5, torch::kFloat64), ScoreSource::Local};
  const double log2 = std::log(2.0);
  double nash = 0.0;
  for (double v : {adversarial_loss_d(half, half).item<double>(), adversarial_loss_g(half).item<double>(),
                   local_adversarial_loss_d(half_local, half_local).item<double>(),
                   local_adversarial_loss_g(half_local).item<double>()}) {
    nash = std::max(nash, std::abs(v - log2));
  }
  const double style_err = std::abs(style - kStyleGolden);
  return {style_err <= kGoldenTol && nash <= kGoldenTol,
          "style " + fmt(style, 12) + ", max |L - log 2| " + fmt(nash, 3)};
}

// --- 6 ---------------------------------------------------------------------------

Outcome masking_geometry() {
  const Image target = make_phantom(6, kMaskImage);
  Rng rng(6, 0x6D61736B);
  bool fraction_exact = true;
  bool context_exact = true;
  for (int i = 0; i < kMaskTrials; ++i) {
    const RegionSpec r = sample_region(rng, kMaskImage, kMaskImage, kMaskRegion);
    fraction_exact = fraction_exact && masked_fraction(r, kMaskImage, kMaskImage) == 1.0 / 16.0;
    const auto sample = make_sample(to_model_range(target), r);
    const Image noise = t::random_image(rng.next(), kMaskImage, kMaskImage, Range::Model);
    const Image done = compose(sample.context, noise, r);
    for (int y = 0; y < kMaskImage; ++y) {
      for (int x = 0; x < kMaskImage; ++x) {
        const bool inside = y >= r.top && y < r.top + r.size && x >= r.left && x < r.left + r.size;
        const float a = done(y, x);
        const float b = inside ? noise(y, x) : sample.context(y, x);
        if (std::memcmp(&a, &b, sizeof(float)) != 0) context_exact = false;
      }
    }
  }
  return {fraction_exact && context_exact, std::string("fraction 1/16 exact: ") + (fraction_exact ? "yes" : "no") +
                                               ", context bit-exact: " + (context_exact ? "yes" : "no") + " over " +
                                               std::to_string(kMaskTrials) + " regions"};
}

// --- 7 ---------------------------------------------------------------------------

Outcome discriminator_capacity() {
  const auto t0 = Clock::now();
  torch::manual_seed(7);
  auto d = build_global_discriminator(DiscriminatorSpec::global_default());
  torch::optim::Adam opt(d->parameters(), torch::optim::AdamOptions(2e-4).betas({0.5, 0.999}));

  Rng rng(7, 0x636170);
  std::vector<InpaintingSample> samples;
  std::vector<Image> fakes;
  for (int i = 0; i < kCapacityPairs; ++i) {
    const Image target = to_model_range(make_phantom(rng.next(), kCapacitySize));
    samples.push_back(make_sample(target, sample_region(rng, kCapacitySize, kCapacitySize, kCapacityRegion)));
    fakes.push_back(mean_fill_baseline(samples.back()));
  }
  const auto batch = to_batch(samples);
  std::vector<torch::Tensor> fake_tensors;
  for (const auto& f : fakes) fake_tensors.push_back(image_to_tensor(f));
  const auto real_in = condition_on_context(batch.target, batch.context);
  const auto fake_in = condition_on_context(torch::cat(fake_tensors), batch.context);

  // Scores come from the training forward pass (batch statistics), the only
  // mode a discriminator ever runs in. Per-pair mean over the patch map.
  int reached = -1;
  double min_real = 0.0, max_fake = 1.0;
  for (int updates = 0;; ++updates) {
    const auto real = d->forward(real_in);
    const auto fake = d->forward(fake_in);
    min_real = real.scores.mean({1, 2, 3}).min().item<double>();
    max_fake = fake.scores.mean({1, 2, 3}).max().item<double>();
    if (min_real > kRealAbove && max_fake < kFakeBelow) {
      reached = updates;
      break;
    }
    if (updates == kCapacityMaxSteps) break;
    const auto loss = adversarial_loss_d(real, fake);
    opt.zero_grad();
    loss.backward();
    opt.step();
  }
  const double secs = seconds_since(t0);
  return {reached > 0 && secs < kC7Seconds,
          (reached > 0 ? "separated after " + std::to_string(reached) + " steps" : "not separated in 200 steps") +
              ", min real " + fmt(min_real, 4) + ", max fake " + fmt(max_fake, 4) + ", " + fmt(secs, 3) + " s"};
}

// --- 8 ---------------------------------------------------------------------------

Outcome training_smoke(const std::filesystem::path& work) {
  const auto t0 = Clock::now();
  const auto data = work / "smoke_data";
  const auto manifest = t::write_phantoms(data, kSmokeImages, kSmokeSize, 8, kSmokeValFraction);
  write_standin_vgg19_weights(work / "vgg19_standin.ifa", 8);

  RunConfig cfg;
  cfg.name = "ip-MedGAN-smoke";
  cfg.run_dir = work / "smoke_run";
  cfg.manifest = data / kManifestFileName;
  cfg.vgg_weights = work / "vgg19_standin.ifa";
  cfg.image_size = kSmokeSize;
  cfg.region_size = kSmokeRegion;
  cfg.generator.num_unets = 1;
  cfg.generator.depth = 5;
  cfg.generator.base_channels = 32;
  cfg.generator.max_channels = 256;
  cfg.loss = LossWeights::ip_medgan();
  cfg.train.epochs = kSmokeEpochs;
  cfg.train.batch_size = 4;
  cfg.train.seed = 8;
  cfg.train.log_every = 40;

  // Untrained null: the generator exactly as training starts it.
  const auto settings = EvalSettings::from_config(cfg);
  CasNet untrained = TrainingState(cfg).generator();
  const EvalModel null_model{"untrained", [&](const InpaintingSample& s) { return inpaint(untrained, s); }};

  const auto result = train(cfg, manifest);
  const auto table = evaluate({mean_fill_model(), null_model, checkpoint_model(result.final_checkpoint)},
                              manifest, settings);
  write_reports(table, cfg.run_dir);

  const double fill = table.models[0].region.mse.mean;
  const double null = table.models[1].region.mse.mean;
  const double trained = table.models[2].region.mse.mean;
  const double secs = seconds_since(t0);
  const bool beats_fill = trained <= (1.0 - kBelowMeanFill) * fill;
  const bool beats_null = trained <= (1.0 - kBelowUntrained) * null;
  return {beats_fill && beats_null && secs < kC8Seconds,
          "region MSE trained " + fmt(trained) + ", mean-fill " + fmt(fill) + " (need <= " +
              fmt((1.0 - kBelowMeanFill) * fill) + "), untrained " + fmt(null) + " (need <= " +
              fmt((1.0 - kBelowUntrained) * null) + "), " + fmt(secs / 60.0, 3) + " min"};
}

// --- 9 ---------------------------------------------------------------------------

std::string first_log_field(const std::filesystem::path& log, int field) {
  std::ifstream in(log);
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  std::istringstream row(line);
  std::string cell;
  for (int i = 0; i <= field; ++i) std::getline(row, cell, ',');
  return cell;
}

Outcome ablation_harness(const std::filesystem::path& work) {
  const auto data = work / "ablation_data";
  const auto manifest = t::write_phantoms(data, 12, 32, 9, 0.25);
  const auto base = t::tiny_config(work / "ablation_run", data / kManifestFileName);
  AblationOptions opts;
  opts.train_missing = true;
  const auto table = ablation_suite(base, manifest, opts);

  const auto cfgs = ablation_configs(base);
  const bool same_seed = cfgs[0].train == cfgs[1].train;
  // Same seeds, same data: the very first D update sees identical inputs.
  const auto d0 = first_log_field(cfgs[0].resolved_run_dir() / "train_log.csv", 6);
  const auto d1 = first_log_field(cfgs[1].resolved_run_dir() / "train_log.csv", 6);

  std::ifstream txt(base.resolved_run_dir() / "eval_report.txt");
  std::stringstream ss;
  ss << txt.rdbuf();
  const std::string text = ss.str();
  bool columns = true;
  std::size_t pos = 0;
  for (const char* col : {"SSIM", "PSNR(dB)", "MSE", "UQI"}) {
    const auto at = text.find(col, pos);
    columns = columns && at != std::string::npos;
    pos = at == std::string::npos ? pos : at;
  }
  const bool rows = table.models.size() == 3 && table.models[1].name == "MedGAN" &&
                    table.models[2].name == "ip-MedGAN";
  return {same_seed && !d0.empty() && d0 == d1 && columns && rows,
          "models " + std::to_string(table.models.size()) + ", columns ordered " + (columns ? "yes" : "no") +
              ", first D loss " + d0 + " vs " + d1};
}

// --- 10 --------------------------------------------------------------------------

Outcome determinism_and_resume(const std::filesystem::path& work) {
  const auto data = work / "det_data";
  const auto manifest = t::write_phantoms(data, 24, 32, 10, 0.25);
  auto cfg = t::tiny_config(work / "det_a", data / kManifestFileName);
  cfg.train.checkpoint_every = kResumeFrom;
  TrainOptions opts;
  opts.max_steps = kDeterminismSteps;
  const auto a = train(cfg, manifest, opts);
  cfg.run_dir = work / "det_b";
  const auto b = train(cfg, manifest, opts);

  auto diff = [](const TrainLogRow& x, const TrainLogRow& y) {
    return std::max({std::abs(x.losses.total - y.losses.total), std::abs(x.losses.adv - y.losses.adv),
                     std::abs(x.losses.local - y.losses.local), std::abs(x.losses.percep - y.losses.percep),
                     std::abs(x.d_global - y.d_global), std::abs(x.d_local - y.d_local)});
  };
  double seeded = 0.0;
  bool counts = a.log.size() == kDeterminismSteps && b.log.size() == kDeterminismSteps;
  for (std::size_t i = 0; counts && i < a.log.size(); ++i) seeded = std::max(seeded, diff(a.log[i], b.log[i]));

  TrainOptions resume;
  resume.max_steps = kDeterminismSteps - kResumeFrom;
  resume.resume = checkpoint_path(work / "det_b", kResumeFrom);
  const auto c = train(cfg, manifest, resume);
  double resumed = 0.0;
  counts = counts && c.log.size() == kDeterminismSteps - kResumeFrom;
  for (std::size_t i = 0; counts && i < c.log.size(); ++i) {
    counts = counts && c.log[i].step == a.log[i + kResumeFrom].step;
    resumed = std::max(resumed, diff(a.log[i + kResumeFrom], c.log[i]));
  }
  return {counts && seeded <= kLossTol && resumed <= kLossTol,
          "seeded max diff " + fmt(seeded, 3) + ", resumed max diff " + fmt(resumed, 3)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  std::vector<int> only;
  std::filesystem::path work;
  app.add_option("criteria", only, "Criterion numbers to run (default: all)");
  app.add_option("--work", work, "Scratch directory, kept afterwards (default: a temp dir)");
  CLI11_PARSE(app, argc, argv);

  std::optional<t::TempDir> tmp;
  if (work.empty()) {
    tmp.emplace("acceptance");
    work = tmp->path();
  }
  std::filesystem::create_directories(work);

  torch::set_num_threads(1);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"metric identities", metric_identities},
      {"oracle equivalence", oracle_equivalence},
      {"receptive fields", receptive_fields},
      {"gradient checks", gradient_checks},
      {"hand-computed goldens", goldens},
      {"masking geometry", masking_geometry},
      {"discriminator capacity", discriminator_capacity},
      {"training smoke signal", [&] { return training_smoke(work); }},
      {"ablation harness", [&] { return ablation_harness(work); }},
      {"determinism and resume", [&] { return determinism_and_resume(work); }},
  };
  const std::set<int> selected(only.begin(), only.end());

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(n)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << "criterion " << std::setw(2) << n << ": " << (o.pass ? "PASS" : "FAIL") << "  "
              << criteria[i].first << " - " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
