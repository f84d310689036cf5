#include "inpaint_forge/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "inpaint_forge/errors.hpp"
#include "inpaint_forge/png_io.hpp"
#include "inpaint_forge/rng.hpp"
#include "inpaint_forge/tensor_archive.hpp"

namespace inpaint_forge {

NonFiniteLossError::NonFiniteLossError(std::int64_t step, std::string term, std::string detail)
    : NonFiniteError("non-finite " + term + " loss at step " + std::to_string(step) +
                     (detail.empty() ? "" : ": " + detail)),
      step_(step),
      term_(std::move(term)) {}

// ---------------------------------------------------------------------------

TrainingState::TrainingState(RunConfig config, Vgg19Features extractor)
    : config_(std::move(config)) {
  config_.validate();
  at::globalContext().setDeterministicAlgorithms(config_.train.deterministic, false);
  torch::manual_seed(config_.train.seed);
  generator_ = build_casnet(config_.generator, config_.image_size);
  global_d_ = build_global_discriminator(config_.global_discriminator);
  local_d_ = build_local_discriminator(config_.local_discriminator);

  if (config_.needs_feature_extractor()) {
    if (extractor.is_empty()) {
      std::optional<std::filesystem::path> configured;
      if (config_.vgg_weights) configured = config_.resolve(*config_.vgg_weights);
      extractor = load_feature_extractor(resolve_vgg_weights(configured), config_.style_stages);
    }
    if (extractor->tap_stages() != config_.style_stages) {
      throw SpecError("feature extractor taps differ from loss.style_stages");
    }
    extractor_ = std::move(extractor);
  }

  const auto options = [&] {
    return torch::optim::AdamOptions(config_.train.learning_rate)
        .betas(std::make_tuple(config_.train.beta1, config_.train.beta2));
  };
  opt_g_ = std::make_unique<torch::optim::Adam>(generator_->parameters(), options());
  opt_d_ = std::make_unique<torch::optim::Adam>(global_d_->parameters(), options());
  opt_l_ = std::make_unique<torch::optim::Adam>(local_d_->parameters(), options());
}

// ---------------------------------------------------------------------------

torch::Tensor image_to_tensor(const Image& img) {
  auto t = torch::empty({1, 1, img.height(), img.width()}, torch::kFloat32);
  std::copy(img.pixels().begin(), img.pixels().end(), t.data_ptr<float>());
  return t;
}

Image tensor_to_image(const torch::Tensor& t, Range range) {
  auto flat = t.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  if (flat.dim() == 4) flat = flat.squeeze(0).squeeze(0);
  if (flat.dim() != 2) throw ShapeError("tensor_to_image expects 1 x 1 x H x W or H x W");
  flat = flat.clamp(range_min(range), range_max(range)).contiguous();
  const float* data = flat.data_ptr<float>();
  std::vector<float> pixels(data, data + flat.numel());
  return Image(static_cast<int>(flat.size(0)), static_cast<int>(flat.size(1)), range, std::move(pixels));
}

BatchTensors to_batch(std::span<const InpaintingSample> samples) {
  if (samples.empty()) throw std::invalid_argument("to_batch: empty batch");
  std::vector<torch::Tensor> targets, contexts, masks;
  BatchTensors batch;
  for (const auto& s : samples) {
    if (s.target.range() != Range::Model || s.context.range() != Range::Model) {
      throw RangeError("training samples must be in model range");
    }
    targets.push_back(image_to_tensor(s.target));
    contexts.push_back(image_to_tensor(s.context));
    auto m = torch::zeros({1, 1, s.target.height(), s.target.width()});
    m.index_put_({0, 0, torch::indexing::Slice(s.region.top, s.region.top + s.region.size),
                  torch::indexing::Slice(s.region.left, s.region.left + s.region.size)},
                 1.0);
    masks.push_back(m);
    batch.regions.push_back(s.region);
  }
  batch.target = torch::cat(targets);
  batch.context = torch::cat(contexts);
  batch.mask = torch::cat(masks);
  return batch;
}

torch::Tensor crop_regions(const torch::Tensor& images, std::span<const RegionSpec> regions) {
  using torch::indexing::Slice;
  std::vector<torch::Tensor> crops;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const auto& r = regions[i];
    crops.push_back(images.index({Slice(static_cast<std::int64_t>(i), static_cast<std::int64_t>(i) + 1),
                                  Slice(), Slice(r.top, r.top + r.size),
                                  Slice(r.left, r.left + r.size)}));
  }
  return torch::cat(crops);
}

torch::Tensor generator_input(const BatchTensors& batch, const GeneratorSpec& spec) {
  return spec.mask_channel ? torch::cat({batch.context, batch.mask}, 1) : batch.context;
}

namespace {

double checked(const torch::Tensor& loss, std::int64_t step, const char* term) {
  const double v = loss.item<double>();
  if (!std::isfinite(v)) throw NonFiniteLossError(step, term, "");
  return v;
}

// Re-enables discriminator gradients when the generator update leaves scope.
struct FrozenDiscriminators {
  PatchDiscriminator& global;
  PatchDiscriminator& local;
  FrozenDiscriminators(PatchDiscriminator& g, PatchDiscriminator& l) : global(g), local(l) {
    set_trainable(*global, false);
    set_trainable(*local, false);
  }
  ~FrozenDiscriminators() {
    set_trainable(*global, true);
    set_trainable(*local, true);
  }
};

}  // namespace

StepResult train_step(TrainingState& state, std::span<const InpaintingSample> samples) {
  const RunConfig& cfg = state.config();
  const std::int64_t step = state.step + 1;
  auto& gen = state.generator();
  auto& disc = state.global_discriminator();
  auto& local = state.local_discriminator();
  gen->train();
  disc->train();
  local->train();

  const BatchTensors batch = to_batch(samples);
  const auto raw = gen->forward(generator_input(batch, cfg.generator));
  const auto completed = cfg.compose_for_discriminators
                             ? torch::where(batch.mask > 0.5, raw, batch.context)
                             : raw;
  const auto target_regions = crop_regions(batch.target, batch.regions);
  const auto completed_regions = crop_regions(completed, batch.regions);

  StepResult result;
  result.step = step;

  {
    const auto real = disc->forward(condition_on_context(batch.target, batch.context));
    const auto fake = disc->forward(condition_on_context(completed.detach(), batch.context));
    const auto loss = adversarial_loss_d(real, fake);
    result.d_global = checked(loss, step, "d_global");
    state.global_optimizer().zero_grad();
    loss.backward();
    state.global_optimizer().step();
  }
  {
    const auto real = local->forward(target_regions);
    const auto fake = local->forward(completed_regions.detach());
    const auto loss = local_adversarial_loss_d(real, fake);
    result.d_local = checked(loss, step, "d_local");
    state.local_optimizer().zero_grad();
    loss.backward();
    state.local_optimizer().step();
  }
  {
    FrozenDiscriminators frozen(disc, local);
    const auto fake = disc->forward_with_features(condition_on_context(completed, batch.context));
    FeatureStack real_features;
    {
      torch::NoGradGuard no_grad;
      real_features = disc->forward_with_features(condition_on_context(batch.target, batch.context)).features;
    }

    LossTerms terms;
    terms.adv = adversarial_loss_g(fake.scores);
    terms.local = local_adversarial_loss_g(local->forward(completed_regions));
    terms.percep = perceptual_loss(real_features, fake.features,
                                   cfg.loss.perceptual_layer_weights(fake.features.size()));
    if (!state.extractor().is_empty()) {
      FeatureStack target_style;
      {
        torch::NoGradGuard no_grad;
        target_style = state.extractor()->forward(batch.target);
      }
      const auto generated_style = state.extractor()->forward(completed);
      terms.style = style_loss(target_style, generated_style,
                               cfg.loss.style_layer_weights(generated_style.size()), cfg.style_depth);
    }

    GeneratorObjective objective;
    try {
      objective = generator_total_loss(terms, cfg.loss);
    } catch (const NonFiniteError& e) {
      throw NonFiniteLossError(step, "generator", e.what());
    }
    state.generator_optimizer().zero_grad();
    objective.total.backward();
    state.generator_optimizer().step();
    result.generator = objective.breakdown;
  }

  state.step = step;
  return result;
}

// ---------------------------------------------------------------------------

std::string format_log_row(const TrainLogRow& row) {
  std::ostringstream out;
  out << row.step << std::setprecision(9) << ',' << row.losses.adv << ',' << row.losses.local << ','
      << row.losses.style << ',' << row.losses.percep << ',' << row.losses.total << ','
      << row.d_global << ',' << row.d_local << ',' << std::setprecision(6) << std::fixed
      << row.elapsed_seconds;
  return out.str();
}

namespace {
constexpr std::uint64_t kDataStream = 0x64617461ULL;  // "data"
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, int epoch, std::size_t n) {
  Rng rng = Rng(seed, kDataStream).split(2 * static_cast<std::uint64_t>(epoch));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

std::vector<RegionSpec> epoch_regions(std::uint64_t seed, int epoch, std::size_t n, int image_size,
                                      int region_size) {
  Rng rng = Rng(seed, kDataStream).split(2 * static_cast<std::uint64_t>(epoch) + 1);
  std::vector<RegionSpec> regions;
  regions.reserve(n);
  for (std::size_t i = 0; i < n; ++i) regions.push_back(sample_region(rng, image_size, image_size, region_size));
  return regions;
}

std::vector<Image> load_split_images(const DatasetManifest& manifest, Split split, int image_size) {
  std::vector<Image> images;
  for (const auto& path : manifest.paths(split)) {
    images.push_back(to_model_range(fit_to_size(load_image(path), image_size)));
  }
  return images;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& run_dir, std::int64_t step) {
  return run_dir / ("ckpt_" + std::to_string(step) + ".bin");
}

namespace {

void write_nonfinite_dump(const std::filesystem::path& run_dir, const NonFiniteLossError& e,
                          const std::vector<std::filesystem::path>& paths,
                          std::span<const std::size_t> indices, std::span<const RegionSpec> regions) {
  nlohmann::json dump;
  dump["step"] = e.step();
  dump["term"] = e.term();
  dump["message"] = e.what();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& r = regions[indices[k]];
    dump["batch"].push_back({{"batch_index", k},
                             {"dataset_index", indices[k]},
                             {"path", paths[indices[k]].generic_string()},
                             {"region", {r.top, r.left, r.size}}});
  }
  std::ofstream out(run_dir / ("nonfinite_step" + std::to_string(e.step()) + ".json"));
  out << dump.dump(2) << '\n';
}

}  // namespace

TrainResult train(const RunConfig& config, const DatasetManifest& manifest, const TrainOptions& options) {
  config.validate();
  const auto paths = manifest.paths(Split::Train);
  if (paths.empty()) throw DatasetError("manifest has no train entries");
  const auto images = load_split_images(manifest, Split::Train, config.image_size);

  TrainingState state(config);
  const auto run_dir = config.resolved_run_dir();
  std::filesystem::create_directories(run_dir);
  const auto log_path = run_dir / "train_log.csv";

  std::ofstream log;
  if (options.resume) {
    load_checkpoint(state, *options.resume, options.force);
    log.open(log_path, std::ios::app);
  } else {
    config.write(run_dir / "config.json");
    log.open(log_path, std::ios::trunc);
    log << kTrainLogHeader << '\n' << std::flush;
  }
  if (!log) throw IoError("cannot write " + log_path.string());

  const auto n = images.size();
  const auto batch_size = static_cast<std::size_t>(config.train.batch_size);
  const auto steps_per_epoch = static_cast<std::int64_t>((n + batch_size - 1) / batch_size);
  const std::int64_t total_steps = steps_per_epoch * config.train.epochs;

  TrainResult result;
  const auto start = std::chrono::steady_clock::now();
  int cached_epoch = -1;
  std::vector<std::size_t> order;
  std::vector<RegionSpec> regions;
  std::int64_t last_checkpoint = -1;

  while (state.step < total_steps && (options.max_steps < 0 || result.steps < options.max_steps)) {
    const auto epoch = static_cast<int>(state.step / steps_per_epoch);
    const auto b = static_cast<std::size_t>(state.step % steps_per_epoch);
    if (epoch != cached_epoch) {
      order = epoch_order(config.train.seed, epoch, n);
      regions = epoch_regions(config.train.seed, epoch, n, config.image_size, config.region_size);
      cached_epoch = epoch;
    }
    const std::size_t begin = b * batch_size;
    const std::size_t end = std::min(n, begin + batch_size);
    const std::span<const std::size_t> indices(order.data() + begin, end - begin);
    std::vector<InpaintingSample> batch;
    for (std::size_t i : indices) {
      batch.push_back(make_sample(images[i], regions[i], static_cast<float>(config.fill_value)));
    }

    StepResult step;
    try {
      step = train_step(state, batch);
    } catch (const NonFiniteLossError& e) {
      write_nonfinite_dump(run_dir, e, paths, indices, regions);
      throw;
    }
    ++result.steps;

    TrainLogRow row{step.step, step.generator, step.d_global, step.d_local,
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
    result.log.push_back(row);
    if (step.step % config.train.log_every == 0 || step.step == total_steps) {
      log << format_log_row(row) << '\n' << std::flush;
      if (options.on_log) options.on_log(row);
    }
    if (config.train.checkpoint_every > 0 && step.step % config.train.checkpoint_every == 0) {
      save_checkpoint(state, checkpoint_path(run_dir, step.step));
      last_checkpoint = step.step;
    }
  }

  result.final_checkpoint = checkpoint_path(run_dir, state.step);
  if (last_checkpoint != state.step) save_checkpoint(state, result.final_checkpoint);
  return result;
}

// ---------------------------------------------------------------------------

namespace {

struct NetworkRef {
  const char* prefix;
  torch::nn::Module* module;
  torch::optim::Adam* optimizer;
};

std::vector<NetworkRef> networks_of(TrainingState& state) {
  return {{"generator", state.generator().get(), &state.generator_optimizer()},
          {"global_discriminator", state.global_discriminator().get(), &state.global_optimizer()},
          {"local_discriminator", state.local_discriminator().get(), &state.local_optimizer()}};
}

nlohmann::json architecture_of(const RunConfig& c) {
  return {{"image_size", c.image_size},
          {"generator", c.generator},
          {"global_discriminator", c.global_discriminator},
          {"local_discriminator", c.local_discriminator}};
}

}  // namespace

void save_checkpoint(const TrainingState& const_state, const std::filesystem::path& path) {
  // Reads only; the accessors are non-const because modules are shared handles.
  auto& state = const_cast<TrainingState&>(const_state);
  const RunConfig& cfg = state.config();

  std::vector<NamedTensor> tensors;
  nlohmann::json adam_steps = nlohmann::json::object();
  for (const auto& net : networks_of(state)) {
    const std::string prefix = net.prefix;
    for (const auto& item : net.module->named_parameters()) {
      tensors.push_back({prefix + "." + item.key(), item.value()});
    }
    for (const auto& item : net.module->named_buffers()) {
      tensors.push_back({prefix + "." + item.key(), item.value()});
    }
    auto& opt_state = net.optimizer->state();
    for (const auto& item : net.module->named_parameters()) {
      auto it = opt_state.find(item.value().unsafeGetTensorImpl());
      if (it == opt_state.end()) continue;
      const auto& s = static_cast<const torch::optim::AdamParamState&>(*it->second);
      const std::string key = "adam." + prefix + "." + item.key();
      tensors.push_back({key + ".exp_avg", s.exp_avg()});
      tensors.push_back({key + ".exp_avg_sq", s.exp_avg_sq()});
      adam_steps[key] = s.step();
    }
  }

  nlohmann::json meta{{"format", kCheckpointFormat},
                      {"version", 1},
                      {"config", cfg.to_json()},
                      {"config_hash", cfg.hash()},
                      {"architecture", architecture_of(cfg)},
                      {"step", state.step},
                      // Data order and regions are pure functions of (seed, epoch),
                      // so the seed and step counter are the complete sampler state.
                      {"rng", {{"seed", cfg.train.seed}, {"step", state.step}}},
                      {"adam_steps", adam_steps}};
  write_tensor_archive(path, meta, tensors);
}

namespace {

TensorArchive read_checkpoint_archive(const std::filesystem::path& path) {
  TensorArchive archive = read_tensor_archive(path);
  if (archive.meta.value("format", "") != kCheckpointFormat) {
    throw CorruptFileError(path.string() + " is not an inpaint-forge checkpoint");
  }
  return archive;
}

void copy_into(torch::Tensor& dst, const torch::Tensor& src, const std::string& name) {
  if (dst.sizes() != src.sizes() || dst.scalar_type() != src.scalar_type()) {
    throw SpecError("checkpoint tensor '" + name + "' does not match the network layout");
  }
  torch::NoGradGuard no_grad;
  dst.copy_(src);
}

void load_module(torch::nn::Module& module, const TensorArchive& archive, const std::string& prefix) {
  for (auto& item : module.named_parameters()) {
    copy_into(item.value(), archive.at(prefix + "." + item.key()), prefix + "." + item.key());
  }
  for (auto& item : module.named_buffers()) {
    copy_into(item.value(), archive.at(prefix + "." + item.key()), prefix + "." + item.key());
  }
}

}  // namespace

RunConfig checkpoint_config(const std::filesystem::path& path) {
  const auto archive = read_checkpoint_archive(path);
  try {
    return RunConfig::from_json(archive.meta.at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError(path.string() + " has a malformed config header: " + e.what());
  }
}

void load_checkpoint(TrainingState& state, const std::filesystem::path& path, bool force) {
  const auto archive = read_checkpoint_archive(path);
  const auto& meta = archive.meta;
  try {
    if (meta.at("architecture") != architecture_of(state.config())) {
      throw SpecError("checkpoint " + path.string() +
                      " was written for a different network architecture: " +
                      meta.at("architecture").dump());
    }
    const auto stored_hash = meta.at("config_hash").get<std::string>();
    if (stored_hash != state.config().hash() && !force) {
      throw ConfigHashMismatchError("checkpoint " + path.string() + " has config hash " + stored_hash +
                                    " but the current config hashes to " + state.config().hash() +
                                    " (use --force to load anyway)");
    }

    for (const auto& net : networks_of(state)) {
      const std::string prefix = net.prefix;
      load_module(*net.module, archive, prefix);
      auto& opt_state = net.optimizer->state();
      for (auto& item : net.module->named_parameters()) {
        const std::string key = "adam." + prefix + "." + item.key();
        void* id = item.value().unsafeGetTensorImpl();
        if (!archive.contains(key + ".exp_avg")) {
          opt_state.erase(id);
          continue;
        }
        auto s = std::make_unique<torch::optim::AdamParamState>();
        s->step(meta.at("adam_steps").at(key).get<std::int64_t>());
        s->exp_avg(archive.at(key + ".exp_avg").clone());
        s->exp_avg_sq(archive.at(key + ".exp_avg_sq").clone());
        opt_state[id] = std::move(s);
      }
    }
    state.step = meta.at("step").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError(path.string() + " has a malformed header: " + e.what());
  }
}

CasNet load_generator(const std::filesystem::path& path, RunConfig* config_out) {
  const auto archive = read_checkpoint_archive(path);
  RunConfig cfg;
  try {
    cfg = RunConfig::from_json(archive.meta.at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptFileError(path.string() + " has a malformed config header: " + e.what());
  }
  CasNet gen(cfg.generator, cfg.image_size);
  load_module(*gen, archive, "generator");
  gen->eval();
  if (config_out) *config_out = cfg;
  return gen;
}

}  // namespace inpaint_forge
