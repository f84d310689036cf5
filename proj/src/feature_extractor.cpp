#include "inpaint_forge/feature_extractor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "inpaint_forge/errors.hpp"
#include "inpaint_forge/tensor_archive.hpp"

namespace inpaint_forge {

namespace nn = torch::nn;

namespace {

// Convs per stage of VGG-19 (configuration "E").
constexpr int kStageConvs[5] = {2, 2, 4, 4, 4};
constexpr int kStageWidths[5] = {64, 128, 256, 512, 512};

constexpr const char* kWeightsHint =
    "export the ImageNet VGG-19 weights with tools/export_vgg19_weights.py and point the "
    "config key 'vgg_weights' or the INPAINT_FORGE_VGG_WEIGHTS environment variable at the file";

}  // namespace

Vgg19FeaturesImpl::Vgg19FeaturesImpl(std::vector<int> tap_stages)
    : tap_stages_(std::move(tap_stages)) {
  if (tap_stages_.empty()) throw SpecError("feature extractor needs at least one tap");
  std::sort(tap_stages_.begin(), tap_stages_.end());
  tap_stages_.erase(std::unique(tap_stages_.begin(), tap_stages_.end()), tap_stages_.end());
  if (tap_stages_.front() < 0 || tap_stages_.back() > 4) {
    throw SpecError("feature extractor taps must be stage indices in [0, 4]");
  }

  const int last_stage = tap_stages_.back();
  int in = 3;
  int ordinal = 0;
  int feature_index = 0;
  for (int stage = 0; stage <= last_stage; ++stage) {
    const int count = stage == last_stage ? 1 : kStageConvs[stage];
    for (int k = 0; k < count; ++k) {
      ++ordinal;
      const int out = kStageWidths[stage];
      ConvSlot slot{ordinal, feature_index, stage, k == 0, nullptr};
      slot.conv = register_module("conv" + std::to_string(stage + 1) + "_" + std::to_string(k + 1),
                                  nn::Conv2d(nn::Conv2dOptions(in, out, 3).padding(1)));
      convs_.push_back(std::move(slot));
      in = out;
      feature_index += 2;  // conv, relu
    }
    feature_index += 1;  // max pool closes the stage
  }
  set_trainable(*this, false);
  eval();
}

std::vector<int> Vgg19FeaturesImpl::tap_channels() const {
  std::vector<int> out;
  for (int stage : tap_stages_) out.push_back(kStageWidths[stage]);
  return out;
}

FeatureStack Vgg19FeaturesImpl::forward(const torch::Tensor& images) {
  static const auto mean = torch::tensor({0.485, 0.456, 0.406}).view({1, 3, 1, 1});
  static const auto stddev = torch::tensor({0.229, 0.224, 0.225}).view({1, 3, 1, 1});
  torch::Tensor h = ((images + 1.0) * 0.5).expand({images.size(0), 3, images.size(2), images.size(3)});
  h = (h - mean.to(h.dtype())) / stddev.to(h.dtype());

  FeatureStack stack;
  int current_stage = 0;
  for (auto& slot : convs_) {
    if (slot.stage != current_stage) {
      h = torch::max_pool2d(h, 2, 2);
      current_stage = slot.stage;
    }
    h = torch::relu(slot.conv->forward(h));
    if (slot.first_in_stage &&
        std::binary_search(tap_stages_.begin(), tap_stages_.end(), slot.stage)) {
      if (!torch::isfinite(h).all().item<bool>()) {
        throw NonFiniteError("feature extractor produced non-finite activations at conv " +
                             std::to_string(slot.ordinal));
      }
      stack.push_back({slot.ordinal, h});
    }
  }
  return stack;
}

void Vgg19FeaturesImpl::load_weights(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw WeightsError("VGG-19 weights not found at '" + path.string() + "': " + kWeightsHint);
  }
  TensorArchive archive;
  try {
    archive = read_tensor_archive(path);
  } catch (const Error& e) {
    throw WeightsError(std::string("unreadable VGG-19 weights: ") + e.what() + "; " + kWeightsHint);
  }
  torch::NoGradGuard no_grad;
  for (auto& slot : convs_) {
    const std::string prefix = "features." + std::to_string(slot.feature_index);
    if (!archive.contains(prefix + ".weight") || !archive.contains(prefix + ".bias")) {
      throw WeightsError("VGG-19 weights file lacks " + prefix + "; " + kWeightsHint);
    }
    const auto& w = archive.at(prefix + ".weight");
    const auto& b = archive.at(prefix + ".bias");
    if (w.sizes() != slot.conv->weight.sizes() || b.sizes() != slot.conv->bias.sizes()) {
      throw WeightsError("VGG-19 weights for " + prefix + " have the wrong shape");
    }
    slot.conv->weight.copy_(w);
    slot.conv->bias.copy_(b);
  }
  pretrained_ = archive.meta.value("pretrained", false);
}

std::filesystem::path resolve_vgg_weights(const std::optional<std::filesystem::path>& configured) {
  if (configured && !configured->empty()) return *configured;
  if (const char* env = std::getenv(kVggWeightsEnv.data()); env && *env) return env;
  throw WeightsError(std::string("the style loss needs pre-trained VGG-19 weights but none are "
                                 "configured; ") + kWeightsHint);
}

Vgg19Features load_feature_extractor(const std::filesystem::path& weights,
                                     std::vector<int> tap_stages) {
  Vgg19Features extractor(std::move(tap_stages));
  extractor->load_weights(weights);
  set_trainable(*extractor, false);
  extractor->eval();
  return extractor;
}

void write_standin_vgg19_weights(const std::filesystem::path& path, std::uint64_t seed) {
  auto generator = at::make_generator<at::CPUGeneratorImpl>(seed);
  std::vector<NamedTensor> tensors;
  int in = 3;
  int feature_index = 0;
  for (int stage = 0; stage < 5; ++stage) {
    for (int k = 0; k < kStageConvs[stage]; ++k) {
      const int out = kStageWidths[stage];
      // He-normal, fan-out, as torchvision initialises VGG.
      const double stddev = std::sqrt(2.0 / (out * 9.0));
      auto w = at::normal(0.0, stddev, {out, in, 3, 3}, generator, torch::kFloat32);
      const std::string prefix = "features." + std::to_string(feature_index);
      tensors.push_back({prefix + ".weight", w});
      tensors.push_back({prefix + ".bias", torch::zeros({out})});
      in = out;
      feature_index += 2;
    }
    feature_index += 1;
  }
  write_tensor_archive(path,
                       {{"format", "inpaint-forge-vgg19"}, {"pretrained", false}, {"seed", seed}},
                       tensors);
}

double parameter_checksum(const nn::Module& module) {
  double sum = 0.0;
  for (const auto& p : module.parameters()) sum += p.detach().to(torch::kFloat64).sum().item<double>();
  return sum;
}

}  // namespace inpaint_forge
