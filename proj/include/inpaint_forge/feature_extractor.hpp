#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "inpaint_forge/networks.hpp"

namespace inpaint_forge {

inline constexpr std::string_view kVggWeightsEnv = "INPAINT_FORGE_VGG_WEIGHTS";

/// Frozen VGG-19 convolutional trunk used for the style loss.
///
/// Only the layers up to the deepest requested tap are built. Taps are the
/// post-ReLU outputs of the first conv in the requested stages (0-based stage
/// index, 0..4); FeatureStack ids are the 1-based conv ordinals (1, 3, 5, 9, 13
/// for conv1_1 ... conv5_1). Grayscale model-range input is mapped to [0,1],
/// replicated to three channels and normalised with the ImageNet statistics.
///
/// Weights come from a tensor archive keyed like torchvision's state dict
/// ("features.<index>.weight" / ".bias"); tools/export_vgg19_weights.py
/// produces one.
class Vgg19FeaturesImpl : public torch::nn::Module {
 public:
  explicit Vgg19FeaturesImpl(std::vector<int> tap_stages = {0, 1, 2, 3, 4});

  FeatureStack forward(const torch::Tensor& model_range_images);

  /// Throws WeightsError with a remediation hint when the file is missing or
  /// lacks a required layer.
  void load_weights(const std::filesystem::path& path);

  bool pretrained() const { return pretrained_; }
  const std::vector<int>& tap_stages() const { return tap_stages_; }
  /// Channel width of each tap, in stack order.
  std::vector<int> tap_channels() const;

 private:
  struct ConvSlot {
    int ordinal;        // 1-based conv index
    int feature_index;  // torchvision features.<index>
    int stage;
    bool first_in_stage;
    torch::nn::Conv2d conv{nullptr};
  };

  std::vector<int> tap_stages_;
  std::vector<ConvSlot> convs_;
  bool pretrained_ = false;
};
TORCH_MODULE(Vgg19Features);

/// Explicit config path wins; otherwise INPAINT_FORGE_VGG_WEIGHTS. Throws
/// WeightsError when neither is set.
std::filesystem::path resolve_vgg_weights(const std::optional<std::filesystem::path>& configured);

/// Builds, loads and freezes the extractor (eval mode, no parameter gradients).
Vgg19Features load_feature_extractor(const std::filesystem::path& weights,
                                     std::vector<int> tap_stages = {0, 1, 2, 3, 4});

/// Writes a VGG-19 weights archive with seeded He-normal weights and zero
/// biases, marked "pretrained": false. It has the layout of the real
/// ImageNet weights and stands in for them where those cannot be obtained
/// (offline test environments).
void write_standin_vgg19_weights(const std::filesystem::path& path, std::uint64_t seed);

/// Sum of all parameter values in double precision; used to assert freezing.
double parameter_checksum(const torch::nn::Module& module);

}  // namespace inpaint_forge
