#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace inpaint_forge {

// ---------------------------------------------------------------------------
// Specs
// ---------------------------------------------------------------------------

struct GeneratorSpec {
  int num_unets = 3;
  int base_channels = 32;
  int depth = 6;  // stride-2 stages per U-net
  int max_channels = 256;
  bool mask_channel = false;  // append the binary region mask as a second input channel

  /// Throws SpecError unless the spec is buildable for image_size x image_size
  /// inputs (depth must halve the image down to a bottleneck of at least 1).
  void validate(int image_size) const;
  int input_channels() const { return mask_channel ? 2 : 1; }

  friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

inline constexpr int kMaxUnets = 6;

struct ConvLayerSpec {
  int kernel = 4;
  int stride = 1;
  int channels = 1;

  friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

/// Conv stack of a patch discriminator. The last layer is the 1-channel
/// scoring conv; every layer uses zero padding 1.
struct DiscriminatorSpec {
  std::vector<ConvLayerSpec> layers;
  bool conditioned = true;  // global: candidate concatenated with context y
  int image_channels = 1;

  int input_channels() const { return conditioned ? 2 * image_channels : image_channels; }
  // Hidden conv stages B (the scoring conv is not counted).
  int stage_count() const { return static_cast<int>(layers.size()) - 1; }

  /// 70x70 patches: 4x4 convs, strides 2,2,2,1 then a stride-1 scoring conv.
  static DiscriminatorSpec global_default();
  /// 34x34 patches on the region: 4x4 convs, strides 2,2,1 and a stride-1 scoring conv.
  static DiscriminatorSpec local_default();

  friend bool operator==(const DiscriminatorSpec&, const DiscriminatorSpec&) = default;
};

inline constexpr int kGlobalReceptiveField = 70;
inline constexpr int kLocalReceptiveField = 34;

/// Input extent seen by one output unit: RF <- RF + (k-1)*J, J <- J*s,
/// starting from RF = J = 1.
int receptive_field(const DiscriminatorSpec& spec);

/// Output side length of the score map for a square input (padding 1 everywhere).
int score_map_size(const DiscriminatorSpec& spec, int input_size);

void to_json(nlohmann::json& j, const GeneratorSpec& spec);
void from_json(const nlohmann::json& j, GeneratorSpec& spec);
void to_json(nlohmann::json& j, const ConvLayerSpec& spec);
void from_json(const nlohmann::json& j, ConvLayerSpec& spec);
void to_json(nlohmann::json& j, const DiscriminatorSpec& spec);
void from_json(const nlohmann::json& j, DiscriminatorSpec& spec);

// ---------------------------------------------------------------------------
// Feature stacks and score maps
// ---------------------------------------------------------------------------

struct FeatureLayer {
  int id;
  torch::Tensor map;  // N x C x H x W
};

/// Intermediate activations ordered by strictly increasing layer id.
using FeatureStack = std::vector<FeatureLayer>;

enum class ScoreSource { Global, Local };

/// Per-patch real/fake probabilities, N x 1 x h x w, entries in (0,1).
struct PatchScoreMap {
  torch::Tensor scores;
  ScoreSource source = ScoreSource::Global;
};

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

class UNetImpl : public torch::nn::Module {
 public:
  UNetImpl(int in_channels, const GeneratorSpec& spec);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::ModuleList encoder_{nullptr};
  torch::nn::ModuleList decoder_{nullptr};
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(UNet);

/// Cascade of U-nets; each stage consumes the previous stage's output.
/// Maps N x C x H x W model-range inputs to N x 1 x H x W outputs in [-1, 1].
class CasNetImpl : public torch::nn::Module {
 public:
  CasNetImpl(const GeneratorSpec& spec, int image_size);
  torch::Tensor forward(const torch::Tensor& x);

  const GeneratorSpec& spec() const { return spec_; }
  int image_size() const { return image_size_; }

 private:
  GeneratorSpec spec_;
  int image_size_;
  torch::nn::ModuleList unets_{nullptr};
};
TORCH_MODULE(CasNet);

CasNet build_casnet(const GeneratorSpec& spec, int image_size);

// ---------------------------------------------------------------------------
// Discriminators
// ---------------------------------------------------------------------------

class PatchDiscriminatorImpl : public torch::nn::Module {
 public:
  PatchDiscriminatorImpl(DiscriminatorSpec spec, ScoreSource source);

  PatchScoreMap forward(const torch::Tensor& input);

  struct Output {
    PatchScoreMap scores;
    FeatureStack features;  // layer 0 is the raw input, then one entry per hidden stage
  };
  Output forward_with_features(const torch::Tensor& input);

  const DiscriminatorSpec& spec() const { return spec_; }
  ScoreSource source() const { return source_; }

 private:
  DiscriminatorSpec spec_;
  ScoreSource source_;
  torch::nn::ModuleList stages_{nullptr};
  torch::nn::Conv2d score_{nullptr};
};
TORCH_MODULE(PatchDiscriminator);

/// Requires a conditioned spec with receptive field 70; throws SpecError otherwise.
PatchDiscriminator build_global_discriminator(const DiscriminatorSpec& spec);
/// Requires an unconditioned spec with receptive field 34.
PatchDiscriminator build_local_discriminator(const DiscriminatorSpec& spec);

/// Global-discriminator input: candidate image concatenated with the context.
torch::Tensor condition_on_context(const torch::Tensor& candidate, const torch::Tensor& context);

/// Layer 0 (the raw input) followed by each hidden stage's activations.
FeatureStack discriminator_features(PatchDiscriminator& disc, const torch::Tensor& input);

/// DCGAN-style initialisation: conv weights N(0, 0.02), norm scales N(1, 0.02), biases 0.
void init_weights(torch::nn::Module& module);

std::int64_t parameter_count(const torch::nn::Module& module);

/// Sets requires_grad on every parameter of `module`.
void set_trainable(torch::nn::Module& module, bool trainable);

}  // namespace inpaint_forge
