#include "inpaint_forge/networks.hpp"

#include <algorithm>
#include <sstream>

#include "inpaint_forge/errors.hpp"

namespace inpaint_forge {

namespace nn = torch::nn;

void GeneratorSpec::validate(int image_size) const {
  std::ostringstream msg;
  if (num_unets < 1 || num_unets > kMaxUnets) {
    msg << "num_unets must lie in [1, " << kMaxUnets << "], got " << num_unets;
  } else if (base_channels < 1 || max_channels < base_channels) {
    msg << "channel widths invalid: base " << base_channels << ", max " << max_channels;
  } else if (depth < 1 || depth > 30) {
    msg << "U-net depth must be positive, got " << depth;
  } else if (image_size < 1 || image_size % (1 << depth) != 0) {
    msg << "U-net depth " << depth << " is incompatible with image size " << image_size
        << " (image size must be a multiple of " << (1 << depth) << ")";
  }
  const auto text = msg.str();
  if (!text.empty()) throw SpecError(text);
}

DiscriminatorSpec DiscriminatorSpec::global_default() {
  DiscriminatorSpec spec;
  spec.layers = {{4, 2, 64}, {4, 2, 128}, {4, 2, 256}, {4, 1, 512}, {4, 1, 1}};
  spec.conditioned = true;
  return spec;
}

DiscriminatorSpec DiscriminatorSpec::local_default() {
  DiscriminatorSpec spec;
  spec.layers = {{4, 2, 64}, {4, 2, 128}, {4, 1, 256}, {4, 1, 1}};
  spec.conditioned = false;
  return spec;
}

int receptive_field(const DiscriminatorSpec& spec) {
  int rf = 1;
  int jump = 1;
  for (const auto& layer : spec.layers) {
    rf += (layer.kernel - 1) * jump;
    jump *= layer.stride;
  }
  return rf;
}

int score_map_size(const DiscriminatorSpec& spec, int input_size) {
  int size = input_size;
  for (const auto& layer : spec.layers) size = (size + 2 - layer.kernel) / layer.stride + 1;
  return size;
}

void to_json(nlohmann::json& j, const GeneratorSpec& s) {
  j = nlohmann::json{{"num_unets", s.num_unets},
                     {"base_channels", s.base_channels},
                     {"depth", s.depth},
                     {"max_channels", s.max_channels},
                     {"mask_channel", s.mask_channel}};
}

void from_json(const nlohmann::json& j, GeneratorSpec& s) {
  j.at("num_unets").get_to(s.num_unets);
  j.at("base_channels").get_to(s.base_channels);
  j.at("depth").get_to(s.depth);
  j.at("max_channels").get_to(s.max_channels);
  j.at("mask_channel").get_to(s.mask_channel);
}

void to_json(nlohmann::json& j, const ConvLayerSpec& s) {
  j = nlohmann::json{{"kernel", s.kernel}, {"stride", s.stride}, {"channels", s.channels}};
}

void from_json(const nlohmann::json& j, ConvLayerSpec& s) {
  j.at("kernel").get_to(s.kernel);
  j.at("stride").get_to(s.stride);
  j.at("channels").get_to(s.channels);
}

void to_json(nlohmann::json& j, const DiscriminatorSpec& s) {
  j = nlohmann::json{
      {"layers", s.layers}, {"conditioned", s.conditioned}, {"image_channels", s.image_channels}};
}

void from_json(const nlohmann::json& j, DiscriminatorSpec& s) {
  j.at("layers").get_to(s.layers);
  j.at("conditioned").get_to(s.conditioned);
  j.at("image_channels").get_to(s.image_channels);
}

// ---------------------------------------------------------------------------

UNetImpl::UNetImpl(int in_channels, const GeneratorSpec& spec) {
  std::vector<int> widths;
  for (int i = 0; i < spec.depth; ++i) {
    widths.push_back(std::min(spec.base_channels << std::min(i, 20), spec.max_channels));
  }

  encoder_ = register_module("encoder", nn::ModuleList());
  int channels = in_channels;
  for (int i = 0; i < spec.depth; ++i) {
    encoder_->push_back(nn::Sequential(
        nn::Conv2d(nn::Conv2dOptions(channels, widths[i], 4).stride(2).padding(1).bias(false)),
        nn::BatchNorm2d(widths[i]),
        nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2))));
    channels = widths[i];
  }

  // Decoder stage j mirrors encoder stage j; all but the deepest take the skip.
  decoder_ = register_module("decoder", nn::ModuleList());
  for (int j = spec.depth - 1; j >= 0; --j) {
    const int in = j == spec.depth - 1 ? widths[j] : 2 * widths[j];
    const int out = j > 0 ? widths[j - 1] : spec.base_channels;
    decoder_->push_back(nn::Sequential(
        nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, out, 4).stride(2).padding(1).bias(false)),
        nn::BatchNorm2d(out), nn::ReLU()));
  }
  head_ = register_module(
      "head", nn::Conv2d(nn::Conv2dOptions(spec.base_channels, 1, 3).stride(1).padding(1)));
}

torch::Tensor UNetImpl::forward(const torch::Tensor& x) {
  std::vector<torch::Tensor> skips;
  torch::Tensor h = x;
  for (const auto& stage : *encoder_) {
    h = stage->as<nn::Sequential>()->forward(h);
    skips.push_back(h);
  }
  const auto depth = static_cast<std::ptrdiff_t>(skips.size());
  std::ptrdiff_t k = 0;
  for (const auto& stage : *decoder_) {
    const std::ptrdiff_t j = depth - 1 - k;
    if (j < depth - 1) h = torch::cat({h, skips[j]}, 1);
    h = stage->as<nn::Sequential>()->forward(h);
    ++k;
  }
  return torch::tanh(head_->forward(h));
}

CasNetImpl::CasNetImpl(const GeneratorSpec& spec, int image_size)
    : spec_(spec), image_size_(image_size) {
  spec.validate(image_size);
  unets_ = register_module("unets", nn::ModuleList());
  for (int i = 0; i < spec.num_unets; ++i) {
    unets_->push_back(UNet(i == 0 ? spec.input_channels() : 1, spec));
  }
}

torch::Tensor CasNetImpl::forward(const torch::Tensor& x) {
  torch::Tensor h = x;
  for (const auto& unet : *unets_) h = unet->as<UNetImpl>()->forward(h);
  return h;
}

CasNet build_casnet(const GeneratorSpec& spec, int image_size) {
  CasNet net(spec, image_size);
  net->apply(init_weights);
  return net;
}

// ---------------------------------------------------------------------------

PatchDiscriminatorImpl::PatchDiscriminatorImpl(DiscriminatorSpec spec, ScoreSource source)
    : spec_(std::move(spec)), source_(source) {
  if (spec_.layers.size() < 2) throw SpecError("discriminator needs a hidden conv and a scoring conv");
  if (spec_.layers.back().channels != 1) throw SpecError("scoring conv must have one output channel");
  for (const auto& layer : spec_.layers) {
    if (layer.kernel < 1 || layer.stride < 1 || layer.channels < 1) {
      throw SpecError("discriminator conv layers need positive kernel, stride and channels");
    }
  }

  stages_ = register_module("stages", nn::ModuleList());
  int channels = spec_.input_channels();
  for (int i = 0; i < spec_.stage_count(); ++i) {
    const auto& layer = spec_.layers[i];
    nn::Sequential stage;
    const bool normalized = i > 0;
    stage->push_back(nn::Conv2d(nn::Conv2dOptions(channels, layer.channels, layer.kernel)
                                    .stride(layer.stride)
                                    .padding(1)
                                    .bias(!normalized)));
    if (normalized) stage->push_back(nn::BatchNorm2d(layer.channels));
    stage->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
    stages_->push_back(stage);
    channels = layer.channels;
  }
  const auto& last = spec_.layers.back();
  score_ = register_module(
      "score", nn::Conv2d(nn::Conv2dOptions(channels, 1, last.kernel).stride(last.stride).padding(1)));
}

PatchScoreMap PatchDiscriminatorImpl::forward(const torch::Tensor& input) {
  torch::Tensor h = input;
  for (const auto& stage : *stages_) h = stage->as<nn::Sequential>()->forward(h);
  return {torch::sigmoid(score_->forward(h)), source_};
}

PatchDiscriminatorImpl::Output PatchDiscriminatorImpl::forward_with_features(
    const torch::Tensor& input) {
  Output out;
  out.features.push_back({0, input});
  torch::Tensor h = input;
  int id = 0;
  for (const auto& stage : *stages_) {
    h = stage->as<nn::Sequential>()->forward(h);
    out.features.push_back({++id, h});
  }
  out.scores = {torch::sigmoid(score_->forward(h)), source_};
  return out;
}

namespace {

PatchDiscriminator build_discriminator(const DiscriminatorSpec& spec, ScoreSource source,
                                       bool conditioned, int expected_rf, std::string_view name) {
  if (spec.conditioned != conditioned) {
    throw SpecError(std::string(name) + " discriminator must be " +
                    (conditioned ? "conditioned on the context" : "unconditioned"));
  }
  const int rf = receptive_field(spec);
  if (rf != expected_rf) {
    std::ostringstream msg;
    msg << name << " discriminator receptive field is " << rf << ", expected " << expected_rf;
    throw SpecError(msg.str());
  }
  PatchDiscriminator disc(spec, source);
  disc->apply(init_weights);
  return disc;
}

}  // namespace

PatchDiscriminator build_global_discriminator(const DiscriminatorSpec& spec) {
  return build_discriminator(spec, ScoreSource::Global, true, kGlobalReceptiveField, "global");
}

PatchDiscriminator build_local_discriminator(const DiscriminatorSpec& spec) {
  return build_discriminator(spec, ScoreSource::Local, false, kLocalReceptiveField, "local");
}

torch::Tensor condition_on_context(const torch::Tensor& candidate, const torch::Tensor& context) {
  return torch::cat({candidate, context}, 1);
}

FeatureStack discriminator_features(PatchDiscriminator& disc, const torch::Tensor& input) {
  return disc->forward_with_features(input).features;
}

void init_weights(nn::Module& module) {
  torch::NoGradGuard no_grad;
  if (auto* conv = module.as<nn::Conv2d>()) {
    conv->weight.normal_(0.0, 0.02);
    if (conv->bias.defined()) conv->bias.zero_();
  } else if (auto* deconv = module.as<nn::ConvTranspose2d>()) {
    deconv->weight.normal_(0.0, 0.02);
    if (deconv->bias.defined()) deconv->bias.zero_();
  } else if (auto* bn = module.as<nn::BatchNorm2d>()) {
    bn->weight.normal_(1.0, 0.02);
    bn->bias.zero_();
  }
}

std::int64_t parameter_count(const nn::Module& module) {
  std::int64_t total = 0;
  for (const auto& p : module.parameters()) total += p.numel();
  return total;
}

void set_trainable(nn::Module& module, bool trainable) {
  for (auto& p : module.parameters()) p.set_requires_grad(trainable);
}

}  // namespace inpaint_forge
