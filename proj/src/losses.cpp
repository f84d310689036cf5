#include "inpaint_forge/losses.hpp"

#include <cmath>
#include <sstream>

#include "inpaint_forge/errors.hpp"

namespace inpaint_forge {

LossWeights LossWeights::ip_medgan() { return LossWeights{}; }

LossWeights LossWeights::medgan() {
  LossWeights w;
  w.adversarial = 1.0;
  w.local = 0.0;
  return w;
}

std::vector<double> LossWeights::style_layer_weights(std::size_t taps) const {
  if (!style_layers.empty()) return style_layers;
  return std::vector<double>(taps, 1.0 / static_cast<double>(taps));
}

std::vector<double> LossWeights::perceptual_layer_weights(std::size_t stack_size) const {
  if (!perceptual_layers.empty()) return perceptual_layers;
  return std::vector<double>(stack_size, 1.0 / static_cast<double>(stack_size));
}

void LossWeights::validate(std::size_t taps, std::size_t stack_size) const {
  for (double w : {adversarial, local, style, perceptual}) {
    if (!std::isfinite(w) || w < 0.0) throw ConfigError("loss weights must be finite and >= 0");
  }
  auto check_layers = [](const std::vector<double>& ws, std::size_t expected, const char* what) {
    if (ws.empty()) return;
    if (ws.size() != expected) {
      std::ostringstream msg;
      msg << what << " lists " << ws.size() << " weights but " << expected << " layers are configured";
      throw ConfigError(msg.str());
    }
    for (double w : ws) {
      if (!std::isfinite(w) || w <= 0.0) {
        throw ConfigError(std::string(what) + " must be finite and > 0");
      }
    }
  };
  check_layers(style_layers, taps, "style_layer_weights");
  check_layers(perceptual_layers, stack_size, "percep_layer_weights");
}

void to_json(nlohmann::json& j, const LossWeights& w) {
  j = nlohmann::json{{"lambda_adv", w.adversarial},
                     {"lambda_local", w.local},
                     {"lambda_style", w.style},
                     {"lambda_percep", w.perceptual},
                     {"style_layer_weights", w.style_layers},
                     {"percep_layer_weights", w.perceptual_layers}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
  j.at("lambda_adv").get_to(w.adversarial);
  j.at("lambda_local").get_to(w.local);
  j.at("lambda_style").get_to(w.style);
  j.at("lambda_percep").get_to(w.perceptual);
  j.at("style_layer_weights").get_to(w.style_layers);
  j.at("percep_layer_weights").get_to(w.perceptual_layers);
}

std::string_view to_string(StyleDepth d) { return d == StyleDepth::Volume ? "volume" : "channels"; }

StyleDepth parse_style_depth(std::string_view text) {
  if (text == "volume") return StyleDepth::Volume;
  if (text == "channels") return StyleDepth::Channels;
  throw ConfigError("style_depth must be 'volume' or 'channels', got '" + std::string(text) + "'");
}

namespace {

torch::Tensor clamped_log(const torch::Tensor& p) { return torch::log(p.clamp(kLogClamp, 1.0 - kLogClamp)); }

void require_source(const PatchScoreMap& map, ScoreSource expected, const char* fn) {
  if (map.source != expected) {
    throw SpecError(std::string(fn) + ": score map comes from the " +
                    (map.source == ScoreSource::Global ? "global" : "local") + " discriminator");
  }
}

torch::Tensor d_loss(const PatchScoreMap& real, const PatchScoreMap& fake) {
  return -(clamped_log(real.scores).mean() + clamped_log(1.0 - fake.scores).mean()) * 0.5;
}

}  // namespace

torch::Tensor adversarial_loss_d(const PatchScoreMap& real, const PatchScoreMap& fake) {
  require_source(real, ScoreSource::Global, "adversarial_loss_d");
  require_source(fake, ScoreSource::Global, "adversarial_loss_d");
  return d_loss(real, fake);
}

torch::Tensor adversarial_loss_g(const PatchScoreMap& fake) {
  require_source(fake, ScoreSource::Global, "adversarial_loss_g");
  return -clamped_log(fake.scores).mean();
}

torch::Tensor local_adversarial_loss_d(const PatchScoreMap& real, const PatchScoreMap& fake) {
  require_source(real, ScoreSource::Local, "local_adversarial_loss_d");
  require_source(fake, ScoreSource::Local, "local_adversarial_loss_d");
  return d_loss(real, fake);
}

torch::Tensor local_adversarial_loss_g(const PatchScoreMap& fake) {
  require_source(fake, ScoreSource::Local, "local_adversarial_loss_g");
  return -clamped_log(fake.scores).mean();
}

torch::Tensor gram_matrix(const torch::Tensor& features) {
  if (features.dim() == 3) return gram_matrix(features.unsqueeze(0)).squeeze(0);
  if (features.dim() != 4) throw ShapeError("gram_matrix expects C x H x W or N x C x H x W features");
  const auto f = features.flatten(2);  // N x C x HW
  return torch::bmm(f, f.transpose(1, 2));
}

torch::Tensor style_loss(const FeatureStack& target, const FeatureStack& generated,
                         std::span<const double> layer_weights, StyleDepth depth) {
  if (target.size() != generated.size() || target.size() != layer_weights.size()) {
    throw ShapeError("style_loss: feature stacks and layer weights differ in length");
  }
  torch::Tensor total;
  for (std::size_t n = 0; n < target.size(); ++n) {
    const auto& x = target[n].map;
    const auto& xh = generated[n].map;
    if (target[n].id != generated[n].id || x.sizes() != xh.sizes() || x.dim() != 4) {
      throw ShapeError("style_loss: layer " + std::to_string(n) + " differs between stacks");
    }
    const double d = depth == StyleDepth::Volume
                         ? static_cast<double>(x.size(1) * x.size(2) * x.size(3))
                         : static_cast<double>(x.size(1));
    const auto diff = gram_matrix(xh) - gram_matrix(x);
    const auto per_sample = diff.pow(2).sum({1, 2});
    const auto term = per_sample.mean() * (layer_weights[n] / (4.0 * d * d));
    total = total.defined() ? total + term : term;
  }
  return total.defined() ? total : torch::zeros({});
}

torch::Tensor perceptual_loss(const FeatureStack& target, const FeatureStack& generated,
                              std::span<const double> layer_weights) {
  if (target.size() != generated.size() || target.size() != layer_weights.size()) {
    throw ShapeError("perceptual_loss: feature stacks and layer weights differ in length");
  }
  torch::Tensor total;
  for (std::size_t n = 0; n < target.size(); ++n) {
    if (target[n].id != generated[n].id || target[n].map.sizes() != generated[n].map.sizes()) {
      throw ShapeError("perceptual_loss: layer " + std::to_string(n) + " differs between stacks");
    }
    const auto term = (generated[n].map - target[n].map).abs().mean() * layer_weights[n];
    total = total.defined() ? total + term : term;
  }
  return total.defined() ? total : torch::zeros({});
}

GeneratorObjective generator_total_loss(const LossTerms& terms, const LossWeights& weights) {
  struct Part {
    const torch::Tensor& value;
    double weight;
    double LossBreakdown::*slot;
    const char* name;
  };
  const Part parts[] = {{terms.adv, weights.adversarial, &LossBreakdown::adv, "adv"},
                        {terms.local, weights.local, &LossBreakdown::local, "local"},
                        {terms.style, weights.style, &LossBreakdown::style, "style"},
                        {terms.percep, weights.perceptual, &LossBreakdown::percep, "percep"}};

  GeneratorObjective out;
  for (const auto& part : parts) {
    if (!part.value.defined()) continue;
    const double v = part.value.item<double>();
    if (!std::isfinite(v)) throw NonFiniteError(std::string("non-finite ") + part.name + " loss");
    out.breakdown.*part.slot = v;
    out.breakdown.total += part.weight * v;
    const auto weighted = part.value * part.weight;
    out.total = out.total.defined() ? out.total + weighted : weighted;
  }
  if (!out.total.defined()) out.total = torch::zeros({});
  if (!std::isfinite(out.breakdown.total)) throw NonFiniteError("non-finite total loss");
  return out;
}

}  // namespace inpaint_forge
