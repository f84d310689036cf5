#pragma once

#include <torch/torch.h>

#include <span>
#include <string_view>
#include <vector>

#include "inpaint_forge/networks.hpp"
#include "json.hpp"

namespace inpaint_forge {

// Probabilities are clamped to [eps, 1 - eps] before taking logs.
inline constexpr double kLogClamp = 1e-7;

/// Weights of the generator objective
///   total = adversarial*L_adv + local*L_local + style*L_style + perceptual*L_percep
/// plus the per-layer weights inside the style and perceptual terms.
struct LossWeights {
  double adversarial = 0.8;
  double local = 0.2;
  double style = 1e-4;
  double perceptual = 1e-4;
  std::vector<double> style_layers;       // one per extractor tap; empty = uniform 1/N
  std::vector<double> perceptual_layers;  // one per stack entry incl. layer 0; empty = uniform 1/(B+1)

  /// Both-discriminator configuration (0.8, 0.2, 1e-4, 1e-4).
  static LossWeights ip_medgan();
  /// Global-discriminator-only ablation (1.0, 0, 1e-4, 1e-4).
  static LossWeights medgan();

  std::vector<double> style_layer_weights(std::size_t taps) const;
  std::vector<double> perceptual_layer_weights(std::size_t stack_size) const;

  /// Throws ConfigError on negative or non-finite weights, non-positive layer
  /// weights, or layer lists whose lengths disagree with the given counts.
  void validate(std::size_t taps, std::size_t stack_size) const;

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);

/// What d_n means in the 1/(4 d_n^2) style normaliser.
enum class StyleDepth {
  Volume,   // c_n * h_n * w_n
  Channels  // c_n
};

std::string_view to_string(StyleDepth d);
StyleDepth parse_style_depth(std::string_view text);

// --- adversarial ------------------------------------------------------------

/// mean over patches of -[log D(real) + log(1 - D(fake))] / 2.
torch::Tensor adversarial_loss_d(const PatchScoreMap& real, const PatchScoreMap& fake);
/// Non-saturating generator form: mean of -log D(fake).
torch::Tensor adversarial_loss_g(const PatchScoreMap& fake);

// Same forms restricted to local score maps.
torch::Tensor local_adversarial_loss_d(const PatchScoreMap& real, const PatchScoreMap& fake);
torch::Tensor local_adversarial_loss_g(const PatchScoreMap& fake);

// --- style / perceptual ------------------------------------------------------

/// Unnormalised Gram matrix G_ij = sum_p F_ip F_jp. Accepts C x H x W
/// (returns C x C) or N x C x H x W (returns N x C x C).
torch::Tensor gram_matrix(const torch::Tensor& features);

/// sum_n w_n / (4 d_n^2) * ||G_n(xhat) - G_n(x)||_F^2, averaged over the batch.
torch::Tensor style_loss(const FeatureStack& target, const FeatureStack& generated,
                         std::span<const double> layer_weights,
                         StyleDepth depth = StyleDepth::Volume);

/// sum_n w_n * mean|D_n(xhat) - D_n(x)| over stack entries n = 0..B.
torch::Tensor perceptual_loss(const FeatureStack& target, const FeatureStack& generated,
                              std::span<const double> layer_weights);

// --- total -------------------------------------------------------------------

struct LossBreakdown {
  double adv = 0.0;
  double local = 0.0;
  double style = 0.0;
  double percep = 0.0;
  double total = 0.0;
};

/// Scalar loss tensors for one batch; undefined tensors count as zero.
struct LossTerms {
  torch::Tensor adv;
  torch::Tensor local;
  torch::Tensor style;
  torch::Tensor percep;
};

struct GeneratorObjective {
  torch::Tensor total;  // differentiable
  LossBreakdown breakdown;
};

/// Weighted sum of the four generator terms. Throws NonFiniteError naming the
/// offending component.
GeneratorObjective generator_total_loss(const LossTerms& terms, const LossWeights& weights);

}  // namespace inpaint_forge
