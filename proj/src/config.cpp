#include "inpaint_forge/config.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "inpaint_forge/errors.hpp"
#include "inpaint_forge/metrics.hpp"
#include "inpaint_forge/tensor_archive.hpp"

namespace inpaint_forge {
namespace {

using nlohmann::json;

// Reads keys from one JSON object, remembering which were consumed so that
// leftovers can be reported as unknown.
class StrictObject {
 public:
  StrictObject(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ConfigError("'" + where_ + "' must be a JSON object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) return;
    try {
      it->get_to(out);
    } catch (const json::exception& e) {
      throw ConfigError("bad value for '" + path(key) + "': " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() || it->is_null() ? nullptr : &*it;
  }

  std::string path(const char* key) const { return where_.empty() ? key : where_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + path(key.c_str()) + "'");
    }
  }

 private:
  const json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

GeneratorSpec parse_generator(const json& j) {
  GeneratorSpec g;
  StrictObject o(j, "generator");
  o.read("num_unets", g.num_unets);
  o.read("base_channels", g.base_channels);
  o.read("depth", g.depth);
  o.read("max_channels", g.max_channels);
  o.read("mask_channel", g.mask_channel);
  o.finish();
  return g;
}

DiscriminatorSpec parse_discriminator(const json& j, DiscriminatorSpec d, const char* where) {
  StrictObject o(j, where);
  if (const json* layers = o.child("layers")) {
    if (!layers->is_array()) throw ConfigError(std::string("'") + where + ".layers' must be an array");
    d.layers.clear();
    for (std::size_t i = 0; i < layers->size(); ++i) {
      const std::string at = std::string(where) + ".layers[" + std::to_string(i) + "]";
      StrictObject lo((*layers)[i], at);
      ConvLayerSpec layer;
      lo.read("kernel", layer.kernel);
      lo.read("stride", layer.stride);
      lo.read("channels", layer.channels);
      lo.finish();
      d.layers.push_back(layer);
    }
  }
  o.read("conditioned", d.conditioned);
  o.read("image_channels", d.image_channels);
  o.finish();
  return d;
}

}  // namespace

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (name.empty()) fail("name must not be empty");
  if (image_size < 8) fail("image_size must be at least 8");
  if (region_size < 1 || region_size > image_size) fail("region_size must lie in [1, image_size]");
  if (!(fill_value >= -1.0 && fill_value <= 1.0)) fail("fill_value must lie in the model range [-1, 1]");
  if (ssim_window < 2 || ssim_window > region_size) {
    fail("ssim_window must lie in [2, region_size] so region-only metrics are defined");
  }
  if (train.epochs < 1) fail("train.epochs must be >= 1");
  if (train.batch_size < 1) fail("train.batch_size must be >= 1");
  if (!(train.learning_rate > 0.0) || !std::isfinite(train.learning_rate)) {
    fail("train.learning_rate must be > 0");
  }
  for (double b : {train.beta1, train.beta2}) {
    if (!(b >= 0.0 && b < 1.0)) fail("train.beta1/beta2 must lie in [0, 1)");
  }
  if (train.log_every < 1) fail("train.log_every must be >= 1");
  if (train.checkpoint_every < 0) fail("train.checkpoint_every must be >= 0");
  if (style_stages.empty()) fail("loss.style_stages must not be empty");
  for (int s : style_stages) {
    if (s < 0 || s > 4) fail("loss.style_stages entries must lie in [0, 4]");
  }
  for (std::size_t i = 1; i < style_stages.size(); ++i) {
    if (style_stages[i] <= style_stages[i - 1]) fail("loss.style_stages must be strictly increasing");
  }

  generator.validate(image_size);
  if (global_discriminator.image_channels != 1 || local_discriminator.image_channels != 1) {
    throw SpecError("discriminators take single-channel images");
  }
  if (!global_discriminator.conditioned) throw SpecError("global discriminator must be conditioned");
  if (local_discriminator.conditioned) throw SpecError("local discriminator must be unconditioned");
  if (receptive_field(global_discriminator) != kGlobalReceptiveField) {
    throw SpecError("global discriminator receptive field is " +
                    std::to_string(receptive_field(global_discriminator)) + ", expected 70");
  }
  if (receptive_field(local_discriminator) != kLocalReceptiveField) {
    throw SpecError("local discriminator receptive field is " +
                    std::to_string(receptive_field(local_discriminator)) + ", expected 34");
  }
  if (global_discriminator.layers.size() < 2 || local_discriminator.layers.size() < 2) {
    throw SpecError("discriminators need a hidden conv and a scoring conv");
  }
  if (score_map_size(global_discriminator, image_size) < 1) {
    throw SpecError("global discriminator produces an empty score map at this image size");
  }
  if (score_map_size(local_discriminator, region_size) < 1) {
    throw SpecError("local discriminator produces an empty score map at this region size");
  }
  loss.validate(style_stages.size(), static_cast<std::size_t>(global_discriminator.stage_count()) + 1);
}

nlohmann::json RunConfig::to_json() const {
  json loss_json = loss;
  loss_json["style_depth"] = std::string(inpaint_forge::to_string(style_depth));
  loss_json["style_stages"] = style_stages;
  return json{{"name", name},
              {"run_dir", run_dir.generic_string()},
              {"manifest", manifest.generic_string()},
              {"vgg_weights", vgg_weights ? json(vgg_weights->generic_string()) : json(nullptr)},
              {"image_size", image_size},
              {"region_size", region_size},
              {"fill_value", fill_value},
              {"compose_for_discriminators", compose_for_discriminators},
              {"ssim_window", ssim_window},
              {"generator", generator},
              {"global_discriminator", global_discriminator},
              {"local_discriminator", local_discriminator},
              {"loss", loss_json},
              {"train",
               {{"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"learning_rate", train.learning_rate},
                {"beta1", train.beta1},
                {"beta2", train.beta2},
                {"seed", train.seed},
                {"log_every", train.log_every},
                {"checkpoint_every", train.checkpoint_every},
                {"deterministic", train.deterministic}}}};
}

RunConfig RunConfig::from_json(const nlohmann::json& doc) {
  RunConfig c;
  StrictObject o(doc, "");
  o.read("name", c.name);
  std::string path_text;
  if (const json* p = o.child("run_dir")) c.run_dir = p->get<std::string>();
  if (const json* p = o.child("manifest")) c.manifest = p->get<std::string>();
  if (const json* p = o.child("vgg_weights")) c.vgg_weights = p->get<std::string>();
  o.read("image_size", c.image_size);
  o.read("region_size", c.region_size);
  o.read("fill_value", c.fill_value);
  o.read("compose_for_discriminators", c.compose_for_discriminators);
  o.read("ssim_window", c.ssim_window);
  if (const json* g = o.child("generator")) c.generator = parse_generator(*g);
  if (const json* d = o.child("global_discriminator")) {
    c.global_discriminator = parse_discriminator(*d, c.global_discriminator, "global_discriminator");
  }
  if (const json* d = o.child("local_discriminator")) {
    c.local_discriminator = parse_discriminator(*d, c.local_discriminator, "local_discriminator");
  }
  if (const json* l = o.child("loss")) {
    StrictObject lo(*l, "loss");
    lo.read("lambda_adv", c.loss.adversarial);
    lo.read("lambda_local", c.loss.local);
    lo.read("lambda_style", c.loss.style);
    lo.read("lambda_percep", c.loss.perceptual);
    lo.read("style_layer_weights", c.loss.style_layers);
    lo.read("percep_layer_weights", c.loss.perceptual_layers);
    std::string depth(inpaint_forge::to_string(c.style_depth));
    lo.read("style_depth", depth);
    c.style_depth = parse_style_depth(depth);
    lo.read("style_stages", c.style_stages);
    lo.finish();
  }
  if (const json* t = o.child("train")) {
    StrictObject to(*t, "train");
    to.read("epochs", c.train.epochs);
    to.read("batch_size", c.train.batch_size);
    to.read("learning_rate", c.train.learning_rate);
    to.read("beta1", c.train.beta1);
    to.read("beta2", c.train.beta2);
    to.read("seed", c.train.seed);
    to.read("log_every", c.train.log_every);
    to.read("checkpoint_every", c.train.checkpoint_every);
    to.read("deterministic", c.train.deterministic);
    to.finish();
  }
  o.finish();
  c.validate();
  return c;
}

RunConfig RunConfig::from_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("config file not found: " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + file.string() + " is not valid JSON: " + e.what());
  }
  RunConfig c = from_json(doc);
  c.base_dir = file.has_parent_path() ? file.parent_path() : std::filesystem::path(".");
  return c;
}

void RunConfig::write(const std::filesystem::path& file) const {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw IoError("cannot write config snapshot " + file.string());
  out << to_json().dump(2) << '\n';
}

std::string RunConfig::hash() const {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(to_json().dump());
  return out.str();
}

std::filesystem::path RunConfig::resolve(const std::filesystem::path& p) const {
  if (p.empty() || p.is_absolute()) return p;
  return base_dir / p;
}

}  // namespace inpaint_forge
