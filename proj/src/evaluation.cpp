#include "inpaint_forge/evaluation.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "inpaint_forge/errors.hpp"
#include "inpaint_forge/rng.hpp"
#include "inpaint_forge/training.hpp"

namespace inpaint_forge {

Image inpaint(CasNet& generator, const InpaintingSample& sample) {
  const int size = generator->image_size();
  if (sample.context.height() != size || sample.context.width() != size) {
    throw SpecError("generator expects " + std::to_string(size) + "x" + std::to_string(size) +
                    " inputs, got " + std::to_string(sample.context.height()) + "x" +
                    std::to_string(sample.context.width()));
  }
  if (sample.context.range() != Range::Model) throw RangeError("inpaint expects a model-range context");
  validate_region(sample.region, size, size);

  generator->eval();
  torch::NoGradGuard no_grad;
  BatchTensors batch = to_batch(std::span<const InpaintingSample>(&sample, 1));
  const auto raw = generator->forward(generator_input(batch, generator->spec()));
  return compose(sample.context, tensor_to_image(raw, Range::Model), sample.region);
}

Inpainter::Inpainter(const std::filesystem::path& checkpoint)
    : generator_(load_generator(checkpoint, &config_)) {}

Image Inpainter::operator()(const InpaintingSample& sample) { return inpaint(generator_, sample); }

Image mean_fill_baseline(const InpaintingSample& sample) {
  const auto& ctx = sample.context;
  const auto& r = sample.region;
  validate_region(r, ctx.height(), ctx.width());
  double sum = 0.0;
  std::size_t n = 0;
  for (int row = 0; row < ctx.height(); ++row) {
    for (int col = 0; col < ctx.width(); ++col) {
      const bool inside = row >= r.top && row < r.top + r.size && col >= r.left && col < r.left + r.size;
      if (!inside) {
        sum += ctx(row, col);
        ++n;
      }
    }
  }
  // A region covering the whole image leaves no context; fall back to the fill.
  const float fill = n > 0 ? static_cast<float>(sum / static_cast<double>(n)) : kDefaultFill;
  return compose(ctx, Image(ctx.height(), ctx.width(), ctx.range(), fill), r);
}

EvalModel mean_fill_model() { return {kMeanFillName, mean_fill_baseline}; }

EvalModel checkpoint_model(const std::filesystem::path& checkpoint) {
  auto inpainter = std::make_shared<Inpainter>(checkpoint);
  return {inpainter->config().name, [inpainter](const InpaintingSample& s) { return (*inpainter)(s); }};
}

EvalSettings EvalSettings::from_config(const RunConfig& config) {
  EvalSettings s;
  s.image_size = config.image_size;
  s.region_size = config.region_size;
  s.fill_value = static_cast<float>(config.fill_value);
  s.ssim_window = config.ssim_window;
  s.seed = config.train.seed;
  return s;
}

std::vector<InpaintingSample> validation_samples(const std::vector<Image>& targets,
                                                 const EvalSettings& settings) {
  Rng rng(settings.seed, 0x76616C6964ULL);  // "valid"
  std::vector<InpaintingSample> samples;
  samples.reserve(targets.size());
  for (const auto& t : targets) {
    const auto region = sample_region(rng, t.height(), t.width(), settings.region_size);
    samples.push_back(make_sample(t, region, settings.fill_value));
  }
  return samples;
}

namespace {

void check_context_preserved(const InpaintingSample& s, const Image& completed, const std::string& model) {
  if (!completed.same_shape(s.context)) {
    throw ShapeError("model '" + model + "' returned an image of the wrong shape");
  }
  const auto& r = s.region;
  for (int row = 0; row < completed.height(); ++row) {
    for (int col = 0; col < completed.width(); ++col) {
      const bool inside = row >= r.top && row < r.top + r.size && col >= r.left && col < r.left + r.size;
      if (!inside && completed(row, col) != s.context(row, col)) {
        throw ShapeError("model '" + model + "' altered context pixels outside the region");
      }
    }
  }
}

}  // namespace

ComparisonTable aggregate_rows(std::vector<SampleRow> rows) {
  ComparisonTable table;
  std::vector<std::string> order;
  for (const auto& row : rows) {
    if (std::find(order.begin(), order.end(), row.model) == order.end()) order.push_back(row.model);
  }
  for (const auto& name : order) {
    std::vector<QualityScores> full, region;
    for (const auto& row : rows) {
      if (row.model != name) continue;
      full.push_back(row.metrics.full);
      region.push_back(row.metrics.region);
    }
    table.models.push_back({name, aggregate(full, Scope::FullImage), aggregate(region, Scope::RegionOnly)});
  }
  table.samples = std::move(rows);
  return table;
}

ComparisonTable evaluate(const std::vector<EvalModel>& models, const std::vector<InpaintingSample>& samples,
                         const std::vector<std::string>& paths, int ssim_window) {
  if (models.empty()) throw std::invalid_argument("evaluate needs at least one model or baseline");
  if (samples.empty()) throw DatasetError("validation split is empty");
  std::vector<SampleRow> rows;
  for (const auto& model : models) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const Image completed = model.complete(samples[i]);
      check_context_preserved(samples[i], completed, model.name);
      rows.push_back({model.name, i, i < paths.size() ? paths[i] : std::string(), samples[i].region,
                      region_metrics(samples[i], completed, ssim_window)});
    }
  }
  return aggregate_rows(std::move(rows));
}

ComparisonTable evaluate(const std::vector<EvalModel>& models, const DatasetManifest& manifest,
                         const EvalSettings& settings) {
  const auto images = load_split_images(manifest, Split::Val, settings.image_size);
  if (images.empty()) throw DatasetError("manifest has no val entries");
  std::vector<std::string> paths;
  for (const auto& p : manifest.paths(Split::Val)) paths.push_back(p.filename().generic_string());
  return evaluate(models, validation_samples(images, settings), paths, settings.ssim_window);
}

// --- reporting -----------------------------------------------------------------

namespace {

constexpr std::array<Scope, 2> kScopes = {Scope::FullImage, Scope::RegionOnly};

std::array<double, 4> column_means(const MetricReport& r) {
  return {r.ssim.mean, r.psnr_db.mean, r.mse.mean, r.uqi.mean};
}

std::string format_number(double v, int precision) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream out;
  out << std::fixed << std::setprecision(precision) << v;
  return out.str();
}

std::string full_precision(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("bad number '" + s + "'");
  return v;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream in(line);
  std::string f;
  while (std::getline(in, f, ',')) fields.push_back(f);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

std::vector<std::array<bool, 4>> best_flags(const ComparisonTable& table, Scope scope) {
  std::vector<std::array<bool, 4>> flags(table.models.size(), {false, false, false, false});
  for (std::size_t col = 0; col < 4; ++col) {
    const bool lower_is_better = col == 2;
    std::optional<double> best;
    for (const auto& m : table.models) {
      const double v = column_means(m.at(scope))[col];
      if (std::isnan(v)) continue;
      if (!best || (lower_is_better ? v < *best : v > *best)) best = v;
    }
    if (!best) continue;
    for (std::size_t i = 0; i < table.models.size(); ++i) {
      flags[i][col] = column_means(table.models[i].at(scope))[col] == *best;
    }
  }
  return flags;
}

std::string format_report_csv(const ComparisonTable& table) {
  std::ostringstream out;
  out << "model,scope,ssim,psnr_db,mse,uqi,n,ssim_std,psnr_db_std,mse_std,uqi_std\n";
  for (Scope scope : kScopes) {
    for (const auto& m : table.models) {
      const auto& r = m.at(scope);
      const std::array<const MetricSummary*, 4> cols = {&r.ssim, &r.psnr_db, &r.mse, &r.uqi};
      out << m.name << ',' << to_string(scope);
      for (const auto* s : cols) out << ',' << full_precision(s->mean);
      out << ',' << r.sample_count;
      for (const auto* s : cols) out << ',' << full_precision(s->stddev);
      out << '\n';
    }
  }
  return out.str();
}

std::string format_report_text(const ComparisonTable& table) {
  std::size_t name_width = 5;
  for (const auto& m : table.models) name_width = std::max(name_width, m.name.size());
  const std::array<const char*, 4> headers = {"SSIM", "PSNR(dB)", "MSE", "UQI"};
  const std::array<int, 4> precision = {4, 2, 2, 4};
  constexpr int kColumn = 12;

  std::ostringstream out;
  for (Scope scope : kScopes) {
    const auto flags = best_flags(table, scope);
    out << "[" << (scope == Scope::FullImage ? "full image" : "region only") << "]\n";
    out << std::left << std::setw(static_cast<int>(name_width) + 2) << "model";
    for (const char* h : headers) out << std::setw(kColumn) << h;
    out << "n\n";
    for (std::size_t i = 0; i < table.models.size(); ++i) {
      const auto& m = table.models[i];
      const auto means = column_means(m.at(scope));
      out << std::setw(static_cast<int>(name_width) + 2) << m.name;
      for (std::size_t c = 0; c < 4; ++c) {
        out << std::setw(kColumn) << (format_number(means[c], precision[c]) + (flags[i][c] ? "*" : ""));
      }
      out << m.at(scope).sample_count << '\n';
    }
    out << '\n';
  }
  out << "* best value in column (MSE lower is better, others higher)\n";
  return out.str();
}

std::string format_samples_csv(const ComparisonTable& table) {
  std::ostringstream out;
  out << "model,index,path,top,left,size";
  for (Scope scope : kScopes) {
    const std::string p(to_string(scope));
    out << ',' << p << "_ssim," << p << "_psnr_db," << p << "_mse," << p << "_uqi";
  }
  out << '\n';
  for (const auto& row : table.samples) {
    out << row.model << ',' << row.index << ',' << row.path << ',' << row.region.top << ','
        << row.region.left << ',' << row.region.size;
    for (const auto* q : {&row.metrics.full, &row.metrics.region}) {
      out << ',' << full_precision(q->ssim) << ',' << full_precision(q->psnr_db) << ','
          << full_precision(q->mse) << ',' << full_precision(q->uqi);
    }
    out << '\n';
  }
  return out.str();
}

std::vector<SampleRow> parse_samples_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw CorruptFileError("empty samples CSV");
  std::vector<SampleRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 14) throw CorruptFileError("samples CSV row has " + std::to_string(f.size()) + " fields");
    try {
      SampleRow row;
      row.model = f[0];
      row.index = std::stoul(f[1]);
      row.path = f[2];
      row.region = {std::stoi(f[3]), std::stoi(f[4]), std::stoi(f[5])};
      row.metrics.full = {parse_double(f[6]), parse_double(f[7]), parse_double(f[8]), parse_double(f[9])};
      row.metrics.region = {parse_double(f[10]), parse_double(f[11]), parse_double(f[12]), parse_double(f[13])};
      rows.push_back(std::move(row));
    } catch (const std::logic_error& e) {
      throw CorruptFileError("bad samples CSV row '" + line + "': " + e.what());
    }
  }
  return rows;
}

void write_reports(const ComparisonTable& table, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::array<std::pair<const char*, std::string>, 3> files = {{
      {"eval_report.csv", format_report_csv(table)},
      {"eval_report.txt", format_report_text(table)},
      {"eval_samples.csv", format_samples_csv(table)},
  }};
  for (const auto& [name, text] : files) {
    std::ofstream out(dir / name, std::ios::trunc);
    out << text;
    if (!out) throw IoError("cannot write " + (dir / name).string());
  }
}

Image make_grid(const std::vector<InpaintingSample>& samples,
                const std::vector<std::vector<Image>>& outputs_per_model, int gap) {
  if (samples.empty()) throw std::invalid_argument("make_grid: no samples");
  for (const auto& outs : outputs_per_model) {
    if (outs.size() != samples.size()) throw std::invalid_argument("make_grid: output count mismatch");
  }
  const int h = samples.front().target.height();
  const int w = samples.front().target.width();
  const int cols = static_cast<int>(outputs_per_model.size()) + 2;
  const int rows = static_cast<int>(samples.size());
  const int grid_w = cols * w + (cols - 1) * gap;
  const int grid_h = rows * h + (rows - 1) * gap;
  std::vector<float> pixels(static_cast<std::size_t>(grid_w) * grid_h, 1.0f);

  auto paste = [&](const Image& img, int r, int c) {
    if (img.height() != h || img.width() != w) throw ShapeError("make_grid: images differ in size");
    const Image s = img.range() == Range::Storage ? img : from_model_range(img);
    const int top = r * (h + gap);
    const int left = c * (w + gap);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        pixels[static_cast<std::size_t>(top + y) * grid_w + left + x] = s(y, x);
      }
    }
  };
  for (int r = 0; r < rows; ++r) {
    paste(samples[r].context, r, 0);
    for (std::size_t m = 0; m < outputs_per_model.size(); ++m) {
      paste(outputs_per_model[m][r], r, static_cast<int>(m) + 1);
    }
    paste(samples[r].target, r, cols - 1);
  }
  return Image(grid_h, grid_w, Range::Storage, std::move(pixels));
}

// --- ablation --------------------------------------------------------------------

std::vector<RunConfig> ablation_configs(const RunConfig& base) {
  RunConfig medgan = base;
  medgan.name = "MedGAN";
  medgan.loss.adversarial = LossWeights::medgan().adversarial;
  medgan.loss.local = LossWeights::medgan().local;
  medgan.run_dir = base.run_dir / "medgan";

  RunConfig ip = base;
  ip.name = "ip-MedGAN";
  ip.loss.adversarial = LossWeights::ip_medgan().adversarial;
  ip.loss.local = LossWeights::ip_medgan().local;
  ip.run_dir = base.run_dir / "ip-medgan";
  return {medgan, ip};
}

std::filesystem::path final_checkpoint_path(const RunConfig& config, const DatasetManifest& manifest) {
  const auto n = static_cast<std::int64_t>(manifest.count(Split::Train));
  const auto per_epoch = (n + config.train.batch_size - 1) / config.train.batch_size;
  return checkpoint_path(config.resolved_run_dir(), per_epoch * config.train.epochs);
}

ComparisonTable ablation_suite(const RunConfig& base, const DatasetManifest& manifest,
                               const AblationOptions& options) {
  std::vector<EvalModel> models = {mean_fill_model()};
  for (const auto& config : ablation_configs(base)) {
    auto ckpt = final_checkpoint_path(config, manifest);
    if (!std::filesystem::exists(ckpt)) {
      if (!options.train_missing) {
        throw FileNotFoundError("missing checkpoint for " + config.name + ": " + ckpt.string() +
                                " (pass --train-missing to train it)");
      }
      if (options.on_progress) options.on_progress("training " + config.name);
      TrainOptions train_options;
      train_options.max_steps = options.max_steps;
      ckpt = train(config, manifest, train_options).final_checkpoint;
    }
    if (options.on_progress) options.on_progress("evaluating " + config.name + " from " + ckpt.string());
    models.push_back(checkpoint_model(ckpt));
  }
  const auto table = evaluate(models, manifest, EvalSettings::from_config(base));
  write_reports(table, base.resolved_run_dir());
  return table;
}

}  // namespace inpaint_forge
