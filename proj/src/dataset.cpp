#include "inpaint_forge/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "inpaint_forge/errors.hpp"
#include "inpaint_forge/rng.hpp"

namespace inpaint_forge {

std::string_view to_string(Split s) { return s == Split::Train ? "train" : "val"; }

Split parse_split(std::string_view text) {
  if (text == "train") return Split::Train;
  if (text == "val") return Split::Val;
  throw DatasetError("unknown split '" + std::string(text) + "'");
}

std::vector<std::filesystem::path> DatasetManifest::paths(Split split) const {
  std::vector<std::filesystem::path> out;
  for (const auto& e : entries) {
    if (e.split == split) out.push_back(root / e.path);
  }
  return out;
}

std::size_t DatasetManifest::count(Split split) const {
  return static_cast<std::size_t>(std::count_if(
      entries.begin(), entries.end(), [split](const ManifestEntry& e) { return e.split == split; }));
}

DatasetManifest build_manifest(const std::filesystem::path& dir, double val_fraction,
                               std::uint64_t seed) {
  if (!(val_fraction >= 0.0 && val_fraction <= 1.0)) {
    throw DatasetError("val_fraction must lie in [0, 1]");
  }
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw DatasetError("dataset directory not found: " + dir.string());
  }
  std::vector<std::string> names;
  for (const auto& item : std::filesystem::directory_iterator(dir)) {
    if (!item.is_regular_file()) continue;
    auto ext = item.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") names.push_back(item.path().filename().string());
  }
  if (names.size() < 2) {
    throw DatasetError("dataset directory " + dir.string() + " holds " +
                       std::to_string(names.size()) + " PNG images; at least 2 are required");
  }
  std::sort(names.begin(), names.end());

  const std::size_t n = names.size();
  // The epsilon keeps products such as 0.1 * 30 from rounding up past an integer.
  const auto n_val = static_cast<std::size_t>(std::ceil(val_fraction * static_cast<double>(n) - 1e-9));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed, 0x73706C6974ULL);
  for (std::size_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)));
    std::swap(order[i], order[j]);
  }

  DatasetManifest manifest;
  manifest.root = dir;
  manifest.seed = seed;
  manifest.entries.resize(n);
  for (std::size_t i = 0; i < n; ++i) manifest.entries[i] = {names[i], Split::Train};
  for (std::size_t k = 0; k < n_val; ++k) manifest.entries[order[k]].split = Split::Val;
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& file) {
  std::ostringstream out;
  out << "seed=" << manifest.seed << '\n';
  for (const auto& e : manifest.entries) out << e.path << '\t' << to_string(e.split) << '\n';
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream stream(file, std::ios::binary | std::ios::trunc);
  if (!stream) throw IoError("cannot write manifest: " + file.string());
  stream << out.str();
  if (!stream) throw IoError("failed writing manifest: " + file.string());
}

DatasetManifest read_manifest(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw FileNotFoundError("manifest not found: " + file.string());
  DatasetManifest manifest;
  manifest.root = file.has_parent_path() ? file.parent_path() : std::filesystem::path(".");

  std::string line;
  if (!std::getline(in, line) || !line.starts_with("seed=")) {
    throw DatasetError("manifest " + file.string() + " lacks a 'seed=<int>' header");
  }
  try {
    std::size_t used = 0;
    manifest.seed = std::stoull(line.substr(5), &used);
    if (used != line.size() - 5) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw DatasetError("manifest " + file.string() + " has a malformed seed header: " + line);
  }

  std::set<std::string> seen;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DatasetError("manifest line " + std::to_string(line_no) + " lacks a tab separator");
    }
    ManifestEntry entry{line.substr(0, tab), parse_split(line.substr(tab + 1))};
    if (!seen.insert(entry.path).second) {
      throw DatasetError("manifest lists " + entry.path + " twice");
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

}  // namespace inpaint_forge
