#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace inpaint_forge {

enum class Split { Train, Val };

std::string_view to_string(Split s);
Split parse_split(std::string_view text);

struct ManifestEntry {
  std::string path;  // relative to DatasetManifest::root
  Split split = Split::Train;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Ordered (path, split) list plus the seed that produced the split.
///
/// Entries are sorted by path; which entries land in the validation split is a
/// pure function of the seed and the file list. Serialized as a header line
/// `seed=<int>` followed by one `<relative-path>\t<split>` line per entry.
struct DatasetManifest {
  std::filesystem::path root;
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> entries;

  std::vector<std::filesystem::path> paths(Split split) const;
  std::size_t count(Split split) const;
};

inline constexpr std::string_view kManifestFileName = "manifest.tsv";

/// Scans `dir` (non-recursively) for *.png files and assigns
/// ceil(val_fraction * N) of them to the validation split after a seeded
/// shuffle. Throws DatasetError when fewer than two images are present.
DatasetManifest build_manifest(const std::filesystem::path& dir, double val_fraction,
                               std::uint64_t seed);

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& file);

/// Parses a manifest file; relative paths resolve against the file's directory.
DatasetManifest read_manifest(const std::filesystem::path& file);

}  // namespace inpaint_forge
