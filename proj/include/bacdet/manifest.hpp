#pragma once

#include "bacdet/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace bacdet {

enum class Split { train, test };

struct ManifestEntry {
  std::filesystem::path image_path;  // resolved against the manifest directory
  std::filesystem::path mask_path;
  Split split = Split::train;
  std::string image_id;  // stem of image_path, unique within the manifest
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::string dataset_name;

  std::vector<const ManifestEntry*> split_entries(Split s) const;
  int count(Split s) const;
};

/// Parses the line-delimited manifest format:
/// `image_path<TAB>mask_path<TAB>split` per record, `#` lines ignored,
/// relative paths resolved against the manifest's directory. Every referenced
/// path must exist and image ids must be unique.
DatasetManifest load_manifest(const std::filesystem::path& path);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Loads every entry's image and mask and checks that their dimensions agree.
/// Throws data_error naming the first offending entry.
void validate_manifest(const DatasetManifest& manifest);

}  // namespace bacdet
