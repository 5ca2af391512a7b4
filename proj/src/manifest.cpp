#include "bacdet/manifest.hpp"

#include "bacdet/image_io.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

namespace bacdet {

std::vector<const ManifestEntry*> DatasetManifest::split_entries(Split s) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries)
    if (e.split == s) out.push_back(&e);
  return out;
}

int DatasetManifest::count(Split s) const {
  int n = 0;
  for (const auto& e : entries) n += e.split == s ? 1 : 0;
  return n;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open manifest: " + path.string());
  const std::filesystem::path base = path.parent_path();

  DatasetManifest manifest;
  manifest.dataset_name = path.stem().string();
  std::unordered_set<std::string> seen_ids;

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;

    const auto where = [&] { return path.string() + ":" + std::to_string(lineno); };
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty())
      throw data_error("malformed manifest entry at " + where() +
                       " (expected image<TAB>mask<TAB>split)");

    ManifestEntry e;
    const std::filesystem::path image_field(fields[0]), mask_field(fields[1]);
    e.image_path = image_field.is_absolute() ? image_field : base / image_field;
    e.mask_path = mask_field.is_absolute() ? mask_field : base / mask_field;
    if (fields[2] == "train")
      e.split = Split::train;
    else if (fields[2] == "test")
      e.split = Split::test;
    else
      throw data_error("unknown split '" + fields[2] + "' at " + where());

    if (!std::filesystem::exists(e.image_path))
      throw data_error("referenced image does not exist at " + where() + ": " +
                       e.image_path.string());
    if (!std::filesystem::exists(e.mask_path))
      throw data_error("referenced mask does not exist at " + where() + ": " +
                       e.mask_path.string());

    e.image_id = e.image_path.stem().string();
    if (!seen_ids.insert(e.image_id).second)
      throw data_error("duplicate image id '" + e.image_id + "' at " + where());
    manifest.entries.push_back(std::move(e));
  }
  if (manifest.entries.empty()) throw data_error("empty manifest: " + path.string());
  return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write manifest: " + path.string());
  const std::filesystem::path base = path.parent_path();
  for (const auto& e : manifest.entries) {
    const auto rel = [&](const std::filesystem::path& p) {
      auto r = p.lexically_relative(base);
      return (r.empty() || r.native().starts_with("..")) ? p : r;
    };
    out << rel(e.image_path).generic_string() << '\t' << rel(e.mask_path).generic_string()
        << '\t' << (e.split == Split::train ? "train" : "test") << '\n';
  }
}

void validate_manifest(const DatasetManifest& manifest) {
  for (const auto& e : manifest.entries) {
    const Image img = load_image(e.image_path, e.image_id);
    load_mask(e.mask_path, img.height(), img.width(), e.image_id);
  }
}

}  // namespace bacdet
