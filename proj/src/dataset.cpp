#include "witness_guard/dataset.hpp"

#include <algorithm>
#include <fstream>

#include "witness_guard/image_io.hpp"

namespace wg {

namespace {

bool is_image(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  return ext == ".png" || ext == ".pgm" || ext == ".ppm";
}

}  // namespace

std::vector<DatasetEntry> load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw InvalidArgument("not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && is_image(e.path())) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<DatasetEntry> out;
  for (const auto& file : files) {
    DatasetEntry entry;
    entry.id = file.stem().string();
    entry.image = read_image(file);
    auto sidecar = file;
    sidecar.replace_extension(".json");
    if (std::filesystem::exists(sidecar)) {
      std::ifstream in(sidecar);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument(sidecar.string() + ": " + e.what());
      }
      if (!j.is_object()) throw InvalidArgument(sidecar.string() + ": expected an object");
      if (j.contains("boxes")) {
        if (!j.contains("image")) j["image"] = entry.id;
        entry.annotation = annotation_from_json(j);
        validate_annotation(*entry.annotation, entry.image.dim(1), entry.image.dim(2));
      }
      if (j.contains("label")) {
        if (!j["label"].is_number_unsigned()) {
          throw InvalidArgument(sidecar.string() + ": label must be a non-negative integer");
        }
        entry.label = j["label"].get<std::size_t>();
      }
      for (const auto& [key, value] : j.items()) {
        if (key != "image" && key != "boxes" && key != "label") entry.extra[key] = value;
      }
    }
    out.push_back(std::move(entry));
  }
  return out;
}

void save_entry(const std::filesystem::path& dir, const DatasetEntry& entry) {
  std::filesystem::create_directories(dir);
  write_image(dir / (entry.id + ".png"), entry.image);
  nlohmann::json j = entry.extra;
  if (entry.annotation) {
    const auto ann = annotation_to_json(*entry.annotation);
    j["image"] = ann["image"];
    j["boxes"] = ann["boxes"];
  }
  if (entry.label) j["label"] = *entry.label;
  if (j.empty()) return;
  std::ofstream out(dir / (entry.id + ".json"));
  if (!out) throw std::runtime_error("cannot write sidecar for " + entry.id);
  out << j.dump(2) << '\n';
}

}  // namespace wg
