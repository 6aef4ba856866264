#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "witness_guard/annotation.hpp"
#include "witness_guard/tensor.hpp"

namespace wg {

// One image of a data directory. The directory holds `<id>.png` (or .pgm /
// .ppm) files, each with an optional `<id>.json` sidecar:
//
//   {"image": "<id>", "boxes": {...}, "label": 2, ...}
//
// "boxes" makes the sidecar an attribute annotation; "label" is the ground
// truth class. Other keys are carried through in `extra`.
struct DatasetEntry {
  std::string id;
  Tensor image;
  std::optional<AttributeAnnotation> annotation;
  std::optional<std::size_t> label;
  nlohmann::json extra = nlohmann::json::object();
};

// Entries sorted by id. Throws InvalidArgument for a missing directory or a
// malformed sidecar.
std::vector<DatasetEntry> load_dataset(const std::filesystem::path& dir);

// Writes `<dir>/<id>.png` and its sidecar.
void save_entry(const std::filesystem::path& dir, const DatasetEntry& entry);

}  // namespace wg
