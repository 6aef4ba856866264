#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include <json.hpp>

namespace wg {

inline constexpr std::array<std::string_view, 4> kAttributes = {
    "left_eye", "right_eye", "nose", "mouth"};

bool is_known_attribute(std::string_view name);

// Axis-aligned pixel rectangle: columns [x, x + w), rows [y, y + h).
struct Box {
  std::size_t x = 0, y = 0, w = 0, h = 0;

  std::size_t area() const { return w * h; }
  bool contains(std::size_t row, std::size_t col) const {
    return row >= y && row < y + h && col >= x && col < x + w;
  }
  bool overlaps(const Box& o) const {
    return x < o.x + o.w && o.x < x + w && y < o.y + o.h && o.y < y + h;
  }
  friend bool operator==(const Box&, const Box&) = default;
};

struct AttributeAnnotation {
  std::string image_id;
  std::map<std::string, Box> boxes;

  // Throws InvalidArgument if the attribute is not annotated.
  const Box& box(const std::string& attr) const;
  bool has(const std::string& attr) const { return boxes.count(attr) != 0; }
};

// Checks names are canonical, boxes are at least 2x2 and lie inside an image
// of the given size. Throws InvalidArgument.
void validate_annotation(const AttributeAnnotation& ann, std::size_t height,
                         std::size_t width);

// {"image": id, "boxes": {"nose": [x, y, w, h], ...}}
nlohmann::json annotation_to_json(const AttributeAnnotation& ann);
AttributeAnnotation annotation_from_json(const nlohmann::json& j);
AttributeAnnotation load_annotation(const std::filesystem::path& path);
void save_annotation(const AttributeAnnotation& ann, const std::filesystem::path& path);

}  // namespace wg
