#include "witness_guard/annotation.hpp"

#include <algorithm>
#include <fstream>

#include "witness_guard/tensor.hpp"

namespace wg {

bool is_known_attribute(std::string_view name) {
  return std::find(kAttributes.begin(), kAttributes.end(), name) != kAttributes.end();
}

const Box& AttributeAnnotation::box(const std::string& attr) const {
  auto it = boxes.find(attr);
  if (it == boxes.end()) {
    throw InvalidArgument("annotation '" + image_id + "' has no '" + attr + "' box");
  }
  return it->second;
}

void validate_annotation(const AttributeAnnotation& ann, std::size_t height,
                         std::size_t width) {
  for (const auto& [name, b] : ann.boxes) {
    if (!is_known_attribute(name)) {
      throw InvalidArgument("annotation '" + ann.image_id + "': unknown attribute '" + name + "'");
    }
    if (b.w < 2 || b.h < 2) {
      throw InvalidArgument("annotation '" + ann.image_id + "': box '" + name +
                            "' must be at least 2x2");
    }
    if (b.x + b.w > width || b.y + b.h > height) {
      throw InvalidArgument("annotation '" + ann.image_id + "': box '" + name +
                            "' exceeds image bounds");
    }
  }
}

nlohmann::json annotation_to_json(const AttributeAnnotation& ann) {
  nlohmann::json boxes = nlohmann::json::object();
  for (const auto& [name, b] : ann.boxes) boxes[name] = {b.x, b.y, b.w, b.h};
  return {{"image", ann.image_id}, {"boxes", boxes}};
}

AttributeAnnotation annotation_from_json(const nlohmann::json& j) {
  AttributeAnnotation ann;
  try {
    ann.image_id = j.at("image").get<std::string>();
    for (const auto& [name, v] : j.at("boxes").items()) {
      if (!v.is_array() || v.size() != 4) {
        throw InvalidArgument("box '" + name + "' must be [x, y, w, h]");
      }
      for (const auto& n : v) {
        if (!n.is_number_integer() || n.get<long long>() < 0) {
          throw InvalidArgument("box '" + name + "' needs non-negative integers");
        }
      }
      ann.boxes[name] = Box{v[0].get<std::size_t>(), v[1].get<std::size_t>(),
                            v[2].get<std::size_t>(), v[3].get<std::size_t>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed annotation: ") + e.what());
  }
  return ann;
}

AttributeAnnotation load_annotation(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open annotation " + path.string());
  try {
    return annotation_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

void save_annotation(const AttributeAnnotation& ann, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << annotation_to_json(ann).dump(2) << '\n';
}

}  // namespace wg
