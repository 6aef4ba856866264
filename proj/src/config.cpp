#include "witness_guard/config.hpp"

#include <toml.hpp>

namespace wg {

namespace {

toml::table parse(const std::filesystem::path& path) {
  try {
    return toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    throw InvalidArgument(path.string() + ": " + std::string(e.description()));
  }
}

template <typename T>
void read(const toml::table& t, std::string_view key, T& field) {
  const toml::node* node = t.get(key);
  if (!node) return;
  if constexpr (std::is_same_v<T, bool>) {
    auto v = node->value<bool>();
    if (!v) throw InvalidArgument("config key '" + std::string(key) + "' must be a boolean");
    field = *v;
  } else if constexpr (std::is_floating_point_v<T>) {
    auto v = node->value<double>();
    if (!v) throw InvalidArgument("config key '" + std::string(key) + "' must be a number");
    field = static_cast<T>(*v);
  } else {
    auto v = node->value<std::int64_t>();
    if (!v || *v < 0) {
      throw InvalidArgument("config key '" + std::string(key) + "' must be a non-negative integer");
    }
    field = static_cast<T>(*v);
  }
}

}  // namespace

SteeringConfig load_steering_config(const std::filesystem::path& path, SteeringConfig base) {
  const toml::table root = parse(path);
  const toml::table* t = root["steering"].as_table();
  if (!t) t = &root;
  read(*t, "alpha", base.alpha);
  read(*t, "beta", base.beta);
  read(*t, "epsilon", base.epsilon);
  read(*t, "pool_margin", base.pool_margin);
  read(*t, "sigma_floor", base.sigma_floor);
  read(*t, "weaken", base.weaken);
  read(*t, "strengthen", base.strengthen);
  base.validate();
  return base;
}

PlantedSpec load_planted_spec(const std::filesystem::path& path, PlantedSpec base) {
  const toml::table t = parse(path);
  read(t, "height", base.height);
  read(t, "width", base.width);
  read(t, "units_per_attribute", base.units_per_attribute);
  read(t, "distractor_units", base.distractor_units);
  read(t, "class_count", base.class_count);
  read(t, "seed", base.seed);
  read(t, "level_low", base.level_low);
  read(t, "level_high", base.level_high);
  read(t, "background", base.background);
  read(t, "noise", base.noise);
  read(t, "planted_gain", base.planted_gain);
  read(t, "distractor_gain", base.distractor_gain);
  read(t, "distractor_readout", base.distractor_readout);
  read(t, "distractor_tonic", base.distractor_tonic);
  if (const toml::table* regions = t["regions"].as_table()) {
    base.regions.clear();
    for (const auto& [name, node] : *regions) {
      const toml::array* a = node.as_array();
      if (!a || a->size() != 4) {
        throw InvalidArgument("region '" + std::string(name.str()) + "' must be [x, y, w, h]");
      }
      std::size_t v[4];
      for (std::size_t k = 0; k < 4; ++k) {
        auto n = (*a)[k].value<std::int64_t>();
        if (!n || *n < 0) {
          throw InvalidArgument("region '" + std::string(name.str()) + "' has a bad coordinate");
        }
        v[k] = static_cast<std::size_t>(*n);
      }
      base.regions[std::string(name.str())] = Box{v[0], v[1], v[2], v[3]};
    }
  }
  base.validate();
  return base;
}

}  // namespace wg
