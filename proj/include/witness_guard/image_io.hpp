#pragma once

#include <filesystem>

#include "witness_guard/tensor.hpp"

namespace wg {

// Images are channels x height x width float tensors in [0, 1]. The format
// follows the file extension: .png (8-bit gray/RGB/RGBA via libpng), .pgm
// and .ppm (binary P5/P6, maxval <= 255).
Tensor read_image(const std::filesystem::path& path);

// Values are clamped to [0, 1] and rounded to 8 bits. One channel is written
// as grayscale, three as RGB.
void write_image(const std::filesystem::path& path, const Tensor& image);

// Round-trips values through the 8-bit grid used by write_image.
Tensor quantize_8bit(const Tensor& image);

// Gray -> RGB replicates; RGB -> gray uses Rec. 601 luma weights.
Tensor convert_channels(const Tensor& image, std::size_t channels);

}  // namespace wg
