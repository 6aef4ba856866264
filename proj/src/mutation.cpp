#include "witness_guard/mutation.hpp"

namespace wg {

namespace {

void check_box(const Tensor& image, const Box& b, const char* which) {
  if (b.w == 0 || b.h == 0 || b.x + b.w > image.dim(2) || b.y + b.h > image.dim(1)) {
    throw InvalidArgument(std::string(which) + " box lies outside the image");
  }
}

}  // namespace

Tensor transplant_region(const Tensor& target, const Box& target_box,
                         const Tensor& source, const Box& source_box) {
  if (target.rank() != 3 || source.rank() != 3) {
    throw InvalidArgument("transplant_region: images must be CxHxW");
  }
  if (target.dim(0) != source.dim(0)) {
    throw InvalidArgument("transplant_region: channel counts differ");
  }
  check_box(target, target_box, "target");
  check_box(source, source_box, "source");
  Tensor out = target;
  for (std::size_t c = 0; c < target.dim(0); ++c) {
    Tensor patch({source_box.h, source_box.w});
    for (std::size_t y = 0; y < source_box.h; ++y) {
      for (std::size_t x = 0; x < source_box.w; ++x) {
        patch(y, x) = source(c, source_box.y + y, source_box.x + x);
      }
    }
    const Tensor fitted = bilinear_resize(patch, target_box.h, target_box.w);
    for (std::size_t y = 0; y < target_box.h; ++y) {
      for (std::size_t x = 0; x < target_box.w; ++x) {
        out(c, target_box.y + y, target_box.x + x) = fitted(y, x);
      }
    }
  }
  return out;
}

Tensor substitute_attribute(const Tensor& base, const AttributeAnnotation& base_ann,
                            const Tensor& donor, const AttributeAnnotation& donor_ann,
                            const std::string& attr) {
  return transplant_region(base, base_ann.box(attr), donor, donor_ann.box(attr));
}

Tensor preserve_attribute(const Tensor& base, const AttributeAnnotation& base_ann,
                          const Tensor& other, const AttributeAnnotation& other_ann,
                          const std::string& attr) {
  return transplant_region(other, other_ann.box(attr), base, base_ann.box(attr));
}

}  // namespace wg
