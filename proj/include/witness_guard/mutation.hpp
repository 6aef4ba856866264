#pragma once

#include <string>

#include "witness_guard/annotation.hpp"
#include "witness_guard/tensor.hpp"

namespace wg {

// Copy of `target` whose `target_box` is overwritten by the content of
// `source_box` in `source`, bilinearly resized to the target box. Pixels
// outside the target box are bit-identical to `target`.
Tensor transplant_region(const Tensor& target, const Box& target_box,
                         const Tensor& source, const Box& source_box);

// Replaces base's `attr` with the donor's.
Tensor substitute_attribute(const Tensor& base, const AttributeAnnotation& base_ann,
                            const Tensor& donor, const AttributeAnnotation& donor_ann,
                            const std::string& attr);

// Copies base's `attr` into `other`; the result has other's shape.
// Equivalent to substitute_attribute(other, other_ann, base, base_ann, attr).
Tensor preserve_attribute(const Tensor& base, const AttributeAnnotation& base_ann,
                          const Tensor& other, const AttributeAnnotation& other_ann,
                          const std::string& attr);

}  // namespace wg
