#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zkinfer/errors.hpp"

namespace zkinfer {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_num_elements(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

inline std::string shape_to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// Named tensor shape. Dims are positive and rank is at most 4 ([N,C,H,W]).
struct TensorSpec {
  std::string name;
  Shape shape;

  std::int64_t num_elements() const { return shape_num_elements(shape); }

  void validate() const {
    if (shape.empty() || shape.size() > 4)
      fail(ErrorKind::ShapeMismatch, "tensor '" + name + "' has rank " +
                                         std::to_string(shape.size()) + ", supported range is 1..4");
    for (auto d : shape)
      if (d < 1)
        fail(ErrorKind::ShapeMismatch,
             "tensor '" + name + "' has non-positive dim in " + shape_to_string(shape));
  }
};

// Dense row-major float tensor (model weights, reference activations).
struct FloatTensor {
  Shape shape;
  std::vector<double> data;

  std::int64_t num_elements() const { return shape_num_elements(shape); }
};

}  // namespace zkinfer
