#include "gesturegan/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace gesturegan::nn {

std::string Shape::str() const {
  std::ostringstream os;
  os << '[' << n << ',' << c << ',' << h << ',' << w << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw ShapeError("Tensor: data size " + std::to_string(data_.size()) + " does not match shape " +
                     shape_.str());
  }
}

float Tensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError("Tensor::item on non-scalar tensor " + shape_.str());
  }
  return data_[0];
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::reshape(Shape shape) {
  if (shape.numel() != data_.size()) {
    throw ShapeError("Tensor::reshape " + shape_.str() + " -> " + shape.str());
  }
  shape_ = shape;
}

Tensor Tensor::sample(int index) const {
  if (index < 0 || index >= shape_.n) {
    throw ShapeError("Tensor::sample index out of range");
  }
  const std::size_t per = static_cast<std::size_t>(shape_.c) * shape_.plane();
  Tensor out({1, shape_.c, shape_.h, shape_.w});
  std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(per * index), per, out.data_.begin());
  return out;
}

Tensor Tensor::stack(std::span<const Tensor> samples) {
  if (samples.empty()) {
    throw ShapeError("Tensor::stack of zero samples");
  }
  const Shape first = samples.front().shape();
  if (first.n != 1) {
    throw ShapeError("Tensor::stack expects {1,C,H,W} samples");
  }
  Tensor out({static_cast<int>(samples.size()), first.c, first.h, first.w});
  auto it = out.data_.begin();
  for (const Tensor& s : samples) {
    if (s.shape() != first) {
      throw ShapeError("Tensor::stack shape mismatch: " + s.shape().str() + " vs " + first.str());
    }
    it = std::copy(s.data_.begin(), s.data_.end(), it);
  }
  return out;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape().str() + " vs " +
                     b.shape().str());
  }
}

}  // namespace gesturegan::nn
