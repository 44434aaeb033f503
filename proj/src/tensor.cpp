#include "decoil/tensor.hpp"

#include <string>

#include "decoil/error.hpp"

namespace decoil {

Tensor3D::Tensor3D(Dims dims) : dims_(dims), values_(std::size_t(dims.volume())) {}

Tensor3D::Tensor3D(Dims dims, std::vector<FxValue> values) : dims_(dims), values_(std::move(values)) {
  if (values_.size() != std::size_t(dims_.volume())) {
    throw ValidationError("tensor value count " + std::to_string(values_.size()) +
                          " does not match dims volume " + std::to_string(dims_.volume()));
  }
}

FilterBank::FilterBank(int count, int kernel, int depth)
    : count_(count), kernel_(kernel), depth_(depth),
      values_(std::size_t(count) * kernel * kernel * depth) {}

FilterBank::FilterBank(int count, int kernel, int depth, std::vector<FxValue> values)
    : count_(count), kernel_(kernel), depth_(depth), values_(std::move(values)) {
  if (values_.size() != std::size_t(count) * kernel * kernel * depth) {
    throw ValidationError("filter bank value count " + std::to_string(values_.size()) +
                          " does not match k*w*w*d = " +
                          std::to_string(std::size_t(count) * kernel * kernel * depth));
  }
}

}  // namespace decoil
