#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "decoil/config.hpp"
#include "decoil/fixedpoint.hpp"

namespace decoil {

// H x W x D volume stored row-major with depth innermost, i.e. in the same
// order the depth-concatenated stream delivers it.
class Tensor3D {
 public:
  Tensor3D() = default;
  explicit Tensor3D(Dims dims);
  Tensor3D(Dims dims, std::vector<FxValue> values);

  const Dims& dims() const { return dims_; }
  std::size_t size() const { return values_.size(); }

  std::size_t offset(int row, int col, int ch) const {
    return (std::size_t(row) * dims_.width + col) * dims_.depth + ch;
  }
  FxValue& at(int row, int col, int ch) { return values_[offset(row, col, ch)]; }
  FxValue at(int row, int col, int ch) const { return values_[offset(row, col, ch)]; }

  // All channels of one spatial position.
  std::span<const FxValue> position(int row, int col) const {
    return {values_.data() + offset(row, col, 0), std::size_t(dims_.depth)};
  }

  std::span<const FxValue> values() const { return values_; }
  std::span<FxValue> values() { return values_; }

  friend bool operator==(const Tensor3D&, const Tensor3D&) = default;

 private:
  Dims dims_{};
  std::vector<FxValue> values_;
};

// k filters of kernel x kernel x depth, stored (filter, row, col, depth-innermost).
class FilterBank {
 public:
  FilterBank() = default;
  FilterBank(int count, int kernel, int depth);
  FilterBank(int count, int kernel, int depth, std::vector<FxValue> values);

  int count() const { return count_; }
  int kernel() const { return kernel_; }
  int depth() const { return depth_; }
  std::size_t size() const { return values_.size(); }

  std::size_t offset(int f, int row, int col, int ch) const {
    return ((std::size_t(f) * kernel_ + row) * kernel_ + col) * depth_ + ch;
  }
  FxValue& at(int f, int row, int col, int ch) { return values_[offset(f, row, col, ch)]; }
  FxValue at(int f, int row, int col, int ch) const { return values_[offset(f, row, col, ch)]; }

  std::span<const FxValue> values() const { return values_; }
  std::span<FxValue> values() { return values_; }

  friend bool operator==(const FilterBank&, const FilterBank&) = default;

 private:
  int count_ = 0;
  int kernel_ = 0;
  int depth_ = 0;
  std::vector<FxValue> values_;
};

}  // namespace decoil
