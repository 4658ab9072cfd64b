#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ctr/error.hpp"

namespace ctr {

// Named tensors backed by one flat double vector, so the optimizer and the
// gradient checker can treat all parameters as a single vector while model
// code works with per-tensor views.
struct TensorSpec {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;
  bool is_bias = false;  // biases are zero-initialized

  std::size_t size() const { return rows * cols; }
};

class ParameterSet {
 public:
  // Returns the tensor id used with view(); definition order is the
  // serialization order.
  std::size_t add(std::string name, std::size_t rows, std::size_t cols,
                  bool is_bias = false) {
    TensorSpec spec;
    spec.name = std::move(name);
    spec.rows = rows;
    spec.cols = cols;
    spec.offset = data_.size();
    spec.is_bias = is_bias;
    specs_.push_back(spec);
    data_.resize(data_.size() + rows * cols, 0.0);
    return specs_.size() - 1;
  }

  std::span<double> view(std::size_t id) {
    const TensorSpec& s = specs_[id];
    return std::span<double>(data_.data() + s.offset, s.size());
  }
  std::span<const double> view(std::size_t id) const {
    const TensorSpec& s = specs_[id];
    return std::span<const double>(data_.data() + s.offset, s.size());
  }

  // Same tensor inside an external flat vector (e.g. a gradient buffer).
  std::span<double> view_in(std::size_t id, std::span<double> flat) const {
    const TensorSpec& s = specs_[id];
    return flat.subspan(s.offset, s.size());
  }
  std::span<const double> view_in(std::size_t id,
                                  std::span<const double> flat) const {
    const TensorSpec& s = specs_[id];
    return flat.subspan(s.offset, s.size());
  }

  const std::vector<TensorSpec>& specs() const { return specs_; }
  std::size_t size() const { return data_.size(); }
  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

 private:
  std::vector<TensorSpec> specs_;
  std::vector<double> data_;
};

}  // namespace ctr
