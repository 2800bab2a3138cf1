#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace advseq {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

namespace ad {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

/// Dense row-major array of 64-bit reals. Plain value type; computation
/// graphs store one Tensor per node, model parameters are Tensors between
/// steps.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data);
  explicit Tensor(Shape shape);  // zero-filled

  static Tensor scalar(double v);
  static Tensor zeros(Shape shape);
  static Tensor ones(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor uniform(Shape shape, double lo, double hi, std::mt19937_64& rng);
  static Tensor normal(Shape shape, double mean, double stddev, std::mt19937_64& rng);

  const Shape& shape() const { return shape_; }
  std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  std::int64_t extent(std::int64_t axis) const { return shape_[static_cast<std::size_t>(axis)]; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }
  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }

  // rank-2 / rank-3 element access, row-major
  double at2(std::int64_t r, std::int64_t c) const;
  double& at2(std::int64_t r, std::int64_t c);
  double at3(std::int64_t i, std::int64_t j, std::int64_t k) const;
  double& at3(std::int64_t i, std::int64_t j, std::int64_t k);

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  double item() const;  // requires size() == 1

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace ad
}  // namespace advseq
