#include "advseq/tensor.hpp"

#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

namespace advseq::ad {

std::int64_t shape_size(const Shape& s) {
  std::int64_t n = 1;
  for (std::int64_t e : s) n *= e;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ", ";
    os << s[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (std::int64_t e : shape_) {
    if (e <= 0) throw Error("tensor extent must be positive, got shape " + shape_str(shape_));
  }
  if (shape_size(shape_) != static_cast<std::int64_t>(data_.size())) {
    throw Error("tensor data length " + std::to_string(data_.size()) +
                " does not match shape " + shape_str(shape_));
  }
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  for (std::int64_t e : shape_) {
    if (e <= 0) throw Error("tensor extent must be positive, got shape " + shape_str(shape_));
  }
  data_.assign(static_cast<std::size_t>(shape_size(shape_)), 0.0);
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::zeros(Shape shape) { return Tensor(std::move(shape)); }

Tensor Tensor::ones(Shape shape) { return full(std::move(shape), 1.0); }

Tensor Tensor::full(Shape shape, double v) {
  Tensor t(std::move(shape));
  for (double& x : t.data_) x = v;
  return t;
}

Tensor Tensor::uniform(Shape shape, double lo, double hi, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& x : t.data_) x = dist(rng);
  return t;
}

Tensor Tensor::normal(Shape shape, double mean, double stddev, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(mean, stddev);
  for (double& x : t.data_) x = dist(rng);
  return t;
}

double Tensor::at2(std::int64_t r, std::int64_t c) const {
  return data_[static_cast<std::size_t>(r * shape_[1] + c)];
}
double& Tensor::at2(std::int64_t r, std::int64_t c) {
  return data_[static_cast<std::size_t>(r * shape_[1] + c)];
}
double Tensor::at3(std::int64_t i, std::int64_t j, std::int64_t k) const {
  return data_[static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k)];
}
double& Tensor::at3(std::int64_t i, std::int64_t j, std::int64_t k) {
  return data_[static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k)];
}

bool Tensor::all_finite() const {
  // exponent-mask test instead of std::isfinite so the loop vectorizes
  constexpr std::uint64_t kExpMask = 0x7FF0000000000000ULL;
  std::uint64_t any_special = 0;
  for (double x : data_) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    any_special |= static_cast<std::uint64_t>((bits & kExpMask) == kExpMask);
  }
  return any_special == 0;
}

double Tensor::item() const {
  if (size() != 1) throw Error("item() on tensor of shape " + shape_str(shape_));
  return data_[0];
}

}  // namespace advseq::ad
