#include "mgnet/tensor.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>

#include "mgnet/errors.hpp"

namespace mgnet {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one axis");
  for (std::size_t e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  }
}

detail::TensorStorage& require(const std::shared_ptr<detail::TensorStorage>& s) {
  if (!s) throw StateError("use of an undefined tensor");
  return *s;
}

}  // namespace

Tensor::Tensor(Shape shape) {
  check_shape(shape);
  storage_ = std::make_shared<detail::TensorStorage>();
  storage_->data.assign(shape_numel(shape), 0.0f);
  storage_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<float> values) {
  check_shape(shape);
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("shape " + shape_str(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  storage_ = std::make_shared<detail::TensorStorage>();
  storage_->shape = std::move(shape);
  storage_->data = std::move(values);
}

Tensor Tensor::full(Shape shape, float value) {
  Tensor t(std::move(shape));
  std::fill(t.storage_->data.begin(), t.storage_->data.end(), value);
  return t;
}

const Shape& Tensor::shape() const { return require(storage_).shape; }

std::size_t Tensor::numel() const { return require(storage_).data.size(); }

std::span<const float> Tensor::data() const { return require(storage_).data; }

std::span<float> Tensor::mutable_data() { return require(storage_).data; }

float Tensor::item() const {
  const auto& s = require(storage_);
  if (s.data.size() != 1) {
    throw ShapeError("item() needs a single-element tensor, got " + shape_str(s.shape));
  }
  return s.data[0];
}

bool Tensor::requires_grad() const { return storage_ && storage_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  require(storage_).requires_grad = on;
  return *this;
}

bool Tensor::has_grad() const { return storage_ && !storage_->grad.empty(); }

std::span<const float> Tensor::grad() const {
  if (!has_grad()) throw StateError("tensor " + shape_str(shape()) + " has no gradient");
  return storage_->grad;
}

std::span<float> Tensor::mutable_grad() {
  if (!has_grad()) throw StateError("tensor " + shape_str(shape()) + " has no gradient");
  return storage_->grad;
}

void Tensor::zero_grad() {
  auto& s = require(storage_);
  s.grad.assign(s.data.size(), 0.0f);
}

void Tensor::clear_grad() {
  auto& s = require(storage_);
  s.grad.clear();
  s.grad.shrink_to_fit();
}

Tensor Tensor::clone() const {
  const auto& s = require(storage_);
  Tensor t(s.shape, s.data);
  t.storage_->requires_grad = s.requires_grad;
  return t;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(float)) == 0;
}

}  // namespace mgnet
