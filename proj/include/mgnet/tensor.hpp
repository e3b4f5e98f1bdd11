#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mgnet {

/// Extents in row-major order. Feature maps are [channels, depth, height,
/// width]; convolution kernels are [out_ch, in_ch, kd, kh, kw].
using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct TensorStorage {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty when absent
  bool requires_grad = false;
};
}  // namespace detail

// Handle to a dense float32 array plus an optional gradient buffer. Copies
// share storage; use clone() for a deep copy. Values are treated as
// immutable once the tensor has been consumed by a Graph operation.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<float> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, float value);
  static Tensor scalar(float value) { return Tensor({1}, {value}); }

  bool defined() const { return static_cast<bool>(storage_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const { return shape().at(axis); }
  std::size_t numel() const;

  std::span<const float> data() const;
  std::span<float> mutable_data();
  float item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on = true);

  bool has_grad() const;
  std::span<const float> grad() const;
  std::span<float> mutable_grad();
  /// Allocates (or resets) the gradient buffer to zeros.
  void zero_grad();
  /// Drops the gradient buffer.
  void clear_grad();

  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return storage_ == other.storage_; }
  detail::TensorStorage* storage() const { return storage_.get(); }

 private:
  std::shared_ptr<detail::TensorStorage> storage_;
};

/// Bitwise comparison of shape and values.
bool bitwise_equal(const Tensor& a, const Tensor& b);

}  // namespace mgnet
