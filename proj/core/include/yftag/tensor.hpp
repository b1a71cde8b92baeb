#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace yftag {

enum class Precision { f32, f64 };

using Shape = std::vector<int>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array. Training runs in f32; f64 exists for gradient
// verification.
template <typename T>
class BasicTensor {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);

 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0));
  BasicTensor(Shape shape, std::vector<T> data);

  static constexpr Precision precision() {
    return std::is_same_v<T, float> ? Precision::f32 : Precision::f64;
  }

  const Shape& shape() const { return shape_; }
  int dim(std::size_t i) const { return shape_.at(i); }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  T* raw() { return data_.data(); }
  const T* raw() const { return data_.data(); }
  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  // Same data, new shape of equal element count.
  BasicTensor reshaped(Shape shape) const&;
  BasicTensor reshaped(Shape shape) &&;

  void fill(T v);
  bool all_finite() const;
  // Throws NumericError naming `op` if any element is NaN or infinite.
  void check_finite(std::string_view op) const;

  template <typename U>
  BasicTensor<U> cast() const {
    return BasicTensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

// A learnable tensor with its accumulated gradient and SGD momentum buffer.
// grad and momentum are allocated on first use so that large networks can
// be built and inspected without tripling their memory.
template <typename T>
struct BasicParameter {
  BasicParameter() = default;
  BasicParameter(std::string name, BasicTensor<T> init, bool decays)
      : name(std::move(name)), value(std::move(init)), weight_decay(decays) {}

  void ensure_buffers() {
    if (grad.shape() != value.shape()) grad = BasicTensor<T>(value.shape());
    if (momentum.shape() != value.shape()) {
      momentum = BasicTensor<T>(value.shape());
    }
  }

  void zero_grad() {
    if (grad.shape() != value.shape()) {
      grad = BasicTensor<T>(value.shape());
    } else {
      grad.fill(T(0));
    }
  }

  std::string name;
  BasicTensor<T> value;
  BasicTensor<T> grad;
  BasicTensor<T> momentum;
  // Conv and fc weights decay; batchnorm affine terms do not.
  bool weight_decay = true;
};

using Parameter = BasicParameter<float>;
using ParameterD = BasicParameter<double>;

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

}  // namespace yftag
