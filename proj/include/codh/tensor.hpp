#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstring>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace codh {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

/// Raised when tensor extents do not satisfy an operation's contract. The
/// message always names the offending axis or quantity.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

/// Number of elements described by `shape`. Rank 0 is a scalar (one element).
inline Index shape_size(const Shape& shape) {
  Index n = 1;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] <= 0) {
      throw ShapeError("axis " + std::to_string(i) + " of shape " + shape_string(shape) +
                       " must be positive");
    }
    n *= shape[i];
  }
  return n;
}

/// Dense row-major n-dimensional array backed by an Eigen column vector.
///
/// Value semantics throughout: copies are deep and no operation mutates its
/// inputs. The default-constructed tensor is a rank-0 zero.
template <typename Scalar_>
class Tensor {
 public:
  using Scalar = Scalar_;
  using Storage = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowMajorMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMajorMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMajorMatrix>;

  Tensor() : data_(Storage::Zero(1)) {}

  explicit Tensor(Shape shape, Scalar fill = Scalar(0))
      : shape_(std::move(shape)), data_(Storage::Constant(shape_size(shape_), fill)) {}

  Tensor(Shape shape, std::initializer_list<Scalar> values) : shape_(std::move(shape)) {
    const Index n = shape_size(shape_);
    if (static_cast<Index>(values.size()) != n) {
      throw ShapeError("initializer has " + std::to_string(values.size()) +
                       " values but shape " + shape_string(shape_) + " needs " +
                       std::to_string(n));
    }
    data_.resize(n);
    std::copy(values.begin(), values.end(), data_.data());
  }

  Tensor(Shape shape, Storage values) : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != shape_size(shape_)) {
      throw ShapeError("data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_string(shape_));
    }
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor constant(Shape shape, Scalar value) { return Tensor(std::move(shape), value); }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const { return data_.size(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  std::span<Scalar> span() { return {data_.data(), static_cast<std::size_t>(data_.size())}; }
  std::span<const Scalar> span() const {
    return {data_.data(), static_cast<std::size_t>(data_.size())};
  }

  Storage& values() { return data_; }
  const Storage& values() const { return data_; }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  template <typename... Ix>
  Scalar& operator()(Ix... ix) {
    return data_[offset({static_cast<Index>(ix)...})];
  }
  template <typename... Ix>
  Scalar operator()(Ix... ix) const {
    return data_[offset({static_cast<Index>(ix)...})];
  }

  /// Layout-preserving reinterpretation; element count must be unchanged.
  Tensor reshaped(Shape shape) const {
    if (shape_size(shape) != size()) {
      throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    return Tensor(std::move(shape), data_);
  }

  /// Row-major matrix view over the leading axis and the flattened rest.
  MatrixMap matrix() {
    const Index rows = rank() == 0 ? 1 : shape_.front();
    return MatrixMap(data_.data(), rows, size() / rows);
  }
  ConstMatrixMap matrix() const {
    const Index rows = rank() == 0 ? 1 : shape_.front();
    return ConstMatrixMap(data_.data(), rows, size() / rows);
  }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

  bool all_finite() const { return data_.allFinite(); }

  Tensor& operator+=(const Tensor& other) {
    require_same_shape(other, "+=");
    data_ += other.data_;
    return *this;
  }

  friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }

  friend Tensor operator-(const Tensor& a, const Tensor& b) {
    a.require_same_shape(b, "-");
    return Tensor(a.shape_, Storage(a.data_ - b.data_));
  }

  friend Tensor operator*(Scalar s, const Tensor& a) { return Tensor(a.shape_, Storage(s * a.data_)); }

 private:
  Index offset(std::initializer_list<Index> ix) const {
    if (static_cast<Index>(ix.size()) != rank()) {
      throw ShapeError("index of rank " + std::to_string(ix.size()) + " into tensor " +
                       shape_string(shape_));
    }
    Index off = 0;
    std::size_t axis = 0;
    for (Index i : ix) off = off * shape_[axis++] + i;
    return off;
  }

  void require_same_shape(const Tensor& other, const char* op) const {
    if (shape_ != other.shape_) {
      throw ShapeError(std::string("operands of ") + op + " disagree: " + shape_string(shape_) +
                       " vs " + shape_string(other.shape_));
    }
  }

  Shape shape_;
  Storage data_;
};

using Tensord = Tensor<double>;
using Tensorf = Tensor<float>;

/// Same shape and identical bytes (distinguishes +0 from -0 and NaN payloads).
template <typename Scalar>
bool bit_equal(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data(), b.data(), sizeof(Scalar) * static_cast<std::size_t>(a.size())) == 0;
}

template <typename Scalar>
Scalar max_abs_diff(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("max_abs_diff on " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
  if (a.size() == 0) return Scalar(0);
  return (a.values() - b.values()).cwiseAbs().maxCoeff();
}

/// Left-to-right sum, independent of vectorization width.
template <typename Scalar>
Scalar ordered_sum(const Tensor<Scalar>& x) {
  Scalar acc = 0;
  for (Index i = 0; i < x.size(); ++i) acc += x[i];
  return acc;
}

}  // namespace codh
