#pragma once

#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace nams::ad {

/// 64-byte aligned storage. Vectorized kernels peel differently depending on
/// the buffer address, so unaligned buffers make results drift in the last
/// bit between otherwise identical runs.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using Storage = std::vector<double, AlignedAllocator<double>>;

/// Dense row-major tensor of doubles.
///
/// Most of the library works with rank-2 tensors laid out as
/// [batch, features]; higher ranks are only stored and serialized.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  static Tensor row(std::vector<double> values);
  static Tensor scalar(double value);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  /// First dimension of a rank-2 tensor.
  std::size_t rows() const {
    if (shape_.size() != 2) rank_error("rows");
    return shape_[0];
  }
  /// Second dimension of a rank-2 tensor.
  std::size_t cols() const {
    if (shape_.size() != 2) rank_error("cols");
    return shape_[1];
  }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  Storage& values() { return data_; }
  const Storage& values() const { return data_; }
  std::vector<double> to_vector() const { return {data_.begin(), data_.end()}; }
  std::span<const double> row_span(std::size_t r) const;

  double item() const;
  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_string() const;

  void fill(double value);

 private:
  [[noreturn]] void rank_error(const char* what) const;

  std::vector<std::size_t> shape_;
  Storage data_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);

}  // namespace nams::ad
