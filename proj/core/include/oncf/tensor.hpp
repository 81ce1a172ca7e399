#pragma once

// Dense float64 containers and the handful of forward/backward kernels the
// models need: outer/dot products, a fixed 2x2 stride-2 convolution, ReLU and
// fully connected layers. Every kernel is pure; backward passes are the exact
// adjoints of their forward maps.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace oncf {

class Vec {
 public:
  Vec() = default;
  explicit Vec(std::size_t n, double fill = 0.0) : data_(n, fill) {}
  Vec(std::initializer_list<double> values) : data_(values) {}
  explicit Vec(std::vector<double> values) : data_(std::move(values)) {}

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t k) { return data_[k]; }
  double operator[](std::size_t k) const { return data_[k]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const std::vector<double>& raw() const noexcept { return data_; }

  bool operator==(const Vec&) const = default;

 private:
  std::vector<double> data_;
};

// Row-major matrix.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Mat(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool operator==(const Mat&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Feature maps indexed (row, col, channel), channel innermost.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
      : h_(h), w_(w), c_(c), data_(h * w * c, fill) {}

  std::size_t height() const noexcept { return h_; }
  std::size_t width() const noexcept { return w_; }
  std::size_t channels() const noexcept { return c_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * w_ + j) * c_ + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * w_ + j) * c_ + k];
  }
  // All channels at spatial position (i, j).
  std::span<double> pixel(std::size_t i, std::size_t j) { return {data_.data() + (i * w_ + j) * c_, c_}; }
  std::span<const double> pixel(std::size_t i, std::size_t j) const {
    return {data_.data() + (i * w_ + j) * c_, c_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool operator==(const Tensor3&) const = default;

 private:
  std::size_t h_ = 0;
  std::size_t w_ = 0;
  std::size_t c_ = 0;
  std::vector<double> data_;
};

// Convolution kernel indexed (kernel row, kernel col, input channel, output channel).
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(std::size_t kh, std::size_t kw, std::size_t cin, std::size_t cout, double fill = 0.0)
      : kh_(kh), kw_(kw), cin_(cin), cout_(cout), data_(kh * kw * cin * cout, fill) {}

  std::size_t kernel_height() const noexcept { return kh_; }
  std::size_t kernel_width() const noexcept { return kw_; }
  std::size_t in_channels() const noexcept { return cin_; }
  std::size_t out_channels() const noexcept { return cout_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t a, std::size_t b, std::size_t d, std::size_t c) {
    return data_[((a * kw_ + b) * cin_ + d) * cout_ + c];
  }
  double operator()(std::size_t a, std::size_t b, std::size_t d, std::size_t c) const {
    return data_[((a * kw_ + b) * cin_ + d) * cout_ + c];
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool operator==(const Tensor4&) const = default;

 private:
  std::size_t kh_ = 0;
  std::size_t kw_ = 0;
  std::size_t cin_ = 0;
  std::size_t cout_ = 0;
  std::vector<double> data_;
};

Mat outer(std::span<const double> a, std::span<const double> b);
inline Mat outer(const Vec& a, const Vec& b) { return outer(a.values(), b.values()); }

double dot(std::span<const double> a, std::span<const double> b);
inline double dot(const Vec& a, const Vec& b) { return dot(a.values(), b.values()); }

Vec relu(const Vec& v);
// Passes d_out where pre > 0; the subgradient at exactly 0 is 0.
Vec relu_backward(const Vec& pre, const Vec& d_out);

// View a K x K matrix as a K x K x 1 feature map.
Tensor3 as_feature_map(const Mat& m);

struct ConvOutput {
  Tensor3 pre;  // bias + contraction, before ReLU
  Tensor3 act;  // ReLU(pre)
};

// 2x2 kernel, stride 2, no padding, one scalar bias shared by all output channels.
ConvOutput conv2x2s2_forward(const Tensor3& input, const Tensor4& kernel, double bias);

struct ConvGrads {
  Tensor3 d_input;
  Tensor4 d_kernel;
  double d_bias = 0.0;
};

ConvGrads conv2x2s2_backward(const Tensor3& input, const Tensor4& kernel, const Tensor3& pre,
                             const Tensor3& d_act);

// y = W x + b, W is m x n.
Vec dense_forward(const Vec& x, const Mat& W, const Vec& b);

struct DenseGrads {
  Vec d_x;
  Mat d_W;
  Vec d_b;
};

DenseGrads dense_backward(const Vec& x, const Mat& W, const Vec& d_out);

}  // namespace oncf
