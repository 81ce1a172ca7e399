#include "oncf/tensor.hpp"

#include <algorithm>
#include <string>

#include "oncf/error.hpp"

namespace oncf {

namespace {

std::string shape_str(const Tensor3& t) {
  return std::to_string(t.height()) + "x" + std::to_string(t.width()) + "x" + std::to_string(t.channels());
}

}  // namespace

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("Mat: " + std::to_string(data_.size()) + " values for " + std::to_string(rows_) +
                         "x" + std::to_string(cols_));
  }
}

Mat outer(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("outer: length " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  const std::size_t n = a.size();
  Mat out(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = out.row(r);
    const double ar = a[r];
    for (std::size_t c = 0; c < n; ++c) row[c] = ar * b[c];
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("dot: length " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

Vec relu(const Vec& v) {
  Vec out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = v[k] > 0.0 ? v[k] : 0.0;
  return out;
}

Vec relu_backward(const Vec& pre, const Vec& d_out) {
  if (pre.size() != d_out.size()) throw DimensionError("relu_backward: length mismatch");
  Vec out(pre.size());
  for (std::size_t k = 0; k < pre.size(); ++k) out[k] = pre[k] > 0.0 ? d_out[k] : 0.0;
  return out;
}

Tensor3 as_feature_map(const Mat& m) {
  Tensor3 t(m.rows(), m.cols(), 1);
  std::copy(m.values().begin(), m.values().end(), t.values().begin());
  return t;
}

ConvOutput conv2x2s2_forward(const Tensor3& input, const Tensor4& kernel, double bias) {
  const std::size_t h = input.height();
  const std::size_t cin = input.channels();
  if (h < 2 || h % 2 != 0 || input.width() != h) {
    throw DimensionError("conv2x2s2_forward: input " + shape_str(input) + " is not an even square map");
  }
  if (kernel.kernel_height() != 2 || kernel.kernel_width() != 2) {
    throw DimensionError("conv2x2s2_forward: kernel must be 2x2");
  }
  if (kernel.in_channels() != cin) {
    throw DimensionError("conv2x2s2_forward: kernel expects " + std::to_string(kernel.in_channels()) +
                         " input channels, map has " + std::to_string(cin));
  }
  const std::size_t s = h / 2;
  const std::size_t cout = kernel.out_channels();
  const auto k = kernel.values();

  ConvOutput out{Tensor3(s, s, cout, bias), Tensor3(s, s, cout)};
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      auto o = out.pre.pixel(i, j);
      for (std::size_t a = 0; a < 2; ++a) {
        for (std::size_t b = 0; b < 2; ++b) {
          const auto x = input.pixel(2 * i + a, 2 * j + b);
          const double* kab = k.data() + (a * 2 + b) * cin * cout;
          for (std::size_t d = 0; d < cin; ++d) {
            const double xv = x[d];
            if (xv == 0.0) continue;
            const double* kd = kab + d * cout;
            for (std::size_t c = 0; c < cout; ++c) o[c] += xv * kd[c];
          }
        }
      }
      auto act = out.act.pixel(i, j);
      for (std::size_t c = 0; c < cout; ++c) act[c] = o[c] > 0.0 ? o[c] : 0.0;
    }
  }
  return out;
}

ConvGrads conv2x2s2_backward(const Tensor3& input, const Tensor4& kernel, const Tensor3& pre,
                             const Tensor3& d_act) {
  const std::size_t h = input.height();
  const std::size_t cin = input.channels();
  const std::size_t cout = kernel.out_channels();
  const std::size_t s = h / 2;
  if (h % 2 != 0 || input.width() != h || kernel.in_channels() != cin || kernel.kernel_height() != 2 ||
      kernel.kernel_width() != 2) {
    throw DimensionError("conv2x2s2_backward: input " + shape_str(input) + " inconsistent with kernel");
  }
  if (pre.height() != s || pre.width() != s || pre.channels() != cout || d_act.height() != s ||
      d_act.width() != s || d_act.channels() != cout) {
    throw DimensionError("conv2x2s2_backward: output cotangent " + shape_str(d_act) + " / pre " +
                         shape_str(pre) + " inconsistent with forward shape");
  }

  ConvGrads g{Tensor3(h, h, cin), Tensor4(2, 2, cin, cout), 0.0};
  const auto k = kernel.values();
  auto dk = g.d_kernel.values();
  std::vector<double> d_pre(cout);

  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      const auto p = pre.pixel(i, j);
      const auto da = d_act.pixel(i, j);
      bool any = false;
      for (std::size_t c = 0; c < cout; ++c) {
        d_pre[c] = p[c] > 0.0 ? da[c] : 0.0;
        g.d_bias += d_pre[c];
        any = any || d_pre[c] != 0.0;
      }
      if (!any) continue;
      for (std::size_t a = 0; a < 2; ++a) {
        for (std::size_t b = 0; b < 2; ++b) {
          const auto x = input.pixel(2 * i + a, 2 * j + b);
          auto dx = g.d_input.pixel(2 * i + a, 2 * j + b);
          const std::size_t base = (a * 2 + b) * cin * cout;
          for (std::size_t d = 0; d < cin; ++d) {
            const double* kd = k.data() + base + d * cout;
            double* dkd = dk.data() + base + d * cout;
            const double xv = x[d];
            double acc = 0.0;
            for (std::size_t c = 0; c < cout; ++c) {
              acc += d_pre[c] * kd[c];
              dkd[c] += xv * d_pre[c];
            }
            dx[d] += acc;
          }
        }
      }
    }
  }
  return g;
}

Vec dense_forward(const Vec& x, const Mat& W, const Vec& b) {
  if (W.cols() != x.size() || W.rows() != b.size()) {
    throw DimensionError("dense_forward: W is " + std::to_string(W.rows()) + "x" + std::to_string(W.cols()) +
                         ", x has " + std::to_string(x.size()) + ", b has " + std::to_string(b.size()));
  }
  Vec y(W.rows());
  for (std::size_t r = 0; r < W.rows(); ++r) y[r] = b[r] + dot(W.row(r), x.values());
  return y;
}

DenseGrads dense_backward(const Vec& x, const Mat& W, const Vec& d_out) {
  if (W.cols() != x.size() || W.rows() != d_out.size()) {
    throw DimensionError("dense_backward: shape mismatch");
  }
  DenseGrads g{Vec(x.size()), Mat(W.rows(), W.cols()), d_out};
  for (std::size_t r = 0; r < W.rows(); ++r) {
    const double dr = d_out[r];
    if (dr == 0.0) continue;
    const auto wr = W.row(r);
    auto gr = g.d_W.row(r);
    for (std::size_t c = 0; c < x.size(); ++c) {
      g.d_x[c] += dr * wr[c];
      gr[c] = dr * x[c];
    }
  }
  return g;
}

}  // namespace oncf
