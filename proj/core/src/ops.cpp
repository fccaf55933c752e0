#include "snn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "snn/error.hpp"

namespace snn::ops {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

ConstMatMap as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMatMap(t.data().data(), static_cast<Eigen::Index>(rows),
                     static_cast<Eigen::Index>(cols));
}

MatMap as_matrix(std::span<double> s, std::size_t rows, std::size_t cols) {
  return MatMap(s.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

ConstMatMap as_matrix(std::span<const double> s, std::size_t rows, std::size_t cols) {
  return ConstMatMap(s.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  }
}

void accumulate(std::span<double> dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Unfold one [c, h, w] image into [c*kh*kw, oh*ow] columns.
void im2col(const double* img, std::size_t c, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, std::size_t stride, std::size_t pad, std::size_t oh, std::size_t ow,
            double* cols) {
  const std::size_t plane = oh * ow;
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj) {
        double* row = cols + ((ci * kh + ki) * kw + kj) * plane;
        for (std::size_t oi = 0; oi < oh; ++oi) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oi * stride + ki) -
                                   static_cast<std::ptrdiff_t>(pad);
          for (std::size_t oj = 0; oj < ow; ++oj) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(oj * stride + kj) -
                                     static_cast<std::ptrdiff_t>(pad);
            const bool inside = y >= 0 && x >= 0 && y < static_cast<std::ptrdiff_t>(h) &&
                                x < static_cast<std::ptrdiff_t>(w);
            row[oi * ow + oj] = inside ? img[(ci * h + static_cast<std::size_t>(y)) * w +
                                             static_cast<std::size_t>(x)]
                                       : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* cols, std::size_t c, std::size_t h, std::size_t w, std::size_t kh,
            std::size_t kw, std::size_t stride, std::size_t pad, std::size_t oh, std::size_t ow,
            double* img) {
  const std::size_t plane = oh * ow;
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj) {
        const double* row = cols + ((ci * kh + ki) * kw + kj) * plane;
        for (std::size_t oi = 0; oi < oh; ++oi) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oi * stride + ki) -
                                   static_cast<std::ptrdiff_t>(pad);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t oj = 0; oj < ow; ++oj) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(oj * stride + kj) -
                                     static_cast<std::ptrdiff_t>(pad);
            if (x < 0 || x >= static_cast<std::ptrdiff_t>(w)) continue;
            img[(ci * h + static_cast<std::size_t>(y)) * w + static_cast<std::size_t>(x)] +=
                row[oi * ow + oj];
          }
        }
      }
    }
  }
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw DimensionError("matmul: cannot multiply " + shape_to_string(sa) + " by " +
                         shape_to_string(sb));
  }
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  Tensor out(Shape{m, n});
  as_matrix(out.data(), m, n).noalias() = as_matrix(a.value(), m, k) * as_matrix(b.value(), k, n);

  return a.tape().record(std::move(out), {a, b}, [m, k, n](BackwardContext& ctx) {
    auto g = as_matrix(ctx.out_grad(), m, n);
    if (ctx.needs_grad(0)) {
      as_matrix(ctx.input_grad(0), m, k).noalias() += g * as_matrix(ctx.input(1), k, n).transpose();
    }
    if (ctx.needs_grad(1)) {
      as_matrix(ctx.input_grad(1), k, n).noalias() += as_matrix(ctx.input(0), m, k).transpose() * g;
    }
  });
}

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride,
                             std::size_t padding) {
  if (stride == 0) throw DimensionError("conv2d: stride must be positive");
  if (kernel > in + 2 * padding) {
    throw DimensionError("conv2d: kernel size " + std::to_string(kernel) +
                         " exceeds padded input size " + std::to_string(in + 2 * padding));
  }
  return (in + 2 * padding - kernel) / stride + 1;
}

Var conv2d(const Var& input, const Var& kernels, std::size_t stride, std::size_t padding) {
  const Shape& si = input.shape();
  const Shape& sk = kernels.shape();
  if ((si.size() != 3 && si.size() != 4) || sk.size() != 4) {
    throw DimensionError("conv2d: expected [c,h,w] or [n,c,h,w] input and [o,c,kh,kw] kernels, got " +
                         shape_to_string(si) + " and " + shape_to_string(sk));
  }
  const bool batched = si.size() == 4;
  const std::size_t batch = batched ? si[0] : 1;
  const std::size_t c = si[si.size() - 3], h = si[si.size() - 2], w = si[si.size() - 1];
  const std::size_t oc = sk[0], kh = sk[2], kw = sk[3];
  if (sk[1] != c) {
    throw DimensionError("conv2d: input channels " + shape_to_string(si) +
                         " do not match kernels " + shape_to_string(sk));
  }
  const std::size_t oh = conv_output_size(h, kh, stride, padding);
  const std::size_t ow = conv_output_size(w, kw, stride, padding);
  const std::size_t patch = c * kh * kw;
  const std::size_t plane = oh * ow;

  Shape out_shape = batched ? Shape{batch, oc, oh, ow} : Shape{oc, oh, ow};
  Tensor out(out_shape);
  std::vector<double> cols(patch * plane);
  auto kmat = as_matrix(kernels.value(), oc, patch);
  for (std::size_t b = 0; b < batch; ++b) {
    im2col(input.value().data().data() + b * c * h * w, c, h, w, kh, kw, stride, padding, oh, ow,
           cols.data());
    as_matrix(out.data().subspan(b * oc * plane, oc * plane), oc, plane).noalias() =
        kmat * as_matrix(std::span<const double>(cols), patch, plane);
  }

  return input.tape().record(
      std::move(out), {input, kernels},
      [=](BackwardContext& ctx) {
        std::vector<double> cols_buf(patch * plane);
        std::vector<double> dcols(patch * plane);
        auto k = as_matrix(ctx.input(1), oc, patch);
        for (std::size_t b = 0; b < batch; ++b) {
          auto g = as_matrix(ctx.out_grad().subspan(b * oc * plane, oc * plane), oc, plane);
          if (ctx.needs_grad(1)) {
            im2col(ctx.input(0).data().data() + b * c * h * w, c, h, w, kh, kw, stride, padding,
                   oh, ow, cols_buf.data());
            as_matrix(ctx.input_grad(1), oc, patch).noalias() +=
                g * as_matrix(std::span<const double>(cols_buf), patch, plane).transpose();
          }
          if (ctx.needs_grad(0)) {
            as_matrix(std::span<double>(dcols), patch, plane).noalias() = k.transpose() * g;
            col2im(dcols.data(), c, h, w, kh, kw, stride, padding, oh, ow,
                   ctx.input_grad(0).data() + b * c * h * w);
          }
        }
      });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return a.tape().record(std::move(out), {a, b}, [](BackwardContext& ctx) {
    if (ctx.needs_grad(0)) accumulate(ctx.input_grad(0), ctx.out_grad());
    if (ctx.needs_grad(1)) accumulate(ctx.input_grad(1), ctx.out_grad());
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return a.tape().record(std::move(out), {a, b}, [](BackwardContext& ctx) {
    if (ctx.needs_grad(0)) accumulate(ctx.input_grad(0), ctx.out_grad());
    if (ctx.needs_grad(1)) {
      auto dst = ctx.input_grad(1);
      auto g = ctx.out_grad();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  auto o = out.data();
  auto bv = b.value().data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return a.tape().record(std::move(out), {a, b}, [](BackwardContext& ctx) {
    auto g = ctx.out_grad();
    if (ctx.needs_grad(0)) {
      auto dst = ctx.input_grad(0);
      auto other = ctx.input(1).data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * other[i];
    }
    if (ctx.needs_grad(1)) {
      auto dst = ctx.input_grad(1);
      auto other = ctx.input(0).data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * other[i];
    }
  });
}

Var scale(const Var& a, double factor) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= factor;
  return a.tape().record(std::move(out), {a}, [factor](BackwardContext& ctx) {
    auto dst = ctx.input_grad(0);
    auto g = ctx.out_grad();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * factor;
  });
}

Var add_scalar(const Var& a, double offset) {
  Tensor out = a.value();
  for (double& v : out.data()) v += offset;
  return a.tape().record(std::move(out), {a}, [](BackwardContext& ctx) {
    accumulate(ctx.input_grad(0), ctx.out_grad());
  });
}

Var add_row_vector(const Var& matrix, const Var& row) {
  const Shape& sm = matrix.shape();
  if (sm.size() != 2 || row.shape() != Shape{sm[1]}) {
    throw DimensionError("add_row_vector: cannot add " + shape_to_string(row.shape()) + " to " +
                         shape_to_string(sm));
  }
  const std::size_t m = sm[0], n = sm[1];
  Tensor out = matrix.value();
  auto o = out.data();
  auto r = row.value().data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) o[i * n + j] += r[j];
  return matrix.tape().record(std::move(out), {matrix, row}, [m, n](BackwardContext& ctx) {
    auto g = ctx.out_grad();
    if (ctx.needs_grad(0)) accumulate(ctx.input_grad(0), g);
    if (ctx.needs_grad(1)) {
      auto dst = ctx.input_grad(1);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) dst[j] += g[i * n + j];
    }
  });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return a.tape().record(std::move(out), {a}, [](BackwardContext& ctx) {
    accumulate(ctx.input_grad(0), ctx.out_grad());
  });
}

Var stack(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("stack: no inputs");
  std::vector<Tensor> values;
  values.reserve(parts.size());
  for (const Var& p : parts) values.push_back(p.value());
  Tensor out = snn::stack(values);
  const std::size_t chunk = values.front().size();
  return parts.front().tape().record(
      std::move(out), std::vector<Var>(parts.begin(), parts.end()), [chunk](BackwardContext& ctx) {
        auto g = ctx.out_grad();
        for (std::size_t k = 0; k * chunk < g.size(); ++k) {
          if (ctx.needs_grad(k)) accumulate(ctx.input_grad(k), g.subspan(k * chunk, chunk));
        }
      });
}

Var sum(const Var& a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return a.tape().record(Tensor::scalar(total), {a}, [](BackwardContext& ctx) {
    const double g = ctx.out_grad()[0];
    for (double& d : ctx.input_grad(0)) d += g;
  });
}

Var mean_over_axis(const Var& a, std::size_t axis) {
  const Shape& s = a.shape();
  if (axis >= s.size()) {
    throw DimensionError("mean_over_axis: axis " + std::to_string(axis) +
                         " out of range for shape " + shape_to_string(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];

  Shape out_shape = s;
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor out(out_shape);
  auto src = a.value().data();
  auto dst = out.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t k = 0; k < len; ++k) {
      const double* row = src.data() + (o * len + k) * inner;
      double* acc = dst.data() + o * inner;
      for (std::size_t i = 0; i < inner; ++i) acc[i] += row[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(len);
  for (double& v : dst) v *= inv;

  return a.tape().record(std::move(out), {a}, [outer, inner, len, inv](BackwardContext& ctx) {
    auto g = ctx.out_grad();
    auto d = ctx.input_grad(0);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t k = 0; k < len; ++k)
        for (std::size_t i = 0; i < inner; ++i)
          d[(o * len + k) * inner + i] += g[o * inner + i] * inv;
  });
}

Var mse_loss(const Var& pred, const Var& target) {
  require_same_shape(pred, target, "mse_loss");
  auto p = pred.value().data();
  auto t = target.value().data();
  const std::size_t n = p.size();
  if (n == 0) throw DimensionError("mse_loss: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = p[i] - t[i];
    acc += d * d;
  }
  return pred.tape().record(
      Tensor::scalar(acc / static_cast<double>(n)), {pred, target}, [n](BackwardContext& ctx) {
        const double g = ctx.out_grad()[0];
        auto pv = ctx.input(0).data();
        auto tv = ctx.input(1).data();
        const double k = 2.0 * g / static_cast<double>(n);
        if (ctx.needs_grad(0)) {
          auto d = ctx.input_grad(0);
          for (std::size_t i = 0; i < n; ++i) d[i] += k * (pv[i] - tv[i]);
        }
        if (ctx.needs_grad(1)) {
          auto d = ctx.input_grad(1);
          for (std::size_t i = 0; i < n; ++i) d[i] -= k * (pv[i] - tv[i]);
        }
      });
}

Var cross_entropy_loss(const Var& logits, std::span<const std::size_t> labels) {
  const Shape& s = logits.shape();
  if (s.size() != 2 || s[0] != labels.size()) {
    throw DimensionError("cross_entropy_loss: logits " + shape_to_string(s) + " vs " +
                         std::to_string(labels.size()) + " labels");
  }
  const std::size_t batch = s[0], classes = s[1];
  if (batch == 0) throw DimensionError("cross_entropy_loss: empty batch");
  for (std::size_t label : labels) {
    if (label >= classes) {
      throw DomainError("cross_entropy_loss: label " + std::to_string(label) +
                        " out of range for " + std::to_string(classes) + " classes");
    }
  }
  auto z = logits.value().data();
  std::vector<double> probs(batch * classes);
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const double* row = z.data() + b * classes;
    const double mx = *std::max_element(row, row + classes);
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) denom += std::exp(row[c] - mx);
    const double log_denom = std::log(denom);
    for (std::size_t c = 0; c < classes; ++c) {
      probs[b * classes + c] = std::exp(row[c] - mx - log_denom);
    }
    loss -= row[labels[b]] - mx - log_denom;
  }
  loss /= static_cast<double>(batch);

  std::vector<std::size_t> label_copy(labels.begin(), labels.end());
  return logits.tape().record(
      Tensor::scalar(loss), {logits},
      [probs = std::move(probs), label_copy = std::move(label_copy), batch,
       classes](BackwardContext& ctx) {
        const double g = ctx.out_grad()[0] / static_cast<double>(batch);
        auto d = ctx.input_grad(0);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t c = 0; c < classes; ++c) {
            const double onehot = c == label_copy[b] ? 1.0 : 0.0;
            d[b * classes + c] += g * (probs[b * classes + c] - onehot);
          }
        }
      });
}

}  // namespace snn::ops
