#pragma once

// Forward operators and their vector-Jacobian products.
//
// Reductions use a fixed accumulation order so results do not depend on
// blocking, vector width or thread count. Convolutions are cross-correlations
// with zero padding.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "codh/detail/ordered_gemm.hpp"
#include "codh/tensor.hpp"

namespace codh {

struct ConvSpec {
  Index kernel = 1;
  Index stride = 1;
  Index padding = 0;
  Index in_channels = 1;
  Index out_channels = 1;
  bool grouped = false;  // groups == in_channels (depthwise)
  bool bias = false;

  Index weight_in_channels() const { return grouped ? 1 : in_channels; }
};

inline void validate(const ConvSpec& spec) {
  if (spec.kernel <= 0) throw ShapeError("conv kernel must be positive");
  if (spec.stride <= 0) throw ShapeError("conv stride must be positive");
  if (spec.padding < 0) throw ShapeError("conv padding must be non-negative");
  if (spec.in_channels <= 0 || spec.out_channels <= 0) {
    throw ShapeError("conv channel counts must be positive");
  }
  if (spec.grouped && spec.in_channels != spec.out_channels) {
    throw ShapeError("grouped conv requires in_channels == out_channels (" +
                     std::to_string(spec.in_channels) + " vs " +
                     std::to_string(spec.out_channels) + ")");
  }
}

/// floor((length + 2*padding - kernel) / stride) + 1; throws when empty.
inline Index conv_output_length(Index length, Index kernel, Index stride, Index padding) {
  const Index span = length + 2 * padding - kernel;
  if (span < 0) {
    throw ShapeError("conv window " + std::to_string(kernel) + " exceeds padded extent " +
                     std::to_string(length + 2 * padding));
  }
  return span / stride + 1;
}

template <typename Scalar>
struct ConvGrads {
  Tensor<Scalar> dx;
  Tensor<Scalar> dw;
  Tensor<Scalar> db;  // rank-0 placeholder when the conv has no bias
};

namespace detail {

inline void expect_axis(const Shape& shape, std::size_t axis, Index expected, const char* op,
                        const char* axis_name) {
  if (shape[axis] != expected) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " (" + axis_name +
                     ") is " + std::to_string(shape[axis]) + ", expected " +
                     std::to_string(expected));
  }
}

inline void expect_shape(const Shape& actual, const Shape& expected, const char* op,
                         const char* what) {
  if (actual != expected) {
    throw ShapeError(std::string(op) + ": " + what + " has shape " + shape_string(actual) +
                     ", expected " + shape_string(expected));
  }
}

// Normalizes an optionally batched input to (batch, channels, spatial...).
struct BatchView {
  Index batch;
  bool batched;
};

inline BatchView batch_view(const Shape& shape, Index unbatched_rank, const char* op) {
  const auto rank = static_cast<Index>(shape.size());
  if (rank == unbatched_rank) return {1, false};
  if (rank == unbatched_rank + 1) return {shape[0], true};
  throw ShapeError(std::string(op) + ": input rank " + std::to_string(rank) + " not in {" +
                   std::to_string(unbatched_rank) + ", " + std::to_string(unbatched_rank + 1) +
                   "}");
}

// Spatial geometry shared by conv1d (height == 1) and conv2d.
struct ConvGeometry {
  Index in_h, in_w, out_h, out_w, kh, kw;
  Index pad_h, pad_w, stride_h, stride_w;
  Index in_plane() const { return in_h * in_w; }
  Index out_plane() const { return out_h * out_w; }
  Index taps() const { return kh * kw; }
};

template <typename Scalar>
Tensor<Scalar> conv_forward(const Tensor<Scalar>& x, const ConvSpec& spec, const ConvGeometry& g,
                            const BatchView& bv, const Tensor<Scalar>& w, const Tensor<Scalar>* b,
                            Shape out_shape) {
  Tensor<Scalar> out(std::move(out_shape));
  const Index cin = spec.in_channels, cout = spec.out_channels;
  const Index taps = g.taps();
  const Index plane_out = g.out_plane();
  const Scalar* xd = x.data();
  const Scalar* wd = w.data();
  Scalar* od = out.data();

  auto input_at = [&](Index n, Index c, Index oy, Index ox, Index ky, Index kx) -> Scalar {
    const Index iy = oy * g.stride_h - g.pad_h + ky;
    const Index ix = ox * g.stride_w - g.pad_w + kx;
    if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) return Scalar(0);
    return xd[(n * cin + c) * g.in_plane() + iy * g.in_w + ix];
  };

  if (spec.grouped) {
    for (Index n = 0; n < bv.batch; ++n) {
      for (Index c = 0; c < cout; ++c) {
        for (Index oy = 0; oy < g.out_h; ++oy) {
          for (Index ox = 0; ox < g.out_w; ++ox) {
            Scalar acc = 0;
            for (Index ky = 0; ky < g.kh; ++ky) {
              for (Index kx = 0; kx < g.kw; ++kx) {
                acc += wd[c * taps + ky * g.kw + kx] * input_at(n, c, oy, ox, ky, kx);
              }
            }
            od[(n * cout + c) * plane_out + oy * g.out_w + ox] = acc;
          }
        }
      }
    }
  } else {
    // im2col with rows (n, oy, ox) and columns (ci, ky, kx), then one ordered
    // GEMM against the transposed filter bank.
    const Index depth = cin * taps;
    typename Tensor<Scalar>::RowMajorMatrix wt =
        Eigen::Map<const typename Tensor<Scalar>::RowMajorMatrix>(wd, cout, depth).transpose();
    const Index budget = Index(1) << 20;
    const Index chunk = std::max<Index>(1, budget / std::max<Index>(1, plane_out * depth));
    typename Tensor<Scalar>::RowMajorMatrix cols;
    typename Tensor<Scalar>::RowMajorMatrix prod;
    for (Index n0 = 0; n0 < bv.batch; n0 += chunk) {
      const Index nb = std::min(chunk, bv.batch - n0);
      cols.resize(nb * plane_out, depth);
      for (Index n = 0; n < nb; ++n) {
        for (Index oy = 0; oy < g.out_h; ++oy) {
          for (Index ox = 0; ox < g.out_w; ++ox) {
            Scalar* row = cols.data() + ((n * g.out_h + oy) * g.out_w + ox) * depth;
            for (Index c = 0; c < cin; ++c) {
              for (Index ky = 0; ky < g.kh; ++ky) {
                for (Index kx = 0; kx < g.kw; ++kx) {
                  *row++ = input_at(n0 + n, c, oy, ox, ky, kx);
                }
              }
            }
          }
        }
      }
      prod.resize(nb * plane_out, cout);
      ordered_gemm(nb * plane_out, cout, depth, cols.data(), depth, wt.data(), cout, prod.data(),
                   cout);
      for (Index n = 0; n < nb; ++n) {
        for (Index c = 0; c < cout; ++c) {
          Scalar* dst = od + ((n0 + n) * cout + c) * plane_out;
          for (Index p = 0; p < plane_out; ++p) dst[p] = prod(n * plane_out + p, c);
        }
      }
    }
  }

  if (b != nullptr) {
    const Scalar* bd = b->data();
    for (Index n = 0; n < bv.batch; ++n) {
      for (Index c = 0; c < cout; ++c) {
        Scalar* dst = od + (n * cout + c) * plane_out;
        for (Index p = 0; p < plane_out; ++p) dst[p] += bd[c];
      }
    }
  }
  return out;
}

template <typename Scalar>
ConvGrads<Scalar> conv_backward(const Tensor<Scalar>& x, const ConvSpec& spec,
                                const ConvGeometry& g, const BatchView& bv,
                                const Tensor<Scalar>& w, const Tensor<Scalar>& dy) {
  ConvGrads<Scalar> grads{Tensor<Scalar>(x.shape()), Tensor<Scalar>(w.shape()), Tensor<Scalar>()};
  if (spec.bias) grads.db = Tensor<Scalar>({spec.out_channels});
  const Index cin = spec.in_channels, cout = spec.out_channels;
  const Index wcin = spec.weight_in_channels();
  const Index taps = g.taps();
  const Scalar* xd = x.data();
  const Scalar* wd = w.data();
  const Scalar* gd = dy.data();
  Scalar* dxd = grads.dx.data();
  Scalar* dwd = grads.dw.data();

  for (Index n = 0; n < bv.batch; ++n) {
    for (Index co = 0; co < cout; ++co) {
      for (Index oy = 0; oy < g.out_h; ++oy) {
        for (Index ox = 0; ox < g.out_w; ++ox) {
          const Scalar up = gd[(n * cout + co) * g.out_plane() + oy * g.out_w + ox];
          if (spec.bias) grads.db[co] += up;
          for (Index cw = 0; cw < wcin; ++cw) {
            const Index ci = spec.grouped ? co : cw;
            for (Index ky = 0; ky < g.kh; ++ky) {
              const Index iy = oy * g.stride_h - g.pad_h + ky;
              if (iy < 0 || iy >= g.in_h) continue;
              for (Index kx = 0; kx < g.kw; ++kx) {
                const Index ix = ox * g.stride_w - g.pad_w + kx;
                if (ix < 0 || ix >= g.in_w) continue;
                const Index xi = (n * cin + ci) * g.in_plane() + iy * g.in_w + ix;
                const Index wi = (co * wcin + cw) * taps + ky * g.kw + kx;
                dxd[xi] += wd[wi] * up;
                dwd[wi] += xd[xi] * up;
              }
            }
          }
        }
      }
    }
  }
  return grads;
}

template <typename Scalar>
void check_conv_params(const ConvSpec& spec, const Tensor<Scalar>& w, const Tensor<Scalar>* b,
                       Shape weight_shape, const char* op) {
  validate(spec);
  expect_shape(w.shape(), weight_shape, op, "weight");
  if (spec.bias) {
    if (b == nullptr) throw ShapeError(std::string(op) + ": spec requires a bias tensor");
    expect_shape(b->shape(), {spec.out_channels}, op, "bias");
  } else if (b != nullptr) {
    throw ShapeError(std::string(op) + ": bias given but spec.bias is false");
  }
}

inline ConvGeometry conv1d_geometry(const Shape& xs, const ConvSpec& spec, const BatchView& bv) {
  const Index length = xs[bv.batched ? 2 : 1];
  return {1,      length, 1, conv_output_length(length, spec.kernel, spec.stride, spec.padding),
          1,      spec.kernel, 0, spec.padding, 1, spec.stride};
}

inline ConvGeometry conv2d_geometry(const Shape& xs, const ConvSpec& spec, const BatchView& bv) {
  const std::size_t h_axis = bv.batched ? 2 : 1;
  const Index h = xs[h_axis], w = xs[h_axis + 1];
  return {h,
          w,
          conv_output_length(h, spec.kernel, spec.stride, spec.padding),
          conv_output_length(w, spec.kernel, spec.stride, spec.padding),
          spec.kernel,
          spec.kernel,
          spec.padding,
          spec.padding,
          spec.stride,
          spec.stride};
}

}  // namespace detail

/// 1-D cross-correlation over x of shape [C_in x L] or [N x C_in x L].
/// Weights are [C_out x C_in x k] ([C x 1 x k] when grouped).
template <typename Scalar>
Tensor<Scalar> conv1d(const Tensor<Scalar>& x, const ConvSpec& spec, const Tensor<Scalar>& w,
                      const Tensor<Scalar>* bias = nullptr) {
  const auto bv = detail::batch_view(x.shape(), 2, "conv1d");
  detail::check_conv_params(spec, w, bias, {spec.out_channels, spec.weight_in_channels(), spec.kernel},
                            "conv1d");
  detail::expect_axis(x.shape(), bv.batched ? 1 : 0, spec.in_channels, "conv1d", "channels");
  const auto g = detail::conv1d_geometry(x.shape(), spec, bv);
  Shape out = bv.batched ? Shape{bv.batch, spec.out_channels, g.out_w}
                         : Shape{spec.out_channels, g.out_w};
  return detail::conv_forward(x, spec, g, bv, w, bias, std::move(out));
}

template <typename Scalar>
ConvGrads<Scalar> conv1d_vjp(const Tensor<Scalar>& x, const ConvSpec& spec,
                             const Tensor<Scalar>& w, const Tensor<Scalar>& dy) {
  const auto bv = detail::batch_view(x.shape(), 2, "conv1d_vjp");
  detail::expect_axis(x.shape(), bv.batched ? 1 : 0, spec.in_channels, "conv1d_vjp", "channels");
  const auto g = detail::conv1d_geometry(x.shape(), spec, bv);
  Shape out = bv.batched ? Shape{bv.batch, spec.out_channels, g.out_w}
                         : Shape{spec.out_channels, g.out_w};
  detail::expect_shape(dy.shape(), out, "conv1d_vjp", "upstream");
  return detail::conv_backward(x, spec, g, bv, w, dy);
}

/// 2-D cross-correlation with a square kernel over [C x H x W] or
/// [N x C x H x W]. Weights are [C_out x C_in x k x k] ([C x 1 x k x k] when
/// grouped).
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const ConvSpec& spec, const Tensor<Scalar>& w,
                      const Tensor<Scalar>* bias = nullptr) {
  const auto bv = detail::batch_view(x.shape(), 3, "conv2d");
  detail::check_conv_params(
      spec, w, bias, {spec.out_channels, spec.weight_in_channels(), spec.kernel, spec.kernel},
      "conv2d");
  detail::expect_axis(x.shape(), bv.batched ? 1 : 0, spec.in_channels, "conv2d", "channels");
  const auto g = detail::conv2d_geometry(x.shape(), spec, bv);
  Shape out = bv.batched ? Shape{bv.batch, spec.out_channels, g.out_h, g.out_w}
                         : Shape{spec.out_channels, g.out_h, g.out_w};
  return detail::conv_forward(x, spec, g, bv, w, bias, std::move(out));
}

template <typename Scalar>
ConvGrads<Scalar> conv2d_vjp(const Tensor<Scalar>& x, const ConvSpec& spec,
                             const Tensor<Scalar>& w, const Tensor<Scalar>& dy) {
  const auto bv = detail::batch_view(x.shape(), 3, "conv2d_vjp");
  detail::expect_axis(x.shape(), bv.batched ? 1 : 0, spec.in_channels, "conv2d_vjp", "channels");
  const auto g = detail::conv2d_geometry(x.shape(), spec, bv);
  Shape out = bv.batched ? Shape{bv.batch, spec.out_channels, g.out_h, g.out_w}
                         : Shape{spec.out_channels, g.out_h, g.out_w};
  detail::expect_shape(dy.shape(), out, "conv2d_vjp", "upstream");
  return detail::conv_backward(x, spec, g, bv, w, dy);
}

/// Global average pooling: [C x H x W] -> [C], [N x C x H x W] -> [N x C].
///
/// Each mean is taken as x0 + (sum_i (x_i - x0)) / (H*W), summed left to
/// right, so a spatially constant plane reproduces its value exactly.
template <typename Scalar>
Tensor<Scalar> gap(const Tensor<Scalar>& x) {
  const auto bv = detail::batch_view(x.shape(), 3, "gap");
  const std::size_t c_axis = bv.batched ? 1 : 0;
  const Index channels = x.shape()[c_axis];
  const Index plane = x.shape()[c_axis + 1] * x.shape()[c_axis + 2];
  Tensor<Scalar> out(bv.batched ? Shape{bv.batch, channels} : Shape{channels});
  const Scalar* xd = x.data();
  for (Index i = 0; i < bv.batch * channels; ++i) {
    const Scalar* p = xd + i * plane;
    const Scalar x0 = p[0];
    Scalar acc = 0;
    for (Index j = 0; j < plane; ++j) acc += p[j] - x0;
    out[i] = x0 + acc / static_cast<Scalar>(plane);
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> gap_vjp(const Shape& input_shape, const Tensor<Scalar>& dy) {
  const auto bv = detail::batch_view(input_shape, 3, "gap_vjp");
  const std::size_t c_axis = bv.batched ? 1 : 0;
  const Index channels = input_shape[c_axis];
  const Index plane = input_shape[c_axis + 1] * input_shape[c_axis + 2];
  detail::expect_shape(dy.shape(), bv.batched ? Shape{bv.batch, channels} : Shape{channels},
                       "gap_vjp", "upstream");
  Tensor<Scalar> dx(input_shape);
  const Scalar inv = Scalar(1) / static_cast<Scalar>(plane);
  for (Index i = 0; i < bv.batch * channels; ++i) {
    const Scalar v = dy[i] * inv;
    std::fill(dx.data() + i * plane, dx.data() + (i + 1) * plane, v);
  }
  return dx;
}

template <typename Scalar>
struct AffineGrads {
  Tensor<Scalar> dx;
  Tensor<Scalar> dw;
  Tensor<Scalar> db;
};

/// x . W + b with x of shape [N x d_in] (or [d_in]), W [d_in x d_out], b [d_out].
template <typename Scalar>
Tensor<Scalar> affine(const Tensor<Scalar>& x, const Tensor<Scalar>& w, const Tensor<Scalar>& b) {
  if (w.rank() != 2) throw ShapeError("affine: weight must be rank 2, got " + shape_string(w.shape()));
  const bool vector_input = x.rank() == 1;
  if (!vector_input && x.rank() != 2) {
    throw ShapeError("affine: input must be rank 1 or 2, got " + shape_string(x.shape()));
  }
  const Index rows = vector_input ? 1 : x.dim(0);
  const Index din = x.shape().back();
  const Index dout = w.dim(1);
  if (w.dim(0) != din) {
    throw ShapeError("affine: weight axis 0 (d_in) is " + std::to_string(w.dim(0)) +
                     ", expected " + std::to_string(din));
  }
  detail::expect_shape(b.shape(), {dout}, "affine", "bias");
  Tensor<Scalar> out(vector_input ? Shape{dout} : Shape{rows, dout});
  detail::ordered_gemm(rows, dout, din, x.data(), din, w.data(), dout, out.data(), dout);
  for (Index r = 0; r < rows; ++r) {
    Scalar* dst = out.data() + r * dout;
    for (Index j = 0; j < dout; ++j) dst[j] += b[j];
  }
  return out;
}

template <typename Scalar>
AffineGrads<Scalar> affine_vjp(const Tensor<Scalar>& x, const Tensor<Scalar>& w,
                               const Tensor<Scalar>& dy) {
  const Index din = w.dim(0), dout = w.dim(1);
  const Index rows = x.rank() == 1 ? 1 : x.dim(0);
  detail::expect_shape(dy.shape(), x.rank() == 1 ? Shape{dout} : Shape{rows, dout}, "affine_vjp",
                       "upstream");
  using Map = Eigen::Map<const typename Tensor<Scalar>::RowMajorMatrix>;
  using MutMap = Eigen::Map<typename Tensor<Scalar>::RowMajorMatrix>;
  Map xm(x.data(), rows, din), wm(w.data(), din, dout), gm(dy.data(), rows, dout);
  AffineGrads<Scalar> g{Tensor<Scalar>(x.shape()), Tensor<Scalar>(w.shape()),
                        Tensor<Scalar>({dout})};
  MutMap(g.dx.data(), rows, din).noalias() = gm * wm.transpose();
  MutMap(g.dw.data(), din, dout).noalias() = xm.transpose() * gm;
  for (Index r = 0; r < rows; ++r) {
    for (Index j = 0; j < dout; ++j) g.db[j] += gm(r, j);
  }
  return g;
}

enum class Activation { relu, sigmoid };

template <typename Scalar>
Scalar sigmoid(Scalar v) {
  return Scalar(1) / (Scalar(1) + std::exp(-v));
}

template <typename Scalar>
Tensor<Scalar> activation(const Tensor<Scalar>& x, Activation kind) {
  Tensor<Scalar> y(x.shape());
  if (kind == Activation::relu) {
    for (Index i = 0; i < x.size(); ++i) y[i] = x[i] > Scalar(0) ? x[i] : Scalar(0);
  } else {
    for (Index i = 0; i < x.size(); ++i) y[i] = sigmoid(x[i]);
  }
  return y;
}

/// Cotangent of `activation` given its *input* x.
template <typename Scalar>
Tensor<Scalar> activation_vjp(const Tensor<Scalar>& x, Activation kind, const Tensor<Scalar>& dy) {
  detail::expect_shape(dy.shape(), x.shape(), "activation_vjp", "upstream");
  Tensor<Scalar> dx(x.shape());
  if (kind == Activation::relu) {
    for (Index i = 0; i < x.size(); ++i) dx[i] = x[i] > Scalar(0) ? dy[i] : Scalar(0);
  } else {
    for (Index i = 0; i < x.size(); ++i) {
      const Scalar s = sigmoid(x[i]);
      dx[i] = dy[i] * s * (Scalar(1) - s);
    }
  }
  return dx;
}

template <typename Scalar>
Tensor<Scalar> reshape(const Tensor<Scalar>& x, Shape shape) {
  return x.reshaped(std::move(shape));
}

/// Physical transpose of a rank-2 tensor. Its own VJP.
template <typename Scalar>
Tensor<Scalar> transpose(const Tensor<Scalar>& x) {
  if (x.rank() != 2) throw ShapeError("transpose: expected rank 2, got " + shape_string(x.shape()));
  Tensor<Scalar> out({x.dim(1), x.dim(0)});
  out.matrix() = x.matrix().transpose();
  return out;
}

/// Integer square root when `n` is a perfect square.
inline std::optional<Index> exact_sqrt(Index n) {
  if (n <= 0) return std::nullopt;
  auto r = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(n))));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  if (r * r != n) return std::nullopt;
  return r;
}

/// [N x d] -> [N x 1 x sqrt(d) x sqrt(d)].
template <typename Scalar>
Tensor<Scalar> to_square_map(const Tensor<Scalar>& x) {
  if (x.rank() != 2) {
    throw ShapeError("to_square_map: expected [N x d], got " + shape_string(x.shape()));
  }
  const auto side = exact_sqrt(x.dim(1));
  if (!side) {
    throw ShapeError("feature dimension not a perfect square (d = " + std::to_string(x.dim(1)) +
                     ")");
  }
  return x.reshaped({x.dim(0), 1, *side, *side});
}

/// [N x 1 x s x s] -> [N x s*s]; inverse of to_square_map.
template <typename Scalar>
Tensor<Scalar> from_square_map(const Tensor<Scalar>& x) {
  if (x.rank() != 4 || x.dim(1) != 1) {
    throw ShapeError("from_square_map: expected [N x 1 x H x W], got " + shape_string(x.shape()));
  }
  return x.reshaped({x.dim(0), x.dim(2) * x.dim(3)});
}

}  // namespace codh
