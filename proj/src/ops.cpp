#include "rrtrack/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "rrtrack/errors.hpp"

namespace rrtrack::ops {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

#define RRTRACK_REQUIRE(cond, msg) \
  do {                               \
    if (!(cond)) throw ShapeError(msg); \
  } while (0)

struct ConvGeometry {
  std::size_t n, c, h, w, k, kh, kw, stride, pad, ho, wo;
  std::size_t patch() const { return c * kh * kw; }
  std::size_t pixels() const { return ho * wo; }
};

// cols[(ch*kh + i)*kw + j][oy*wo + ox] = padded input sample
void im2col(const ConvGeometry& geo, const double* x, double* cols) {
  const auto pad = static_cast<std::ptrdiff_t>(geo.pad);
  for (std::size_t ch = 0; ch < geo.c; ++ch) {
    const double* plane = x + ch * geo.h * geo.w;
    for (std::size_t i = 0; i < geo.kh; ++i) {
      for (std::size_t j = 0; j < geo.kw; ++j) {
        double* row = cols + ((ch * geo.kh + i) * geo.kw + j) * geo.pixels();
        for (std::size_t oy = 0; oy < geo.ho; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * geo.stride + i) - pad;
          double* out = row + oy * geo.wo;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(geo.h)) {
            std::fill(out, out + geo.wo, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * geo.w;
          for (std::size_t ox = 0; ox < geo.wo; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * geo.stride + j) - pad;
            out[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(geo.w)) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& geo, const double* cols, double* dx) {
  const auto pad = static_cast<std::ptrdiff_t>(geo.pad);
  for (std::size_t ch = 0; ch < geo.c; ++ch) {
    double* plane = dx + ch * geo.h * geo.w;
    for (std::size_t i = 0; i < geo.kh; ++i) {
      for (std::size_t j = 0; j < geo.kw; ++j) {
        const double* row = cols + ((ch * geo.kh + i) * geo.kw + j) * geo.pixels();
        for (std::size_t oy = 0; oy < geo.ho; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * geo.stride + i) - pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(geo.h)) continue;
          double* dst = plane + static_cast<std::size_t>(iy) * geo.w;
          const double* src = row + oy * geo.wo;
          for (std::size_t ox = 0; ox < geo.wo; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * geo.stride + j) - pad;
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(geo.w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

// Broadcast layout for add/mul: either equal dims or a trailing vector.
bool is_row_broadcast(const Tensor& a, const Tensor& b) {
  return b.rank() == 1 && a.rank() >= 1 && b.dim(0) == a.dims().back() && b.dims() != a.dims();
}

void check_binary(const Tensor& a, const Tensor& b, const char* name) {
  RRTRACK_REQUIRE(a.dims() == b.dims() || is_row_broadcast(a, b),
          std::string(name) + ": incompatible dims " + shape_string(a.dims()) + " and " + shape_string(b.dims()));
}

}  // namespace

Tensor conv2d(Graph& g, const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t pad) {
  RRTRACK_REQUIRE(input.rank() == 4, "conv2d: input must be [N,C,H,W], got " + shape_string(input.dims()));
  RRTRACK_REQUIRE(kernel.rank() == 4, "conv2d: kernel must be [K,C,kh,kw], got " + shape_string(kernel.dims()));
  RRTRACK_REQUIRE(stride >= 1, "conv2d: stride must be >= 1");
  const auto& xd = input.dims();
  const auto& kd = kernel.dims();
  RRTRACK_REQUIRE(xd[1] == kd[1], "conv2d: input channels " + std::to_string(xd[1]) + " != kernel channels " +
                              std::to_string(kd[1]));
  RRTRACK_REQUIRE(bias.rank() == 1 && bias.dim(0) == kd[0], "conv2d: bias must be [K]");
  RRTRACK_REQUIRE(kd[2] <= xd[2] + 2 * pad && kd[3] <= xd[3] + 2 * pad, "conv2d: kernel larger than padded input");

  ConvGeometry geo{xd[0], xd[1], xd[2], xd[3], kd[0], kd[2], kd[3], stride, pad, 0, 0};
  geo.ho = (geo.h + 2 * pad - geo.kh) / stride + 1;
  geo.wo = (geo.w + 2 * pad - geo.kw) / stride + 1;

  Tensor out = Tensor::zeros({geo.n, geo.k, geo.ho, geo.wo});
  Buffer cols(geo.patch() * geo.pixels());
  ConstMatMap wmat(kernel.data().data(), static_cast<Eigen::Index>(geo.k), static_cast<Eigen::Index>(geo.patch()));
  ConstVecMap b(bias.data().data(), static_cast<Eigen::Index>(geo.k));
  const std::size_t in_stride = geo.c * geo.h * geo.w;
  const std::size_t out_stride = geo.k * geo.pixels();
  for (std::size_t n = 0; n < geo.n; ++n) {
    im2col(geo, input.data().data() + n * in_stride, cols.data());
    ConstMatMap cmat(cols.data(), static_cast<Eigen::Index>(geo.patch()), static_cast<Eigen::Index>(geo.pixels()));
    MatMap omat(out.data().data() + n * out_stride, static_cast<Eigen::Index>(geo.k),
                static_cast<Eigen::Index>(geo.pixels()));
    omat.noalias() = wmat * cmat;
    omat.colwise() += b;
  }

  if (g.wants_grad({&input, &kernel, &bias})) {
    g.record({input, kernel, bias}, out, [geo, input, kernel, bias, out]() mutable {
      const auto dout = out.grad();
      Buffer cols(geo.patch() * geo.pixels());
      ConstMatMap wmat(kernel.data().data(), static_cast<Eigen::Index>(geo.k),
                       static_cast<Eigen::Index>(geo.patch()));
      const std::size_t in_stride = geo.c * geo.h * geo.w;
      const std::size_t out_stride = geo.k * geo.pixels();
      const auto k = static_cast<Eigen::Index>(geo.k);
      const auto px = static_cast<Eigen::Index>(geo.pixels());
      const auto patch = static_cast<Eigen::Index>(geo.patch());
      for (std::size_t n = 0; n < geo.n; ++n) {
        ConstMatMap go(dout.data() + n * out_stride, k, px);
        if (bias.requires_grad()) {
          VecMap db(bias.ensure_grad().data(), k);
          db += go.rowwise().sum();
        }
        if (kernel.requires_grad()) {
          im2col(geo, input.data().data() + n * in_stride, cols.data());
          ConstMatMap cmat(cols.data(), patch, px);
          MatMap dw(kernel.ensure_grad().data(), k, patch);
          dw.noalias() += go * cmat.transpose();
        }
        if (input.requires_grad()) {
          MatMap dcols(cols.data(), patch, px);
          dcols.noalias() = wmat.transpose() * go;
          col2im_add(geo, cols.data(), input.ensure_grad().data() + n * in_stride);
        }
      }
    });
  }
  return out;
}

Tensor maxpool2x2(Graph& g, const Tensor& input) {
  RRTRACK_REQUIRE(input.rank() == 4, "maxpool2x2: input must be [N,C,H,W], got " + shape_string(input.dims()));
  const auto& d = input.dims();
  RRTRACK_REQUIRE(d[2] % 2 == 0 && d[3] % 2 == 0, "maxpool2x2: H and W must be even, got " + shape_string(d));
  const std::size_t planes = d[0] * d[1];
  const std::size_t h = d[2], w = d[3], ho = h / 2, wo = w / 2;
  Tensor out = Tensor::zeros({d[0], d[1], ho, wo});
  std::vector<std::size_t> argmax(out.size());
  const double* x = input.data().data();
  double* y = out.data().data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const std::size_t base = p * h * w + (2 * oy) * w + 2 * ox;
        const std::size_t cand[4] = {base, base + 1, base + w, base + w + 1};
        std::size_t best = cand[0];
        for (int i = 1; i < 4; ++i) {
          if (x[cand[i]] > x[best]) best = cand[i];
        }
        const std::size_t o = p * ho * wo + oy * wo + ox;
        y[o] = x[best];
        argmax[o] = best;
      }
    }
  }
  if (g.wants_grad({&input})) {
    g.record({input}, out, [input, out, argmax = std::move(argmax)]() mutable {
      auto dx = input.ensure_grad();
      const auto dy = out.grad();
      for (std::size_t o = 0; o < argmax.size(); ++o) dx[argmax[o]] += dy[o];
    });
  }
  return out;
}

Tensor matmul(Graph& g, const Tensor& input, const Tensor& weight) {
  RRTRACK_REQUIRE(input.rank() == 2 && weight.rank() == 2, "matmul: expects [N,D] and [D,M]");
  RRTRACK_REQUIRE(input.dim(1) == weight.dim(0), "matmul: inner dims differ: " + shape_string(input.dims()) + " x " +
                                             shape_string(weight.dims()));
  const auto n = static_cast<Eigen::Index>(input.dim(0));
  const auto d = static_cast<Eigen::Index>(input.dim(1));
  const auto m = static_cast<Eigen::Index>(weight.dim(1));
  Tensor out = Tensor::zeros({input.dim(0), weight.dim(1)});
  MatMap(out.data().data(), n, m).noalias() =
      ConstMatMap(input.data().data(), n, d) * ConstMatMap(weight.data().data(), d, m);
  if (g.wants_grad({&input, &weight})) {
    g.record({input, weight}, out, [input, weight, out, n, d, m]() mutable {
      ConstMatMap go(out.grad().data(), n, m);
      if (input.requires_grad()) {
        MatMap(input.ensure_grad().data(), n, d).noalias() += go * ConstMatMap(weight.data().data(), d, m).transpose();
      }
      if (weight.requires_grad()) {
        MatMap(weight.ensure_grad().data(), d, m).noalias() += ConstMatMap(input.data().data(), n, d).transpose() * go;
      }
    });
  }
  return out;
}

Tensor fully_connected(Graph& g, const Tensor& input, const Tensor& weight, const Tensor& bias) {
  RRTRACK_REQUIRE(bias.rank() == 1 && weight.rank() == 2 && bias.dim(0) == weight.dim(1),
          "fully_connected: bias must be [M] for weight " + shape_string(weight.dims()));
  return add(g, matmul(g, input, weight), bias);
}

Tensor prelu(Graph& g, const Tensor& input, const Tensor& slope) {
  RRTRACK_REQUIRE(input.rank() >= 1 && slope.rank() == 1, "prelu: slope must be a vector");
  const std::size_t channels = input.rank() == 1 ? input.dim(0) : input.dim(1);
  RRTRACK_REQUIRE(slope.dim(0) == channels || slope.dim(0) == 1,
          "prelu: slope length " + std::to_string(slope.dim(0)) + " != channel count " + std::to_string(channels));
  const std::size_t outer = input.rank() == 1 ? 1 : input.dim(0);
  const std::size_t inner = input.rank() <= 2 ? 1 : shape_size(Shape(input.dims().begin() + 2, input.dims().end()));
  const bool shared = slope.dim(0) == 1 && channels != 1;
  Tensor out = Tensor::zeros(input.dims());
  const double* x = input.data().data();
  const double* a = slope.data().data();
  double* y = out.data().data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double s = a[shared ? 0 : c];
      const std::size_t base = (o * channels + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const double v = x[base + i];
        y[base + i] = v >= 0.0 ? v : s * v;
      }
    }
  }
  if (g.wants_grad({&input, &slope})) {
    g.record({input, slope}, out, [input, slope, out, outer, channels, inner, shared]() mutable {
      const auto dy = out.grad();
      const auto x = input.data();
      const auto a = slope.data();
      std::span<double> dx = input.requires_grad() ? input.ensure_grad() : std::span<double>{};
      std::span<double> da = slope.requires_grad() ? slope.ensure_grad() : std::span<double>{};
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t c = 0; c < channels; ++c) {
          const std::size_t sc = shared ? 0 : c;
          const std::size_t base = (o * channels + c) * inner;
          for (std::size_t i = 0; i < inner; ++i) {
            const double v = x[base + i];
            if (!dx.empty()) dx[base + i] += v >= 0.0 ? dy[base + i] : a[sc] * dy[base + i];
            if (!da.empty() && v < 0.0) da[sc] += v * dy[base + i];
          }
        }
      }
    });
  }
  return out;
}

Tensor tanh(Graph& g, const Tensor& x) {
  Tensor out = Tensor::zeros(x.dims());
  std::transform(x.data().begin(), x.data().end(), out.data().begin(), [](double v) { return std::tanh(v); });
  if (g.wants_grad({&x})) {
    g.record({x}, out, [x, out]() mutable {
      auto dx = x.ensure_grad();
      const auto y = out.data();
      const auto dy = out.grad();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * (1.0 - y[i] * y[i]);
    });
  }
  return out;
}

Tensor sigmoid(Graph& g, const Tensor& x) {
  Tensor out = Tensor::zeros(x.dims());
  std::transform(x.data().begin(), x.data().end(), out.data().begin(),
                 [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  if (g.wants_grad({&x})) {
    g.record({x}, out, [x, out]() mutable {
      auto dx = x.ensure_grad();
      const auto y = out.data();
      const auto dy = out.grad();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * y[i] * (1.0 - y[i]);
    });
  }
  return out;
}

Tensor add(Graph& g, const Tensor& a, const Tensor& b) {
  check_binary(a, b, "add");
  const std::size_t nb = b.size();
  Tensor out = Tensor::zeros(a.dims());
  const auto av = a.data();
  const auto bv = b.data();
  auto y = out.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] + bv[i % nb];
  if (g.wants_grad({&a, &b})) {
    g.record({a, b}, out, [a, b, out, nb]() mutable {
      const auto dy = out.grad();
      if (a.requires_grad()) {
        auto da = a.ensure_grad();
        for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i];
      }
      if (b.requires_grad()) {
        auto db = b.ensure_grad();
        for (std::size_t i = 0; i < dy.size(); ++i) db[i % nb] += dy[i];
      }
    });
  }
  return out;
}

Tensor mul(Graph& g, const Tensor& a, const Tensor& b) {
  check_binary(a, b, "mul");
  const std::size_t nb = b.size();
  Tensor out = Tensor::zeros(a.dims());
  const auto av = a.data();
  const auto bv = b.data();
  auto y = out.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i % nb];
  if (g.wants_grad({&a, &b})) {
    g.record({a, b}, out, [a, b, out, nb]() mutable {
      const auto dy = out.grad();
      const auto av = a.data();
      const auto bv = b.data();
      if (a.requires_grad()) {
        auto da = a.ensure_grad();
        for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * bv[i % nb];
      }
      if (b.requires_grad()) {
        auto db = b.ensure_grad();
        for (std::size_t i = 0; i < dy.size(); ++i) db[i % nb] += dy[i] * av[i];
      }
    });
  }
  return out;
}

Tensor scale(Graph& g, const Tensor& x, double factor) {
  Tensor out = Tensor::zeros(x.dims());
  std::transform(x.data().begin(), x.data().end(), out.data().begin(), [factor](double v) { return v * factor; });
  if (g.wants_grad({&x})) {
    g.record({x}, out, [x, out, factor]() mutable {
      auto dx = x.ensure_grad();
      const auto dy = out.grad();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += factor * dy[i];
    });
  }
  return out;
}

Tensor concat(Graph& g, std::span<const Tensor> parts, std::size_t axis) {
  RRTRACK_REQUIRE(!parts.empty(), "concat: no inputs");
  const Shape& first = parts[0].dims();
  RRTRACK_REQUIRE(axis < first.size(), "concat: axis " + std::to_string(axis) + " out of range for " + shape_string(first));
  Shape out_dims = first;
  out_dims[axis] = 0;
  for (const auto& p : parts) {
    const auto& d = p.dims();
    RRTRACK_REQUIRE(d.size() == first.size(), "concat: rank mismatch");
    for (std::size_t i = 0; i < d.size(); ++i) {
      RRTRACK_REQUIRE(i == axis || d[i] == first[i],
              "concat: dims " + shape_string(d) + " incompatible with " + shape_string(first) + " on axis " +
                  std::to_string(axis));
    }
    out_dims[axis] += d[axis];
  }
  const std::size_t outer = shape_size(Shape(first.begin(), first.begin() + static_cast<std::ptrdiff_t>(axis)));
  const std::size_t out_block = shape_size(Shape(out_dims.begin() + static_cast<std::ptrdiff_t>(axis), out_dims.end()));
  Tensor out = Tensor::zeros(out_dims);
  std::vector<std::size_t> blocks;
  std::size_t offset = 0;
  auto y = out.data();
  for (const auto& p : parts) {
    const std::size_t block = p.size() / outer;
    const auto x = p.data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(o * block), block,
                  y.begin() + static_cast<std::ptrdiff_t>(o * out_block + offset));
    }
    blocks.push_back(block);
    offset += block;
  }
  if (g.wants_grad(parts)) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    g.record(inputs, out, [inputs, out, outer, out_block, blocks]() mutable {
      const auto dy = out.grad();
      std::size_t offset = 0;
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        if (inputs[k].requires_grad()) {
          auto dx = inputs[k].ensure_grad();
          for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t i = 0; i < blocks[k]; ++i) dx[o * blocks[k] + i] += dy[o * out_block + offset + i];
          }
        }
        offset += blocks[k];
      }
    });
  }
  return out;
}

Tensor reshape(Graph& g, const Tensor& x, Shape dims) {
  RRTRACK_REQUIRE(shape_size(dims) == x.size(), "reshape: " + shape_string(x.dims()) + " -> " + shape_string(dims));
  Tensor out = Tensor::from(std::move(dims), std::vector<double>(x.data().begin(), x.data().end()));
  if (g.wants_grad({&x})) {
    g.record({x}, out, [x, out]() mutable {
      auto dx = x.ensure_grad();
      const auto dy = out.grad();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i];
    });
  }
  return out;
}

Tensor flatten(Graph& g, const Tensor& x) {
  RRTRACK_REQUIRE(x.rank() >= 1, "flatten: rank 0");
  return reshape(g, x, {x.dim(0), x.size() / x.dim(0)});
}

Tensor sum(Graph& g, const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  Tensor out = Tensor::scalar(s);
  if (g.wants_grad({&x})) {
    g.record({x}, out, [x, out]() mutable {
      auto dx = x.ensure_grad();
      const double dy = out.grad()[0];
      for (auto& v : dx) v += dy;
    });
  }
  return out;
}

Tensor l1_loss(Graph& g, const Tensor& pred, const Tensor& target) {
  RRTRACK_REQUIRE(pred.dims() == target.dims(),
          "l1_loss: dims " + shape_string(pred.dims()) + " vs " + shape_string(target.dims()));
  const auto p = pred.data();
  const auto t = target.data();
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - t[i]);
  const double inv_n = 1.0 / static_cast<double>(p.size());
  Tensor out = Tensor::scalar(s * inv_n);
  if (g.wants_grad({&pred})) {
    g.record({pred}, out, [pred, target, out, inv_n]() mutable {
      auto dp = pred.ensure_grad();
      const auto p = pred.data();
      const auto t = target.data();
      const double dy = out.grad()[0] * inv_n;
      for (std::size_t i = 0; i < dp.size(); ++i) {
        const double diff = p[i] - t[i];
        if (diff > 0.0) dp[i] += dy;
        else if (diff < 0.0) dp[i] -= dy;
      }
    });
  }
  return out;
}

Tensor mean_of(Graph& g, std::span<const Tensor> scalars) {
  RRTRACK_REQUIRE(!scalars.empty(), "mean_of: no inputs");
  double s = 0.0;
  for (const auto& t : scalars) {
    RRTRACK_REQUIRE(t.size() == 1, "mean_of: inputs must be scalars");
    s += t.item();
  }
  const double inv_n = 1.0 / static_cast<double>(scalars.size());
  Tensor out = Tensor::scalar(s * inv_n);
  if (g.wants_grad(scalars)) {
    std::vector<Tensor> inputs(scalars.begin(), scalars.end());
    g.record(inputs, out, [inputs, out, inv_n]() mutable {
      const double dy = out.grad()[0] * inv_n;
      for (auto& t : inputs) {
        if (t.requires_grad()) t.ensure_grad()[0] += dy;
      }
    });
  }
  return out;
}

}  // namespace rrtrack::ops
