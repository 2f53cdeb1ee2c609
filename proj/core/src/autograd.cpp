#include "gesturegan/autograd.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace gesturegan::nn {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void accumulate(Node& target, const float* src) {
  Tensor& g = target.ensure_grad();
  float* dst = g.data();
  const std::size_t n = g.numel();
  for (std::size_t i = 0; i < n; ++i) {
    dst[i] += src[i];
  }
}

struct ConvGeometry {
  int channels = 0;  // channels of the "image" side being unfolded
  int height = 0;
  int width = 0;
  int kernel = 0;
  int stride = 1;
  int padding = 0;
  int out_h = 0;
  int out_w = 0;

  int rows() const { return channels * kernel * kernel; }
};

// Unfolds `batch` images {channels,height,width} into a rows() x (batch*out_h*out_w)
// row-major matrix.
void im2col(const float* image, int batch, const ConvGeometry& g, float* cols) {
  const std::size_t patches = static_cast<std::size_t>(g.out_h) * g.out_w;
  const std::size_t row_len = patches * batch;
  const std::size_t plane = static_cast<std::size_t>(g.height) * g.width;
  for (int c = 0; c < g.channels; ++c) {
    for (int ki = 0; ki < g.kernel; ++ki) {
      for (int kj = 0; kj < g.kernel; ++kj) {
        float* row = cols + static_cast<std::size_t>((c * g.kernel + ki) * g.kernel + kj) * row_len;
        for (int n = 0; n < batch; ++n) {
          const float* src = image + (static_cast<std::size_t>(n) * g.channels + c) * plane;
          float* dst = row + static_cast<std::size_t>(n) * patches;
          for (int oh = 0; oh < g.out_h; ++oh) {
            const int ih = oh * g.stride - g.padding + ki;
            float* out_row = dst + static_cast<std::size_t>(oh) * g.out_w;
            if (ih < 0 || ih >= g.height) {
              std::fill_n(out_row, g.out_w, 0.0f);
              continue;
            }
            const float* in_row = src + static_cast<std::size_t>(ih) * g.width;
            for (int ow = 0; ow < g.out_w; ++ow) {
              const int iw = ow * g.stride - g.padding + kj;
              out_row[ow] = (iw >= 0 && iw < g.width) ? in_row[iw] : 0.0f;
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters columns back into (accumulates onto) images.
void col2im(const float* cols, int batch, const ConvGeometry& g, float* image) {
  const std::size_t patches = static_cast<std::size_t>(g.out_h) * g.out_w;
  const std::size_t row_len = patches * batch;
  const std::size_t plane = static_cast<std::size_t>(g.height) * g.width;
  for (int c = 0; c < g.channels; ++c) {
    for (int ki = 0; ki < g.kernel; ++ki) {
      for (int kj = 0; kj < g.kernel; ++kj) {
        const float* row =
            cols + static_cast<std::size_t>((c * g.kernel + ki) * g.kernel + kj) * row_len;
        for (int n = 0; n < batch; ++n) {
          float* dst = image + (static_cast<std::size_t>(n) * g.channels + c) * plane;
          const float* src = row + static_cast<std::size_t>(n) * patches;
          for (int oh = 0; oh < g.out_h; ++oh) {
            const int ih = oh * g.stride - g.padding + ki;
            if (ih < 0 || ih >= g.height) {
              continue;
            }
            float* out_row = dst + static_cast<std::size_t>(ih) * g.width;
            const float* in_row = src + static_cast<std::size_t>(oh) * g.out_w;
            for (int ow = 0; ow < g.out_w; ++ow) {
              const int iw = ow * g.stride - g.padding + kj;
              if (iw >= 0 && iw < g.width) {
                out_row[iw] += in_row[ow];
              }
            }
          }
        }
      }
    }
  }
}

// {N,C,P} NCHW block <-> {C, N*P} channel-major matrix.
void nchw_to_cm(const float* src, int n, int c, std::size_t plane, float* dst) {
  for (int ni = 0; ni < n; ++ni) {
    for (int ci = 0; ci < c; ++ci) {
      std::copy_n(src + (static_cast<std::size_t>(ni) * c + ci) * plane, plane,
                  dst + static_cast<std::size_t>(ci) * n * plane + static_cast<std::size_t>(ni) * plane);
    }
  }
}

void cm_to_nchw(const float* src, int n, int c, std::size_t plane, float* dst) {
  for (int ni = 0; ni < n; ++ni) {
    for (int ci = 0; ci < c; ++ci) {
      std::copy_n(src + static_cast<std::size_t>(ci) * n * plane + static_cast<std::size_t>(ni) * plane,
                  plane, dst + (static_cast<std::size_t>(ni) * c + ci) * plane);
    }
  }
}

void add_bias(Tensor& out, const Tensor& bias) {
  const Shape s = out.shape();
  const std::size_t plane = s.plane();
  float* o = out.data();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const float b = bias.data()[c];
      float* p = o + (static_cast<std::size_t>(n) * s.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        p[i] += b;
      }
    }
  }
}

void bias_grad(Node& bias, const Tensor& grad_out) {
  const Shape s = grad_out.shape();
  const std::size_t plane = s.plane();
  Tensor& g = bias.ensure_grad();
  for (int c = 0; c < s.c; ++c) {
    double acc = 0.0;
    for (int n = 0; n < s.n; ++n) {
      const float* p = grad_out.data() + (static_cast<std::size_t>(n) * s.c + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        acc += p[i];
      }
    }
    g.data()[c] += static_cast<float>(acc);
  }
}

void check_bias(const Var& bias, int channels, const char* op) {
  if (bias.defined() && bias.shape() != Shape{1, channels, 1, 1}) {
    throw ShapeError(std::string(op) + ": bias shape " + bias.shape().str() + " expected [1," +
                     std::to_string(channels) + ",1,1]");
  }
}

template <typename F, typename DF>
Var pointwise(const Var& x, F f, DF df) {
  Tensor out(x.shape());
  const float* in = x.value().data();
  float* o = out.data();
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) {
    o[i] = f(in[i]);
  }
  return make_result(std::move(out), {x}, [df](Node& self) {
    Node& in_node = *self.inputs[0];
    if (!in_node.requires_grad) {
      return;
    }
    Tensor& g = in_node.ensure_grad();
    const float* xv = in_node.value.data();
    const float* yv = self.value.data();
    const float* gy = self.grad.data();
    float* gx = g.data();
    const std::size_t count = g.numel();
    for (std::size_t i = 0; i < count; ++i) {
      gx[i] += gy[i] * df(xv[i], yv[i]);
    }
  });
}

}  // namespace

Tensor& Node::ensure_grad() {
  if (grad.empty()) {
    grad = Tensor(value.shape(), 0.0f);
  }
  return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

void Var::zero_grad() {
  if (node_ && !node_->grad.empty()) {
    node_->grad.fill(0.0f);
  }
}

Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn) {
  Var out(std::move(value), false);
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Var& v) { return v.requires_grad(); });
  if (any) {
    out.node_->requires_grad = true;
    out.node_->backward_fn = std::move(backward_fn);
    out.node_->inputs.reserve(inputs.size());
    for (const Var& v : inputs) {
      // Undefined optional inputs (e.g. a missing bias) are kept as a dummy
      // constant so that input positions stay stable for the closure.
      out.node_->inputs.push_back(v.defined() ? v.node() : std::make_shared<Node>());
    }
  }
  return out;
}

void backward(const Var& root) {
  if (!root.defined() || root.value().numel() != 1) {
    throw ShapeError("backward: root must be a scalar");
  }
  if (!root.requires_grad()) {
    return;
  }
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  Node& r = *root.node();
  r.ensure_grad().data()[0] += 1.0f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && !node->grad.empty()) {
      node->backward_fn(*node);
    }
  }
}

std::size_t parameter_count(const ParameterList& params) {
  std::size_t total = 0;
  for (const auto& p : params) {
    total += p.var.value().numel();
  }
  return total;
}

void zero_grads(const ParameterList& params) {
  for (const auto& p : params) {
    const_cast<Var&>(p.var).zero_grad();
  }
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, Conv2dOptions opt) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (ws.c != xs.c || ws.h != ws.w) {
    throw ShapeError("conv2d: input " + xs.str() + " incompatible with weight " + ws.str());
  }
  check_bias(bias, ws.n, "conv2d");
  ConvGeometry g;
  g.channels = xs.c;
  g.height = xs.h;
  g.width = xs.w;
  g.kernel = ws.h;
  g.stride = opt.stride;
  g.padding = opt.padding;
  g.out_h = (xs.h + 2 * opt.padding - ws.h) / opt.stride + 1;
  g.out_w = (xs.w + 2 * opt.padding - ws.w) / opt.stride + 1;
  if (g.out_h <= 0 || g.out_w <= 0) {
    throw ShapeError("conv2d: input " + xs.str() + " too small for kernel " + std::to_string(ws.h));
  }
  const int cout = ws.n;
  const std::size_t cols_n = static_cast<std::size_t>(xs.n) * g.out_h * g.out_w;

  auto cols = std::make_shared<std::vector<float>>(static_cast<std::size_t>(g.rows()) * cols_n);
  im2col(x.value().data(), xs.n, g, cols->data());

  std::vector<float> ycm(static_cast<std::size_t>(cout) * cols_n);
  ConstMapMat wm(weight.value().data(), cout, g.rows());
  ConstMapMat cm(cols->data(), g.rows(), static_cast<Eigen::Index>(cols_n));
  MapMat ym(ycm.data(), cout, static_cast<Eigen::Index>(cols_n));
  ym.noalias() = wm * cm;

  Tensor out({xs.n, cout, g.out_h, g.out_w});
  cm_to_nchw(ycm.data(), xs.n, cout, static_cast<std::size_t>(g.out_h) * g.out_w, out.data());
  if (bias.defined()) {
    add_bias(out, bias.value());
  }

  return make_result(std::move(out), {x, weight, bias}, [g, cols, cout, cols_n](Node& self) {
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    Node& bn = *self.inputs[2];
    const int batch = xn.value.shape().n;
    std::vector<float> gcm(static_cast<std::size_t>(cout) * cols_n);
    nchw_to_cm(self.grad.data(), batch, cout, static_cast<std::size_t>(g.out_h) * g.out_w, gcm.data());
    ConstMapMat gy(gcm.data(), cout, static_cast<Eigen::Index>(cols_n));
    if (wn.requires_grad) {
      MapMat gw(wn.ensure_grad().data(), cout, g.rows());
      ConstMapMat cm(cols->data(), g.rows(), static_cast<Eigen::Index>(cols_n));
      gw.noalias() += gy * cm.transpose();
    }
    if (bn.requires_grad) {
      bias_grad(bn, self.grad);
    }
    if (xn.requires_grad) {
      std::vector<float> gcols(static_cast<std::size_t>(g.rows()) * cols_n);
      ConstMapMat wm(wn.value.data(), cout, g.rows());
      MapMat gc(gcols.data(), g.rows(), static_cast<Eigen::Index>(cols_n));
      gc.noalias() = wm.transpose() * gy;
      col2im(gcols.data(), batch, g, xn.ensure_grad().data());
    }
  });
}

Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, Conv2dOptions opt) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (ws.n != xs.c || ws.h != ws.w) {
    throw ShapeError("conv_transpose2d: input " + xs.str() + " incompatible with weight " +
                     ws.str());
  }
  const int cin = xs.c;
  const int cout = ws.c;
  check_bias(bias, cout, "conv_transpose2d");
  // The transposed convolution is the adjoint of a convolution mapping the
  // (larger) output image onto the input grid.
  ConvGeometry g;
  g.channels = cout;
  g.kernel = ws.h;
  g.stride = opt.stride;
  g.padding = opt.padding;
  g.height = (xs.h - 1) * opt.stride - 2 * opt.padding + ws.h;
  g.width = (xs.w - 1) * opt.stride - 2 * opt.padding + ws.w;
  g.out_h = xs.h;
  g.out_w = xs.w;
  if (g.height <= 0 || g.width <= 0) {
    throw ShapeError("conv_transpose2d: degenerate output for input " + xs.str());
  }
  const std::size_t in_plane = static_cast<std::size_t>(xs.h) * xs.w;
  const std::size_t cols_n = static_cast<std::size_t>(xs.n) * in_plane;

  auto xcm = std::make_shared<std::vector<float>>(static_cast<std::size_t>(cin) * cols_n);
  nchw_to_cm(x.value().data(), xs.n, cin, in_plane, xcm->data());

  std::vector<float> cols(static_cast<std::size_t>(g.rows()) * cols_n);
  ConstMapMat wm(weight.value().data(), cin, g.rows());
  ConstMapMat xm(xcm->data(), cin, static_cast<Eigen::Index>(cols_n));
  MapMat cm(cols.data(), g.rows(), static_cast<Eigen::Index>(cols_n));
  cm.noalias() = wm.transpose() * xm;

  Tensor out({xs.n, cout, g.height, g.width});
  col2im(cols.data(), xs.n, g, out.data());
  if (bias.defined()) {
    add_bias(out, bias.value());
  }

  return make_result(std::move(out), {x, weight, bias}, [g, xcm, cin, cols_n, in_plane](Node& self) {
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    Node& bn = *self.inputs[2];
    const int batch = xn.value.shape().n;
    std::vector<float> gcols(static_cast<std::size_t>(g.rows()) * cols_n);
    im2col(self.grad.data(), batch, g, gcols.data());
    ConstMapMat gc(gcols.data(), g.rows(), static_cast<Eigen::Index>(cols_n));
    if (wn.requires_grad) {
      MapMat gw(wn.ensure_grad().data(), cin, g.rows());
      ConstMapMat xm(xcm->data(), cin, static_cast<Eigen::Index>(cols_n));
      gw.noalias() += xm * gc.transpose();
    }
    if (bn.requires_grad) {
      bias_grad(bn, self.grad);
    }
    if (xn.requires_grad) {
      std::vector<float> gx(static_cast<std::size_t>(cin) * cols_n);
      ConstMapMat wm(wn.value.data(), cin, g.rows());
      MapMat gm(gx.data(), cin, static_cast<Eigen::Index>(cols_n));
      gm.noalias() = wm * gc;
      Tensor& dst = xn.ensure_grad();
      std::vector<float> tmp(dst.numel());
      cm_to_nchw(gx.data(), batch, cin, in_plane, tmp.data());
      for (std::size_t i = 0; i < tmp.size(); ++i) {
        dst.data()[i] += tmp[i];
      }
    }
  });
}

Var instance_norm(const Var& x, const Var& gamma, const Var& beta, float eps) {
  const Shape s = x.shape();
  if (gamma.shape() != Shape{1, s.c, 1, 1} || beta.shape() != Shape{1, s.c, 1, 1}) {
    throw ShapeError("instance_norm: affine parameters must be [1," + std::to_string(s.c) + ",1,1]");
  }
  const std::size_t plane = s.plane();
  auto xhat = std::make_shared<std::vector<float>>(s.numel());
  auto inv_std = std::make_shared<std::vector<float>>(static_cast<std::size_t>(s.n) * s.c);
  Tensor out(s);
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * plane;
      const float* p = x.value().data() + base;
      double sum = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        sum += p[i];
      }
      const double mu = sum / static_cast<double>(plane);
      double var = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = p[i] - mu;
        var += d * d;
      }
      var /= static_cast<double>(plane);
      const float is = static_cast<float>(1.0 / std::sqrt(var + eps));
      (*inv_std)[static_cast<std::size_t>(n) * s.c + c] = is;
      const float ga = gamma.value().data()[c];
      const float be = beta.value().data()[c];
      for (std::size_t i = 0; i < plane; ++i) {
        const float xh = static_cast<float>(p[i] - mu) * is;
        (*xhat)[base + i] = xh;
        out.data()[base + i] = ga * xh + be;
      }
    }
  }
  return make_result(std::move(out), {x, gamma, beta}, [s, plane, xhat, inv_std](Node& self) {
    Node& xn = *self.inputs[0];
    Node& gn = *self.inputs[1];
    Node& bn = *self.inputs[2];
    const float* gy = self.grad.data();
    float* gx = xn.requires_grad ? xn.ensure_grad().data() : nullptr;
    float* gg = gn.requires_grad ? gn.ensure_grad().data() : nullptr;
    float* gb = bn.requires_grad ? bn.ensure_grad().data() : nullptr;
    const double m = static_cast<double>(plane);
    for (int n = 0; n < s.n; ++n) {
      for (int c = 0; c < s.c; ++c) {
        const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * plane;
        double sum_dy = 0.0;
        double sum_dy_xhat = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
          sum_dy += gy[base + i];
          sum_dy_xhat += static_cast<double>(gy[base + i]) * (*xhat)[base + i];
        }
        if (gg) gg[c] += static_cast<float>(sum_dy_xhat);
        if (gb) gb[c] += static_cast<float>(sum_dy);
        if (gx) {
          const float ga = gn.value.data()[c];
          const double is = (*inv_std)[static_cast<std::size_t>(n) * s.c + c];
          // dx = gamma * inv_std / m * (m*dy - sum(dy) - xhat*sum(dy*xhat))
          const double k = ga * is / m;
          for (std::size_t i = 0; i < plane; ++i) {
            gx[base + i] += static_cast<float>(
                k * (m * gy[base + i] - sum_dy - (*xhat)[base + i] * sum_dy_xhat));
          }
        }
      }
    }
  });
}

Var leaky_relu(const Var& x, float slope) {
  return pointwise(
      x, [slope](float v) { return v > 0.0f ? v : slope * v; },
      [slope](float v, float) { return v > 0.0f ? 1.0f : slope; });
}

Var relu(const Var& x) {
  return pointwise(
      x, [](float v) { return v > 0.0f ? v : 0.0f; },
      [](float v, float) { return v > 0.0f ? 1.0f : 0.0f; });
}

Var tanh(const Var& x) {
  return pointwise(
      x, [](float v) { return std::tanh(v); }, [](float, float y) { return 1.0f - y * y; });
}

Var sigmoid(const Var& x) {
  return pointwise(
      x, [](float v) { return 1.0f / (1.0f + std::exp(-v)); },
      [](float, float y) { return y * (1.0f - y); });
}

Var dropout(const Var& x, float rate, Rng& rng) {
  if (rate <= 0.0f) {
    return x;
  }
  if (rate >= 1.0f) {
    throw std::invalid_argument("dropout: rate must be < 1");
  }
  const float keep_scale = 1.0f / (1.0f - rate);
  auto mask = std::make_shared<std::vector<float>>(x.value().numel());
  Tensor out(x.shape());
  for (std::size_t i = 0; i < mask->size(); ++i) {
    (*mask)[i] = rng.bernoulli(rate) ? 0.0f : keep_scale;
    out.data()[i] = x.value().data()[i] * (*mask)[i];
  }
  return make_result(std::move(out), {x}, [mask](Node& self) {
    Node& xn = *self.inputs[0];
    if (!xn.requires_grad) return;
    float* gx = xn.ensure_grad().data();
    for (std::size_t i = 0; i < mask->size(); ++i) {
      gx[i] += self.grad.data()[i] * (*mask)[i];
    }
  });
}

Var concat_channels(const Var& a, const Var& b) {
  const Shape as = a.shape();
  const Shape bs = b.shape();
  if (as.n != bs.n || as.h != bs.h || as.w != bs.w) {
    throw ShapeError("concat_channels: " + as.str() + " vs " + bs.str());
  }
  const std::size_t plane = as.plane();
  const std::size_t a_block = static_cast<std::size_t>(as.c) * plane;
  const std::size_t b_block = static_cast<std::size_t>(bs.c) * plane;
  Tensor out({as.n, as.c + bs.c, as.h, as.w});
  for (int n = 0; n < as.n; ++n) {
    float* dst = out.data() + n * (a_block + b_block);
    std::copy_n(a.value().data() + n * a_block, a_block, dst);
    std::copy_n(b.value().data() + n * b_block, b_block, dst + a_block);
  }
  return make_result(std::move(out), {a, b}, [a_block, b_block](Node& self) {
    Node& an = *self.inputs[0];
    Node& bn = *self.inputs[1];
    const int batch = self.value.shape().n;
    for (int n = 0; n < batch; ++n) {
      const float* src = self.grad.data() + n * (a_block + b_block);
      if (an.requires_grad) {
        float* ga = an.ensure_grad().data() + n * a_block;
        for (std::size_t i = 0; i < a_block; ++i) ga[i] += src[i];
      }
      if (bn.requires_grad) {
        float* gb = bn.ensure_grad().data() + n * b_block;
        for (std::size_t i = 0; i < b_block; ++i) gb[i] += src[a_block + i];
      }
    }
  });
}

Var slice_channels(const Var& x, int first, int count) {
  const Shape s = x.shape();
  if (first < 0 || count <= 0 || first + count > s.c) {
    throw ShapeError("slice_channels: [" + std::to_string(first) + "," +
                     std::to_string(first + count) + ") out of " + s.str());
  }
  const std::size_t plane = s.plane();
  Tensor out({s.n, count, s.h, s.w});
  for (int n = 0; n < s.n; ++n) {
    std::copy_n(x.value().data() + (static_cast<std::size_t>(n) * s.c + first) * plane,
                count * plane, out.data() + static_cast<std::size_t>(n) * count * plane);
  }
  return make_result(std::move(out), {x}, [s, first, count, plane](Node& self) {
    Node& xn = *self.inputs[0];
    if (!xn.requires_grad) return;
    float* gx = xn.ensure_grad().data();
    for (int n = 0; n < s.n; ++n) {
      const float* src = self.grad.data() + static_cast<std::size_t>(n) * count * plane;
      float* dst = gx + (static_cast<std::size_t>(n) * s.c + first) * plane;
      for (std::size_t i = 0; i < count * plane; ++i) dst[i] += src[i];
    }
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out.data()[i] = a.value().data()[i] + b.value().data()[i];
  }
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (int k = 0; k < 2; ++k) {
      if (self.inputs[k]->requires_grad) accumulate(*self.inputs[k], self.grad.data());
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out.data()[i] = a.value().data()[i] - b.value().data()[i];
  }
  return make_result(std::move(out), {a, b}, [](Node& self) {
    if (self.inputs[0]->requires_grad) accumulate(*self.inputs[0], self.grad.data());
    if (self.inputs[1]->requires_grad) {
      float* g = self.inputs[1]->ensure_grad().data();
      for (std::size_t i = 0; i < self.grad.numel(); ++i) g[i] -= self.grad.data()[i];
    }
  });
}

Var scale(const Var& a, float factor) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out.data()[i] = a.value().data()[i] * factor;
  }
  return make_result(std::move(out), {a}, [factor](Node& self) {
    Node& an = *self.inputs[0];
    if (!an.requires_grad) return;
    float* g = an.ensure_grad().data();
    for (std::size_t i = 0; i < self.grad.numel(); ++i) g[i] += self.grad.data()[i] * factor;
  });
}

Var mean(const Var& x) {
  double acc = 0.0;
  for (float v : x.value().span()) acc += v;
  const std::size_t n = x.value().numel();
  return make_result(Tensor::scalar(static_cast<float>(acc / static_cast<double>(n))), {x},
                     [n](Node& self) {
                       Node& xn = *self.inputs[0];
                       if (!xn.requires_grad) return;
                       const float g = self.grad.data()[0] / static_cast<float>(n);
                       float* gx = xn.ensure_grad().data();
                       for (std::size_t i = 0; i < n; ++i) gx[i] += g;
                     });
}

Var spatial_mean(const Var& x) {
  const Shape s = x.shape();
  const std::size_t plane = s.plane();
  Tensor out({s.n, s.c, 1, 1});
  for (std::size_t k = 0; k < out.numel(); ++k) {
    double acc = 0.0;
    const float* p = x.value().data() + k * plane;
    for (std::size_t i = 0; i < plane; ++i) acc += p[i];
    out.data()[k] = static_cast<float>(acc / static_cast<double>(plane));
  }
  return make_result(std::move(out), {x}, [plane](Node& self) {
    Node& xn = *self.inputs[0];
    if (!xn.requires_grad) return;
    float* gx = xn.ensure_grad().data();
    for (std::size_t k = 0; k < self.grad.numel(); ++k) {
      const float g = self.grad.data()[k] / static_cast<float>(plane);
      for (std::size_t i = 0; i < plane; ++i) gx[k * plane + i] += g;
    }
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  const int features = xs.c * xs.h * xs.w;
  if (ws.c * ws.h * ws.w != features) {
    throw ShapeError("linear: input " + xs.str() + " incompatible with weight " + ws.str());
  }
  const int outputs = ws.n;
  check_bias(bias, outputs, "linear");
  Tensor out({xs.n, outputs, 1, 1});
  ConstMapMat xm(x.value().data(), xs.n, features);
  ConstMapMat wm(weight.value().data(), outputs, features);
  MapMat om(out.data(), xs.n, outputs);
  om.noalias() = xm * wm.transpose();
  if (bias.defined()) add_bias(out, bias.value());
  return make_result(std::move(out), {x, weight, bias}, [features, outputs](Node& self) {
    Node& xn = *self.inputs[0];
    Node& wn = *self.inputs[1];
    Node& bn = *self.inputs[2];
    const int batch = xn.value.shape().n;
    ConstMapMat gy(self.grad.data(), batch, outputs);
    if (wn.requires_grad) {
      MapMat gw(wn.ensure_grad().data(), outputs, features);
      ConstMapMat xm(xn.value.data(), batch, features);
      gw.noalias() += gy.transpose() * xm;
    }
    if (bn.requires_grad) bias_grad(bn, self.grad);
    if (xn.requires_grad) {
      MapMat gx(xn.ensure_grad().data(), batch, features);
      ConstMapMat wm(wn.value.data(), outputs, features);
      gx.noalias() += gy * wm;
    }
  });
}

}  // namespace gesturegan::nn
