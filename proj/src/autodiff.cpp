// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "bsrnn/autodiff.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace bsrnn::ag {
namespace {

using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRow = Eigen::Map<RowMat>;
using CMapRow = Eigen::Map<const RowMat>;

thread_local bool g_grad_enabled = true;

[[noreturn]] void fail(const std::string& op, const std::string& why) {
  throw std::invalid_argument(op + ": " + why);
}

void need(bool cond, const char* op, const char* why) {
  if (!cond) fail(op, why);
}

// Central node factory: ops run through here so detaching under NoGradGuard
// stays in one place.
Var make(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> pullback) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool track = g_grad_enabled;
  if (track) {
    bool any = false;
    for (const auto& in : inputs) any = any || (in && in->requires_grad);
    track = any;
  }
  if (track) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->pullback = std::move(pullback);
  }
  return node;
}

CMapRow map2d(const Tensor& t) {
  return CMapRow(t.data(), t.dim(0), t.dim(1));
}

MapRow map2d(Tensor& t) {
  return MapRow(t.data(), t.dim(0), t.dim(1));
}

}  // namespace

Tensor& Node::ensure_grad() {
  if (grad.numel() != value.numel()) grad = Tensor(value.shape());
  return grad;
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool NoGradGuard::grad_enabled() { return g_grad_enabled; }

Var constant(Tensor v) {
  auto node = std::make_shared<Node>();
  node->value = std::move(v);
  return node;
}

Var leaf(Tensor v) {
  auto node = std::make_shared<Node>();
  node->value = std::move(v);
  node->requires_grad = true;
  return node;
}

Var add(const Var& a, const Var& b) {
  need(a->value.same_shape(b->value), "add", "shape mismatch");
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = a->value.data()[i] + b->value.data()[i];
  return make(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) {
      Tensor& ga = a->ensure_grad();
      for (int64_t i = 0; i < n.grad.numel(); ++i) ga.data()[i] += n.grad.data()[i];
    }
    if (b->requires_grad) {
      Tensor& gb = b->ensure_grad();
      for (int64_t i = 0; i < n.grad.numel(); ++i) gb.data()[i] += n.grad.data()[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  need(a->value.same_shape(b->value), "sub", "shape mismatch");
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = a->value.data()[i] - b->value.data()[i];
  return make(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) {
      Tensor& ga = a->ensure_grad();
      for (int64_t i = 0; i < n.grad.numel(); ++i) ga.data()[i] += n.grad.data()[i];
    }
    if (b->requires_grad) {
      Tensor& gb = b->ensure_grad();
      for (int64_t i = 0; i < n.grad.numel(); ++i) gb.data()[i] -= n.grad.data()[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  need(a->value.same_shape(b->value), "mul", "shape mismatch");
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = a->value.data()[i] * b->value.data()[i];
  return make(std::move(out), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) {
      Tensor& ga = a->ensure_grad();
      for (int64_t i = 0; i < n.grad.numel(); ++i)
        ga.data()[i] += n.grad.data()[i] * b->value.data()[i];
    }
    if (b->requires_grad) {
      Tensor& gb = b->ensure_grad();
      for (int64_t i = 0; i < n.grad.numel(); ++i)
        gb.data()[i] += n.grad.data()[i] * a->value.data()[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = a->value.data()[i] * s;
  return make(std::move(out), {a}, [a, s](Node& n) {
    Tensor& ga = a->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i) ga.data()[i] += n.grad.data()[i] * s;
  });
}

Var affine(const Var& W, const Var& x, const Var& b) {
  need(W->value.rank() == 2 && x->value.rank() == 2, "affine", "W and x must be 2D");
  need(W->value.dim(1) == x->value.dim(0), "affine", "inner dims differ");
  const int64_t m = W->value.dim(0), n = x->value.dim(1);
  if (b) need(b->value.rank() == 1 && b->value.dim(0) == m, "affine", "bias shape");

  Tensor out({m, n});
  map2d(out) = map2d(W->value) * map2d(x->value);
  if (b) {
    MapRow o = map2d(out);
    for (int64_t i = 0; i < m; ++i) o.row(i).array() += b->value.data()[i];
  }
  std::vector<Var> ins = {W, x};
  if (b) ins.push_back(b);
  return make(std::move(out), std::move(ins), [W, x, b](Node& n_) {
    CMapRow g(n_.grad.data(), n_.grad.dim(0), n_.grad.dim(1));
    if (W->requires_grad) map2d(W->ensure_grad()) += g * map2d(x->value).transpose();
    if (x->requires_grad) map2d(x->ensure_grad()) += map2d(W->value).transpose() * g;
    if (b && b->requires_grad) {
      Tensor& gb = b->ensure_grad();
      for (int64_t i = 0; i < g.rows(); ++i) gb.data()[i] += g.row(i).sum();
    }
  });
}

Var matmul(const Var& a, const Var& b) {
  return affine(a, b, nullptr);
}

Var bmm(const Var& a, const Var& b, bool trans_a, bool trans_b) {
  need(a->value.rank() == 3 && b->value.rank() == 3, "bmm", "inputs must be 3D");
  need(a->value.dim(0) == b->value.dim(0), "bmm", "batch dims differ");
  const int64_t B = a->value.dim(0);
  const int64_t m = trans_a ? a->value.dim(2) : a->value.dim(1);
  const int64_t ka = trans_a ? a->value.dim(1) : a->value.dim(2);
  const int64_t kb = trans_b ? b->value.dim(2) : b->value.dim(1);
  const int64_t n = trans_b ? b->value.dim(1) : b->value.dim(2);
  need(ka == kb, "bmm", "inner dims differ");

  const int64_t sa = a->value.dim(1) * a->value.dim(2);
  const int64_t sb = b->value.dim(1) * b->value.dim(2);
  Tensor out({B, m, n});
  for (int64_t i = 0; i < B; ++i) {
    CMapRow A(a->value.data() + i * sa, a->value.dim(1), a->value.dim(2));
    CMapRow Bm(b->value.data() + i * sb, b->value.dim(1), b->value.dim(2));
    MapRow O(out.data() + i * m * n, m, n);
    if (!trans_a && !trans_b) O = A * Bm;
    else if (trans_a && !trans_b) O = A.transpose() * Bm;
    else if (!trans_a && trans_b) O = A * Bm.transpose();
    else O = A.transpose() * Bm.transpose();
  }
  return make(std::move(out), {a, b}, [a, b, trans_a, trans_b, B, m, n, sa, sb](Node& node) {
    for (int64_t i = 0; i < B; ++i) {
      CMapRow G(node.grad.data() + i * m * n, m, n);
      CMapRow A(a->value.data() + i * sa, a->value.dim(1), a->value.dim(2));
      CMapRow Bm(b->value.data() + i * sb, b->value.dim(1), b->value.dim(2));
      if (a->requires_grad) {
        MapRow GA(a->ensure_grad().data() + i * sa, a->value.dim(1), a->value.dim(2));
        Mat d = trans_b ? Mat(G * Bm) : Mat(G * Bm.transpose());
        GA += trans_a ? d.transpose() : d;
      }
      if (b->requires_grad) {
        MapRow GB(b->ensure_grad().data() + i * sb, b->value.dim(1), b->value.dim(2));
        Mat d = trans_a ? Mat(A * G) : Mat(A.transpose() * G);
        GB += trans_b ? d.transpose() : d;
      }
    }
  });
}

Var vtanh(const Var& a) {
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = std::tanh(a->value.data()[i]);
  return make(std::move(out), {a}, [a](Node& n) {
    Tensor& ga = a->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i) {
      const double y = n.value.data()[i];
      ga.data()[i] += n.grad.data()[i] * (1.0 - y * y);
    }
  });
}

Var vsigmoid(const Var& a) {
  Tensor out(a->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = 1.0 / (1.0 + std::exp(-a->value.data()[i]));
  return make(std::move(out), {a}, [a](Node& n) {
    Tensor& ga = a->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i) {
      const double y = n.value.data()[i];
      ga.data()[i] += n.grad.data()[i] * y * (1.0 - y);
    }
  });
}

Var prelu(const Var& x, const Var& alpha) {
  need(alpha->value.numel() == 1, "prelu", "alpha must hold one value");
  const double al = alpha->value.data()[0];
  Tensor out(x->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) {
    const double v = x->value.data()[i];
    out.data()[i] = v >= 0.0 ? v : al * v;
  }
  return make(std::move(out), {x, alpha}, [x, alpha](Node& n) {
    const double al = alpha->value.data()[0];
    double dalpha = 0.0;
    Tensor* gx = x->requires_grad ? &x->ensure_grad() : nullptr;
    for (int64_t i = 0; i < n.grad.numel(); ++i) {
      const double v = x->value.data()[i];
      const double g = n.grad.data()[i];
      if (gx) gx->data()[i] += v >= 0.0 ? g : al * g;
      if (v < 0.0) dalpha += g * v;
    }
    if (alpha->requires_grad) alpha->ensure_grad().data()[0] += dalpha;
  });
}

Var softmax_lastdim(const Var& x) {
  need(x->value.rank() == 2, "softmax", "input must be 2D");
  const int64_t rows = x->value.dim(0), cols = x->value.dim(1);
  Tensor out(x->value.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const double* in = x->value.data() + r * cols;
    double* o = out.data() + r * cols;
    double mx = in[0];
    for (int64_t c = 1; c < cols; ++c) mx = std::max(mx, in[c]);
    double z = 0.0;
    for (int64_t c = 0; c < cols; ++c) z += (o[c] = std::exp(in[c] - mx));
    for (int64_t c = 0; c < cols; ++c) o[c] /= z;
  }
  return make(std::move(out), {x}, [x, rows, cols](Node& n) {
    Tensor& gx = x->ensure_grad();
    for (int64_t r = 0; r < rows; ++r) {
      const double* y = n.value.data() + r * cols;
      const double* g = n.grad.data() + r * cols;
      double dot = 0.0;
      for (int64_t c = 0; c < cols; ++c) dot += y[c] * g[c];
      double* out_g = gx.data() + r * cols;
      for (int64_t c = 0; c < cols; ++c) out_g[c] += y[c] * (g[c] - dot);
    }
  });
}

namespace {

// outer/inner extents around a concatenation or slice axis.
void axis_extents(const Tensor& t, int dim, int64_t* outer, int64_t* inner) {
  *outer = 1;
  *inner = 1;
  for (int d = 0; d < dim; ++d) *outer *= t.dim(d);
  for (int d = dim + 1; d < t.rank(); ++d) *inner *= t.dim(d);
}

}  // namespace

Var concat(const std::vector<Var>& parts, int dim) {
  need(!parts.empty(), "concat", "needs at least one input");
  const Tensor& first = parts[0]->value;
  need(dim >= 0 && dim < first.rank(), "concat", "axis out of range");
  int64_t total = 0;
  for (const auto& p : parts) {
    need(p->value.rank() == first.rank(), "concat", "rank mismatch");
    for (int d = 0; d < first.rank(); ++d)
      if (d != dim) need(p->value.dim(d) == first.dim(d), "concat", "off-axis dims differ");
    total += p->value.dim(dim);
  }
  std::vector<int64_t> shape = first.shape();
  shape[dim] = total;
  Tensor out(shape);

  int64_t outer, inner;
  axis_extents(out, dim, &outer, &inner);
  int64_t offset = 0;
  for (const auto& p : parts) {
    const int64_t w = p->value.dim(dim);
    for (int64_t o = 0; o < outer; ++o)
      std::copy_n(p->value.data() + o * w * inner, w * inner,
                  out.data() + (o * total + offset) * inner);
    offset += w;
  }
  return make(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
              [parts, dim, outer, inner, total](Node& n) {
                int64_t offset = 0;
                for (const auto& p : parts) {
                  const int64_t w = p->value.dim(dim);
                  if (p->requires_grad) {
                    Tensor& gp = p->ensure_grad();
                    for (int64_t o = 0; o < outer; ++o) {
                      const double* src = n.grad.data() + (o * total + offset) * inner;
                      double* dst = gp.data() + o * w * inner;
                      for (int64_t i = 0; i < w * inner; ++i) dst[i] += src[i];
                    }
                  }
                  offset += w;
                }
              });
}

Var slice(const Var& x, int dim, int64_t start, int64_t len) {
  need(dim >= 0 && dim < x->value.rank(), "slice", "axis out of range");
  need(start >= 0 && len >= 1 && start + len <= x->value.dim(dim), "slice", "range out of bounds");
  std::vector<int64_t> shape = x->value.shape();
  const int64_t full = shape[dim];
  shape[dim] = len;
  Tensor out(shape);
  int64_t outer, inner;
  axis_extents(x->value, dim, &outer, &inner);
  for (int64_t o = 0; o < outer; ++o)
    std::copy_n(x->value.data() + (o * full + start) * inner, len * inner,
                out.data() + o * len * inner);
  return make(std::move(out), {x}, [x, start, len, outer, inner, full](Node& n) {
    Tensor& gx = x->ensure_grad();
    for (int64_t o = 0; o < outer; ++o) {
      const double* src = n.grad.data() + o * len * inner;
      double* dst = gx.data() + (o * full + start) * inner;
      for (int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
    }
  });
}

Var reshape(const Var& x, std::vector<int64_t> shape) {
  Tensor out(shape);
  need(out.numel() == x->value.numel(), "reshape", "element count changed");
  std::copy_n(x->value.data(), out.numel(), out.data());
  return make(std::move(out), {x}, [x](Node& n) {
    Tensor& gx = x->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i) gx.data()[i] += n.grad.data()[i];
  });
}

namespace {

// out[multi] = in[perm applied]; used forward and, with the inverse
// permutation, for the pullback.
Tensor permute_data(const Tensor& in, const std::vector<int>& perm) {
  const int r = in.rank();
  std::vector<int64_t> oshape(r);
  for (int d = 0; d < r; ++d) oshape[d] = in.dim(perm[d]);
  Tensor out(oshape);

  std::vector<int64_t> istrides(r, 1), ostrides(r, 1);
  for (int d = r - 2; d >= 0; --d) istrides[d] = istrides[d + 1] * in.dim(d + 1);
  for (int d = r - 2; d >= 0; --d) ostrides[d] = ostrides[d + 1] * oshape[d + 1];

  std::vector<int64_t> idx(r, 0);
  for (int64_t flat = 0; flat < out.numel(); ++flat) {
    int64_t src = 0;
    for (int d = 0; d < r; ++d) src += idx[d] * istrides[perm[d]];
    out.data()[flat] = in.data()[src];
    for (int d = r - 1; d >= 0; --d) {
      if (++idx[d] < oshape[d]) break;
      idx[d] = 0;
    }
  }
  return out;
}

}  // namespace

Var permute(const Var& x, const std::vector<int>& perm) {
  const int r = x->value.rank();
  need(static_cast<int>(perm.size()) == r, "permute", "perm length != rank");
  std::vector<bool> seen(r, false);
  for (int p : perm) {
    need(p >= 0 && p < r && !seen[p], "permute", "invalid permutation");
    seen[p] = true;
  }
  Tensor out = permute_data(x->value, perm);
  return make(std::move(out), {x}, [x, perm, r](Node& n) {
    std::vector<int> inv(r);
    for (int d = 0; d < r; ++d) inv[perm[d]] = d;
    Tensor g = permute_data(n.grad, inv);
    Tensor& gx = x->ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) gx.data()[i] += g.data()[i];
  });
}

Var sum(const Var& x) {
  double s = 0.0;
  for (int64_t i = 0; i < x->value.numel(); ++i) s += x->value.data()[i];
  return make(Tensor::scalar(s), {x}, [x](Node& n) {
    const double g = n.grad.data()[0];
    Tensor& gx = x->ensure_grad();
    for (int64_t i = 0; i < gx.numel(); ++i) gx.data()[i] += g;
  });
}

Var l1(const Var& x) {
  double s = 0.0;
  for (int64_t i = 0; i < x->value.numel(); ++i) s += std::abs(x->value.data()[i]);
  return make(Tensor::scalar(s), {x}, [x](Node& n) {
    const double g = n.grad.data()[0];
    Tensor& gx = x->ensure_grad();
    for (int64_t i = 0; i < gx.numel(); ++i) {
      const double v = x->value.data()[i];
      gx.data()[i] += v > 0.0 ? g : (v < 0.0 ? -g : 0.0);
    }
  });
}

Var group_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  need(x->value.rank() == 3, "group_norm", "input must be [B,C,L]");
  const int64_t B = x->value.dim(0), C = x->value.dim(1), L = x->value.dim(2);
  need(gamma->value.rank() == 1 && gamma->value.dim(0) == C, "group_norm", "gamma shape");
  need(beta->value.rank() == 1 && beta->value.dim(0) == C, "group_norm", "beta shape");
  const int64_t M = C * L;

  Tensor out(x->value.shape());
  auto xhat = std::make_shared<Tensor>(x->value.shape());
  auto inv_std = std::make_shared<std::vector<double>>(B);
  for (int64_t b = 0; b < B; ++b) {
    const double* in = x->value.data() + b * M;
    double mean = 0.0;
    for (int64_t i = 0; i < M; ++i) mean += in[i];
    mean /= M;
    double var = 0.0;
    for (int64_t i = 0; i < M; ++i) var += (in[i] - mean) * (in[i] - mean);
    var /= M;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[b] = is;
    double* xh = xhat->data() + b * M;
    double* o = out.data() + b * M;
    for (int64_t c = 0; c < C; ++c) {
      const double g = gamma->value.data()[c], be = beta->value.data()[c];
      for (int64_t l = 0; l < L; ++l) {
        const double v = (in[c * L + l] - mean) * is;
        xh[c * L + l] = v;
        o[c * L + l] = g * v + be;
      }
    }
  }
  return make(std::move(out), {x, gamma, beta},
              [x, gamma, beta, xhat, inv_std, B, C, L, M](Node& n) {
                for (int64_t b = 0; b < B; ++b) {
                  const double* g = n.grad.data() + b * M;
                  const double* xh = xhat->data() + b * M;
                  if (gamma->requires_grad) {
                    Tensor& gg = gamma->ensure_grad();
                    for (int64_t c = 0; c < C; ++c) {
                      double s = 0.0;
                      for (int64_t l = 0; l < L; ++l) s += g[c * L + l] * xh[c * L + l];
                      gg.data()[c] += s;
                    }
                  }
                  if (beta->requires_grad) {
                    Tensor& gb = beta->ensure_grad();
                    for (int64_t c = 0; c < C; ++c) {
                      double s = 0.0;
                      for (int64_t l = 0; l < L; ++l) s += g[c * L + l];
                      gb.data()[c] += s;
                    }
                  }
                  if (x->requires_grad) {
                    double s1 = 0.0, s2 = 0.0;
                    for (int64_t c = 0; c < C; ++c) {
                      const double ga = gamma->value.data()[c];
                      for (int64_t l = 0; l < L; ++l) {
                        const double dxh = g[c * L + l] * ga;
                        s1 += dxh;
                        s2 += dxh * xh[c * L + l];
                      }
                    }
                    Tensor& gx = x->ensure_grad();
                    double* gxp = gx.data() + b * M;
                    const double is = (*inv_std)[b];
                    for (int64_t c = 0; c < C; ++c) {
                      const double ga = gamma->value.data()[c];
                      for (int64_t l = 0; l < L; ++l) {
                        const double dxh = g[c * L + l] * ga;
                        gxp[c * L + l] +=
                            is * (dxh - (s1 + xh[c * L + l] * s2) / static_cast<double>(M));
                      }
                    }
                  }
                }
              });
}

namespace {

struct LstmTrace {
  // Per processing step: activated gates [4H x B], cell and hidden [H x B].
  std::vector<Mat> gates, cs, hs;
};

// One direction of the recurrence; ord maps processing step to time index.
void lstm_forward_dir(const Tensor& x, const Tensor& w_ih, const Tensor& w_hh,
                      const Tensor& b_ih, const Tensor& b_hh, const std::vector<int64_t>& ord,
                      LstmTrace* trace, Tensor* y, int64_t out_col_offset) {
  const int64_t T = x.dim(0), B = x.dim(1), I = x.dim(2);
  const int64_t H = w_hh.dim(1);
  CMapRow Wih(w_ih.data(), 4 * H, I);
  CMapRow Whh(w_hh.data(), 4 * H, H);

  Eigen::VectorXd bias(4 * H);
  for (int64_t i = 0; i < 4 * H; ++i) bias(i) = b_ih.data()[i] + b_hh.data()[i];

  Mat h = Mat::Zero(H, B), c = Mat::Zero(H, B), Xt(I, B);
  trace->gates.resize(T);
  trace->cs.resize(T);
  trace->hs.resize(T);
  for (int64_t s = 0; s < T; ++s) {
    const int64_t t = ord[s];
    for (int64_t b = 0; b < B; ++b)
      for (int64_t i = 0; i < I; ++i) Xt(i, b) = x.data()[(t * B + b) * I + i];
    Mat G = (Wih * Xt + Whh * h).colwise() + bias;
    for (int64_t b = 0; b < B; ++b)
      for (int64_t j = 0; j < H; ++j) {
        const double ig = 1.0 / (1.0 + std::exp(-G(j, b)));
        const double fg = 1.0 / (1.0 + std::exp(-G(H + j, b)));
        const double gg = std::tanh(G(2 * H + j, b));
        const double og = 1.0 / (1.0 + std::exp(-G(3 * H + j, b)));
        G(j, b) = ig;
        G(H + j, b) = fg;
        G(2 * H + j, b) = gg;
        G(3 * H + j, b) = og;
        c(j, b) = fg * c(j, b) + ig * gg;
        h(j, b) = og * std::tanh(c(j, b));
      }
    trace->gates[s] = G;
    trace->cs[s] = c;
    trace->hs[s] = h;
    for (int64_t b = 0; b < B; ++b)
      for (int64_t j = 0; j < H; ++j)
        y->data()[(t * B + b) * (2 * H) + out_col_offset + j] = h(j, b);
  }
}

void lstm_backward_dir(const Tensor& x, const Var& w_ih, const Var& w_hh, const Var& b_ih,
                       const Var& b_hh, const Var& xin, const std::vector<int64_t>& ord,
                       const LstmTrace& trace, const Tensor& gy, int64_t out_col_offset) {
  const int64_t T = x.dim(0), B = x.dim(1), I = x.dim(2);
  const int64_t H = w_hh->value.dim(1);
  CMapRow Wih(w_ih->value.data(), 4 * H, I);
  CMapRow Whh(w_hh->value.data(), 4 * H, H);

  Mat dG_next = Mat::Zero(4 * H, B);
  Mat dc_carry = Mat::Zero(H, B);
  Mat dWih = Mat::Zero(4 * H, I), dWhh = Mat::Zero(4 * H, H);
  Eigen::VectorXd db = Eigen::VectorXd::Zero(4 * H);
  Mat Xt(I, B), dG(4 * H, B), dh(H, B);

  for (int64_t s = T - 1; s >= 0; --s) {
    const int64_t t = ord[s];
    const Mat& G = trace.gates[s];
    const Mat& c = trace.cs[s];

    for (int64_t b = 0; b < B; ++b)
      for (int64_t j = 0; j < H; ++j)
        dh(j, b) = gy.data()[(t * B + b) * (2 * H) + out_col_offset + j];
    if (s < T - 1) dh.noalias() += Whh.transpose() * dG_next;

    for (int64_t b = 0; b < B; ++b)
      for (int64_t j = 0; j < H; ++j) {
        const double ig = G(j, b), fg = G(H + j, b), gg = G(2 * H + j, b), og = G(3 * H + j, b);
        const double tc = std::tanh(c(j, b));
        const double dc = dh(j, b) * og * (1.0 - tc * tc) + dc_carry(j, b);
        const double cprev = s > 0 ? trace.cs[s - 1](j, b) : 0.0;
        dG(j, b) = dc * gg * ig * (1.0 - ig);
        dG(H + j, b) = dc * cprev * fg * (1.0 - fg);
        dG(2 * H + j, b) = dc * ig * (1.0 - gg * gg);
        dG(3 * H + j, b) = dh(j, b) * tc * og * (1.0 - og);
        dc_carry(j, b) = dc * fg;
      }

    for (int64_t b = 0; b < B; ++b)
      for (int64_t i = 0; i < I; ++i) Xt(i, b) = x.data()[(t * B + b) * I + i];
    dWih.noalias() += dG * Xt.transpose();
    if (s > 0) dWhh.noalias() += dG * trace.hs[s - 1].transpose();
    db += dG.rowwise().sum();

    if (xin->requires_grad) {
      Mat dX = Wih.transpose() * dG;
      Tensor& gx = xin->ensure_grad();
      for (int64_t b = 0; b < B; ++b)
        for (int64_t i = 0; i < I; ++i) gx.data()[(t * B + b) * I + i] += dX(i, b);
    }
    dG_next = dG;
  }

  if (w_ih->requires_grad) MapRow(w_ih->ensure_grad().data(), 4 * H, I) += dWih;
  if (w_hh->requires_grad) MapRow(w_hh->ensure_grad().data(), 4 * H, H) += dWhh;
  if (b_ih->requires_grad)
    for (int64_t i = 0; i < 4 * H; ++i) b_ih->ensure_grad().data()[i] += db(i);
  if (b_hh->requires_grad)
    for (int64_t i = 0; i < 4 * H; ++i) b_hh->ensure_grad().data()[i] += db(i);
}

}  // namespace

Var bilstm(const Var& x, const Var& w_ih_f, const Var& w_hh_f, const Var& b_ih_f,
           const Var& b_hh_f, const Var& w_ih_b, const Var& w_hh_b, const Var& b_ih_b,
           const Var& b_hh_b) {
  need(x->value.rank() == 3, "bilstm", "input must be [T,B,I]");
  const int64_t T = x->value.dim(0), I = x->value.dim(2);
  need(w_ih_f->value.rank() == 2 && w_ih_f->value.dim(1) == I, "bilstm", "w_ih shape");
  const int64_t H = w_hh_f->value.dim(1);
  need(w_ih_f->value.dim(0) == 4 * H && w_hh_f->value.dim(0) == 4 * H, "bilstm", "gate rows");
  need(w_ih_b->value.same_shape(w_ih_f->value) && w_hh_b->value.same_shape(w_hh_f->value),
       "bilstm", "direction shapes differ");
  need(b_ih_f->value.numel() == 4 * H && b_hh_f->value.numel() == 4 * H &&
           b_ih_b->value.numel() == 4 * H && b_hh_b->value.numel() == 4 * H,
       "bilstm", "bias shape");

  std::vector<int64_t> fwd(T), bwd(T);
  for (int64_t t = 0; t < T; ++t) {
    fwd[t] = t;
    bwd[t] = T - 1 - t;
  }

  Tensor y({T, x->value.dim(1), 2 * H});
  auto tr_f = std::make_shared<LstmTrace>();
  auto tr_b = std::make_shared<LstmTrace>();
  lstm_forward_dir(x->value, w_ih_f->value, w_hh_f->value, b_ih_f->value, b_hh_f->value, fwd,
                   tr_f.get(), &y, 0);
  lstm_forward_dir(x->value, w_ih_b->value, w_hh_b->value, b_ih_b->value, b_hh_b->value, bwd,
                   tr_b.get(), &y, H);

  return make(std::move(y),
              {x, w_ih_f, w_hh_f, b_ih_f, b_hh_f, w_ih_b, w_hh_b, b_ih_b, b_hh_b},
              [x, w_ih_f, w_hh_f, b_ih_f, b_hh_f, w_ih_b, w_hh_b, b_ih_b, b_hh_b, tr_f, tr_b,
               fwd, bwd](Node& n) {
                lstm_backward_dir(x->value, w_ih_f, w_hh_f, b_ih_f, b_hh_f, x, fwd, *tr_f,
                                  n.grad, 0);
                lstm_backward_dir(x->value, w_ih_b, w_hh_b, b_ih_b, b_hh_b, x, bwd, *tr_b,
                                  n.grad, w_hh_f->value.dim(1));
              });
}

Var conv1d(const Var& x, const Var& w, const Var& b, int dilation) {
  need(x->value.rank() == 3, "conv1d", "input must be [B,Cin,L]");
  need(w->value.rank() == 3, "conv1d", "weight must be [Cout,Cin,K]");
  need(dilation >= 1, "conv1d", "dilation must be >= 1");
  const int64_t B = x->value.dim(0), Cin = x->value.dim(1), L = x->value.dim(2);
  const int64_t Cout = w->value.dim(0), K = w->value.dim(2);
  need(w->value.dim(1) == Cin, "conv1d", "channel mismatch");
  if (b) need(b->value.numel() == Cout, "conv1d", "bias shape");
  const int64_t left = dilation * (K - 1) / 2;

  Tensor out({B, Cout, L});
  CMapRow Wm(w->value.data(), Cout, Cin * K);
  Mat col(Cin * K, L);
  for (int64_t bb = 0; bb < B; ++bb) {
    const double* xp = x->value.data() + bb * Cin * L;
    for (int64_t ci = 0; ci < Cin; ++ci)
      for (int64_t k = 0; k < K; ++k) {
        const int64_t shift = k * dilation - left;
        for (int64_t l = 0; l < L; ++l) {
          const int64_t m = l + shift;
          col(ci * K + k, l) = (m >= 0 && m < L) ? xp[ci * L + m] : 0.0;
        }
      }
    MapRow O(out.data() + bb * Cout * L, Cout, L);
    O = Wm * col;
    if (b)
      for (int64_t co = 0; co < Cout; ++co) O.row(co).array() += b->value.data()[co];
  }

  std::vector<Var> ins = {x, w};
  if (b) ins.push_back(b);
  return make(std::move(out), std::move(ins),
              [x, w, b, dilation, B, Cin, L, Cout, K, left](Node& n) {
                Mat col(Cin * K, L);
                Mat dW = Mat::Zero(Cout, Cin * K);
                Eigen::VectorXd db = Eigen::VectorXd::Zero(Cout);
                CMapRow Wm(w->value.data(), Cout, Cin * K);
                for (int64_t bb = 0; bb < B; ++bb) {
                  CMapRow G(n.grad.data() + bb * Cout * L, Cout, L);
                  for (int64_t ci = 0; ci < Cin; ++ci)
                    for (int64_t k = 0; k < K; ++k) {
                      const int64_t shift = k * dilation - left;
                      const double* xp = x->value.data() + (bb * Cin + ci) * L;
                      for (int64_t l = 0; l < L; ++l) {
                        const int64_t m = l + shift;
                        col(ci * K + k, l) = (m >= 0 && m < L) ? xp[m] : 0.0;
                      }
                    }
                  if (w->requires_grad) dW.noalias() += G * col.transpose();
                  if (b && b->requires_grad) db += G.rowwise().sum();
                  if (x->requires_grad) {
                    Mat dcol = Wm.transpose() * G;
                    Tensor& gx = x->ensure_grad();
                    for (int64_t ci = 0; ci < Cin; ++ci)
                      for (int64_t k = 0; k < K; ++k) {
                        const int64_t shift = k * dilation - left;
                        double* gxp = gx.data() + (bb * Cin + ci) * L;
                        for (int64_t l = 0; l < L; ++l) {
                          const int64_t m = l + shift;
                          if (m >= 0 && m < L) gxp[m] += dcol(ci * K + k, l);
                        }
                      }
                  }
                }
                if (w->requires_grad) MapRow(w->ensure_grad().data(), Cout, Cin * K) += dW;
                if (b && b->requires_grad)
                  for (int64_t co = 0; co < Cout; ++co) b->ensure_grad().data()[co] += db(co);
              });
}

Var istft_op(const Var& spec, const FrameParams& fp, int sample_rate, int64_t target_len) {
  need(spec->value.rank() == 3, "istft_op", "spec must be [C,2F,T]");
  const int64_t C = spec->value.dim(0);
  const int64_t F2 = spec->value.dim(1);
  const int64_t T = spec->value.dim(2);
  need(F2 % 2 == 0, "istft_op", "real/imag rows must pair up");
  const int F = static_cast<int>(F2 / 2);
  need(F == fp.window_size / 2 + 1, "istft_op", "bin count does not match window");

  ComplexSpectrogram cs(fp, static_cast<int>(C), F, T, sample_rate);
  for (int c = 0; c < C; ++c)
    for (int f = 0; f < F; ++f)
      for (int64_t t = 0; t < T; ++t)
        cs.at(c, f, t) = {spec->value.at(c, f, t), spec->value.at(c, F + f, t)};
  Waveform wav = istft(cs, target_len);

  Tensor out({C, target_len});
  std::copy_n(wav.samples.data(), out.numel(), out.data());
  return make(std::move(out), {spec}, [spec, fp, sample_rate, C, F, T, target_len](Node& n) {
    Waveform g(static_cast<int>(C), target_len, sample_rate);
    std::copy_n(n.grad.data(), n.grad.numel(), g.samples.data());
    ComplexSpectrogram gs = istft_adjoint(g, fp, static_cast<int>(C), F, T, sample_rate);
    Tensor& gspec = spec->ensure_grad();
    for (int c = 0; c < C; ++c)
      for (int f = 0; f < F; ++f)
        for (int64_t t = 0; t < T; ++t) {
          gspec.at(c, f, t) += gs.at(c, f, t).real();
          gspec.at(c, F + f, t) += gs.at(c, f, t).imag();
        }
  });
}

void backward(const Var& root) {
  if (!root) throw std::invalid_argument("backward: null root");
  if (root->value.numel() != 1) throw std::invalid_argument("backward: root must be scalar");
  if (!root->requires_grad) throw std::invalid_argument("backward: root is detached");

  // Iterative post-order DFS; pullbacks then run in reverse topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack = {{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child && child->requires_grad && !visited.count(child)) {
        visited.insert(child);
        stack.push_back({child, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad().data()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->pullback && node->grad.numel() == node->value.numel()) node->pullback(*node);
  }
}

}  // namespace bsrnn::ag
