// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "bsrnn/model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <iostream>
#include <stdexcept>

namespace bsrnn {

using ag::Var;

StereoMode stereo_mode_from_string(const std::string& s) {
  if (s == "mono-per-channel") return StereoMode::kMonoPerChannel;
  if (s == "naive-stereo") return StereoMode::kNaiveStereo;
  if (s == "tac") return StereoMode::kTac;
  throw std::invalid_argument("unknown stereo_mode: " + s);
}

TacActivation tac_activation_from_string(const std::string& s) {
  if (s == "tanh") return TacActivation::kTanh;
  if (s == "prelu") return TacActivation::kPrelu;
  throw std::invalid_argument("unknown tac_activation: " + s);
}

BlockKind block_kind_from_string(const std::string& s) {
  if (s == "recurrent") return BlockKind::kRecurrent;
  if (s == "dilated-conv") return BlockKind::kDilatedConv;
  throw std::invalid_argument("unknown block_kind: " + s);
}

std::string to_string(StereoMode m) {
  switch (m) {
    case StereoMode::kMonoPerChannel: return "mono-per-channel";
    case StereoMode::kNaiveStereo: return "naive-stereo";
    case StereoMode::kTac: return "tac";
  }
  return "?";
}

std::string to_string(TacActivation a) {
  return a == TacActivation::kTanh ? "tanh" : "prelu";
}

std::string to_string(BlockKind k) {
  return k == BlockKind::kRecurrent ? "recurrent" : "dilated-conv";
}

void ModelConfig::validate() const {
  if (latent_dim < 1) throw std::invalid_argument("latent_dim must be >= 1");
  if (depth < 1) throw std::invalid_argument("depth must be >= 1");
  if (masker_factor < 1) throw std::invalid_argument("masker_factor must be >= 1");
  if (heads < 1) throw std::invalid_argument("heads must be >= 1");
  if (latent_dim % heads != 0) throw std::invalid_argument("latent_dim must divide by heads");
  if (attention_heads < 0 || attention_dim < 0)
    throw std::invalid_argument("attention dims must be non-negative");
  if (attention_heads > 0) {
    if (attention_dim < 1) throw std::invalid_argument("attention_dim must be >= 1 when enabled");
    if (latent_dim % attention_heads != 0)
      throw std::invalid_argument("latent_dim must divide by attention_heads");
  }
  if (block_kind == BlockKind::kDilatedConv) {
    if (conv_dilations.empty()) throw std::invalid_argument("conv_dilations must be non-empty");
    for (int d : conv_dilations)
      if (d < 1) throw std::invalid_argument("conv dilation must be >= 1");
    if (conv_kernel < 1 || conv_kernel % 2 == 0)
      throw std::invalid_argument("conv_kernel must be odd");
    if (conv_hidden_factor < 1) throw std::invalid_argument("conv_hidden_factor must be >= 1");
  }
  scheme.validate();
  if (frame_params.window_size < 2 || frame_params.window_size % 2 != 0)
    throw std::invalid_argument("window_size must be even");
  if (frame_params.hop < 1 || frame_params.hop > frame_params.window_size / 2)
    throw std::invalid_argument("hop must be in [1, window_size/2]");
  if (scheme.n_bins != frame_params.window_size / 2 + 1)
    throw std::invalid_argument("scheme bin count does not match frame params");
}

Var ParamStore::add(const std::string& name, Tensor init) {
  if (index_.count(name)) throw std::logic_error("duplicate parameter: " + name);
  index_[name] = entries_.size();
  entries_.emplace_back(name, ag::leaf(std::move(init)));
  return entries_.back().second;
}

const Var& ParamStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return entries_[it->second].second;
}

bool ParamStore::has(const std::string& name) const { return index_.count(name) > 0; }

int64_t ParamStore::total_size() const {
  int64_t total = 0;
  for (const auto& [name, var] : entries_) total += var->value.numel();
  return total;
}

void ParamStore::zero_grads() {
  for (auto& [name, var] : entries_) {
    var->ensure_grad();
    var->grad.fill(0.0);
  }
}

namespace {

Tensor glorot(int64_t fan_out, int64_t fan_in, std::vector<int64_t> shape, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(-limit, limit);
  return t;
}

Tensor glorot_dense(int64_t out, int64_t in, Rng& rng) {
  return glorot(out, in, {out, in}, rng);
}

// Recurrent kernel [4h, h]: each gate block is an orthogonal [h, h] matrix.
Tensor orthogonal_gates(int64_t h, Rng& rng) {
  Tensor t({4 * h, h});
  for (int g = 0; g < 4; ++g) {
    Eigen::MatrixXd m(h, h);
    for (int64_t i = 0; i < h; ++i)
      for (int64_t j = 0; j < h; ++j) m(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(h, h);
    Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int64_t j = 0; j < h; ++j)
      if (r(j, j) < 0) q.col(j) = -q.col(j);
    for (int64_t i = 0; i < h; ++i)
      for (int64_t j = 0; j < h; ++j) t.at(g * h + i, j) = q(i, j);
  }
  return t;
}

// Bias with the forget gate opened at construction.
Tensor lstm_bias(int64_t h, double forget) {
  Tensor t({4 * h});
  for (int64_t i = 0; i < h; ++i) t.data()[h + i] = forget;
  return t;
}

// [K*T] columns view of a latent [K, N, T] and back.
Var to2d(const Var& latent) {
  const int64_t K = latent->value.dim(0), N = latent->value.dim(1), T = latent->value.dim(2);
  return ag::reshape(ag::permute(latent, {1, 0, 2}), {N, K * T});
}

Var from2d(const Var& x2, int64_t K, int64_t T) {
  const int64_t N = x2->value.dim(0);
  return ag::permute(ag::reshape(x2, {N, K, T}), {1, 0, 2});
}

}  // namespace

SeparationModel::SeparationModel(ModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(mix_seed(seed, 0x6d6f64656cULL));

  const int64_t N = cfg_.latent_dim;
  const int64_t H = cfg_.heads;
  const int64_t mu = cfg_.masker_factor;
  const int cin = cfg_.stereo_mode == StereoMode::kNaiveStereo ? 2 : 1;
  const int mask_ch = cin;
  const int K = cfg_.scheme.num_bands();

  for (int k = 0; k < K; ++k) {
    const int64_t in = static_cast<int64_t>(cin) * 2 * cfg_.scheme.width(k);
    const std::string p = "bandsplit.k" + std::to_string(k) + ".";
    params_.add(p + "norm.gamma", Tensor({in}, 1.0));
    params_.add(p + "norm.beta", Tensor({in}));
    params_.add(p + "proj.w", glorot_dense(N, in, rng));
    params_.add(p + "proj.b", Tensor({N}));
  }

  for (int r = 0; r < cfg_.depth; ++r) {
    for (int axis = 0; axis < 2; ++axis) {
      const std::string p =
          "block" + std::to_string(r) + (axis == 0 ? ".seq." : ".band.");
      params_.add(p + "norm.gamma", Tensor({N}, 1.0));
      params_.add(p + "norm.beta", Tensor({N}));
      if (cfg_.block_kind == BlockKind::kRecurrent) {
        // Single-head blocks keep the wide 2N recurrent state; split heads
        // shrink both input and state to N/H.
        const int64_t in = H == 1 ? N : N / H;
        const int64_t h = H == 1 ? 2 * N : N / H;
        for (int64_t head = 0; head < H; ++head) {
          const std::string q = H == 1 ? p : p + "head" + std::to_string(head) + ".";
          for (const char* dir : {"f", "b"}) {
            params_.add(q + "lstm." + dir + ".w_ih", glorot_dense(4 * h, in, rng));
            params_.add(q + "lstm." + dir + ".w_hh", orthogonal_gates(h, rng));
            params_.add(q + "lstm." + dir + ".b_ih", lstm_bias(h, 1.0));
            params_.add(q + "lstm." + dir + ".b_hh", Tensor({4 * h}));
          }
          params_.add(q + "fc.w", glorot_dense(in, 2 * h, rng));
          params_.add(q + "fc.b", Tensor({in}));
        }
      } else {
        // conv0 expands 1x1, conv1..D run the dilated kernels, conv(D+1)
        // projects back 1x1; PReLU follows everything but the projection.
        const int64_t nh = N / H;
        const int64_t ch = static_cast<int64_t>(cfg_.conv_hidden_factor) * nh;
        const int64_t D = static_cast<int64_t>(cfg_.conv_dilations.size());
        const int64_t kk = cfg_.conv_kernel;
        for (int64_t head = 0; head < H; ++head) {
          const std::string q = H == 1 ? p : p + "head" + std::to_string(head) + ".";
          for (int64_t j = 0; j <= D + 1; ++j) {
            const int64_t ci = j == 0 ? nh : ch;
            const int64_t co = j == D + 1 ? nh : ch;
            const int64_t kj = (j == 0 || j == D + 1) ? 1 : kk;
            const std::string c = q + "conv" + std::to_string(j) + ".";
            params_.add(c + "w", glorot(co * kj, ci * kj, {co, ci, kj}, rng));
            params_.add(c + "b", Tensor({co}));
            if (j <= D) params_.add(c + "alpha", Tensor::scalar(0.25));
          }
        }
      }
      if (cfg_.attention_enabled()) {
        const int64_t E = cfg_.attention_dim;
        const int64_t nv = N / cfg_.attention_heads;
        params_.add(p + "attn.norm.gamma", Tensor({N}, 1.0));
        params_.add(p + "attn.norm.beta", Tensor({N}));
        for (int a = 0; a < cfg_.attention_heads; ++a) {
          const std::string q = p + "attn.head" + std::to_string(a) + ".";
          params_.add(q + "q.w", glorot_dense(E, N, rng));
          params_.add(q + "q.b", Tensor({E}));
          params_.add(q + "k.w", glorot_dense(E, N, rng));
          params_.add(q + "k.b", Tensor({E}));
          params_.add(q + "v.w", glorot_dense(nv, N, rng));
          params_.add(q + "v.b", Tensor({nv}));
        }
        params_.add(p + "attn.out.w", glorot_dense(N, N, rng));
        params_.add(p + "attn.out.b", Tensor({N}));
      }
    }
    if (cfg_.stereo_mode == StereoMode::kTac) {
      const std::string p = "tac" + std::to_string(r) + ".";
      params_.add(p + "w1", glorot_dense(3 * N, N, rng));
      params_.add(p + "b1", Tensor({3 * N}));
      params_.add(p + "w2", glorot_dense(3 * N, 3 * N, rng));
      params_.add(p + "b2", Tensor({3 * N}));
      params_.add(p + "w3", glorot_dense(N, 6 * N, rng));
      params_.add(p + "b3", Tensor({N}));
      if (cfg_.tac_activation == TacActivation::kPrelu) {
        params_.add(p + "a1", Tensor::scalar(0.25));
        params_.add(p + "a2", Tensor::scalar(0.25));
        params_.add(p + "a3", Tensor::scalar(0.25));
      }
    }
  }

  for (int k = 0; k < K; ++k) {
    const int64_t glu_out = 2 * static_cast<int64_t>(mask_ch) * 2 * cfg_.scheme.width(k);
    const std::string p = "masker.k" + std::to_string(k) + ".";
    params_.add(p + "norm.gamma", Tensor({N}, 1.0));
    params_.add(p + "norm.beta", Tensor({N}));
    params_.add(p + "fc0.w", glorot_dense(mu * N, N, rng));
    params_.add(p + "fc0.b", Tensor({mu * N}));
    params_.add(p + "fc1.w", glorot_dense(mu * N, mu * N, rng));
    params_.add(p + "fc1.b", Tensor({mu * N}));
    params_.add(p + "fc2.w", glorot_dense(glu_out, mu * N, rng));
    params_.add(p + "fc2.b", Tensor({glu_out}));
  }
}

Var SeparationModel::forward_bandsplit(const std::vector<Var>& bands) const {
  const int K = cfg_.scheme.num_bands();
  if (static_cast<int>(bands.size()) != K)
    throw std::invalid_argument("band count does not match scheme");
  const int cin = cfg_.stereo_mode == StereoMode::kNaiveStereo ? 2 : 1;

  std::vector<Var> rows;
  rows.reserve(K);
  for (int k = 0; k < K; ++k) {
    const int64_t w2 = static_cast<int64_t>(cin) * 2 * cfg_.scheme.width(k);
    const Var& b = bands[k];
    if (b->value.rank() != 3 || b->value.dim(0) != cin ||
        b->value.dim(1) != 2 * cfg_.scheme.width(k))
      throw std::invalid_argument("band " + std::to_string(k) + " input has wrong shape");
    const int64_t T = b->value.dim(2);
    const std::string p = "bandsplit.k" + std::to_string(k) + ".";
    Var flat = ag::reshape(b, {1, w2, T});
    Var normed = ag::group_norm(flat, params_.at(p + "norm.gamma"), params_.at(p + "norm.beta"));
    Var proj = ag::affine(params_.at(p + "proj.w"), ag::reshape(normed, {w2, T}),
                          params_.at(p + "proj.b"));
    rows.push_back(ag::reshape(proj, {1, cfg_.latent_dim, T}));
  }
  return ag::concat(rows, 0);
}

namespace {

// Recurrent or convolutional core on x3 [B, N, L], modeling along L.
Var block_core(const ModelConfig& cfg, const ParamStore& params, const std::string& prefix,
               const Var& x3) {
  const int64_t B = x3->value.dim(0), N = x3->value.dim(1), L = x3->value.dim(2);
  const int64_t H = cfg.heads;

  if (cfg.block_kind == BlockKind::kRecurrent) {
    auto run = [&](const Var& xin, const std::string& q) {
      // xin [B, n, L] -> sequence-major [L, B, n]
      Var seq = ag::permute(xin, {2, 0, 1});
      Var y = ag::bilstm(seq, params.at(q + "lstm.f.w_ih"), params.at(q + "lstm.f.w_hh"),
                         params.at(q + "lstm.f.b_ih"), params.at(q + "lstm.f.b_hh"),
                         params.at(q + "lstm.b.w_ih"), params.at(q + "lstm.b.w_hh"),
                         params.at(q + "lstm.b.b_ih"), params.at(q + "lstm.b.b_hh"));
      const int64_t h2 = y->value.dim(2);
      Var y2 = ag::reshape(ag::permute(y, {2, 0, 1}), {h2, L * B});
      Var f2 = ag::affine(params.at(q + "fc.w"), y2, params.at(q + "fc.b"));
      const int64_t n = f2->value.dim(0);
      // [n, L, B] -> [B, n, L]
      return ag::permute(ag::reshape(f2, {n, L, B}), {2, 0, 1});
    };
    if (H == 1) return run(x3, prefix);
    std::vector<Var> heads;
    const int64_t nh = N / H;
    for (int64_t head = 0; head < H; ++head)
      heads.push_back(run(ag::slice(x3, 1, head * nh, nh),
                          prefix + "head" + std::to_string(head) + "."));
    return ag::concat(heads, 1);
  }

  const int64_t D = static_cast<int64_t>(cfg.conv_dilations.size());
  auto run = [&](const Var& xin, const std::string& q) {
    Var cur = xin;
    for (int64_t j = 0; j <= D + 1; ++j) {
      const std::string c = q + "conv" + std::to_string(j) + ".";
      const int dil = (j >= 1 && j <= D) ? cfg.conv_dilations[static_cast<size_t>(j - 1)] : 1;
      cur = ag::conv1d(cur, params.at(c + "w"), params.at(c + "b"), dil);
      if (j <= D) cur = ag::prelu(cur, params.at(c + "alpha"));
    }
    return cur;
  };
  if (H == 1) return run(x3, prefix);
  std::vector<Var> heads;
  const int64_t nh = N / H;
  for (int64_t head = 0; head < H; ++head)
    heads.push_back(
        run(ag::slice(x3, 1, head * nh, nh), prefix + "head" + std::to_string(head) + "."));
  return ag::concat(heads, 1);
}

// Scaled dot-product refinement on x3 [B, N, L]; batched over B and heads.
Var attention_core(const ModelConfig& cfg, const ParamStore& params, const std::string& prefix,
                   const Var& x3) {
  const int64_t B = x3->value.dim(0), N = x3->value.dim(1), L = x3->value.dim(2);
  Var normed = ag::group_norm(x3, params.at(prefix + "attn.norm.gamma"),
                              params.at(prefix + "attn.norm.beta"));
  Var x2 = ag::reshape(ag::permute(normed, {1, 0, 2}), {N, B * L});

  auto batched = [&](const Var& v2) {
    const int64_t rows = v2->value.dim(0);
    return ag::permute(ag::reshape(v2, {rows, B, L}), {1, 0, 2});  // [B, rows, L]
  };

  std::vector<Var> head_outs;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(cfg.attention_dim));
  for (int a = 0; a < cfg.attention_heads; ++a) {
    const std::string q = prefix + "attn.head" + std::to_string(a) + ".";
    Var qb = batched(ag::affine(params.at(q + "q.w"), x2, params.at(q + "q.b")));
    Var kb = batched(ag::affine(params.at(q + "k.w"), x2, params.at(q + "k.b")));
    Var vb = batched(ag::affine(params.at(q + "v.w"), x2, params.at(q + "v.b")));
    Var scores = ag::scale(ag::bmm(qb, kb, true, false), inv_sqrt);  // [B, L, L]
    Var attn = ag::reshape(ag::softmax_lastdim(ag::reshape(scores, {B * L, L})), {B, L, L});
    head_outs.push_back(ag::bmm(vb, attn, false, true));  // [B, nv, L]
  }
  Var merged = head_outs.size() == 1 ? head_outs[0] : ag::concat(head_outs, 1);
  Var m2 = ag::reshape(ag::permute(merged, {1, 0, 2}), {N, B * L});
  Var out2 = ag::affine(params.at(prefix + "attn.out.w"), m2, params.at(prefix + "attn.out.b"));
  return ag::permute(ag::reshape(out2, {N, B, L}), {1, 0, 2});
}

}  // namespace

Var SeparationModel::forward_block(const Var& latent, int r, int axis) const {
  if (latent->value.rank() != 3 || latent->value.dim(0) != cfg_.scheme.num_bands() ||
      latent->value.dim(1) != cfg_.latent_dim)
    throw std::invalid_argument("latent must be [K, N, T]");
  if (r < 0 || r >= cfg_.depth || (axis != 0 && axis != 1))
    throw std::invalid_argument("block index out of range");
  const std::string p = "block" + std::to_string(r) + (axis == 0 ? ".seq." : ".band.");

  // Axis 0 models along frames with bands as batch; axis 1 swaps the roles.
  Var x3 = axis == 0 ? latent : ag::permute(latent, {2, 1, 0});
  Var normed = ag::group_norm(x3, params_.at(p + "norm.gamma"), params_.at(p + "norm.beta"));
  Var core = block_core(cfg_, params_, p, normed);
  Var out = ag::add(x3, core);
  if (cfg_.attention_enabled()) out = ag::add(out, attention_core(cfg_, params_, p, out));
  return axis == 0 ? out : ag::permute(out, {2, 1, 0});
}

std::vector<Var> SeparationModel::forward_tac(const std::vector<Var>& latents, int r) const {
  if (latents.empty()) throw std::invalid_argument("forward_tac: no inputs");
  if (latents.size() == 1) {
    std::cerr << "forward_tac: single channel input, passing through\n";
    return latents;
  }
  const std::string p = "tac" + std::to_string(r) + ".";
  const bool prelu_act = cfg_.tac_activation == TacActivation::kPrelu;
  auto act = [&](const Var& v, const char* alpha) {
    return prelu_act ? ag::prelu(v, params_.at(p + alpha)) : ag::vtanh(v);
  };

  const int64_t K = latents[0]->value.dim(0), T = latents[0]->value.dim(2);
  std::vector<Var> transformed;
  for (const Var& h : latents)
    transformed.push_back(act(ag::affine(params_.at(p + "w1"), to2d(h), params_.at(p + "b1")),
                              "a1"));
  Var mean = transformed[0];
  for (size_t c = 1; c < transformed.size(); ++c) mean = ag::add(mean, transformed[c]);
  mean = ag::scale(mean, 1.0 / static_cast<double>(transformed.size()));
  Var avg = act(ag::affine(params_.at(p + "w2"), mean, params_.at(p + "b2")), "a2");

  std::vector<Var> outs;
  for (size_t c = 0; c < latents.size(); ++c) {
    Var cat = ag::concat({transformed[c], avg}, 0);
    Var proj = act(ag::affine(params_.at(p + "w3"), cat, params_.at(p + "b3")), "a3");
    outs.push_back(ag::add(latents[c], from2d(proj, K, T)));
  }
  return outs;
}

std::vector<Var> SeparationModel::forward_masker(const Var& latent) const {
  const int K = cfg_.scheme.num_bands();
  const int64_t T = latent->value.dim(2);
  const int mask_ch = cfg_.stereo_mode == StereoMode::kNaiveStereo ? 2 : 1;

  std::vector<Var> masks;
  masks.reserve(K);
  for (int k = 0; k < K; ++k) {
    const std::string p = "masker.k" + std::to_string(k) + ".";
    const int64_t w = cfg_.scheme.width(k);
    Var lk = ag::slice(latent, 0, k, 1);  // [1, N, T]
    Var normed = ag::group_norm(lk, params_.at(p + "norm.gamma"), params_.at(p + "norm.beta"));
    Var h = ag::reshape(normed, {cfg_.latent_dim, T});
    h = ag::vtanh(ag::affine(params_.at(p + "fc0.w"), h, params_.at(p + "fc0.b")));
    h = ag::vtanh(ag::affine(params_.at(p + "fc1.w"), h, params_.at(p + "fc1.b")));
    h = ag::affine(params_.at(p + "fc2.w"), h, params_.at(p + "fc2.b"));
    const int64_t half = h->value.dim(0) / 2;
    Var gated = ag::mul(ag::slice(h, 0, 0, half), ag::vsigmoid(ag::slice(h, 0, half, half)));
    masks.push_back(ag::reshape(gated, {mask_ch, 2 * w, T}));
  }
  return masks;
}

Var SeparationModel::masks_to_spec_graph(const std::vector<Var>& masks,
                                         const std::vector<Tensor>& mix_bands) const {
  const int K = cfg_.scheme.num_bands();
  std::vector<Var> reals, imags;
  reals.reserve(K);
  imags.reserve(K);
  for (int k = 0; k < K; ++k) {
    const int64_t w = cfg_.scheme.width(k);
    const Var& m = masks[k];
    if (!m->value.same_shape(mix_bands[k]))
      throw std::invalid_argument("mask and mixture band shapes differ");
    Var mr = ag::slice(m, 1, 0, w);
    Var mi = ag::slice(m, 1, w, w);
    const Tensor& mb = mix_bands[k];
    const int64_t C = mb.dim(0), T = mb.dim(2);
    Tensor xrt({C, w, T}), xit({C, w, T});
    for (int64_t c = 0; c < C; ++c)
      for (int64_t f = 0; f < w; ++f)
        for (int64_t t = 0; t < T; ++t) {
          xrt.at(c, f, t) = mb.at(c, f, t);
          xit.at(c, f, t) = mb.at(c, w + f, t);
        }
    Var xr = ag::constant(std::move(xrt));
    Var xi = ag::constant(std::move(xit));
    reals.push_back(ag::sub(ag::mul(mr, xr), ag::mul(mi, xi)));
    imags.push_back(ag::add(ag::mul(mr, xi), ag::mul(mi, xr)));
  }
  Var real_full = ag::concat(reals, 1);
  Var imag_full = ag::concat(imags, 1);
  return ag::concat({real_full, imag_full}, 1);
}

namespace {

Tensor channel_slice(const Tensor& t, int c) {
  Tensor out({1, t.dim(1), t.dim(2)});
  std::copy_n(t.data() + c * t.dim(1) * t.dim(2), t.dim(1) * t.dim(2), out.data());
  return out;
}

}  // namespace

Var SeparationModel::forward(const ComplexSpectrogram& mix) const {
  if (mix.f_bins != cfg_.scheme.n_bins)
    throw std::invalid_argument("spectrogram bins do not match the band scheme");
  if (!(mix.fp == cfg_.frame_params))
    throw std::invalid_argument("spectrogram framing does not match the model config");
  if (cfg_.stereo_mode != StereoMode::kMonoPerChannel && mix.channels != 2)
    throw std::invalid_argument("stereo modes need a two-channel input");

  const std::vector<Tensor> xbands = split(mix, cfg_.scheme);
  auto constants = [](const std::vector<Tensor>& bands) {
    std::vector<Var> vars;
    vars.reserve(bands.size());
    for (const Tensor& b : bands) vars.push_back(ag::constant(b));
    return vars;
  };

  if (cfg_.stereo_mode == StereoMode::kNaiveStereo) {
    Var latent = forward_bandsplit(constants(xbands));
    for (int r = 0; r < cfg_.depth; ++r) {
      latent = forward_block(latent, r, 0);
      latent = forward_block(latent, r, 1);
    }
    return masks_to_spec_graph(forward_masker(latent), xbands);
  }

  std::vector<std::vector<Tensor>> per_channel(mix.channels);
  for (int c = 0; c < mix.channels; ++c)
    for (const Tensor& b : xbands) per_channel[c].push_back(channel_slice(b, c));

  std::vector<Var> latents;
  for (int c = 0; c < mix.channels; ++c)
    latents.push_back(forward_bandsplit(constants(per_channel[c])));

  for (int r = 0; r < cfg_.depth; ++r) {
    for (auto& latent : latents) {
      latent = forward_block(latent, r, 0);
      latent = forward_block(latent, r, 1);
    }
    if (cfg_.stereo_mode == StereoMode::kTac && latents.size() > 1)
      latents = forward_tac(latents, r);
  }

  std::vector<Var> specs;
  for (int c = 0; c < mix.channels; ++c)
    specs.push_back(masks_to_spec_graph(forward_masker(latents[c]), per_channel[c]));
  return specs.size() == 1 ? specs[0] : ag::concat(specs, 0);
}

ComplexSpectrogram SeparationModel::separate(const ComplexSpectrogram& mix) const {
  ag::NoGradGuard guard;
  Var out = forward(mix);
  return tensor_to_spec(out->value, cfg_.frame_params, mix.sample_rate);
}

int64_t count_params(const ModelConfig& cfg) {
  cfg.validate();
  const int64_t N = cfg.latent_dim;
  const int64_t H = cfg.heads;
  const int64_t mu = cfg.masker_factor;
  const int cin = cfg.stereo_mode == StereoMode::kNaiveStereo ? 2 : 1;
  int64_t total = 0;

  for (int k = 0; k < cfg.scheme.num_bands(); ++k) {
    const int64_t in = static_cast<int64_t>(cin) * 2 * cfg.scheme.width(k);
    total += 2 * in + N * in + N;
  }

  int64_t block = 2 * N;  // norm
  if (cfg.block_kind == BlockKind::kRecurrent) {
    const int64_t in = H == 1 ? N : N / H;
    const int64_t h = H == 1 ? 2 * N : N / H;
    const int64_t per_dir = 4 * h * in + 4 * h * h + 8 * h;
    block += H * (2 * per_dir + in * 2 * h + in);
  } else {
    const int64_t nh = N / H;
    const int64_t ch = static_cast<int64_t>(cfg.conv_hidden_factor) * nh;
    const int64_t D = static_cast<int64_t>(cfg.conv_dilations.size());
    const int64_t kk = cfg.conv_kernel;
    int64_t stack = (ch * nh + ch) + D * (ch * ch * kk + ch) + (nh * ch + nh);
    stack += D + 1;  // prelu slopes
    block += H * stack;
  }
  if (cfg.attention_enabled()) {
    const int64_t E = cfg.attention_dim;
    const int64_t nv = N / cfg.attention_heads;
    block += 2 * N;  // attn norm
    block += cfg.attention_heads * (2 * (E * N + E) + nv * N + nv);
    block += N * N + N;  // out projection
  }
  total += 2LL * cfg.depth * block;

  if (cfg.stereo_mode == StereoMode::kTac) {
    int64_t tac = (3 * N * N + 3 * N) + (9 * N * N + 3 * N) + (6 * N * N + N);
    if (cfg.tac_activation == TacActivation::kPrelu) tac += 3;
    total += cfg.depth * tac;
  }

  for (int k = 0; k < cfg.scheme.num_bands(); ++k) {
    const int64_t glu_out = 2LL * cin * 2 * cfg.scheme.width(k);
    total += 2 * N;
    total += mu * N * N + mu * N;
    total += mu * N * mu * N + mu * N;
    total += glu_out * mu * N + glu_out;
  }
  return total;
}

Tensor spec_to_tensor(const ComplexSpectrogram& spec) {
  Tensor t({spec.channels, 2LL * spec.f_bins, spec.frames});
  for (int c = 0; c < spec.channels; ++c)
    for (int f = 0; f < spec.f_bins; ++f)
      for (int64_t k = 0; k < spec.frames; ++k) {
        t.at(c, f, k) = spec.at(c, f, k).real();
        t.at(c, spec.f_bins + f, k) = spec.at(c, f, k).imag();
      }
  return t;
}

ComplexSpectrogram tensor_to_spec(const Tensor& t, const FrameParams& fp, int sample_rate) {
  if (t.rank() != 3 || t.dim(1) % 2 != 0)
    throw std::invalid_argument("spectrogram tensor must be [C, 2F, T]");
  const int F = static_cast<int>(t.dim(1) / 2);
  ComplexSpectrogram spec(fp, static_cast<int>(t.dim(0)), F, t.dim(2), sample_rate);
  for (int c = 0; c < spec.channels; ++c)
    for (int f = 0; f < F; ++f)
      for (int64_t k = 0; k < spec.frames; ++k)
        spec.at(c, f, k) = {t.at(c, f, k), t.at(c, F + f, k)};
  return spec;
}

}  // namespace bsrnn
