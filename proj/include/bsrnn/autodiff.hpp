// Copyright 2026 The bsrnn-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef BSRNN_AUTODIFF_HPP_
#define BSRNN_AUTODIFF_HPP_

#include <functional>
#include <memory>
#include <vector>

#include "bsrnn/spectral.hpp"
#include "bsrnn/tensor.hpp"

namespace bsrnn::ag {

struct Node;
using Var = std::shared_ptr<Node>;

// Tape node. Ops record their inputs and a pullback that scatters the node's
// gradient into the inputs' gradients.
struct Node {
  Tensor value;
  Tensor grad;  // sized on first accumulation
  bool requires_grad = false;
  std::vector<Var> inputs;
  std::function<void(Node&)> pullback;

  Tensor& ensure_grad();
};

// Thread-local gradient switch. While disabled, ops still compute values but
// record nothing, so long inference loops stay at constant memory.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
  static bool grad_enabled();

 private:
  bool prev_;
};

Var constant(Tensor v);
Var leaf(Tensor v);  // trainable: participates in grad propagation

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);

// W [m,k] * x [k,n] (+ b [m] per row); pass nullptr b to skip the bias.
Var affine(const Var& W, const Var& x, const Var& b);
Var matmul(const Var& a, const Var& b);
// Batched matmul on [B,m,k] x [B,k,n]; trans_a/trans_b transpose the
// trailing two dims of the respective input first.
Var bmm(const Var& a, const Var& b, bool trans_a, bool trans_b);

Var vtanh(const Var& a);
Var vsigmoid(const Var& a);
Var prelu(const Var& x, const Var& alpha);  // alpha: single-element leaf
Var softmax_lastdim(const Var& x);          // 2D, each row normalized

Var concat(const std::vector<Var>& parts, int dim);
Var slice(const Var& x, int dim, int64_t start, int64_t len);
Var reshape(const Var& x, std::vector<int64_t> shape);
Var permute(const Var& x, const std::vector<int>& perm);

Var sum(const Var& x);  // -> [1]
Var l1(const Var& x);   // sum of |x| -> [1]

// x [B,C,L] normalized per batch element over all of C and L (single group),
// then scaled/shifted per channel.
Var group_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

// Bidirectional LSTM over x [T,B,I] -> [T,B,2H]. Weight layout per
// direction: w_ih [4H,I], w_hh [4H,H], b_ih [4H], b_hh [4H], gates ordered
// input, forget, cell, output. Initial h and c are zero.
Var bilstm(const Var& x, const Var& w_ih_f, const Var& w_hh_f, const Var& b_ih_f,
           const Var& b_hh_f, const Var& w_ih_b, const Var& w_hh_b, const Var& b_ih_b,
           const Var& b_hh_b);

// Length-preserving dilated convolution: x [B,Cin,L], w [Cout,Cin,K],
// b [Cout], zero padding split evenly around the receptive field.
Var conv1d(const Var& x, const Var& w, const Var& b, int dilation);

// Inverse STFT as a graph op. spec is [C, 2F, T] with real rows above
// imaginary rows; output is [C, target_len]. The pullback runs the exact
// adjoint of the synthesis map.
Var istft_op(const Var& spec, const FrameParams& fp, int sample_rate, int64_t target_len);

// Reverse sweep from a scalar root; accumulates into every reachable
// grad-requiring node's grad.
void backward(const Var& root);

}  // namespace bsrnn::ag

#endif  // BSRNN_AUTODIFF_HPP_
