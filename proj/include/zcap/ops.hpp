// Forward passes and their explicit backward passes. No tape: the model
// graphs in this project are static, so every caller wires gradients by hand
// and the finite-difference harness keeps them honest.
#pragma once

#include <cstdint>
#include <vector>

#include "zcap/tensor.hpp"

namespace zcap::ops {

// out = a(m,k) * b(k,n)
Tensor matmul(const Tensor& a, const Tensor& b);
// da += dy * b^T, db += a^T * dy
void matmul_backward(const Tensor& a, const Tensor& b, const Tensor& dy, Tensor& da, Tensor& db);

// out = a(m,k) * b(n,k)^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// out = a(k,m)^T * b(k,n)
Tensor matmul_tn(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& a);

// Row-wise stable softmax (max subtraction before exponentiation).
Tensor softmax_rows(const Tensor& logits);
// dx given y = softmax_rows(x): dx_ij = y_ij * (dy_ij - sum_k dy_ik y_ik)
Tensor softmax_rows_backward(const Tensor& y, const Tensor& dy);

// Row-wise log softmax, stable.
Tensor log_softmax_rows(const Tensor& logits);

struct LayerNormCache {
  Tensor x_hat;                 // normalized pre-affine
  std::vector<double> inv_std;  // per row
};
// Per-row normalization over the last axis, then out = x_hat * gain + bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, LayerNormCache* cache);
Tensor layer_norm_backward(const LayerNormCache& cache, const Tensor& gain, const Tensor& dy,
                           Tensor& dgain, Tensor& dbias);

// tanh-approximated GELU; smooth, so finite differences behave.
Tensor gelu(const Tensor& x);
Tensor gelu_backward(const Tensor& x, const Tensor& dy);

Tensor tanh_act(const Tensor& x);
Tensor tanh_backward(const Tensor& y, const Tensor& dy);

// Mean of -log softmax(logits)[target] over positions with mask weight 1.
// logits: (T, V); targets/mask: length T. Positions with mask 0 contribute
// nothing; an all-zero mask yields loss 0.
double cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                     const std::vector<uint8_t>& mask);
Tensor cross_entropy_backward(const Tensor& logits, const std::vector<int>& targets,
                              const std::vector<uint8_t>& mask);

void add_inplace(Tensor& a, const Tensor& b);
void axpy(Tensor& a, double alpha, const Tensor& b);  // a += alpha * b
// Broadcast-add a length-n bias to every row of a (m, n) tensor.
void add_row_inplace(Tensor& a, const Tensor& bias);

double dot(const Tensor& a, const Tensor& b);
double l2_norm(const Tensor& a);

bool all_finite(const Tensor& a);

}  // namespace zcap::ops
