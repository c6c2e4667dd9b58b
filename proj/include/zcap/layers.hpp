// Transformer building blocks with hand-written backward passes. Forward
// passes are const over the parameters; training callers pass a cache struct
// that the matching backward consumes, so frozen models stay shareable across
// threads.
#pragma once

#include <vector>

#include "zcap/ops.hpp"
#include "zcap/optimizer.hpp"
#include "zcap/tensor.hpp"

namespace zcap::nn {

struct Linear {
  Parameter w;  // [in, out]
  Parameter b;  // [out]

  Linear() = default;
  Linear(const std::string& name, size_t in, size_t out, Rng& rng, double init_scale);
};

Tensor linear_forward(const Linear& l, const Tensor& x);
// Accumulates into l.w.grad / l.b.grad, returns dx.
Tensor linear_backward(Linear& l, const Tensor& x, const Tensor& dy);

struct LayerNorm {
  Parameter gain;  // [dim]
  Parameter bias;  // [dim]

  LayerNorm() = default;
  LayerNorm(const std::string& name, size_t dim);
};

struct AttentionCache {
  Tensor x;                   // block input after layer norm
  Tensor q, k, v;             // [T, d]
  std::vector<Tensor> probs;  // per head, [T, T]
  Tensor merged;              // concatenated head outputs, [T, d]
};

struct SelfAttention {
  Linear wq, wk, wv, wo;
  size_t heads = 1;

  SelfAttention() = default;
  SelfAttention(const std::string& name, size_t dim, size_t heads, Rng& rng);
};

Tensor attention_forward(const SelfAttention& a, const Tensor& x, bool causal, AttentionCache* cache);
Tensor attention_backward(SelfAttention& a, const AttentionCache& cache, bool causal, const Tensor& dy);

struct FeedForwardCache {
  Tensor x;
  Tensor pre;  // fc1 output before activation
  Tensor act;
};

struct FeedForward {
  Linear fc1, fc2;

  FeedForward() = default;
  FeedForward(const std::string& name, size_t dim, size_t hidden, Rng& rng);
};

Tensor feed_forward_forward(const FeedForward& f, const Tensor& x, FeedForwardCache* cache);
Tensor feed_forward_backward(FeedForward& f, const FeedForwardCache& cache, const Tensor& dy);

struct BlockCache {
  ops::LayerNormCache ln1, ln2;
  Tensor x;        // block input
  Tensor ln1_out;
  Tensor attn_in_residual;  // x + attn_out
  AttentionCache attn;
  FeedForwardCache ff;
};

// Pre-norm block: x + attn(ln1(x)), then + ff(ln2(.)).
struct TransformerBlock {
  LayerNorm ln1, ln2;
  SelfAttention attn;
  FeedForward ff;

  TransformerBlock() = default;
  TransformerBlock(const std::string& name, size_t dim, size_t heads, size_t ff_hidden, Rng& rng);
};

Tensor block_forward(const TransformerBlock& b, const Tensor& x, bool causal, BlockCache* cache);
Tensor block_backward(TransformerBlock& b, const BlockCache& cache, bool causal, const Tensor& dy);

// Incremental attention state for autoregressive decoding: keys/values for
// every position seen so far, per block.
struct BlockKv {
  Tensor k;  // [t, d]
  Tensor v;
};

// Run one new row through a block, extending the cached keys/values.
Tensor block_step(const TransformerBlock& b, BlockKv& kv, const Tensor& x_row);

void collect_params(Linear& l, std::vector<Parameter*>& out);
void collect_params(LayerNorm& n, std::vector<Parameter*>& out);
void collect_params(SelfAttention& a, std::vector<Parameter*>& out);
void collect_params(FeedForward& f, std::vector<Parameter*>& out);
void collect_params(TransformerBlock& b, std::vector<Parameter*>& out);

}  // namespace zcap::nn
