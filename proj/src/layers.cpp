#include "zcap/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace zcap::nn {

Linear::Linear(const std::string& name, size_t in, size_t out, Rng& rng, double init_scale)
    : w(name + ".w", Tensor::randn({in, out}, rng, init_scale)), b(name + ".b", Tensor({out})) {}

Tensor linear_forward(const Linear& l, const Tensor& x) {
  Tensor y = ops::matmul(x, l.w.value);
  ops::add_row_inplace(y, l.b.value);
  return y;
}

Tensor linear_backward(Linear& l, const Tensor& x, const Tensor& dy) {
  Tensor dx({x.shape});
  ops::matmul_backward(x, l.w.value, dy, dx, l.w.grad);
  for (size_t i = 0; i < dy.shape[0]; ++i) {
    const double* r = dy.row(i);
    for (size_t j = 0; j < dy.shape[1]; ++j) l.b.grad[j] += r[j];
  }
  return dx;
}

LayerNorm::LayerNorm(const std::string& name, size_t dim)
    : gain(name + ".gain", Tensor::full({dim}, 1.0)), bias(name + ".bias", Tensor({dim})) {}

SelfAttention::SelfAttention(const std::string& name, size_t dim, size_t heads_, Rng& rng)
    : wq(name + ".q", dim, dim, rng, 0.02),
      wk(name + ".k", dim, dim, rng, 0.02),
      wv(name + ".v", dim, dim, rng, 0.02),
      wo(name + ".o", dim, dim, rng, 0.02),
      heads(heads_) {
  if (dim % heads_ != 0) throw std::invalid_argument("attention: dim not divisible by heads");
}

namespace {

// Copy head slice [T, dh] out of a [T, d] tensor.
Tensor head_slice(const Tensor& x, size_t head, size_t dh) {
  Tensor out({x.shape[0], dh});
  for (size_t t = 0; t < x.shape[0]; ++t) {
    const double* src = x.row(t) + head * dh;
    double* dst = out.row(t);
    for (size_t j = 0; j < dh; ++j) dst[j] = src[j];
  }
  return out;
}

void head_accumulate(Tensor& x, const Tensor& part, size_t head, size_t dh) {
  for (size_t t = 0; t < x.shape[0]; ++t) {
    double* dst = x.row(t) + head * dh;
    const double* src = part.row(t);
    for (size_t j = 0; j < dh; ++j) dst[j] += src[j];
  }
}

}  // namespace

Tensor attention_forward(const SelfAttention& a, const Tensor& x, bool causal, AttentionCache* cache) {
  const size_t t_len = x.shape[0];
  const size_t d = x.shape[1];
  const size_t dh = d / a.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor q = linear_forward(a.wq, x);
  Tensor k = linear_forward(a.wk, x);
  Tensor v = linear_forward(a.wv, x);

  Tensor merged({t_len, d});
  std::vector<Tensor> probs;
  probs.reserve(a.heads);
  for (size_t h = 0; h < a.heads; ++h) {
    Tensor qh = head_slice(q, h, dh);
    Tensor kh = head_slice(k, h, dh);
    Tensor vh = head_slice(v, h, dh);
    Tensor scores = ops::matmul_nt(qh, kh);
    for (double& s : scores.v) s *= scale;
    if (causal) {
      for (size_t i = 0; i < t_len; ++i)
        for (size_t j = i + 1; j < t_len; ++j) scores.at(i, j) = -1e30;
    }
    Tensor p = ops::softmax_rows(scores);
    Tensor oh = ops::matmul(p, vh);
    head_accumulate(merged, oh, h, dh);
    probs.push_back(std::move(p));
  }
  Tensor out = linear_forward(a.wo, merged);
  if (cache) {
    cache->x = x;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->probs = std::move(probs);
    cache->merged = std::move(merged);
  }
  return out;
}

Tensor attention_backward(SelfAttention& a, const AttentionCache& cache, bool causal, const Tensor& dy) {
  const size_t t_len = cache.x.shape[0];
  const size_t d = cache.x.shape[1];
  const size_t dh = d / a.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor dmerged = linear_backward(a.wo, cache.merged, dy);

  Tensor dq({t_len, d}), dk({t_len, d}), dv({t_len, d});
  for (size_t h = 0; h < a.heads; ++h) {
    Tensor qh = head_slice(cache.q, h, dh);
    Tensor kh = head_slice(cache.k, h, dh);
    Tensor vh = head_slice(cache.v, h, dh);
    Tensor doh = head_slice(dmerged, h, dh);
    const Tensor& p = cache.probs[h];

    // oh = p * vh
    Tensor dp = ops::matmul_nt(doh, vh);     // [T, T] : doh * vh^T
    Tensor dvh = ops::matmul_tn(p, doh);     // [T, dh]
    Tensor dscores = ops::softmax_rows_backward(p, dp);
    if (causal) {
      for (size_t i = 0; i < t_len; ++i)
        for (size_t j = i + 1; j < t_len; ++j) dscores.at(i, j) = 0.0;
    }
    for (double& s : dscores.v) s *= scale;
    Tensor dqh = ops::matmul(dscores, kh);    // [T, dh]
    Tensor dkh = ops::matmul_tn(dscores, qh); // [T, dh]

    head_accumulate(dq, dqh, h, dh);
    head_accumulate(dk, dkh, h, dh);
    head_accumulate(dv, dvh, h, dh);
  }

  Tensor dx = linear_backward(a.wq, cache.x, dq);
  ops::add_inplace(dx, linear_backward(a.wk, cache.x, dk));
  ops::add_inplace(dx, linear_backward(a.wv, cache.x, dv));
  return dx;
}

FeedForward::FeedForward(const std::string& name, size_t dim, size_t hidden, Rng& rng)
    : fc1(name + ".fc1", dim, hidden, rng, 0.02), fc2(name + ".fc2", hidden, dim, rng, 0.02) {}

Tensor feed_forward_forward(const FeedForward& f, const Tensor& x, FeedForwardCache* cache) {
  Tensor pre = linear_forward(f.fc1, x);
  Tensor act = ops::gelu(pre);
  Tensor out = linear_forward(f.fc2, act);
  if (cache) {
    cache->x = x;
    cache->pre = std::move(pre);
    cache->act = std::move(act);
  }
  return out;
}

Tensor feed_forward_backward(FeedForward& f, const FeedForwardCache& cache, const Tensor& dy) {
  Tensor dact = linear_backward(f.fc2, cache.act, dy);
  Tensor dpre = ops::gelu_backward(cache.pre, dact);
  return linear_backward(f.fc1, cache.x, dpre);
}

TransformerBlock::TransformerBlock(const std::string& name, size_t dim, size_t heads, size_t ff_hidden,
                                   Rng& rng)
    : ln1(name + ".ln1", dim),
      ln2(name + ".ln2", dim),
      attn(name + ".attn", dim, heads, rng),
      ff(name + ".ff", dim, ff_hidden, rng) {}

Tensor block_forward(const TransformerBlock& b, const Tensor& x, bool causal, BlockCache* cache) {
  ops::LayerNormCache ln1c, ln2c;
  AttentionCache* ac = cache ? &cache->attn : nullptr;
  FeedForwardCache* fc = cache ? &cache->ff : nullptr;

  Tensor ln1_out = ops::layer_norm(x, b.ln1.gain.value, b.ln1.bias.value, cache ? &ln1c : nullptr);
  Tensor h = attention_forward(b.attn, ln1_out, causal, ac);
  ops::add_inplace(h, x);  // residual
  Tensor ln2_out = ops::layer_norm(h, b.ln2.gain.value, b.ln2.bias.value, cache ? &ln2c : nullptr);
  Tensor out = feed_forward_forward(b.ff, ln2_out, fc);
  ops::add_inplace(out, h);
  if (cache) {
    cache->ln1 = std::move(ln1c);
    cache->ln2 = std::move(ln2c);
    cache->x = x;
    cache->ln1_out = std::move(ln1_out);
    cache->attn_in_residual = std::move(h);
  }
  return out;
}

Tensor block_backward(TransformerBlock& b, const BlockCache& cache, bool causal, const Tensor& dy) {
  // out = h + ff(ln2(h))
  Tensor dln2_out = feed_forward_backward(b.ff, cache.ff, dy);
  Tensor dh = ops::layer_norm_backward(cache.ln2, b.ln2.gain.value, dln2_out, b.ln2.gain.grad,
                                       b.ln2.bias.grad);
  ops::add_inplace(dh, dy);
  // h = x + attn(ln1(x))
  Tensor dln1_out = attention_backward(b.attn, cache.attn, causal, dh);
  Tensor dx = ops::layer_norm_backward(cache.ln1, b.ln1.gain.value, dln1_out, b.ln1.gain.grad,
                                       b.ln1.bias.grad);
  ops::add_inplace(dx, dh);
  return dx;
}

Tensor block_step(const TransformerBlock& b, BlockKv& kv, const Tensor& x_row) {
  const size_t d = x_row.shape[1];
  const size_t heads = b.attn.heads;
  const size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor ln1_out = ops::layer_norm(x_row, b.ln1.gain.value, b.ln1.bias.value, nullptr);
  Tensor q = linear_forward(b.attn.wq, ln1_out);
  Tensor k_new = linear_forward(b.attn.wk, ln1_out);
  Tensor v_new = linear_forward(b.attn.wv, ln1_out);

  const size_t t_prev = kv.k.v.empty() ? 0 : kv.k.shape[0];
  Tensor k_all({t_prev + 1, d}), v_all({t_prev + 1, d});
  if (t_prev > 0) {
    std::copy(kv.k.v.begin(), kv.k.v.end(), k_all.v.begin());
    std::copy(kv.v.v.begin(), kv.v.v.end(), v_all.v.begin());
  }
  std::copy(k_new.v.begin(), k_new.v.end(), k_all.v.begin() + t_prev * d);
  std::copy(v_new.v.begin(), v_new.v.end(), v_all.v.begin() + t_prev * d);
  kv.k = k_all;
  kv.v = v_all;

  const size_t t_len = t_prev + 1;
  Tensor merged({1, d});
  for (size_t h = 0; h < heads; ++h) {
    // scores over all cached positions
    std::vector<double> scores(t_len);
    double mx = -1e300;
    for (size_t t = 0; t < t_len; ++t) {
      const double* kr = k_all.row(t) + h * dh;
      const double* qr = q.row(0) + h * dh;
      double acc = 0.0;
      for (size_t j = 0; j < dh; ++j) acc += qr[j] * kr[j];
      scores[t] = acc * scale;
      mx = std::max(mx, scores[t]);
    }
    double sum = 0.0;
    for (size_t t = 0; t < t_len; ++t) {
      scores[t] = std::exp(scores[t] - mx);
      sum += scores[t];
    }
    double* out = merged.row(0) + h * dh;
    for (size_t t = 0; t < t_len; ++t) {
      const double w = scores[t] / sum;
      const double* vr = v_all.row(t) + h * dh;
      for (size_t j = 0; j < dh; ++j) out[j] += w * vr[j];
    }
  }
  Tensor attn_out = linear_forward(b.attn.wo, merged);
  ops::add_inplace(attn_out, x_row);
  Tensor ln2_out = ops::layer_norm(attn_out, b.ln2.gain.value, b.ln2.bias.value, nullptr);
  Tensor out = feed_forward_forward(b.ff, ln2_out, nullptr);
  ops::add_inplace(out, attn_out);
  return out;
}

void collect_params(Linear& l, std::vector<Parameter*>& out) {
  out.push_back(&l.w);
  out.push_back(&l.b);
}
void collect_params(LayerNorm& n, std::vector<Parameter*>& out) {
  out.push_back(&n.gain);
  out.push_back(&n.bias);
}
void collect_params(SelfAttention& a, std::vector<Parameter*>& out) {
  collect_params(a.wq, out);
  collect_params(a.wk, out);
  collect_params(a.wv, out);
  collect_params(a.wo, out);
}
void collect_params(FeedForward& f, std::vector<Parameter*>& out) {
  collect_params(f.fc1, out);
  collect_params(f.fc2, out);
}
void collect_params(TransformerBlock& b, std::vector<Parameter*>& out) {
  collect_params(b.ln1, out);
  collect_params(b.ln2, out);
  collect_params(b.attn, out);
  collect_params(b.ff, out);
}

}  // namespace zcap::nn
