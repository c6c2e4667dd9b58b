#include "zcap/gradsuite.hpp"

#include <cmath>

#include "zcap/clm.hpp"
#include "zcap/dualencoder.hpp"
#include "zcap/gradcheck.hpp"
#include "zcap/layers.hpp"
#include "zcap/ops.hpp"

namespace zcap {

namespace {

constexpr double kElementwiseTol = 1e-6;
constexpr double kCompositeTol = 1e-4;

double weighted_sum(const Tensor& y, const Tensor& w) { return ops::dot(y, w); }

void add_row(GradSuiteResult& result, const std::string& name, double err, double tol) {
  const bool pass = err < tol;
  result.rows.push_back({name, err, tol, pass});
  if (!pass) result.all_pass = false;
}

double check_matmul(Rng& rng) {
  Parameter a("a", Tensor::randn({3, 4}, rng));
  Parameter b("b", Tensor::randn({4, 2}, rng));
  const Tensor w = Tensor::randn({3, 2}, rng);
  ops::matmul_backward(a.value, b.value, w, a.grad, b.grad);
  Rng coords = rng.substream("coords");
  return grad_check([&] { return weighted_sum(ops::matmul(a.value, b.value), w); }, {&a, &b}, coords, 24)
      .max_rel_err;
}

double check_softmax(Rng& rng) {
  Parameter x("x", Tensor::randn({3, 5}, rng));
  const Tensor w = Tensor::randn({3, 5}, rng);
  const Tensor y = ops::softmax_rows(x.value);
  x.grad = ops::softmax_rows_backward(y, w);
  Rng coords = rng.substream("coords");
  return grad_check([&] { return weighted_sum(ops::softmax_rows(x.value), w); }, {&x}, coords, 15)
      .max_rel_err;
}

double check_layer_norm(Rng& rng) {
  Parameter x("x", Tensor::randn({3, 6}, rng));
  Parameter gain("gain", Tensor::randn({6}, rng, 0.5));
  Parameter bias("bias", Tensor::randn({6}, rng, 0.5));
  for (double& g : gain.value.v) g += 1.0;
  const Tensor w = Tensor::randn({3, 6}, rng);
  ops::LayerNormCache cache;
  ops::layer_norm(x.value, gain.value, bias.value, &cache);
  x.grad = ops::layer_norm_backward(cache, gain.value, w, gain.grad, bias.grad);
  Rng coords = rng.substream("coords");
  return grad_check(
             [&] { return weighted_sum(ops::layer_norm(x.value, gain.value, bias.value, nullptr), w); },
             {&x, &gain, &bias}, coords, 12)
      .max_rel_err;
}

double check_cross_entropy(Rng& rng) {
  Parameter logits("logits", Tensor::randn({4, 7}, rng));
  const std::vector<int> targets = {1, 3, 0, 6};
  const std::vector<uint8_t> mask = {1, 0, 1, 1};
  logits.grad = ops::cross_entropy_backward(logits.value, targets, mask);
  Rng coords = rng.substream("coords");
  return grad_check([&] { return ops::cross_entropy(logits.value, targets, mask); }, {&logits}, coords, 20)
      .max_rel_err;
}

double check_gelu(Rng& rng) {
  Parameter x("x", Tensor::randn({2, 6}, rng));
  const Tensor w = Tensor::randn({2, 6}, rng);
  x.grad = ops::gelu_backward(x.value, w);
  Rng coords = rng.substream("coords");
  return grad_check([&] { return weighted_sum(ops::gelu(x.value), w); }, {&x}, coords, 12).max_rel_err;
}

double check_tanh(Rng& rng) {
  Parameter x("x", Tensor::randn({2, 6}, rng));
  const Tensor w = Tensor::randn({2, 6}, rng);
  x.grad = ops::tanh_backward(ops::tanh_act(x.value), w);
  Rng coords = rng.substream("coords");
  return grad_check([&] { return weighted_sum(ops::tanh_act(x.value), w); }, {&x}, coords, 12).max_rel_err;
}

double check_linear(Rng& rng) {
  nn::Linear lin("lin", 5, 3, rng, 0.5);
  Parameter x("x", Tensor::randn({4, 5}, rng));
  const Tensor w = Tensor::randn({4, 3}, rng);
  x.grad = nn::linear_backward(lin, x.value, w);
  std::vector<Parameter*> params = {&x};
  nn::collect_params(lin, params);
  Rng coords = rng.substream("coords");
  return grad_check([&] { return weighted_sum(nn::linear_forward(lin, x.value), w); }, params, coords, 10)
      .max_rel_err;
}

double check_attention(Rng& rng, bool causal) {
  nn::SelfAttention attn("attn", 16, 4, rng);
  Parameter x("x", Tensor::randn({5, 16}, rng, 0.5));
  const Tensor w = Tensor::randn({5, 16}, rng);
  nn::AttentionCache cache;
  nn::attention_forward(attn, x.value, causal, &cache);
  x.grad = nn::attention_backward(attn, cache, causal, w);
  std::vector<Parameter*> params = {&x};
  nn::collect_params(attn, params);
  Rng coords = rng.substream("coords");
  return grad_check([&] { return weighted_sum(nn::attention_forward(attn, x.value, causal, nullptr), w); },
                    params, coords, 8)
      .max_rel_err;
}

double check_block(Rng& rng) {
  nn::TransformerBlock block("block", 16, 4, 32, rng);
  Parameter x("x", Tensor::randn({5, 16}, rng, 0.5));
  const Tensor w = Tensor::randn({5, 16}, rng);
  nn::BlockCache cache;
  nn::block_forward(block, x.value, true, &cache);
  x.grad = nn::block_backward(block, cache, true, w);
  std::vector<Parameter*> params = {&x};
  nn::collect_params(block, params);
  Rng coords = rng.substream("coords");
  return grad_check([&] { return weighted_sum(nn::block_forward(block, x.value, true, nullptr), w); },
                    params, coords, 6)
      .max_rel_err;
}

world::CaptionText make_caption(std::vector<std::string> tokens) {
  world::CaptionText cap;
  cap.tokens = std::move(tokens);
  return cap;
}

double check_encoder_loss(Rng& rng) {
  const std::vector<world::CaptionText> corpus = {make_caption({"a", "red", "dog"}),
                                                  make_caption({"a", "blue", "ball"}),
                                                  make_caption({"a", "green", "tree"})};
  const Vocab vocab = build_vocab(corpus);
  enc::EncoderConfig cfg;
  cfg.d_embed = 8;
  cfg.img_hidden = 6;
  cfg.text_max_len = 8;
  cfg.heads = 2;
  cfg.ff_hidden = 12;
  Rng init = rng.substream("enc-init");
  enc::EncoderParams enc_params = enc::EncoderParams::init(vocab, 10, cfg, init);

  std::vector<std::pair<world::RawImageFeature, world::CaptionText>> batch;
  for (size_t i = 0; i < corpus.size(); ++i) {
    world::RawImageFeature raw;
    raw.values.resize(10);
    for (double& v : raw.values) v = rng.normal();
    batch.emplace_back(raw, corpus[i]);
  }
  enc::contrastive_loss_backward(batch, enc_params);
  Rng coords = rng.substream("coords");
  return grad_check([&] { return enc::contrastive_loss(batch, enc_params); },
                    enc_params.parameters(), coords, 4)
      .max_rel_err;
}

double check_clm_loss(Rng& rng) {
  const std::vector<world::CaptionText> corpus = {make_caption({"a", "red", "dog"}),
                                                  make_caption({"a", "blue", "ball"})};
  const Vocab vocab = build_vocab(corpus);
  clm::ClmConfig cfg;
  cfg.d_model = 16;
  cfg.layers = 2;
  cfg.heads = 4;
  cfg.ff_hidden = 24;
  cfg.max_len = 16;
  Rng init = rng.substream("clm-init");
  clm::DecoderParams params = clm::DecoderParams::init(vocab.size(), cfg, init);

  enc::Embedding f;
  f.values.resize(cfg.d_model);
  for (double& v : f.values) v = rng.normal(0.0, 0.5);
  Rng drop(7);
  const clm::InputSequence input =
      clm::build_training_input(f, {"dog"}, corpus[0], 0.0, drop, vocab, cfg.max_len);

  clm::clm_loss_backward(params, input);
  Rng coords = rng.substream("coords");
  return grad_check([&] { return clm::clm_loss(params, input); }, params.parameters(), coords, 4)
      .max_rel_err;
}

}  // namespace

GradSuiteResult run_gradient_suite(uint64_t seed) {
  GradSuiteResult result;
  Rng rng(seed);
  Rng r1 = rng.substream("matmul");
  add_row(result, "matmul", check_matmul(r1), kElementwiseTol);
  Rng r2 = rng.substream("softmax");
  add_row(result, "softmax_stable", check_softmax(r2), kElementwiseTol);
  Rng r3 = rng.substream("layer_norm");
  add_row(result, "layer_norm", check_layer_norm(r3), kElementwiseTol);
  Rng r4 = rng.substream("cross_entropy");
  add_row(result, "cross_entropy", check_cross_entropy(r4), kElementwiseTol);
  Rng r5 = rng.substream("gelu");
  add_row(result, "gelu", check_gelu(r5), kElementwiseTol);
  Rng r6 = rng.substream("tanh");
  add_row(result, "tanh", check_tanh(r6), kElementwiseTol);
  Rng r7 = rng.substream("linear");
  add_row(result, "linear", check_linear(r7), kElementwiseTol);
  Rng r8 = rng.substream("attention");
  add_row(result, "self_attention_causal", check_attention(r8, true), kCompositeTol);
  Rng r9 = rng.substream("attention-bi");
  add_row(result, "self_attention_bidirectional", check_attention(r9, false), kCompositeTol);
  Rng r10 = rng.substream("block");
  add_row(result, "transformer_block", check_block(r10), kCompositeTol);
  Rng r11 = rng.substream("encoder");
  add_row(result, "contrastive_loss_full", check_encoder_loss(r11), kCompositeTol);
  Rng r12 = rng.substream("clm");
  add_row(result, "clm_loss_full", check_clm_loss(r12), kCompositeTol);
  return result;
}

}  // namespace zcap
