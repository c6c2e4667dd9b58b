#include "zcap/dualencoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "zcap/checkpoint.hpp"
#include "zcap/ops.hpp"

namespace zcap::enc {

EncoderParams EncoderParams::init(const Vocab& vocab, size_t feature_dim, const EncoderConfig& cfg,
                                  Rng& rng) {
  EncoderParams p;
  p.cfg = cfg;
  p.vocab = vocab;
  p.feature_dim = feature_dim;
  p.img_fc1 = nn::Linear("enc.img.fc1", feature_dim, cfg.img_hidden, rng, 0.1);
  p.img_fc2 = nn::Linear("enc.img.fc2", cfg.img_hidden, cfg.d_embed, rng, 0.1);
  p.tok_emb = Parameter("enc.txt.tok_emb", Tensor::randn({vocab.size(), cfg.d_embed}, rng, 0.02));
  p.pos_emb = Parameter("enc.txt.pos_emb", Tensor::randn({cfg.text_max_len, cfg.d_embed}, rng, 0.02));
  p.text_block = nn::TransformerBlock("enc.txt.block", cfg.d_embed, cfg.heads, cfg.ff_hidden, rng);
  p.pool_proj = nn::Linear("enc.txt.pool", cfg.d_embed, cfg.d_embed, rng, 0.1);
  p.log_inv_temp = Parameter("enc.temperature", Tensor::from({1}, {std::log(1.0 / cfg.init_temperature)}));
  return p;
}

std::vector<Parameter*> EncoderParams::parameters() {
  std::vector<Parameter*> out;
  nn::collect_params(img_fc1, out);
  nn::collect_params(img_fc2, out);
  out.push_back(&tok_emb);
  out.push_back(&pos_emb);
  nn::collect_params(text_block, out);
  nn::collect_params(pool_proj, out);
  out.push_back(&log_inv_temp);
  return out;
}

double EncoderParams::temperature() const { return std::exp(-log_inv_temp.value[0]); }

namespace {

struct ImageCache {
  Tensor x, pre1, act1, out;
  Tensor normed;
  double inv_norm = 0.0;
};

struct TextCache {
  std::vector<int> ids;
  Tensor x;
  nn::BlockCache block;
  Tensor block_out, pooled, proj_out;
  Tensor normed;
  double inv_norm = 0.0;
};

Tensor normalize_row(const Tensor& x, double* inv_norm_out) {
  double n = ops::l2_norm(x);
  if (n < 1e-12) throw std::runtime_error("encoder: zero-norm embedding");
  Tensor y(x.shape);
  const double inv = 1.0 / n;
  for (size_t i = 0; i < x.size(); ++i) y.v[i] = x.v[i] * inv;
  if (inv_norm_out) *inv_norm_out = inv;
  return y;
}

Tensor normalize_backward(const Tensor& normed, double inv_norm, const Tensor& dy) {
  const double inner = ops::dot(normed, dy);
  Tensor dx(dy.shape);
  for (size_t i = 0; i < dy.size(); ++i) dx.v[i] = (dy.v[i] - normed.v[i] * inner) * inv_norm;
  return dx;
}

Tensor image_forward(const EncoderParams& enc, const world::RawImageFeature& raw, ImageCache* cache) {
  if (raw.values.size() != enc.feature_dim)
    throw std::invalid_argument("encode_image: feature dimension mismatch");
  Tensor x = Tensor::from({1, enc.feature_dim}, raw.values);
  Tensor pre1 = nn::linear_forward(enc.img_fc1, x);
  Tensor act1 = ops::tanh_act(pre1);
  Tensor out = nn::linear_forward(enc.img_fc2, act1);
  double inv_norm = 0.0;
  Tensor normed = normalize_row(out, &inv_norm);
  if (cache) {
    cache->x = std::move(x);
    cache->pre1 = std::move(pre1);
    cache->act1 = std::move(act1);
    cache->out = std::move(out);
    cache->normed = normed;
    cache->inv_norm = inv_norm;
  }
  return normed;
}

void image_backward(EncoderParams& enc, const ImageCache& cache, const Tensor& dnormed) {
  Tensor dout = normalize_backward(cache.normed, cache.inv_norm, dnormed);
  Tensor dact1 = nn::linear_backward(enc.img_fc2, cache.act1, dout);
  Tensor dpre1 = ops::tanh_backward(cache.act1, dact1);
  nn::linear_backward(enc.img_fc1, cache.x, dpre1);
}

Tensor text_forward(const EncoderParams& enc, const world::CaptionText& caption, TextCache* cache) {
  if (caption.tokens.empty()) throw std::invalid_argument("encode_text: empty caption");
  std::vector<int> ids = enc.vocab.encode(caption.tokens);
  if (ids.size() > enc.cfg.text_max_len) throw std::invalid_argument("encode_text: caption too long");
  const size_t t_len = ids.size();
  const size_t d = enc.cfg.d_embed;
  Tensor x({t_len, d});
  for (size_t t = 0; t < t_len; ++t) {
    const double* tok = enc.tok_emb.value.row(static_cast<size_t>(ids[t]));
    const double* pos = enc.pos_emb.value.row(t);
    double* r = x.row(t);
    for (size_t j = 0; j < d; ++j) r[j] = tok[j] + pos[j];
  }
  nn::BlockCache* bc = cache ? &cache->block : nullptr;
  Tensor block_out = nn::block_forward(enc.text_block, x, /*causal=*/false, bc);
  Tensor pooled({1, d});
  const double inv_t = 1.0 / static_cast<double>(t_len);
  for (size_t t = 0; t < t_len; ++t) {
    const double* r = block_out.row(t);
    for (size_t j = 0; j < d; ++j) pooled.v[j] += r[j] * inv_t;
  }
  Tensor proj_out = nn::linear_forward(enc.pool_proj, pooled);
  double inv_norm = 0.0;
  Tensor normed = normalize_row(proj_out, &inv_norm);
  if (cache) {
    cache->ids = std::move(ids);
    cache->x = std::move(x);
    cache->block_out = std::move(block_out);
    cache->pooled = std::move(pooled);
    cache->proj_out = std::move(proj_out);
    cache->normed = normed;
    cache->inv_norm = inv_norm;
  }
  return normed;
}

void text_backward(EncoderParams& enc, const TextCache& cache, const Tensor& dnormed) {
  Tensor dproj = normalize_backward(cache.normed, cache.inv_norm, dnormed);
  Tensor dpooled = nn::linear_backward(enc.pool_proj, cache.pooled, dproj);
  const size_t t_len = cache.ids.size();
  const size_t d = enc.cfg.d_embed;
  const double inv_t = 1.0 / static_cast<double>(t_len);
  Tensor dblock_out({t_len, d});
  for (size_t t = 0; t < t_len; ++t) {
    double* r = dblock_out.row(t);
    for (size_t j = 0; j < d; ++j) r[j] = dpooled.v[j] * inv_t;
  }
  Tensor dx = nn::block_backward(enc.text_block, cache.block, /*causal=*/false, dblock_out);
  for (size_t t = 0; t < t_len; ++t) {
    double* tok_g = enc.tok_emb.grad.row(static_cast<size_t>(cache.ids[t]));
    double* pos_g = enc.pos_emb.grad.row(t);
    const double* r = dx.row(t);
    for (size_t j = 0; j < d; ++j) {
      tok_g[j] += r[j];
      pos_g[j] += r[j];
    }
  }
}

Embedding to_embedding(const Tensor& row) {
  Embedding e;
  e.values = row.v;
  return e;
}

}  // namespace

Embedding encode_image(const world::RawImageFeature& raw, const EncoderParams& enc) {
  return to_embedding(image_forward(enc, raw, nullptr));
}

Embedding encode_text(const world::CaptionText& tokens, const EncoderParams& enc) {
  return to_embedding(text_forward(enc, tokens, nullptr));
}

double similarity(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("similarity: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.dim(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na < 1e-24 || nb < 1e-24) throw std::invalid_argument("similarity: zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double contrastive_loss_from_embeddings(const std::vector<Embedding>& image_side,
                                        const std::vector<Embedding>& text_side, double log_inv_temp) {
  const size_t n = image_side.size();
  if (n < 2) throw std::invalid_argument("contrastive_loss: batch size must be >= 2");
  if (text_side.size() != n) throw std::invalid_argument("contrastive_loss: side size mismatch");
  const double scale = std::exp(log_inv_temp);
  Tensor logits({n, n});
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (size_t k = 0; k < image_side[i].dim(); ++k)
        dot += image_side[i].values[k] * text_side[j].values[k];
      logits.at(i, j) = dot * scale;
    }
  std::vector<int> diag(n);
  std::vector<uint8_t> ones(n, 1);
  for (size_t i = 0; i < n; ++i) diag[i] = static_cast<int>(i);
  const double row_ce = ops::cross_entropy(logits, diag, ones);
  const double col_ce = ops::cross_entropy(ops::transpose(logits), diag, ones);
  return 0.5 * (row_ce + col_ce);
}

double contrastive_loss(const std::vector<std::pair<world::RawImageFeature, world::CaptionText>>& batch,
                        const EncoderParams& enc) {
  std::vector<Embedding> img, txt;
  for (const auto& [raw, cap] : batch) {
    img.push_back(encode_image(raw, enc));
    txt.push_back(encode_text(cap, enc));
  }
  return contrastive_loss_from_embeddings(img, txt, enc.log_inv_temp.value[0]);
}

double contrastive_loss_backward(const std::vector<std::pair<world::RawImageFeature, world::CaptionText>>& batch,
                                 EncoderParams& enc) {
  const size_t n = batch.size();
  if (n < 2) throw std::invalid_argument("contrastive_loss: batch size must be >= 2");
  std::vector<ImageCache> img_caches(n);
  std::vector<TextCache> txt_caches(n);
  const size_t d = enc.cfg.d_embed;
  Tensor ei({n, d}), et({n, d});
  for (size_t i = 0; i < n; ++i) {
    Tensor a = image_forward(enc, batch[i].first, &img_caches[i]);
    Tensor b = text_forward(enc, batch[i].second, &txt_caches[i]);
    std::copy(a.v.begin(), a.v.end(), ei.row(i));
    std::copy(b.v.begin(), b.v.end(), et.row(i));
  }
  const double scale = std::exp(enc.log_inv_temp.value[0]);
  Tensor sims = ops::matmul_nt(ei, et);
  Tensor logits(sims.shape);
  for (size_t i = 0; i < sims.size(); ++i) logits.v[i] = sims.v[i] * scale;

  std::vector<int> diag(n);
  std::vector<uint8_t> ones(n, 1);
  for (size_t i = 0; i < n; ++i) diag[i] = static_cast<int>(i);
  const double row_ce = ops::cross_entropy(logits, diag, ones);
  const Tensor logits_t = ops::transpose(logits);
  const double col_ce = ops::cross_entropy(logits_t, diag, ones);
  const double loss = 0.5 * (row_ce + col_ce);

  Tensor dlogits = ops::cross_entropy_backward(logits, diag, ones);
  const Tensor dcols = ops::cross_entropy_backward(logits_t, diag, ones);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j)
      dlogits.at(i, j) = 0.5 * (dlogits.at(i, j) + dcols.at(j, i));

  // logits = sims * exp(lit)
  double dlit = 0.0;
  for (size_t i = 0; i < sims.size(); ++i) dlit += dlogits.v[i] * sims.v[i];
  enc.log_inv_temp.grad[0] += dlit * scale;

  Tensor dsims(dlogits.shape);
  for (size_t i = 0; i < dlogits.size(); ++i) dsims.v[i] = dlogits.v[i] * scale;
  Tensor dei = ops::matmul(dsims, et);
  Tensor det = ops::matmul_tn(dsims, ei);
  for (size_t i = 0; i < n; ++i) {
    Tensor di({1, d}), dt({1, d});
    std::copy(dei.row(i), dei.row(i) + d, di.v.begin());
    std::copy(det.row(i), det.row(i) + d, dt.v.begin());
    image_backward(enc, img_caches[i], di);
    text_backward(enc, txt_caches[i], dt);
  }
  return loss;
}

double retrieval_accuracy(const EncoderParams& enc,
                          const std::vector<std::pair<world::RawImageFeature, world::CaptionText>>& pairs) {
  const size_t n = pairs.size();
  if (n == 0) throw std::invalid_argument("retrieval_accuracy: empty evaluation set");
  std::vector<Embedding> img, txt;
  img.reserve(n);
  txt.reserve(n);
  for (const auto& [raw, cap] : pairs) {
    img.push_back(encode_image(raw, enc));
    txt.push_back(encode_text(cap, enc));
  }
  size_t hits_i2t = 0, hits_t2i = 0;
  for (size_t i = 0; i < n; ++i) {
    size_t best_t = 0, best_i = 0;
    double best_ts = -2.0, best_is = -2.0;
    for (size_t j = 0; j < n; ++j) {
      const double st = similarity(img[i], txt[j]);
      if (st > best_ts) {
        best_ts = st;
        best_t = j;
      }
      const double si = similarity(txt[i], img[j]);
      if (si > best_is) {
        best_is = si;
        best_i = j;
      }
    }
    if (best_t == i) ++hits_i2t;
    if (best_i == i) ++hits_t2i;
  }
  return 0.5 * (static_cast<double>(hits_i2t) + static_cast<double>(hits_t2i)) / static_cast<double>(n);
}

EncoderTrainResult train_encoder(const world::DatasetBundle& bundle, const EncoderTrainOptions& opts) {
  Rng root(opts.seed);
  Rng init_rng = root.substream("encoder-init");
  const Vocab vocab = build_vocab(bundle.train_corpus());
  EncoderConfig cfg;
  EncoderTrainResult result{EncoderParams::init(vocab, bundle.world.feature_dim(), cfg, init_rng), {}, {}};
  EncoderParams& enc = result.params;
  auto params = enc.parameters();

  auto train_pairs = bundle.paired_split(bundle.splits.train);
  std::vector<uint64_t> val_ids = bundle.splits.validation;
  if (val_ids.size() > opts.val_pairs) val_ids.resize(opts.val_pairs);
  const auto val_pairs = bundle.paired_split(val_ids);

  const double max_logit_scale = std::log(100.0);
  for (size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    Rng shuffle_rng = root.substream("encoder-batch", epoch);
    std::vector<size_t> order(train_pairs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    size_t batches = 0;
    for (size_t start = 0; start + 2 <= order.size(); start += opts.batch_size) {
      const size_t end = std::min(order.size(), start + opts.batch_size);
      if (end - start < 2) break;
      std::vector<std::pair<world::RawImageFeature, world::CaptionText>> batch;
      batch.reserve(end - start);
      for (size_t i = start; i < end; ++i) batch.push_back(train_pairs[order[i]]);
      epoch_loss += contrastive_loss_backward(batch, enc);
      adam_step(params, opts.opt);
      enc.log_inv_temp.value[0] = std::clamp(enc.log_inv_temp.value[0], 0.0, max_logit_scale);
      ++batches;
    }
    result.epoch_losses.push_back(batches ? epoch_loss / static_cast<double>(batches) : 0.0);
    result.val_retrieval.push_back(val_pairs.empty() ? 0.0 : retrieval_accuracy(enc, val_pairs));
    if (opts.verbose)
      std::printf("encoder epoch %zu loss %.4f val-retrieval %.4f\n", epoch + 1,
                  result.epoch_losses.back(), result.val_retrieval.back());
    if (opts.on_epoch) opts.on_epoch(epoch + 1, enc);
  }
  return result;
}

void save_encoder(const EncoderParams& enc, const std::filesystem::path& path) {
  EncoderParams& e = const_cast<EncoderParams&>(enc);
  std::vector<std::pair<std::string, const Tensor*>> entries;
  for (Parameter* p : e.parameters()) entries.emplace_back(p->name, &p->value);
  const Tensor meta = Tensor::from(
      {6}, {static_cast<double>(enc.cfg.d_embed), static_cast<double>(enc.cfg.img_hidden),
            static_cast<double>(enc.cfg.text_max_len), static_cast<double>(enc.cfg.heads),
            static_cast<double>(enc.cfg.ff_hidden), static_cast<double>(enc.feature_dim)});
  entries.emplace_back("enc.meta", &meta);
  save_checkpoint(path, entries);
}

EncoderParams load_encoder(const std::filesystem::path& path, const Vocab& vocab) {
  auto tensors = load_checkpoint(path);
  const auto it = tensors.find("enc.meta");
  if (it == tensors.end()) throw std::runtime_error("encoder checkpoint: missing meta entry");
  const Tensor& meta = it->second;
  EncoderConfig cfg;
  cfg.d_embed = static_cast<size_t>(meta[0]);
  cfg.img_hidden = static_cast<size_t>(meta[1]);
  cfg.text_max_len = static_cast<size_t>(meta[2]);
  cfg.heads = static_cast<size_t>(meta[3]);
  cfg.ff_hidden = static_cast<size_t>(meta[4]);
  Rng dummy(0);
  EncoderParams enc = EncoderParams::init(vocab, static_cast<size_t>(meta[5]), cfg, dummy);
  for (Parameter* p : enc.parameters()) {
    const auto t = tensors.find(p->name);
    if (t == tensors.end()) throw std::runtime_error("encoder checkpoint: missing " + p->name);
    if (t->second.shape != p->value.shape)
      throw std::runtime_error("encoder checkpoint: shape mismatch for " + p->name);
    p->value = t->second;
  }
  return enc;
}

}  // namespace zcap::enc
