#include "zcap/clm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "zcap/checkpoint.hpp"
#include "zcap/generation.hpp"

namespace zcap::clm {

using ojson = nlohmann::ordered_json;

std::string InputSequence::layout_bytes() const {
  std::string out;
  out += kind == Kind::text_training ? 'T' : 'G';
  for (size_t i = 0; i < tokens.size(); ++i) {
    out += ':';
    out += tokens[i] == kDenseSlot ? "D" : std::to_string(tokens[i]);
    out += loss_mask[i] ? '+' : '-';
  }
  return out;
}

DecoderParams DecoderParams::init(size_t vocab_size, const ClmConfig& cfg, Rng& rng) {
  DecoderParams p;
  p.d_model = cfg.d_model;
  p.max_len = cfg.max_len;
  p.vocab_size = vocab_size;
  p.tok_emb = Parameter("dec.tok_emb", Tensor::randn({vocab_size, cfg.d_model}, rng, 0.02));
  p.pos_emb = Parameter("dec.pos_emb", Tensor::randn({cfg.max_len, cfg.d_model}, rng, 0.02));
  for (size_t l = 0; l < cfg.layers; ++l)
    p.blocks.emplace_back("dec.block" + std::to_string(l), cfg.d_model, cfg.heads, cfg.ff_hidden, rng);
  p.ln_f = nn::LayerNorm("dec.ln_f", cfg.d_model);
  p.out_proj = nn::Linear("dec.out", cfg.d_model, vocab_size, rng, 0.02);
  return p;
}

std::vector<Parameter*> DecoderParams::parameters() {
  std::vector<Parameter*> out;
  out.push_back(&tok_emb);
  out.push_back(&pos_emb);
  for (auto& b : blocks) nn::collect_params(b, out);
  nn::collect_params(ln_f, out);
  nn::collect_params(out_proj, out);
  return out;
}

InputSequence build_prefix_sequence(const enc::Embedding& f, const std::vector<std::string>& anchors,
                                    const Vocab& vocab, InputSequence::Kind kind,
                                    bool keep_empty_anchor_block) {
  InputSequence seq;
  seq.kind = kind;
  seq.prefix = Tensor::from({f.dim()}, f.values);
  seq.tokens = {Vocab::kCls, InputSequence::kDenseSlot, Vocab::kSep};
  if (!anchors.empty()) {
    for (const auto& a : anchors) seq.tokens.push_back(vocab.id(a));
    seq.tokens.push_back(Vocab::kSep);
  } else if (keep_empty_anchor_block) {
    seq.tokens.push_back(Vocab::kSep);
  }
  seq.loss_mask.assign(seq.tokens.size(), 0);
  seq.prefix_len = seq.tokens.size();
  return seq;
}

InputSequence build_training_input(const enc::Embedding& f_text, const std::vector<std::string>& anchors,
                                   const world::CaptionText& caption, double q, Rng& rng,
                                   const Vocab& vocab, size_t max_len) {
  if (caption.tokens.empty()) throw std::invalid_argument("build_training_input: empty caption");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("build_training_input: q out of [0,1]");
  // All-or-none: one draw decides the whole anchor block. The draw is taken
  // even for anchorless samples to keep the stream position independent of
  // the anchor list.
  const bool drop = rng.uniform() < q;
  const std::vector<std::string> kept = drop ? std::vector<std::string>{} : anchors;
  InputSequence seq = build_prefix_sequence(f_text, kept, vocab, InputSequence::Kind::text_training,
                                            /*keep_empty_anchor_block=*/false);
  for (const auto& tok : caption.tokens) {
    seq.tokens.push_back(vocab.id(tok));
    seq.loss_mask.push_back(1);
  }
  seq.tokens.push_back(Vocab::kCls);  // terminal, supervised as the stop symbol
  seq.loss_mask.push_back(1);
  if (seq.tokens.size() > max_len)
    throw std::invalid_argument("build_training_input: sequence exceeds max_len");
  return seq;
}

namespace {

Tensor embed_input(const DecoderParams& params, const InputSequence& input) {
  const size_t t_len = input.length();
  if (t_len > params.max_len) throw std::invalid_argument("decoder: input exceeds max_len");
  Tensor x({t_len, params.d_model});
  for (size_t t = 0; t < t_len; ++t) {
    double* r = x.row(t);
    const double* pos = params.pos_emb.value.row(t);
    if (input.tokens[t] == InputSequence::kDenseSlot) {
      if (input.prefix.size() != params.d_model)
        throw std::invalid_argument("decoder: prefix dimension mismatch");
      for (size_t j = 0; j < params.d_model; ++j) r[j] = input.prefix[j] + pos[j];
    } else {
      const int id = input.tokens[t];
      if (id < 0 || static_cast<size_t>(id) >= params.vocab_size)
        throw std::invalid_argument("decoder: token id out of range");
      const double* tok = params.tok_emb.value.row(static_cast<size_t>(id));
      for (size_t j = 0; j < params.d_model; ++j) r[j] = tok[j] + pos[j];
    }
  }
  return x;
}

}  // namespace

Tensor decoder_forward(const DecoderParams& params, const InputSequence& input, DecoderCache* cache) {
  Tensor h = embed_input(params, input);
  if (cache) {
    cache->x = h;
    cache->blocks.resize(params.blocks.size());
  }
  for (size_t b = 0; b < params.blocks.size(); ++b)
    h = nn::block_forward(params.blocks[b], h, /*causal=*/true, cache ? &cache->blocks[b] : nullptr);
  Tensor hidden = ops::layer_norm(h, params.ln_f.gain.value, params.ln_f.bias.value,
                                  cache ? &cache->ln_f : nullptr);
  if (cache) cache->hidden = hidden;
  return nn::linear_forward(params.out_proj, hidden);
}

namespace {

// Shifted targets: the logits at position i-1 score the token at position i.
void shifted_targets(const InputSequence& input, std::vector<int>& targets,
                     std::vector<uint8_t>& mask) {
  const size_t t_len = input.length();
  targets.assign(t_len - 1, 0);
  mask.assign(t_len - 1, 0);
  for (size_t p = 1; p < t_len; ++p) {
    if (!input.loss_mask[p]) continue;
    if (input.tokens[p] == InputSequence::kDenseSlot)
      throw std::invalid_argument("clm_loss: dense position cannot carry loss");
    targets[p - 1] = input.tokens[p];
    mask[p - 1] = 1;
  }
}

Tensor drop_last_row(const Tensor& logits) {
  Tensor out({logits.shape[0] - 1, logits.shape[1]});
  std::copy(logits.v.begin(), logits.v.end() - static_cast<long>(logits.shape[1]), out.v.begin());
  return out;
}

}  // namespace

double clm_loss(const DecoderParams& params, const InputSequence& input) {
  if (input.kind != InputSequence::Kind::text_training)
    throw std::invalid_argument("clm_loss: text-training layout required");
  if (input.length() < 2) return 0.0;
  const Tensor logits = decoder_forward(params, input, nullptr);
  std::vector<int> targets;
  std::vector<uint8_t> mask;
  shifted_targets(input, targets, mask);
  return ops::cross_entropy(drop_last_row(logits), targets, mask);
}

double clm_loss_backward(DecoderParams& params, const InputSequence& input, double grad_scale) {
  if (input.kind != InputSequence::Kind::text_training)
    throw std::invalid_argument("clm_loss: text-training layout required");
  DecoderCache cache;
  const Tensor logits = decoder_forward(params, input, &cache);
  std::vector<int> targets;
  std::vector<uint8_t> mask;
  shifted_targets(input, targets, mask);
  const Tensor scoring = drop_last_row(logits);
  const double loss = ops::cross_entropy(scoring, targets, mask);

  Tensor dscoring = ops::cross_entropy_backward(scoring, targets, mask);
  if (grad_scale != 1.0)
    for (double& g : dscoring.v) g *= grad_scale;
  Tensor dlogits({logits.shape[0], logits.shape[1]});
  std::copy(dscoring.v.begin(), dscoring.v.end(), dlogits.v.begin());

  Tensor dhidden = nn::linear_backward(params.out_proj, cache.hidden, dlogits);
  Tensor dh = ops::layer_norm_backward(cache.ln_f, params.ln_f.gain.value, dhidden,
                                       params.ln_f.gain.grad, params.ln_f.bias.grad);
  for (size_t b = params.blocks.size(); b-- > 0;)
    dh = nn::block_backward(params.blocks[b], cache.blocks[b], /*causal=*/true, dh);
  for (size_t t = 0; t < input.length(); ++t) {
    const double* r = dh.row(t);
    double* pos_g = params.pos_emb.grad.row(t);
    for (size_t j = 0; j < params.d_model; ++j) pos_g[j] += r[j];
    if (input.tokens[t] != InputSequence::kDenseSlot) {
      double* tok_g = params.tok_emb.grad.row(static_cast<size_t>(input.tokens[t]));
      for (size_t j = 0; j < params.d_model; ++j) tok_g[j] += r[j];
    }
  }
  return loss;
}

namespace {

Tensor ingest_row(const DecoderParams& params, DecoderState& state, const Tensor& x_row) {
  Tensor h = x_row;
  for (size_t b = 0; b < params.blocks.size(); ++b) h = nn::block_step(params.blocks[b], state.kv[b], h);
  Tensor hidden = ops::layer_norm(h, params.ln_f.gain.value, params.ln_f.bias.value, nullptr);
  ++state.pos;
  return nn::linear_forward(params.out_proj, hidden);
}

Tensor embed_one(const DecoderParams& params, const InputSequence& input, size_t t) {
  Tensor x({1, params.d_model});
  const double* pos = params.pos_emb.value.row(t);
  double* r = x.row(0);
  if (input.tokens[t] == InputSequence::kDenseSlot) {
    for (size_t j = 0; j < params.d_model; ++j) r[j] = input.prefix[j] + pos[j];
  } else {
    const double* tok = params.tok_emb.value.row(static_cast<size_t>(input.tokens[t]));
    for (size_t j = 0; j < params.d_model; ++j) r[j] = tok[j] + pos[j];
  }
  return x;
}

}  // namespace

Tensor decoder_prefill(const DecoderParams& params, const InputSequence& input, DecoderState& state) {
  if (input.length() == 0) throw std::invalid_argument("decoder_prefill: empty input");
  if (input.length() > params.max_len) throw std::invalid_argument("decoder_prefill: input exceeds max_len");
  state.kv.assign(params.blocks.size(), nn::BlockKv{});
  state.pos = 0;
  Tensor logits;
  for (size_t t = 0; t < input.length(); ++t) logits = ingest_row(params, state, embed_one(params, input, t));
  return logits;
}

Tensor decoder_step(const DecoderParams& params, DecoderState& state, int token) {
  if (state.pos >= params.max_len) throw std::invalid_argument("decoder_step: position exceeds max_len");
  if (token < 0 || static_cast<size_t>(token) >= params.vocab_size)
    throw std::invalid_argument("decoder_step: token id out of range");
  Tensor x({1, params.d_model});
  const double* pos = params.pos_emb.value.row(state.pos);
  const double* tok = params.tok_emb.value.row(static_cast<size_t>(token));
  for (size_t j = 0; j < params.d_model; ++j) x.v[j] = tok[j] + pos[j];
  return ingest_row(params, state, x);
}

std::pair<metrics::MetricReport, metrics::MetricReport> evaluate_transfer(
    const DecoderParams& params, const std::vector<EvalItem>& text_eval,
    const std::vector<EvalItem>& image_eval, const gen::GenerationConfig& gencfg, const Vocab& vocab) {
  if (text_eval.empty() || image_eval.empty())
    throw std::invalid_argument("evaluate_transfer: both eval sets must be nonempty");
  const auto run = [&](const std::vector<EvalItem>& items) {
    metrics::Candidates cands;
    metrics::ReferenceSets refs;
    for (const auto& item : items) {
      InputSequence input = gen::build_generation_input(item.f, item.anchors, vocab);
      world::CaptionText cap = gen::beam_search(params, input, gencfg, vocab);
      cap.scene_id = item.scene_id;
      cands.push_back(std::move(cap));
      refs.push_back(item.references);
    }
    return metrics::evaluate_set(cands, refs);
  };
  return {run(text_eval), run(image_eval)};
}

ClmTrainResult train_clm(const std::vector<TrainSample>& corpus, const ClmConfig& cfg,
                         const Vocab& vocab, const std::vector<EvalItem>& val_text,
                         const std::vector<EvalItem>& val_image, const gen::GenerationConfig& gencfg,
                         const EpochCallback& on_epoch) {
  if (corpus.empty()) throw std::invalid_argument("train_clm: empty corpus");
  Rng root(cfg.seed);
  Rng init_rng = root.substream("clm-init");
  DecoderParams params = DecoderParams::init(vocab.size(), cfg, init_rng);
  auto param_ptrs = params.parameters();

  const bool evaluate = !val_text.empty() && !val_image.empty();
  TrainingLog log;
  DecoderParams best = params;
  double best_score = -1.0;
  size_t since_best = 0;

  for (size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng = root.substream("clm-batch", epoch);
    Rng dropout_rng = root.substream("clm-dropout", epoch);
    std::vector<size_t> order(corpus.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    size_t in_batch = 0;
    const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);
    for (size_t i = 0; i < order.size(); ++i) {
      const TrainSample& s = corpus[order[i]];
      InputSequence input =
          build_training_input(s.f_text, s.anchors, s.caption, cfg.q, dropout_rng, vocab, cfg.max_len);
      epoch_loss += clm_loss_backward(params, input, inv_batch);
      if (++in_batch == cfg.batch_size || i + 1 == order.size()) {
        adam_step(param_ptrs, cfg.optimizer);
        in_batch = 0;
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(corpus.size());
    if (evaluate) {
      auto [text_rep, cap_rep] = evaluate_transfer(params, val_text, val_image, gencfg, vocab);
      rec.text_gen = text_rep;
      rec.caption = cap_rep;
      if (cap_rep.cider > best_score) {
        best_score = cap_rep.cider;
        best = params;
        log.best_epoch = epoch;
        rec.is_best = true;
        since_best = 0;
      } else {
        ++since_best;
      }
    }
    if (cfg.verbose)
      std::printf("clm epoch %zu loss %.4f text-mean %.2f caption-mean %.2f%s\n", epoch, rec.train_loss,
                  rec.text_gen.mean_score, rec.caption.mean_score, rec.is_best ? " *" : "");
    log.epochs.push_back(rec);
    if (on_epoch) on_epoch(epoch, evaluate ? best : params);
    if (evaluate && since_best >= cfg.patience) break;
  }
  if (!evaluate) {
    best = params;
    log.best_epoch = log.epochs.empty() ? 0 : log.epochs.size();
  }
  return {std::move(best), std::move(log)};
}

void save_decoder(const DecoderParams& params, const std::filesystem::path& path) {
  DecoderParams& p = const_cast<DecoderParams&>(params);
  std::vector<std::pair<std::string, const Tensor*>> entries;
  for (Parameter* par : p.parameters()) entries.emplace_back(par->name, &par->value);
  size_t heads = p.blocks.empty() ? 1 : p.blocks[0].attn.heads;
  size_t ff = p.blocks.empty() ? 0 : p.blocks[0].ff.fc1.w.value.shape[1];
  const Tensor meta = Tensor::from(
      {6}, {static_cast<double>(p.d_model), static_cast<double>(p.max_len),
            static_cast<double>(p.vocab_size), static_cast<double>(p.blocks.size()),
            static_cast<double>(heads), static_cast<double>(ff)});
  entries.emplace_back("dec.meta", &meta);
  save_checkpoint(path, entries);
}

DecoderParams load_decoder(const std::filesystem::path& path) {
  auto tensors = load_checkpoint(path);
  const auto it = tensors.find("dec.meta");
  if (it == tensors.end()) throw std::runtime_error("decoder checkpoint: missing meta entry");
  const Tensor& meta = it->second;
  ClmConfig cfg;
  cfg.d_model = static_cast<size_t>(meta[0]);
  cfg.max_len = static_cast<size_t>(meta[1]);
  cfg.layers = static_cast<size_t>(meta[3]);
  cfg.heads = static_cast<size_t>(meta[4]);
  cfg.ff_hidden = static_cast<size_t>(meta[5]);
  Rng dummy(0);
  DecoderParams params = DecoderParams::init(static_cast<size_t>(meta[2]), cfg, dummy);
  for (Parameter* p : params.parameters()) {
    const auto t = tensors.find(p->name);
    if (t == tensors.end()) throw std::runtime_error("decoder checkpoint: missing " + p->name);
    if (t->second.shape != p->value.shape)
      throw std::runtime_error("decoder checkpoint: shape mismatch for " + p->name);
    p->value = t->second;
  }
  return params;
}

namespace {

ojson report_json(const metrics::MetricReport& r) {
  ojson j;
  j["b1"] = r.bleu1;
  j["b4"] = r.bleu4;
  j["rl"] = r.rouge_l;
  j["cider"] = r.cider;
  j["mean"] = r.mean_score;
  j["n"] = r.sample_count;
  return j;
}

metrics::MetricReport report_from_json(const ojson& j) {
  metrics::MetricReport r;
  r.bleu1 = j.at("b1");
  r.bleu4 = j.at("b4");
  r.rouge_l = j.at("rl");
  r.cider = j.at("cider");
  r.mean_score = j.at("mean");
  r.sample_count = j.at("n");
  return r;
}

}  // namespace

void save_training_log(const TrainingLog& log, const std::filesystem::path& path) {
  std::string out;
  for (const auto& rec : log.epochs) {
    ojson j;
    j["epoch"] = rec.epoch;
    j["loss"] = rec.train_loss;
    j["text"] = report_json(rec.text_gen);
    j["caption"] = report_json(rec.caption);
    j["best"] = rec.is_best;
    out += j.dump() + "\n";
  }
  atomic_write_text(path, out);
}

TrainingLog load_training_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open training log: " + path.string());
  TrainingLog log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ojson j;
    try {
      j = ojson::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error("malformed training log line: " + line);
    }
    EpochRecord rec;
    rec.epoch = j.at("epoch");
    rec.train_loss = j.at("loss");
    rec.text_gen = report_from_json(j.at("text"));
    rec.caption = report_from_json(j.at("caption"));
    rec.is_best = j.at("best");
    if (rec.is_best) log.best_epoch = rec.epoch;
    log.epochs.push_back(rec);
  }
  return log;
}

}  // namespace zcap::clm
