// Cross-modal language modeling: a small causal transformer decoder whose
// first content position is a dense shared-space embedding instead of a
// vocabulary token. Training reconstructs the caption behind that embedding,
// optionally conditioned on anchor words with all-or-none random dropout.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "zcap/dualencoder.hpp"
#include "zcap/layers.hpp"
#include "zcap/metrics.hpp"
#include "zcap/vocab.hpp"

namespace zcap::gen {
struct GenerationConfig;
}

namespace zcap::clm {

// Token-position layout with one dense prefix slot and a per-position loss
// mask. Layouts:
//   text-training, anchors kept:  [cls][F][sep] A1..An [sep] T1..Tm [cls]
//   text-training, no anchors:    [cls][F][sep] T1..Tm [cls]
//   generation:                   [cls][F][sep] A1..An [sep]
// The mask is 1 exactly on caption tokens and the terminal [cls].
struct InputSequence {
  enum class Kind { text_training, generation };
  static constexpr int kDenseSlot = -1;

  std::vector<int> tokens;  // kDenseSlot marks the dense prefix position
  Tensor prefix;            // the dense vector, length d_embed
  std::vector<uint8_t> loss_mask;
  Kind kind = Kind::text_training;
  size_t prefix_len = 0;  // positions before the caption region

  size_t length() const { return tokens.size(); }
  // Canonical byte encoding of the layout (positions + specials + mask);
  // used to assert training/generation format sharing.
  std::string layout_bytes() const;
};

struct ClmConfig {
  double q = 0.5;  // anchor dropout probability, all-or-none per sample
  size_t max_len = 48;
  size_t epochs = 25;
  OptimizerConfig optimizer;
  size_t patience = 5;  // early stopping on validation caption consensus score
  uint64_t seed = 0;
  size_t batch_size = 16;
  size_t d_model = 64;
  size_t layers = 2;
  size_t heads = 4;
  size_t ff_hidden = 256;
  bool verbose = false;
};

struct DecoderParams {
  size_t d_model = 0, max_len = 0, vocab_size = 0;
  Parameter tok_emb;  // [V, d]
  Parameter pos_emb;  // [max_len, d]
  std::vector<nn::TransformerBlock> blocks;
  nn::LayerNorm ln_f;
  nn::Linear out_proj;  // [d, V]

  static DecoderParams init(size_t vocab_size, const ClmConfig& cfg, Rng& rng);
  std::vector<Parameter*> parameters();
};

// Shared prefix builder for both phases. With empty anchors the anchor block
// collapses ([cls][F][sep]...) unless keep_empty_anchor_block is set, which
// keeps the double separator the generation layout uses.
InputSequence build_prefix_sequence(const enc::Embedding& f, const std::vector<std::string>& anchors,
                                    const Vocab& vocab, InputSequence::Kind kind,
                                    bool keep_empty_anchor_block);

InputSequence build_training_input(const enc::Embedding& f_text, const std::vector<std::string>& anchors,
                                   const world::CaptionText& caption, double q, Rng& rng,
                                   const Vocab& vocab, size_t max_len = 48);

struct DecoderCache {
  Tensor x;
  std::vector<nn::BlockCache> blocks;
  ops::LayerNormCache ln_f;
  Tensor hidden;  // after final norm
};

// Per-position vocabulary logits; causal, dense prefix consumed directly.
Tensor decoder_forward(const DecoderParams& params, const InputSequence& input, DecoderCache* cache);

// Masked mean negative log-likelihood per sample (caption tokens + terminal
// [cls]); logits at position i-1 score the token at position i.
double clm_loss(const DecoderParams& params, const InputSequence& input);
// Accumulates grad_scale * gradients into the parameters, returns the loss.
double clm_loss_backward(DecoderParams& params, const InputSequence& input, double grad_scale = 1.0);

// Incremental decoding state (per-block key/value cache).
struct DecoderState {
  std::vector<nn::BlockKv> kv;
  size_t pos = 0;
};
// Feed the whole input, return logits at the last position (1 x V).
Tensor decoder_prefill(const DecoderParams& params, const InputSequence& input, DecoderState& state);
// Extend by one token, return logits at the new position.
Tensor decoder_step(const DecoderParams& params, DecoderState& state, int token);

struct TrainSample {
  enc::Embedding f_text;
  std::vector<std::string> anchors;
  world::CaptionText caption;
};

// One prepared evaluation case: an embedding to condition on, the anchors the
// decoder will see, and the references to score against.
struct EvalItem {
  enc::Embedding f;
  std::vector<std::string> anchors;
  std::vector<world::CaptionText> references;
  uint64_t scene_id = 0;
};

struct EpochRecord {
  size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  metrics::MetricReport text_gen;
  metrics::MetricReport caption;
  bool is_best = false;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  size_t best_epoch = 0;  // 1-based; 0 when no evaluation ran
};

struct ClmTrainResult {
  DecoderParams params;
  TrainingLog log;
};

// Both reports use identical generation settings.
std::pair<metrics::MetricReport, metrics::MetricReport> evaluate_transfer(
    const DecoderParams& params, const std::vector<EvalItem>& text_eval,
    const std::vector<EvalItem>& image_eval, const gen::GenerationConfig& gencfg, const Vocab& vocab);

// Trains on text-side embeddings only; per-epoch validation on both sides;
// returns the parameters of the best validation caption-score epoch. The
// callback fires after every completed epoch with the best parameters so far,
// so an interrupted run still leaves a usable checkpoint behind.
using EpochCallback = std::function<void(size_t epoch, const DecoderParams& best_so_far)>;
ClmTrainResult train_clm(const std::vector<TrainSample>& corpus, const ClmConfig& cfg,
                         const Vocab& vocab, const std::vector<EvalItem>& val_text,
                         const std::vector<EvalItem>& val_image, const gen::GenerationConfig& gencfg,
                         const EpochCallback& on_epoch = {});

void save_decoder(const DecoderParams& params, const std::filesystem::path& path);
DecoderParams load_decoder(const std::filesystem::path& path);

void save_training_log(const TrainingLog& log, const std::filesystem::path& path);
TrainingLog load_training_log(const std::filesystem::path& path);

}  // namespace zcap::clm
