// Miniature dual encoder: two independent stacks mapping raw image features
// and token sequences into one shared space, trained with a symmetric
// contrastive objective over in-batch similarity.
#pragma once

#include <filesystem>
#include <functional>
#include <utility>
#include <vector>

#include "zcap/layers.hpp"
#include "zcap/microworld.hpp"
#include "zcap/vocab.hpp"

namespace zcap::enc {

struct Embedding {
  std::vector<double> values;

  size_t dim() const { return values.size(); }
};

struct EncoderConfig {
  size_t d_embed = 64;
  size_t img_hidden = 128;
  size_t text_max_len = 32;
  size_t heads = 4;
  size_t ff_hidden = 256;
  double init_temperature = 0.07;
};

struct EncoderParams {
  EncoderConfig cfg;
  Vocab vocab;
  size_t feature_dim = 0;

  nn::Linear img_fc1, img_fc2;      // f_V
  Parameter tok_emb, pos_emb;       // f_L
  nn::TransformerBlock text_block;
  nn::Linear pool_proj;
  Parameter log_inv_temp;           // scalar; similarity logits scale by exp of it

  static EncoderParams init(const Vocab& vocab, size_t feature_dim, const EncoderConfig& cfg, Rng& rng);
  std::vector<Parameter*> parameters();
  double temperature() const;
};

// Both encoders emit unit-norm vectors.
Embedding encode_image(const world::RawImageFeature& raw, const EncoderParams& enc);
Embedding encode_text(const world::CaptionText& tokens, const EncoderParams& enc);

// Cosine similarity; throws on zero-norm input.
double similarity(const Embedding& a, const Embedding& b);

// Symmetric cross-entropy over the batch similarity matrix (image->text and
// text->image averaged), logits scaled by 1/temperature.
double contrastive_loss(const std::vector<std::pair<world::RawImageFeature, world::CaptionText>>& batch,
                        const EncoderParams& enc);
double contrastive_loss_from_embeddings(const std::vector<Embedding>& image_side,
                                        const std::vector<Embedding>& text_side, double log_inv_temp);

// One gradient-accumulating pass over a batch; returns the loss. Exposed so
// the finite-difference harness can check the full encoder objective.
double contrastive_loss_backward(const std::vector<std::pair<world::RawImageFeature, world::CaptionText>>& batch,
                                 EncoderParams& enc);

struct EncoderTrainOptions {
  size_t epochs = 30;
  size_t batch_size = 128;
  OptimizerConfig opt;
  uint64_t seed = 0;
  size_t val_pairs = 500;  // drawn from the validation split
  bool verbose = false;
  // Called after every completed epoch (checkpointing hook).
  std::function<void(size_t epoch, const EncoderParams&)> on_epoch;
};

struct EncoderTrainResult {
  EncoderParams params;
  std::vector<double> epoch_losses;
  std::vector<double> val_retrieval;  // logged once per epoch
};

EncoderTrainResult train_encoder(const world::DatasetBundle& bundle, const EncoderTrainOptions& opts);

// Top-1 nearest-neighbor accuracy, both directions averaged.
double retrieval_accuracy(const EncoderParams& enc,
                          const std::vector<std::pair<world::RawImageFeature, world::CaptionText>>& pairs);

void save_encoder(const EncoderParams& enc, const std::filesystem::path& path);
EncoderParams load_encoder(const std::filesystem::path& path, const Vocab& vocab);

}  // namespace zcap::enc
