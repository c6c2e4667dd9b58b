// Zero-shot caption generation: assemble the generation-phase input from an
// image-side embedding plus thresholded detector anchors, then beam-search
// decode with the frozen decoder.
#pragma once

#include <vector>

#include "zcap/clm.hpp"
#include "zcap/dualencoder.hpp"
#include "zcap/microworld.hpp"

namespace zcap::gen {

struct GenerationConfig {
  size_t beam_width = 5;
  size_t max_len = 32;            // generated tokens, not counting the prefix
  double p = 0.5;                 // detector confidence threshold
  bool length_normalize = false;  // off: pick by total log-probability
};

struct BeamHypothesis {
  std::vector<int> tokens;  // generated ids, terminal [cls] excluded
  double log_prob = 0.0;
  bool finished = false;
};

// Labels with confidence strictly greater than p, deduplicated, in
// descending-confidence order.
std::vector<std::string> filter_anchors(const std::vector<world::Detection>& detections, double p);

// Generation layout [cls][F][sep] A1..An [sep]; the caption region is left
// empty. Detector labels outside the vocabulary are dropped. With zero
// anchors both separators remain.
clm::InputSequence build_generation_input(const enc::Embedding& f_image,
                                          const std::vector<std::string>& anchors, const Vocab& vocab);

// Deterministic beam search over the vocabulary minus [pad]/[sep]/[unk];
// hypotheses finish on [cls] or at max_len. Ties break toward the
// lexicographically smallest token-id sequence. Returns the best finished
// hypothesis with specials stripped.
world::CaptionText beam_search(const clm::DecoderParams& decoder, const clm::InputSequence& input,
                               const GenerationConfig& cfg, const Vocab& vocab);

// encode -> detect -> filter -> build -> decode. The rng drives the
// simulated detector only.
world::CaptionText caption_image(const world::Scene& scene, const world::RawImageFeature& raw,
                                 const enc::EncoderParams& enc, const clm::DecoderParams& dec,
                                 const world::WorldSpec& spec, const world::DetectorNoiseSpec& noise,
                                 const GenerationConfig& cfg, Rng& rng);

// Variant with detections already in hand (e.g. read from a file).
world::CaptionText caption_image(const world::RawImageFeature& raw,
                                 const std::vector<world::Detection>& detections,
                                 const enc::EncoderParams& enc, const clm::DecoderParams& dec,
                                 const GenerationConfig& cfg);

}  // namespace zcap::gen
