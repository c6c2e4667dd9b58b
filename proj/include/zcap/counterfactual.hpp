// Concept-shift probe: derive a direction in the shared space from two text
// embeddings, apply it to image embeddings, and compare regenerated captions
// against the originals to surface concept dependencies.
#pragma once

#include <string>
#include <vector>

#include "zcap/clm.hpp"
#include "zcap/dualencoder.hpp"
#include "zcap/generation.hpp"

namespace zcap::cf {

struct ConceptShift {
  std::string source_phrase;
  std::string target_phrase;
  Tensor direction;  // encode_text(target) - encode_text(source); not normalized
  double scale = 1.0;
};

ConceptShift concept_direction(const world::CaptionText& source, const world::CaptionText& target,
                               const enc::EncoderParams& encoder);

// F + scale * direction, re-normalized to unit length.
enc::Embedding apply_counterfactual(const enc::Embedding& f_image, const ConceptShift& shift);

struct CounterfactualPair {
  uint64_t scene_id = 0;
  world::CaptionText original;
  world::CaptionText shifted;
  std::vector<std::string> removed;  // words in original but not in shifted
  std::vector<std::string> added;
};

// LCS-based word diff; diff(a,b) equals diff(b,a) with roles swapped.
void caption_diff(const world::CaptionText& a, const world::CaptionText& b,
                  std::vector<std::string>& removed, std::vector<std::string>& added);

// Per image: caption the original embedding and the shifted one with the same
// anchors, and report the word-level diff.
std::vector<CounterfactualPair> counterfactual_report(const std::vector<clm::EvalItem>& images,
                                                      const ConceptShift& shift,
                                                      const clm::DecoderParams& decoder,
                                                      const gen::GenerationConfig& cfg,
                                                      const Vocab& vocab);

}  // namespace zcap::cf
