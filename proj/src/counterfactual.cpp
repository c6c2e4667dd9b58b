#include "zcap/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "zcap/ops.hpp"

namespace zcap::cf {

ConceptShift concept_direction(const world::CaptionText& source, const world::CaptionText& target,
                               const enc::EncoderParams& encoder) {
  const enc::Embedding from = enc::encode_text(source, encoder);
  const enc::Embedding to = enc::encode_text(target, encoder);
  ConceptShift shift;
  shift.source_phrase = source.text();
  shift.target_phrase = target.text();
  shift.direction = Tensor({from.dim()});
  for (size_t i = 0; i < from.dim(); ++i) shift.direction[i] = to.values[i] - from.values[i];
  return shift;
}

enc::Embedding apply_counterfactual(const enc::Embedding& f_image, const ConceptShift& shift) {
  if (f_image.dim() != shift.direction.size())
    throw std::invalid_argument("apply_counterfactual: dimension mismatch");
  if (shift.scale == 0.0) return f_image;  // exact identity by contract
  std::vector<double> moved(f_image.dim());
  double norm_sq = 0.0;
  for (size_t i = 0; i < moved.size(); ++i) {
    moved[i] = f_image.values[i] + shift.scale * shift.direction[i];
    norm_sq += moved[i] * moved[i];
  }
  const double norm = std::sqrt(norm_sq);
  if (norm < 1e-12) throw std::runtime_error("apply_counterfactual: zero-norm result");
  enc::Embedding out;
  out.values.resize(moved.size());
  for (size_t i = 0; i < moved.size(); ++i) out.values[i] = moved[i] / norm;
  return out;
}

void caption_diff(const world::CaptionText& a, const world::CaptionText& b,
                  std::vector<std::string>& removed, std::vector<std::string>& added) {
  const auto& x = a.tokens;
  const auto& y = b.tokens;
  std::vector<std::vector<size_t>> dp(x.size() + 1, std::vector<size_t>(y.size() + 1, 0));
  for (size_t i = 1; i <= x.size(); ++i)
    for (size_t j = 1; j <= y.size(); ++j)
      dp[i][j] = x[i - 1] == y[j - 1] ? dp[i - 1][j - 1] + 1 : std::max(dp[i - 1][j], dp[i][j - 1]);
  removed.clear();
  added.clear();
  size_t i = x.size(), j = y.size();
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && x[i - 1] == y[j - 1]) {
      --i;
      --j;
    } else if (j > 0 && (i == 0 || dp[i][j - 1] >= dp[i - 1][j])) {
      added.push_back(y[--j]);
    } else {
      removed.push_back(x[--i]);
    }
  }
  std::reverse(removed.begin(), removed.end());
  std::reverse(added.begin(), added.end());
}

std::vector<CounterfactualPair> counterfactual_report(const std::vector<clm::EvalItem>& images,
                                                      const ConceptShift& shift,
                                                      const clm::DecoderParams& decoder,
                                                      const gen::GenerationConfig& cfg,
                                                      const Vocab& vocab) {
  std::vector<CounterfactualPair> out;
  out.reserve(images.size());
  for (const auto& item : images) {
    CounterfactualPair pair;
    pair.scene_id = item.scene_id;
    const clm::InputSequence orig_in = gen::build_generation_input(item.f, item.anchors, vocab);
    pair.original = gen::beam_search(decoder, orig_in, cfg, vocab);
    const enc::Embedding moved = apply_counterfactual(item.f, shift);
    const clm::InputSequence cf_in = gen::build_generation_input(moved, item.anchors, vocab);
    pair.shifted = gen::beam_search(decoder, cf_in, cfg, vocab);
    caption_diff(pair.original, pair.shifted, pair.removed, pair.added);
    out.push_back(std::move(pair));
  }
  return out;
}

}  // namespace zcap::cf
