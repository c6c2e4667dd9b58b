#include "zcap/generation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "zcap/ops.hpp"

namespace zcap::gen {

std::vector<std::string> filter_anchors(const std::vector<world::Detection>& detections, double p) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("filter_anchors: p out of [0,1]");
  std::vector<world::Detection> sorted = detections;
  std::sort(sorted.begin(), sorted.end(), [](const world::Detection& a, const world::Detection& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.label < b.label;
  });
  std::vector<std::string> out;
  for (const auto& d : sorted) {
    if (!(d.confidence > p)) continue;
    if (std::find(out.begin(), out.end(), d.label) == out.end()) out.push_back(d.label);
  }
  return out;
}

clm::InputSequence build_generation_input(const enc::Embedding& f_image,
                                          const std::vector<std::string>& anchors, const Vocab& vocab) {
  std::vector<std::string> known;
  for (const auto& a : anchors) {
    // An unknown label maps to [unk], which carries no usable signal; drop it.
    if (vocab.id_or_unk(a) != Vocab::kUnk) known.push_back(a);
  }
  return clm::build_prefix_sequence(f_image, known, vocab, clm::InputSequence::Kind::generation,
                                    /*keep_empty_anchor_block=*/true);
}

namespace {

struct ActiveHypothesis {
  std::vector<int> tokens;
  double log_prob = 0.0;
  clm::DecoderState state;
};

bool score_then_lex_less(double score_a, const std::vector<int>& tok_a, double score_b,
                         const std::vector<int>& tok_b) {
  // "Better" ordering: higher score first, lexicographically smaller on ties.
  if (score_a != score_b) return score_a > score_b;
  return tok_a < tok_b;
}

}  // namespace

world::CaptionText beam_search(const clm::DecoderParams& decoder, const clm::InputSequence& input,
                               const GenerationConfig& cfg, const Vocab& vocab) {
  if (cfg.beam_width < 1) throw std::invalid_argument("beam_search: beam_width must be >= 1");
  const size_t vocab_size = vocab.size();

  ActiveHypothesis root;
  Tensor logits = clm::decoder_prefill(decoder, input, root.state);

  std::vector<ActiveHypothesis> active;
  active.push_back(std::move(root));
  std::vector<Tensor> active_logits;
  active_logits.push_back(std::move(logits));

  std::vector<BeamHypothesis> finished;
  const auto final_score = [&](const BeamHypothesis& h) {
    return cfg.length_normalize && !h.tokens.empty()
               ? h.log_prob / static_cast<double>(h.tokens.size() + 1)
               : h.log_prob;
  };
  const auto add_finished = [&](std::vector<int> tokens, double log_prob) {
    for (const auto& f : finished)
      if (f.tokens == tokens) return;  // duplicates waste beam slots
    finished.push_back({std::move(tokens), log_prob, true});
  };

  const size_t room = decoder.max_len > input.length() ? decoder.max_len - input.length() : 0;
  const size_t max_steps = std::min(cfg.max_len, room);
  if (max_steps == 0) return world::CaptionText{};

  bool early_pruned = false;
  for (size_t step = 0; step < max_steps && !active.empty(); ++step) {
    struct Candidate {
      size_t parent;
      int token;
      double log_prob;
      std::vector<int> tokens;
    };
    std::vector<Candidate> candidates;
    for (size_t a = 0; a < active.size(); ++a) {
      const Tensor logp = ops::log_softmax_rows(active_logits[a]);
      for (size_t tok = 0; tok < vocab_size; ++tok) {
        const int id = static_cast<int>(tok);
        if (id == Vocab::kPad || id == Vocab::kSep || id == Vocab::kUnk) continue;
        Candidate c;
        c.parent = a;
        c.token = id;
        c.log_prob = active[a].log_prob + logp.at(0, tok);
        c.tokens = active[a].tokens;
        c.tokens.push_back(id);
        candidates.push_back(std::move(c));
      }
    }
    std::sort(candidates.begin(), candidates.end(), [&](const Candidate& x, const Candidate& y) {
      return score_then_lex_less(x.log_prob, x.tokens, y.log_prob, y.tokens);
    });

    // Keep the top beam_width candidates overall; a stop-symbol candidate
    // inside the beam finishes, everything below the cut is discarded. This
    // makes width 1 exactly greedy argmax decoding.
    std::vector<ActiveHypothesis> next;
    std::vector<Tensor> next_logits;
    size_t kept = 0;
    for (const Candidate& c : candidates) {
      if (kept == cfg.beam_width) break;
      ++kept;
      if (c.token == Vocab::kCls) {
        // The stop symbol closes the hypothesis; it is not part of the caption.
        std::vector<int> body(c.tokens.begin(), c.tokens.end() - 1);
        add_finished(std::move(body), c.log_prob);
        continue;
      }
      ActiveHypothesis h;
      h.tokens = c.tokens;
      h.log_prob = c.log_prob;
      h.state = active[c.parent].state;  // copy, then extend
      Tensor lg = clm::decoder_step(decoder, h.state, c.token);
      next.push_back(std::move(h));
      next_logits.push_back(std::move(lg));
    }
    active = std::move(next);
    active_logits = std::move(next_logits);

    if (!finished.empty() && !active.empty()) {
      // Log-probabilities only decrease; prune when no active beam can win.
      double best_finished = -1e300;
      for (const auto& f : finished) best_finished = std::max(best_finished, final_score(f));
      bool can_improve = false;
      for (const auto& h : active)
        if (h.log_prob > best_finished) can_improve = true;
      if (!can_improve && !cfg.length_normalize) {
        early_pruned = true;  // every active is already dominated
        break;
      }
    }
  }
  // Hypotheses still active at the cap count as finished as-is.
  if (!early_pruned)
    for (const auto& h : active) add_finished(h.tokens, h.log_prob);

  const BeamHypothesis* best = nullptr;
  for (const auto& f : finished) {
    if (!best || score_then_lex_less(final_score(f), f.tokens, final_score(*best), best->tokens))
      best = &f;
  }
  world::CaptionText caption;
  if (best)
    for (int id : best->tokens)
      if (!Vocab::is_special(id)) caption.tokens.push_back(vocab.word(id));
  return caption;
}

world::CaptionText caption_image(const world::Scene& scene, const world::RawImageFeature& raw,
                                 const enc::EncoderParams& enc, const clm::DecoderParams& dec,
                                 const world::WorldSpec& spec, const world::DetectorNoiseSpec& noise,
                                 const GenerationConfig& cfg, Rng& rng) {
  const auto detections = world::detect_objects(scene, spec, noise, rng);
  world::CaptionText caption = caption_image(raw, detections, enc, dec, cfg);
  caption.scene_id = scene.scene_id;
  return caption;
}

world::CaptionText caption_image(const world::RawImageFeature& raw,
                                 const std::vector<world::Detection>& detections,
                                 const enc::EncoderParams& enc, const clm::DecoderParams& dec,
                                 const GenerationConfig& cfg) {
  const enc::Embedding f = enc::encode_image(raw, enc);
  const auto anchors = filter_anchors(detections, cfg.p);
  const clm::InputSequence input = build_generation_input(f, anchors, enc.vocab);
  world::CaptionText caption = beam_search(dec, input, cfg, enc.vocab);
  caption.scene_id = raw.scene_id;
  return caption;
}

}  // namespace zcap::gen
