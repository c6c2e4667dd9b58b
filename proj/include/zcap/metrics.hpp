// Corpus-level caption metrics: BLEU with modified n-gram precision and
// brevity penalty, ROUGE-L over the longest common subsequence, and tf-idf
// consensus scoring with the usual length penalty and x10 scaling.
#pragma once

#include <cstddef>
#include <vector>

#include "zcap/microworld.hpp"

namespace zcap::metrics {

struct MetricReport {
  double bleu1 = 0.0;    // [0,1]
  double bleu4 = 0.0;    // [0,1]
  double rouge_l = 0.0;  // [0,1]
  double cider = 0.0;    // >= 0, natural x10 scale
  double mean_score = 0.0;
  size_t sample_count = 0;
};

using Candidates = std::vector<world::CaptionText>;
using ReferenceSets = std::vector<std::vector<world::CaptionText>>;

double bleu(const Candidates& candidates, const ReferenceSets& references, size_t max_order);
double rouge_l(const Candidates& candidates, const ReferenceSets& references);
double cider(const Candidates& candidates, const ReferenceSets& references);

MetricReport evaluate_set(const Candidates& candidates, const ReferenceSets& references);

// Display convention for the grid/table outputs: BLEU and ROUGE-L scaled by
// 100, the consensus score on its natural scale, arithmetic mean of the four.
double mean_of_displayed(const MetricReport& r);

inline constexpr double kRougeBetaSq = 1.2;
inline constexpr double kCiderSigma = 6.0;

}  // namespace zcap::metrics
