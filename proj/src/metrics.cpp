#include "zcap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

namespace zcap::metrics {

namespace {

using NgramCounts = std::map<std::string, size_t>;

// n-grams as joined strings; tokens never contain the separator.
NgramCounts ngram_counts(const std::vector<std::string>& tokens, size_t order) {
  NgramCounts out;
  if (tokens.size() < order) return out;
  for (size_t i = 0; i + order <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (size_t j = 1; j < order; ++j) key += '\x1f' + tokens[i + j];
    ++out[key];
  }
  return out;
}

void check_aligned(const Candidates& candidates, const ReferenceSets& references) {
  if (candidates.empty()) throw std::invalid_argument("metrics: empty candidate set");
  if (candidates.size() != references.size())
    throw std::invalid_argument("metrics: candidate/reference count mismatch");
  for (const auto& refs : references)
    if (refs.empty()) throw std::invalid_argument("metrics: sample with no references");
}

size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

double bleu(const Candidates& candidates, const ReferenceSets& references, size_t max_order) {
  check_aligned(candidates, references);
  if (max_order < 1) throw std::invalid_argument("bleu: order must be >= 1");
  std::vector<double> matched(max_order, 0.0), total(max_order, 0.0);
  double cand_len = 0.0, ref_len = 0.0;
  for (size_t s = 0; s < candidates.size(); ++s) {
    const auto& cand = candidates[s].tokens;
    cand_len += static_cast<double>(cand.size());
    // closest reference length; ties go to the shorter one
    size_t best_ref = references[s][0].tokens.size();
    for (const auto& ref : references[s]) {
      const size_t len = ref.tokens.size();
      const auto diff = [&](size_t l) {
        return l > cand.size() ? l - cand.size() : cand.size() - l;
      };
      if (diff(len) < diff(best_ref) || (diff(len) == diff(best_ref) && len < best_ref)) best_ref = len;
    }
    ref_len += static_cast<double>(best_ref);
    for (size_t n = 1; n <= max_order; ++n) {
      const NgramCounts cand_counts = ngram_counts(cand, n);
      NgramCounts max_ref;
      for (const auto& ref : references[s])
        for (const auto& [gram, cnt] : ngram_counts(ref.tokens, n))
          max_ref[gram] = std::max(max_ref[gram], cnt);
      for (const auto& [gram, cnt] : cand_counts) {
        total[n - 1] += static_cast<double>(cnt);
        const auto it = max_ref.find(gram);
        if (it != max_ref.end()) matched[n - 1] += static_cast<double>(std::min(cnt, it->second));
      }
    }
  }
  double log_prec = 0.0;
  for (size_t n = 0; n < max_order; ++n) {
    if (matched[n] == 0.0 || total[n] == 0.0) return 0.0;
    log_prec += std::log(matched[n] / total[n]);
  }
  const double bp = cand_len >= ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
  return bp * std::exp(log_prec / static_cast<double>(max_order));
}

double rouge_l(const Candidates& candidates, const ReferenceSets& references) {
  check_aligned(candidates, references);
  double sum = 0.0;
  for (size_t s = 0; s < candidates.size(); ++s) {
    const auto& cand = candidates[s].tokens;
    double best = 0.0;
    for (const auto& ref : references[s]) {
      if (cand.empty() || ref.tokens.empty()) continue;
      const double lcs = static_cast<double>(lcs_length(cand, ref.tokens));
      if (lcs == 0.0) continue;
      const double prec = lcs / static_cast<double>(cand.size());
      const double rec = lcs / static_cast<double>(ref.tokens.size());
      const double f = (1.0 + kRougeBetaSq) * prec * rec / (rec + kRougeBetaSq * prec);
      best = std::max(best, f);
    }
    sum += best;
  }
  return sum / static_cast<double>(candidates.size());
}

namespace {

constexpr size_t kCiderOrders = 4;

struct TfIdfVec {
  std::map<std::string, double> weights[kCiderOrders];
  double norm[kCiderOrders] = {0, 0, 0, 0};
  double length = 0.0;
};

TfIdfVec to_tfidf(const std::vector<std::string>& tokens, const std::map<std::string, size_t>& doc_freq,
                  double log_corpus_size) {
  TfIdfVec vec;
  vec.length = static_cast<double>(tokens.size());
  for (size_t n = 1; n <= kCiderOrders; ++n) {
    for (const auto& [gram, cnt] : ngram_counts(tokens, n)) {
      const auto it = doc_freq.find(gram);
      const double df = it == doc_freq.end() ? 0.0 : static_cast<double>(it->second);
      const double idf = log_corpus_size - std::log(std::max(1.0, df));
      const double w = static_cast<double>(cnt) * idf;
      vec.weights[n - 1][gram] = w;
      vec.norm[n - 1] += w * w;
    }
  }
  for (double& x : vec.norm) x = std::sqrt(x);
  return vec;
}

// Clipped tf-idf similarity with the Gaussian length penalty, per order.
double consensus_sim(const TfIdfVec& hyp, const TfIdfVec& ref) {
  const double delta = hyp.length - ref.length;
  const double penalty = std::exp(-(delta * delta) / (2.0 * kCiderSigma * kCiderSigma));
  double acc = 0.0;
  for (size_t n = 0; n < kCiderOrders; ++n) {
    double val = 0.0;
    for (const auto& [gram, w] : hyp.weights[n]) {
      const auto it = ref.weights[n].find(gram);
      if (it != ref.weights[n].end()) val += std::min(w, it->second) * it->second;
    }
    if (hyp.norm[n] > 0.0 && ref.norm[n] > 0.0) val /= hyp.norm[n] * ref.norm[n];
    acc += val * penalty;
  }
  return acc / static_cast<double>(kCiderOrders);
}

}  // namespace

double cider(const Candidates& candidates, const ReferenceSets& references) {
  check_aligned(candidates, references);
  if (candidates.size() < 2) throw std::invalid_argument("cider: corpus too small for idf");
  // Document frequency: number of reference SETS containing the n-gram.
  std::map<std::string, size_t> doc_freq;
  for (const auto& refs : references) {
    std::set<std::string> seen;
    for (const auto& ref : refs)
      for (size_t n = 1; n <= kCiderOrders; ++n)
        for (const auto& [gram, cnt] : ngram_counts(ref.tokens, n)) seen.insert(gram);
    for (const auto& gram : seen) ++doc_freq[gram];
  }
  const double log_corpus = std::log(static_cast<double>(references.size()));
  double total = 0.0;
  for (size_t s = 0; s < candidates.size(); ++s) {
    const TfIdfVec hyp = to_tfidf(candidates[s].tokens, doc_freq, log_corpus);
    double acc = 0.0;
    for (const auto& ref : references[s]) acc += consensus_sim(hyp, to_tfidf(ref.tokens, doc_freq, log_corpus));
    total += 10.0 * acc / static_cast<double>(references[s].size());
  }
  return total / static_cast<double>(candidates.size());
}

MetricReport evaluate_set(const Candidates& candidates, const ReferenceSets& references) {
  MetricReport r;
  r.bleu1 = bleu(candidates, references, 1);
  r.bleu4 = bleu(candidates, references, 4);
  r.rouge_l = rouge_l(candidates, references);
  r.cider = cider(candidates, references);
  r.sample_count = candidates.size();
  r.mean_score = mean_of_displayed(r);
  return r;
}

double mean_of_displayed(const MetricReport& r) {
  return (100.0 * r.bleu1 + 100.0 * r.bleu4 + 100.0 * r.rouge_l + r.cider) / 4.0;
}

}  // namespace zcap::metrics
