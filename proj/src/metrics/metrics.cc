// maac/metrics/metrics.cc

#include "maac/metrics/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace maac::metrics {
namespace {

using NgramCounts = std::map<std::vector<std::string>, double>;
constexpr std::size_t kCiderMaxN = 4;

NgramCounts ngrams(const Tokens& t, std::size_t n) {
  NgramCounts out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) {
    out[std::vector<std::string>(t.begin() + static_cast<std::ptrdiff_t>(i),
                                 t.begin() + static_cast<std::ptrdiff_t>(i + n))] += 1.0;
  }
  return out;
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<const Tokens*> non_empty(const std::vector<Tokens>& refs) {
  std::vector<const Tokens*> out;
  for (const auto& r : refs) {
    if (!r.empty()) out.push_back(&r);
  }
  return out;
}

}  // namespace

void validate_pairs(std::span<const EvalPair> pairs) {
  if (pairs.empty()) throw std::invalid_argument("metrics: empty corpus");
  for (const auto& p : pairs) {
    if (non_empty(p.references).empty()) {
      throw std::invalid_argument("metrics: clip '" + p.clip_id +
                                  "' has no non-empty reference");
    }
  }
}

double bleu_n(std::span<const EvalPair> pairs, int n, BleuOptions opt) {
  if (n < 1 || n > 4) throw std::invalid_argument("bleu_n: n must be in 1..4");
  validate_pairs(pairs);
  const auto N = static_cast<std::size_t>(n);
  std::vector<double> matched(N, 0.0), total(N, 0.0);
  double hyp_len = 0, ref_len = 0;
  for (const auto& p : pairs) {
    const auto refs = non_empty(p.references);
    const double c = static_cast<double>(p.hypothesis.size());
    hyp_len += c;
    double best_len = 0, best_gap = INFINITY;
    for (const Tokens* r : refs) {
      const double len = static_cast<double>(r->size());
      const double gap = std::abs(len - c);
      if (gap < best_gap || (gap == best_gap && len < best_len)) {
        best_gap = gap;
        best_len = len;
      }
    }
    ref_len += best_len;
    for (std::size_t k = 1; k <= N; ++k) {
      NgramCounts max_ref;
      for (const Tokens* r : refs) {
        for (const auto& [g, cnt] : ngrams(*r, k)) max_ref[g] = std::max(max_ref[g], cnt);
      }
      for (const auto& [g, cnt] : ngrams(p.hypothesis, k)) {
        auto it = max_ref.find(g);
        if (it != max_ref.end()) matched[k - 1] += std::min(cnt, it->second);
      }
      if (p.hypothesis.size() >= k) total[k - 1] += c - static_cast<double>(k) + 1;
    }
  }
  double log_sum = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    double m = matched[k], t = total[k];
    if (opt.add_one_smoothing && k > 0) {
      m += 1;
      t += 1;
    }
    if (m == 0 || t == 0) return 0.0;
    log_sum += std::log(m / t);
  }
  const double bp = hyp_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / hyp_len);
  return bp * std::exp(log_sum / static_cast<double>(N));
}

double rouge_l_sentence(const Tokens& hyp, std::span<const Tokens> refs, double beta) {
  double best_p = 0, best_r = 0;
  bool any = false;
  for (const auto& r : refs) {
    if (r.empty()) continue;
    any = true;
    if (hyp.empty()) continue;
    const auto l = static_cast<double>(lcs_length(r, hyp));
    best_p = std::max(best_p, l / static_cast<double>(hyp.size()));
    best_r = std::max(best_r, l / static_cast<double>(r.size()));
  }
  if (!any) throw std::invalid_argument("rouge_l: empty reference set");
  if (best_p == 0 || best_r == 0) return 0.0;
  const double b2 = beta * beta;
  return (1 + b2) * best_p * best_r / (best_r + b2 * best_p);
}

double rouge_l(std::span<const EvalPair> pairs, double beta) {
  validate_pairs(pairs);
  double total = 0;
  for (const auto& p : pairs) total += rouge_l_sentence(p.hypothesis, p.references, beta);
  return total / static_cast<double>(pairs.size());
}

struct CiderScorer::Vec {
  NgramCounts w;
  double sq_norm = 0;
};

CiderScorer::CiderScorer(std::vector<std::vector<Tokens>> references, double sigma)
    : sigma_(sigma) {
  if (references.empty()) throw std::invalid_argument("cider: empty corpus");
  for (auto& clip : references) {
    std::vector<Tokens> kept;
    for (auto& r : clip) {
      if (!r.empty()) kept.push_back(std::move(r));
    }
    if (kept.empty()) throw std::invalid_argument("cider: clip without references");
    refs_.push_back(std::move(kept));
  }
  for (const auto& clip : refs_) {
    std::set<std::vector<std::string>> seen;
    for (const Tokens& r : clip) {
      for (std::size_t n = 1; n <= kCiderMaxN; ++n) {
        for (const auto& [g, c] : ngrams(r, n)) seen.insert(g);
      }
    }
    for (const auto& g : seen) df_[g] += 1.0;
  }
  unit_idf_ = refs_.size() == 1;
  log_docs_ = std::log(static_cast<double>(refs_.size()));
}

std::vector<CiderScorer::Vec> CiderScorer::vectorize(const Tokens& t) const {
  std::vector<Vec> out(kCiderMaxN);
  for (std::size_t n = 1; n <= kCiderMaxN; ++n) {
    Vec& v = out[n - 1];
    for (const auto& [g, c] : ngrams(t, n)) {
      auto it = df_.find(g);
      const double d = it == df_.end() ? 0.0 : it->second;
      const double idf = unit_idf_ ? 1.0 : log_docs_ - std::log(std::max(1.0, d));
      v.w[g] = c * idf;
    }
    for (const auto& [g, x] : v.w) v.sq_norm += x * x;
  }
  return out;
}

double CiderScorer::score(const Tokens& hypothesis, std::size_t clip) const {
  const auto& refs = refs_.at(clip);
  const auto hv = vectorize(hypothesis);
  double acc = 0;
  for (const Tokens& r : refs) {
    const auto rv = vectorize(r);
    const double delta =
        static_cast<double>(hypothesis.size()) - static_cast<double>(r.size());
    const double penalty = std::exp(-(delta * delta) / (2 * sigma_ * sigma_));
    for (std::size_t n = 0; n < kCiderMaxN; ++n) {
      double s = 0;
      for (const auto& [g, x] : hv[n].w) {
        auto it = rv[n].w.find(g);
        if (it != rv[n].w.end()) s += std::min(x, it->second) * it->second;
      }
      // sqrt of the product keeps an exact match at exactly 1.
      if (hv[n].sq_norm != 0 && rv[n].sq_norm != 0) {
        s /= std::sqrt(hv[n].sq_norm * rv[n].sq_norm);
      }
      acc += s * penalty;
    }
  }
  return 10.0 * acc / kCiderMaxN / static_cast<double>(refs.size());
}

CiderResult cider_d(std::span<const EvalPair> pairs, double sigma) {
  validate_pairs(pairs);
  std::vector<std::vector<Tokens>> refs;
  for (const auto& p : pairs) refs.push_back(p.references);
  const CiderScorer scorer(std::move(refs), sigma);
  CiderResult result;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    result.per_clip.push_back(scorer.score(pairs[i].hypothesis, i));
  }
  for (double c : result.per_clip) result.corpus += c;
  result.corpus /= static_cast<double>(result.per_clip.size());
  return result;
}

double spider(double cider, double spice, SpiderMode mode) {
  return mode == SpiderMode::kUnitMean ? (cider / 10.0 + spice) / 2.0
                                       : (cider + spice) / 2.0;
}

MetricReport evaluate(std::span<const EvalPair> pairs, std::optional<double> spice,
                      SpiderMode mode) {
  MetricReport r;
  for (int n = 1; n <= 4; ++n) r.bleu[n - 1] = bleu_n(pairs, n);
  r.rouge_l = rouge_l(pairs);
  CiderResult c = cider_d(pairs);
  r.cider_d = c.corpus;
  r.cider_per_clip = std::move(c.per_clip);
  r.spider_mode = mode;
  if (spice) {
    r.spice = spice;
    r.spider = spider(r.cider_d, *spice, mode);
  }
  return r;
}

nlohmann::json MetricReport::to_json(std::span<const EvalPair> pairs) const {
  nlohmann::json raw = {{"bleu_1", bleu[0]}, {"bleu_2", bleu[1]}, {"bleu_3", bleu[2]},
                        {"bleu_4", bleu[3]}, {"rouge_l", rouge_l}, {"cider_d", cider_d}};
  if (spice) raw["spice"] = *spice;
  if (spider) raw["spider"] = *spider;
  nlohmann::json display;
  for (const auto& [k, v] : raw.items()) display[k] = v.get<double>() * 100.0;
  nlohmann::json j = {{"raw", raw}, {"display_x100", display}};
  if (spider) {
    j["spider_mode"] = spider_mode == SpiderMode::kRawMean ? "raw_mean" : "unit_mean";
  }
  if (pairs.size() == cider_per_clip.size()) {
    nlohmann::json per = nlohmann::json::object();
    for (std::size_t i = 0; i < pairs.size(); ++i) per[pairs[i].clip_id] = cider_per_clip[i];
    j["cider_d_per_clip"] = per;
  }
  return j;
}

std::string MetricReport::table() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%-8s %-8s %-8s %-8s %-8s %-8s\n"
                "%-8.1f %-8.1f %-8.1f %-8.1f %-8.1f %-8.1f\n",
                "BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "ROUGE-L", "CIDEr-D",
                100 * bleu[0], 100 * bleu[1], 100 * bleu[2], 100 * bleu[3],
                100 * rouge_l, 100 * cider_d);
  std::string out = buf;
  if (spider) {
    std::snprintf(buf, sizeof buf, "SPICE %.1f  SPIDEr %.1f\n", 100 * *spice, 100 * *spider);
    out += buf;
  }
  return out;
}

}  // namespace maac::metrics
