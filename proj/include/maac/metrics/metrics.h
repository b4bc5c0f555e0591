// maac/metrics/metrics.h
//
// Corpus-level caption metrics with the captioning-toolkit conventions:
// BLEU with closest reference length (ties to the shorter) and no smoothing,
// ROUGE-L with beta 1.2 taking the best precision and best recall over the
// references, CIDEr-D with n = 1..4, document frequencies from the evaluated
// references, clipping, Gaussian length penalty (sigma 6) and a factor 10.

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace maac::metrics {

using Tokens = std::vector<std::string>;

struct EvalPair {
  std::string clip_id;
  Tokens hypothesis;
  std::vector<Tokens> references;
};

// Throws std::invalid_argument on an empty corpus or a clip without a
// non-empty reference.
void validate_pairs(std::span<const EvalPair> pairs);

struct BleuOptions {
  bool add_one_smoothing = false;
};

double bleu_n(std::span<const EvalPair> pairs, int n, BleuOptions opt = {});
double rouge_l(std::span<const EvalPair> pairs, double beta = 1.2);
double rouge_l_sentence(const Tokens& hyp, std::span<const Tokens> refs,
                        double beta = 1.2);

struct CiderResult {
  double corpus = 0.0;
  std::vector<double> per_clip;  // in input order
};
// With a single clip every n-gram has idf log(1) - log(1) = 0; that case
// uses unit idf so an exact match still scores 10.
CiderResult cider_d(std::span<const EvalPair> pairs, double sigma = 6.0);

// CIDEr-D with document frequencies fixed from a reference corpus; scores
// any hypothesis against one of those clips. Used as the RL reward.
class CiderScorer {
 public:
  explicit CiderScorer(std::vector<std::vector<Tokens>> references, double sigma = 6.0);

  std::size_t size() const { return refs_.size(); }
  double score(const Tokens& hypothesis, std::size_t clip) const;

 private:
  struct Vec;
  std::vector<Vec> vectorize(const Tokens& t) const;

  std::vector<std::vector<Tokens>> refs_;
  std::map<std::vector<std::string>, double> df_;
  double log_docs_ = 0.0;
  bool unit_idf_ = false;
  double sigma_;
};

enum class SpiderMode {
  kRawMean,   // mean of the two numbers as given
  kUnitMean,  // CIDEr-D divided by 10 first
};
double spider(double cider, double spice, SpiderMode mode = SpiderMode::kRawMean);

struct MetricReport {
  double bleu[4] = {0, 0, 0, 0};
  double rouge_l = 0.0;
  double cider_d = 0.0;
  std::vector<double> cider_per_clip;
  std::optional<double> spice;
  std::optional<double> spider;
  SpiderMode spider_mode = SpiderMode::kRawMean;

  // Raw values plus a "display" block scaled by 100.
  nlohmann::json to_json(std::span<const EvalPair> pairs = {}) const;
  std::string table() const;
};

// spice, when given, is on the same raw scale as the other scores (0..1).
MetricReport evaluate(std::span<const EvalPair> pairs,
                      std::optional<double> spice = std::nullopt,
                      SpiderMode mode = SpiderMode::kRawMean);

}  // namespace maac::metrics
