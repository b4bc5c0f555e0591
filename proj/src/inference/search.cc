// maac/inference/search.cc

#include "maac/inference/search.h"

namespace maac::infer {

std::vector<double> mask_specials(const std::vector<double>& log_probs) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<double> out = log_probs;
  if (out.size() > static_cast<std::size_t>(data::kBos)) out[data::kBos] = kNegInf;
  if (out.size() > static_cast<std::size_t>(data::kPad)) out[data::kPad] = kNegInf;
  double mx = kNegInf;
  for (double v : out) mx = std::max(mx, v);
  if (mx == kNegInf) throw std::invalid_argument("mask_specials: nothing left to emit");
  double z = 0.0;
  for (double v : out) {
    if (v != kNegInf) z += std::exp(v - mx);
  }
  const double lse = mx + std::log(z);
  for (double& v : out) {
    if (v != kNegInf) v -= lse;
  }
  return out;
}

double ranking_score(double logprob, std::size_t length, double gamma) {
  if (gamma == 0.0 || length == 0) return logprob;
  return logprob / std::pow(static_cast<double>(length), gamma);
}

bool ranks_before(double score_a, const std::vector<int>& a, double score_b,
                  const std::vector<int>& b) {
  if (score_a != score_b) return score_a > score_b;
  return a < b;
}

std::vector<int> strip_eos(const std::vector<int>& tokens) {
  std::vector<int> out = tokens;
  if (!out.empty() && out.back() == data::kEos) out.pop_back();
  return out;
}

}  // namespace maac::infer
