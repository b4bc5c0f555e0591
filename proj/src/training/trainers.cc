// maac/training/trainers.cc

#include "maac/training/trainers.h"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <stdexcept>

#include "maac/audio/augment.h"
#include "maac/inference/search.h"
#include "maac/model/captioner.h"
#include "maac/numerics/ops.h"
#include "maac/training/losses.h"

namespace maac::train {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<std::size_t> permutation(std::size_t n, Rng rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t k = n; k > 1; --k) std::swap(p[k - 1], p[rng.below(k)]);
  return p;
}

bool has_prefix(const std::string& s, std::string_view prefix) {
  return s.compare(0, prefix.size(), prefix) == 0;
}

std::vector<Parameter*> trainable(ParameterStore& store, std::string_view prefix,
                                  const Binding::FrozenFn& frozen = {}) {
  std::vector<Parameter*> out;
  for (Parameter* p : store.with_prefix(prefix)) {
    if (p->trainable && !(frozen && frozen(*p))) out.push_back(p);
  }
  return out;
}

bool is_encoder(const Parameter& p) { return has_prefix(p.name, "enc."); }
bool is_backbone(const Parameter& p) { return has_prefix(p.name, "enc.backbone."); }

int masked_argmax(const Tensor& log_probs) {
  const auto lp = infer::mask_specials(
      std::vector<double>(log_probs.data().begin(), log_probs.data().end()));
  return static_cast<int>(std::max_element(lp.begin(), lp.end()) - lp.begin());
}

void run_encoder_phase(ParameterStore& store, const enc::EncoderConfig& cfg,
                       std::span<const EncoderExample> data, const TrainConfig& tc,
                       TrainLog& log, const Progress& progress, Stage stage) {
  const bool heads_only = stage == Stage::kEncoderHeads;
  const Binding::FrozenFn frozen =
      heads_only ? Binding::FrozenFn(is_backbone) : Binding::FrozenFn{};
  std::vector<Parameter*> params = trainable(store, "enc.", frozen);
  Adam adam(params, tc.adam);
  const Rng root = Rng(tc.seed).derive(stage_name(stage));
  const std::size_t n = data.size();
  const std::size_t n_mels = data.front().frames.dim(1);
  const std::size_t n_kw = data.front().target.size();
  const int epochs = tc.epochs(stage);
  for (int e = 0; e < epochs; ++e) {
    const auto t0 = Clock::now();
    const double lr = lr_at(tc, stage, e);
    const auto ue = static_cast<std::uint64_t>(e);
    const auto order = permutation(n, root.derive("order").derive(ue));
    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < n; b += tc.batch_size) {
      const std::size_t bs = std::min(tc.batch_size, n - b);
      std::size_t max_t = 0;
      for (std::size_t i = 0; i < bs; ++i) {
        max_t = std::max(max_t, data[order[b + i]].frames.dim(0));
      }
      Tensor x({bs, 1, max_t, n_mels});
      Tensor y({bs, n_kw});
      for (std::size_t i = 0; i < bs; ++i) {
        const std::size_t idx = order[b + i];
        Tensor f = pad_frames(data[idx].frames, max_t);
        if (tc.spec_augment) {
          Rng r = root.derive("spec_augment").derive(ue).derive(idx);
          f = audio::apply_masks(f, audio::draw_masks(max_t, n_mels, tc.spec_augment_cfg, r));
        }
        std::copy(f.data().begin(), f.data().end(),
                  x.data().begin() + static_cast<std::ptrdiff_t>(i * max_t * n_mels));
        std::copy(data[idx].target.data().begin(), data[idx].target.data().end(),
                  y.data().begin() + static_cast<std::ptrdiff_t>(i * n_kw));
      }
      if (tc.mixup && bs > 1) {
        Rng r = root.derive("mixup").derive(ue).derive(b);
        const auto perm = permutation(bs, r.derive("pairs"));
        Tensor x2(x.shape()), y2(y.shape());
        const std::size_t xs = max_t * n_mels;
        for (std::size_t i = 0; i < bs; ++i) {
          std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(perm[i] * xs), xs,
                      x2.data().begin() + static_cast<std::ptrdiff_t>(i * xs));
          std::copy_n(y.data().begin() + static_cast<std::ptrdiff_t>(perm[i] * n_kw), n_kw,
                      y2.data().begin() + static_cast<std::ptrdiff_t>(i * n_kw));
        }
        audio::Mixed m = audio::mixup_batch(x, y, x2, y2, r, tc.mixup_alpha);
        x = std::move(m.x);
        y = std::move(m.y);
      }
      store.zero_grad();
      // Backbone normalization stays in eval mode while the backbone is
      // frozen so its running statistics are untouched too.
      Binding bind(store, true, !heads_only, 0, frozen);
      const enc::EncoderOut out = enc::encode(bind, Var(std::move(x)), cfg);
      const Var loss = enc::bce_loss(out.y_hat, y);
      backward(loss);
      clip_grad_norm(params, tc.grad_clip);
      adam.step(lr);
      loss_sum += loss.value()[0];
      ++batches;
    }
    EpochRecord rec{std::string(stage_name(stage)), log.next_epoch(),
                    loss_sum / static_cast<double>(batches), lr};
    if (e + 1 == epochs) rec.metrics["train_bce_eval"] = evaluate_encoder(store, cfg, data).bce;
    rec.wall_seconds = seconds_since(t0);
    log.append(rec);
    if (progress) progress(log.back());
  }
}

}  // namespace

Tensor pad_frames(const Tensor& frames, std::size_t n_frames) {
  const std::size_t t = frames.dim(0), f = frames.dim(1);
  if (t == n_frames) return frames;
  if (t > n_frames) throw std::invalid_argument("pad_frames: clip longer than target");
  double mean = 0;
  for (double v : frames.data()) mean += v;
  mean /= static_cast<double>(frames.size());
  Tensor out({n_frames, f}, mean);
  std::copy(frames.data().begin(), frames.data().end(), out.data().begin());
  return out;
}

void train_encoder(ParameterStore& store, const enc::EncoderConfig& cfg,
                   std::span<const EncoderExample> data, const TrainConfig& tc,
                   TrainLog& log, const Progress& progress) {
  if (data.empty()) throw std::invalid_argument("train_encoder: empty corpus");
  tc.validate();
  for (const auto& ex : data) {
    if (ex.target.size() != static_cast<std::size_t>(cfg.n_keywords)) {
      throw std::invalid_argument("train_encoder: label of " + ex.clip_id + " has " +
                                  std::to_string(ex.target.size()) + " entries, expected " +
                                  std::to_string(cfg.n_keywords));
    }
  }
  run_encoder_phase(store, cfg, data, tc, log, progress, Stage::kEncoderHeads);
  run_encoder_phase(store, cfg, data, tc, log, progress, Stage::kEncoderFinetune);
}

EncoderEval evaluate_encoder(ParameterStore& store, const enc::EncoderConfig& cfg,
                             std::span<const EncoderExample> data) {
  EncoderEval ev;
  for (const auto& ex : data) {
    Binding bind(store, false, false);
    const enc::EncoderOut out = enc::encode(bind, Var(enc::stack_features({&ex.frames})), cfg);
    ev.bce += enc::bce_loss(out.y_hat, ex.target.reshaped({1, ex.target.size()})).value()[0];
    const auto p = out.y_hat.value().data();
    ev.probs.emplace_back(p.begin(), p.end());
  }
  ev.bce /= static_cast<double>(std::max<std::size_t>(1, data.size()));
  return ev;
}

double planted_recall(const std::vector<std::vector<double>>& probs,
                      const std::vector<std::vector<int>>& planted, std::size_t k) {
  if (probs.size() != planted.size() || probs.empty()) {
    throw std::invalid_argument("planted_recall: size mismatch");
  }
  double total = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const auto top = enc::topk_keywords(probs[i], k);
    std::size_t hit = 0;
    for (int t : top) hit += std::count(planted[i].begin(), planted[i].end(), t) > 0;
    const std::size_t denom = std::min(k, planted[i].size());
    total += denom == 0 ? 1.0 : static_cast<double>(hit) / static_cast<double>(denom);
  }
  return total / static_cast<double>(probs.size());
}

Var caption_ce_loss(Binding& bind, const dec::DecoderConfig& cfg,
                    const dec::DecoderContext& ctx, std::span<const int> caption,
                    double eps, double tf_prob, Rng& rng, std::vector<int>* fed) {
  std::vector<int> targets(caption.begin(), caption.end());
  targets.push_back(data::kEos);
  dec::DecoderState state = dec::init_state(bind, cfg, ctx);
  std::vector<Var> rows;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    dec::StepOut step = dec::decode_step(bind, cfg, ctx, state, state.prev.back());
    rows.push_back(step.log_probs);
    if (t + 1 == targets.size()) break;
    int next = targets[t];
    if (tf_prob < 1.0 && !rng.bernoulli(tf_prob)) next = masked_argmax(step.log_probs.value());
    if (fed) fed->push_back(next);
    state = std::move(step.state);
    dec::push_token(bind, cfg, state, next);
  }
  return ce_loss_smoothed(ops::stack(rows), targets, eps, data::kPad);
}

void train_captioner_ce(ParameterStore& store, const dec::DecoderConfig& cfg,
                        std::span<const CaptionExample> data, const TrainConfig& tc,
                        TrainLog& log, const Progress& progress) {
  if (data.empty()) throw std::invalid_argument("train_captioner_ce: empty corpus");
  tc.validate();
  std::vector<Parameter*> params = trainable(store, "dec.");
  Adam adam(params, tc.adam);
  const Rng root = Rng(tc.seed).derive("ce");
  const std::size_t n = data.size();
  for (int e = 0; e < tc.epochs_ce; ++e) {
    const auto t0 = Clock::now();
    const auto ue = static_cast<std::uint64_t>(e);
    const double lr = lr_at(tc, Stage::kCaptionerCe, e);
    const double tf = tc.teacher_forcing_at(e);
    const auto order = permutation(n, root.derive("order").derive(ue));
    double loss_sum = 0;
    std::size_t seqs = 0;
    for (std::size_t b = 0; b < n; b += tc.batch_size) {
      const std::size_t bs = std::min(tc.batch_size, n - b);
      std::size_t count = 0;
      for (std::size_t i = 0; i < bs; ++i) {
        count += std::min(tc.ce_captions_per_clip, data[order[b + i]].captions.size());
      }
      store.zero_grad();
      for (std::size_t i = 0; i < bs; ++i) {
        const std::size_t idx = order[b + i];
        const CaptionExample& ex = data[idx];
        Binding bind(store, true, true,
                     root.derive("dropout").derive(ue).derive(idx).next_u64(), is_encoder);
        const dec::DecoderContext ctx =
            dec::prepare_context(bind, cfg, Var(ex.sequence), ex.keyword_ids);
        const std::size_t nc = std::min(tc.ce_captions_per_clip, ex.captions.size());
        for (std::size_t c = 0; c < nc; ++c) {
          Rng r = root.derive("teacher").derive(ue).derive(idx).derive(c);
          const Var loss =
              caption_ce_loss(bind, cfg, ctx, ex.captions[c], tc.label_smoothing, tf, r);
          backward(ops::scale(loss, 1.0 / static_cast<double>(count)));
          loss_sum += loss.value()[0];
          ++seqs;
        }
      }
      clip_grad_norm(params, tc.grad_clip);
      adam.step(lr);
    }
    EpochRecord rec{"ce", log.next_epoch(), loss_sum / static_cast<double>(seqs), lr};
    rec.metrics["teacher_forcing_prob"] = tf;
    if (e + 1 == tc.epochs_ce) {
      const auto ev = teacher_forced_eval(store, cfg, data, tc.ce_captions_per_clip);
      rec.metrics["tf_accuracy"] = ev.accuracy;
      rec.metrics["tf_nll"] = ev.loss;
    }
    rec.wall_seconds = seconds_since(t0);
    log.append(rec);
    if (progress) progress(log.back());
  }
}

TeacherForcedEval teacher_forced_eval(ParameterStore& store, const dec::DecoderConfig& cfg,
                                      std::span<const CaptionExample> data,
                                      std::size_t captions_per_clip) {
  TeacherForcedEval ev;
  std::size_t steps = 0, correct = 0, seqs = 0;
  for (const auto& ex : data) {
    Binding bind(store, false, false);
    const dec::DecoderContext ctx =
        dec::prepare_context(bind, cfg, Var(ex.sequence), ex.keyword_ids);
    const std::size_t nc = std::min(captions_per_clip, ex.captions.size());
    for (std::size_t c = 0; c < nc; ++c) {
      std::vector<int> targets = ex.captions[c];
      targets.push_back(data::kEos);
      dec::DecoderState state = dec::init_state(bind, cfg, ctx);
      double nll = 0;
      for (std::size_t t = 0; t < targets.size(); ++t) {
        dec::StepOut step = dec::decode_step(bind, cfg, ctx, state, state.prev.back());
        correct += masked_argmax(step.log_probs.value()) == targets[t];
        nll -= step.log_probs.value()[static_cast<std::size_t>(targets[t])];
        ++steps;
        state = std::move(step.state);
        if (t + 1 < targets.size()) dec::push_token(bind, cfg, state, targets[t]);
      }
      ev.loss += nll / static_cast<double>(targets.size());
      ++seqs;
    }
  }
  if (steps) ev.accuracy = static_cast<double>(correct) / static_cast<double>(steps);
  if (seqs) ev.loss /= static_cast<double>(seqs);
  return ev;
}

std::vector<std::vector<int>> greedy_captions(ParameterStore& store,
                                              const dec::DecoderConfig& cfg,
                                              std::span<const CaptionExample> data,
                                              std::size_t max_len) {
  std::vector<std::vector<int>> out;
  for (const auto& ex : data) {
    model::DecoderSession session(store, cfg, ex.sequence, ex.keyword_ids);
    out.push_back(model::greedy_caption(session, max_len).tokens);
  }
  return out;
}

Var sequence_log_prob(Binding& bind, const dec::DecoderConfig& cfg,
                      const dec::DecoderContext& ctx, std::span<const int> tokens,
                      bool append_eos) {
  std::vector<int> seq(tokens.begin(), tokens.end());
  if (append_eos) seq.push_back(data::kEos);
  if (seq.empty()) throw std::invalid_argument("sequence_log_prob: empty sequence");
  dec::DecoderState state = dec::init_state(bind, cfg, ctx);
  std::vector<Var> terms;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    dec::StepOut step = dec::decode_step(bind, cfg, ctx, state, state.prev.back());
    terms.push_back(masked_log_prob(step.log_probs, seq[t]));
    state = std::move(step.state);
    if (t + 1 < seq.size()) dec::push_token(bind, cfg, state, seq[t]);
  }
  return ops::add_n(terms);
}

ScstStep scst_clip(Binding& bind, const dec::DecoderConfig& cfg, const Var& sequence,
                   std::span<const int> keyword_ids, const RewardFn& reward, Rng& rng,
                   std::size_t max_len) {
  if (max_len == 0) throw std::invalid_argument("scst_clip: max_len must be >= 1");
  ScstStep s;
  {
    model::DecoderSession session(bind.store(), cfg, sequence.value(), keyword_ids);
    s.greedy = model::greedy_caption(session, max_len).tokens;
  }
  const dec::DecoderContext ctx = dec::prepare_context(bind, cfg, sequence, keyword_ids);
  dec::DecoderState state = dec::init_state(bind, cfg, ctx);
  std::vector<Var> terms;
  for (std::size_t t = 0; t < max_len; ++t) {
    dec::StepOut step = dec::decode_step(bind, cfg, ctx, state, state.prev.back());
    const int tok = sample_token(step.log_probs.value().data(), rng);
    terms.push_back(masked_log_prob(step.log_probs, tok));
    if (tok == data::kEos) break;
    s.sampled.push_back(tok);
    state = std::move(step.state);
    dec::push_token(bind, cfg, state, tok);
  }
  s.r_sample = reward(s.sampled);
  s.r_greedy = reward(s.greedy);
  if (s.r_sample != s.r_greedy) s.loss = scst_loss(ops::add_n(terms), s.r_sample, s.r_greedy);
  return s;
}

void scst_finetune(ParameterStore& store, const dec::DecoderConfig& cfg,
                   std::span<const CaptionExample> data, const data::Vocab& vocab,
                   const TrainConfig& tc, TrainLog& log, const RlEncoder& encoder,
                   const Progress& progress) {
  if (data.empty()) throw std::invalid_argument("scst_finetune: empty corpus");
  tc.validate();
  std::vector<std::vector<metrics::Tokens>> refs;
  for (const auto& ex : data) {
    bool any = false;
    for (const auto& r : ex.references) any = any || !r.empty();
    if (!any) throw std::invalid_argument("scst_finetune: clip " + ex.clip_id + " has no references");
    refs.push_back(ex.references);
  }
  const bool train_encoder = !tc.freeze_encoder_rl;
  if (train_encoder && (!encoder.cfg || encoder.frames.size() != data.size())) {
    throw std::invalid_argument("scst_finetune: encoder training needs the clip features");
  }
  const metrics::CiderScorer scorer(std::move(refs));
  const Binding::FrozenFn frozen = train_encoder ? Binding::FrozenFn{} : Binding::FrozenFn(is_encoder);
  std::vector<Parameter*> params = trainable(store, "dec.");
  if (train_encoder) {
    for (Parameter* p : trainable(store, "enc.")) params.push_back(p);
  }
  Adam adam(params, tc.adam);
  const Rng root = Rng(tc.seed).derive("rl");
  const std::size_t n = data.size();
  for (int e = 0; e < tc.epochs_rl; ++e) {
    const auto t0 = Clock::now();
    const auto ue = static_cast<std::uint64_t>(e);
    const double lr = lr_at(tc, Stage::kRl, e);
    const auto order = permutation(n, root.derive("order").derive(ue));
    double loss_sum = 0, r_sample = 0, r_greedy = 0;
    for (std::size_t b = 0; b < n; b += tc.batch_size) {
      const std::size_t bs = std::min(tc.batch_size, n - b);
      store.zero_grad();
      for (std::size_t i = 0; i < bs; ++i) {
        const std::size_t idx = order[b + i];
        const CaptionExample& ex = data[idx];
        Binding bind(store, true, false, 0, frozen);
        Var seq(ex.sequence);
        std::vector<int> kw = ex.keyword_ids;
        if (train_encoder) {
          const Tensor& f = encoder.frames[idx];
          const enc::EncoderOut out =
              enc::encode(bind, Var(enc::stack_features({&f})), *encoder.cfg);
          seq = ops::select(out.sequence, 0);
          kw = model::to_vocab_ids(
              enc::topk_keywords(out.y_hat.value().data(), static_cast<std::size_t>(cfg.K)),
              encoder.keyword_vocab);
        }
        const RewardFn reward = [&](const std::vector<int>& tokens) {
          metrics::Tokens words;
          for (int t : tokens) words.push_back(vocab.word(t));
          return scorer.score(words, idx);
        };
        Rng r = root.derive("sample").derive(ue).derive(idx);
        ScstStep st = scst_clip(bind, cfg, seq, kw, reward, r, tc.max_len);
        r_sample += st.r_sample;
        r_greedy += st.r_greedy;
        if (st.loss.defined()) {
          backward(ops::scale(st.loss, 1.0 / static_cast<double>(bs)));
          loss_sum += st.loss.value()[0];
        }
      }
      clip_grad_norm(params, tc.grad_clip);
      adam.step(lr);
    }
    const double dn = static_cast<double>(n);
    EpochRecord rec{"rl", log.next_epoch(), loss_sum / dn, lr};
    rec.metrics["reward_sample"] = r_sample / dn;
    rec.metrics["reward_greedy"] = r_greedy / dn;
    rec.wall_seconds = seconds_since(t0);
    log.append(rec);
    if (progress) progress(log.back());
  }
}

double greedy_cider(ParameterStore& store, const dec::DecoderConfig& cfg,
                    std::span<const CaptionExample> data, const data::Vocab& vocab,
                    std::size_t max_len) {
  const auto caps = greedy_captions(store, cfg, data, max_len);
  std::vector<metrics::EvalPair> pairs;
  for (std::size_t i = 0; i < data.size(); ++i) {
    metrics::EvalPair p{data[i].clip_id, {}, data[i].references};
    for (int t : caps[i]) p.hypothesis.push_back(vocab.word(t));
    pairs.push_back(std::move(p));
  }
  return metrics::cider_d(pairs).corpus;
}

}  // namespace maac::train
