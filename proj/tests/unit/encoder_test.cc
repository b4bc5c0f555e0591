#include <gtest/gtest.h>

#include <cmath>

#include "maac/encoder/keyword_encoder.h"
#include "maac/numerics/grad_check.h"
#include "maac/numerics/init.h"
#include "maac/numerics/ops.h"

namespace maac::enc {
namespace {

EncoderConfig two_channel_config() {
  EncoderConfig c;
  c.backbone.n_mels = 8;
  c.backbone.channels = {2, 2, 2, 2, 2, 2};
  c.backbone.pools = {{2, 2}, {1, 2}, {2, 1}, {1, 1}, {1, 1}, {1, 1}};
  c.head_dim = 3;
  c.n_keywords = 4;
  return c;
}

Tensor random_input(std::size_t b, std::size_t t, std::size_t f, std::uint64_t seed) {
  Rng rng(seed);
  return normal_init({b, 1, t, f}, 1.0, rng);
}

TEST(Backbone, ZeroWeightsGiveConstantMaps) {
  EncoderConfig cfg = two_channel_config();
  ParameterStore store;
  register_encoder(store, cfg, 1);
  for (Parameter* p : store.with_prefix("enc.backbone.")) {
    if (p->name.ends_with("conv.w")) p->value.fill(0.0);
    if (p->name.ends_with("conv.b")) {
      for (std::size_t c = 0; c < p->value.size(); ++c) p->value[c] = 0.5 + c;
    }
  }
  Binding bind(store, false, false);
  BackboneOut out = backbone_forward(bind, Var(Tensor({1, 1, 8, 8}, 0.0)), cfg.backbone);
  ASSERT_EQ(out.blocks.size(), 6u);
  for (const Var& block : out.blocks) {
    const Tensor& v = block.value();
    const std::size_t per_ch = v.dim(2) * v.dim(3);
    for (std::size_t c = 0; c < v.dim(1); ++c) {
      for (std::size_t k = 1; k < per_ch; ++k) {
        EXPECT_EQ(v[c * per_ch + k], v[c * per_ch]);
      }
    }
  }
}

TEST(Backbone, BatchDoesNotLeakInEvalMode) {
  EncoderConfig cfg = two_channel_config();
  ParameterStore store;
  register_encoder(store, cfg, 2);
  const Tensor both = random_input(2, 12, 8, 5);
  Binding bind(store, false, false);
  const Tensor joint = encode(bind, Var(both), cfg).y_hat.value();
  for (std::size_t i = 0; i < 2; ++i) {
    Tensor one({1, 1, 12, 8});
    for (std::size_t k = 0; k < one.size(); ++k) one[k] = both[i * one.size() + k];
    const Tensor single = encode(bind, Var(one), cfg).y_hat.value();
    for (std::size_t n = 0; n < 4; ++n) EXPECT_EQ(single[n], joint[i * 4 + n]);
  }
}

TEST(Backbone, SeededInitIsReproducible) {
  EncoderConfig cfg = two_channel_config();
  ParameterStore a, b;
  register_encoder(a, cfg, 11);
  register_encoder(b, cfg, 11);
  const Tensor x = random_input(1, 10, 8, 1);
  Binding ba(a, false, false), bb(b, false, false);
  EXPECT_EQ(encode(ba, Var(x), cfg).y_hat.value(), encode(bb, Var(x), cfg).y_hat.value());
}

TEST(Backbone, ShapeErrors) {
  EncoderConfig cfg = two_channel_config();
  ParameterStore store;
  register_encoder(store, cfg, 0);
  Binding bind(store, false, false);
  EXPECT_THROW(backbone_forward(bind, Var(Tensor({1, 1, 8, 7})), cfg.backbone),
               std::invalid_argument);
  EXPECT_THROW(backbone_forward(bind, Var(Tensor({1, 1, 3, 8})), cfg.backbone),
               std::invalid_argument);
  cfg.backbone.channels = {2, 2, 2};
  cfg.backbone.pools.resize(3);
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Heads, ConstantMapsGiveLinearOfChannelMean) {
  EncoderConfig cfg = two_channel_config();
  ParameterStore store;
  register_encoder(store, cfg, 3);
  BackboneOut fake;
  for (std::size_t i = 0; i < 6; ++i) {
    Tensor m({1, 2, 3, 2});
    for (std::size_t k = 0; k < 6; ++k) {
      m[k] = 1.5 + i;
      m[6 + k] = -0.5 * i;
    }
    fake.blocks.push_back(Var(m));
  }
  Binding bind(store, false, false);
  HeadsOut h = hierarchy_heads(bind, fake, cfg.backbone);
  const Tensor& w = store.get("enc.head2.w").value;
  const Tensor& b = store.get("enc.head2.b").value;
  const double c0 = 1.5 + 3, c1 = -0.5 * 3;  // block 4
  for (std::size_t o = 0; o < 3; ++o) {
    EXPECT_NEAR(h.f2.value()[o], w.at(o, 0) * c0 + w.at(o, 1) * c1 + b[o], 1e-14);
  }
}

TEST(Heads, IdentityLinearPassesPooledFeatures) {
  EncoderConfig cfg = two_channel_config();
  cfg.head_dim = 2;
  ParameterStore store;
  register_encoder(store, cfg, 3);
  for (int j = 1; j <= 3; ++j) {
    store.get("enc.head" + std::to_string(j) + ".w").value = Tensor::matrix(2, 2, {1, 0, 0, 1});
  }
  Binding bind(store, false, false);
  BackboneOut out = backbone_forward(bind, Var(random_input(1, 12, 8, 9)), cfg.backbone);
  HeadsOut h = hierarchy_heads(bind, out, cfg.backbone);
  const std::size_t axes[] = {2, 3};
  EXPECT_EQ(h.f3.value().storage(), global_avg_pool(out.blocks[5].value(), axes).storage());
  EXPECT_EQ(h.f1.value().storage(), global_avg_pool(out.blocks[2].value(), axes).storage());
  BackboneOut short_stack{{out.blocks[0], out.blocks[1], out.blocks[2]}};
  EXPECT_THROW(hierarchy_heads(bind, short_stack, cfg.backbone), std::invalid_argument);
}

TEST(Heads, GradientMatchesFiniteDifferences) {
  EncoderConfig cfg = two_channel_config();
  ParameterStore store;
  register_encoder(store, cfg, 21);
  // Zero biases put dead ReLU units exactly on their kink.
  Rng jitter(23);
  for (Parameter* p : store.all()) {
    if (p->name.ends_with(".b") || p->name.ends_with("bn.beta")) {
      for (double& v : p->value.data()) v = jitter.uniform(-0.2, 0.2);
    }
  }
  const Tensor x = random_input(2, 12, 8, 22);
  const Tensor y = Tensor::matrix(2, 4, {1, 0, 0.3, 1, 0, 1, 0, 0.5});
  for (bool training : {false, true}) {
    // With batch statistics the conv bias cancels out of the loss, so its
    // true gradient is zero and a relative error is meaningless.
    std::vector<Parameter*> params, cancelled;
    for (Parameter* p : store.all()) {
      if (!p->trainable) continue;
      (training && p->name.ends_with("conv.b") ? cancelled : params).push_back(p);
    }
    auto f = [&] {
      Binding bind(store, true, training);
      return bce_loss(encode(bind, Var(x), cfg).y_hat, y);
    };
    GradCheckResult r = grad_check(f, params);
    EXPECT_LE(r.max_rel_error, 1e-4) << r.worst_coord << " training=" << training;
    EXPECT_GT(r.coords_checked, 100u);
    store.zero_grad();
    backward(f());
    for (Parameter* p : cancelled) {
      for (double g : p->grad.data()) EXPECT_NEAR(g, 0.0, 1e-12) << p->name;
    }
    store.zero_grad();
  }
}

TEST(PredictKeywords, ZeroWeightsGiveHalf) {
  EncoderConfig cfg = two_channel_config();
  ParameterStore store;
  register_encoder(store, cfg, 4);
  store.get("enc.cls.w").value.fill(0.0);
  Binding bind(store, false, false);
  HeadsOut h{Var(Tensor({3}, 1.0)), Var(Tensor({3}, -2.0)), Var(Tensor({3}, 7.0))};
  const Var p = predict_keywords(bind, h);
  for (double v : p.value().data()) EXPECT_EQ(v, 0.5);
}

TEST(PredictKeywords, LogitExample) {
  EncoderConfig cfg = two_channel_config();
  cfg.n_keywords = 2;
  ParameterStore store;
  register_encoder(store, cfg, 4);
  store.get("enc.cls.w").value.fill(0.0);
  store.get("enc.cls.b").value = Tensor::vector({std::log(3.0), -std::log(3.0)});
  Binding bind(store, false, false);
  HeadsOut h{Var(Tensor({3}, 1.0)), Var(Tensor({3}, 1.0)), Var(Tensor({3}, 1.0))};
  const Tensor p = predict_keywords(bind, h).value();
  EXPECT_NEAR(p[0], 0.75, 1e-15);
  EXPECT_NEAR(p[1], 0.25, 1e-15);
}

TEST(PredictKeywords, MonotoneInPositiveWeightInput) {
  EncoderConfig cfg = two_channel_config();
  ParameterStore store;
  register_encoder(store, cfg, 4);
  Tensor& w = store.get("enc.cls.w").value;
  w.fill(-0.1);
  w.at(1, 4) = 0.7;  // keyword 1 <- f2[1]
  Binding bind(store, false, false);
  HeadsOut h{Var(Tensor({3}, 0.2)), Var(Tensor({3}, 0.2)), Var(Tensor({3}, 0.2))};
  const double before = predict_keywords(bind, h).value()[1];
  h.f2 = Var(Tensor::vector({0.2, 0.9, 0.2}));
  EXPECT_GT(predict_keywords(bind, h).value()[1], before);
}

TEST(Bce, ScalarExamples) {
  EXPECT_NEAR(bce_loss(Var(Tensor::vector({0.5})), Tensor::vector({1})).value()[0],
              0.6931471805599453, 1e-15);
  EXPECT_NEAR(bce_loss(Var(Tensor::vector({0.5})), Tensor::vector({0})).value()[0],
              0.6931471805599453, 1e-15);
}

TEST(Bce, PerfectPredictionNearZero) {
  const Tensor y = Tensor::vector({1, 0, 1, 1, 0});
  const double loss = bce_loss(Var(y), y).value()[0];
  EXPECT_GE(loss, 0.0);
  EXPECT_LE(loss, 5 * 1.0000001e-7);
}

TEST(Bce, NonNegativeAndRejectsBadTargets) {
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    Tensor p({6}), y({6});
    for (std::size_t k = 0; k < 6; ++k) {
      p[k] = rng.uniform(0.01, 0.99);
      y[k] = rng.uniform();
    }
    EXPECT_GE(bce_loss(Var(p), y).value()[0], 0.0);
  }
  EXPECT_THROW(bce_loss(Var(Tensor::vector({0.5})), Tensor::vector({1.2})),
               std::invalid_argument);
  EXPECT_THROW(bce_loss(Var(Tensor::vector({0.5})), Tensor::vector({-0.1})),
               std::invalid_argument);
}

TEST(TopK, Examples) {
  const std::vector<double> p = {0.9, 0.1, 0.8, 0.7, 0.2};
  EXPECT_EQ(topk_keywords(p, 3), (std::vector<int>{0, 2, 3}));
  const std::vector<double> flat = {0.4, 0.4, 0.4};
  EXPECT_EQ(topk_keywords(flat, 2), (std::vector<int>{0, 1}));
  std::vector<int> all = topk_keywords(p, 5);
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, (std::vector<int>{0, 1, 2, 3, 4}));
  EXPECT_THROW(topk_keywords(p, 6), std::invalid_argument);
}

TEST(TopK, InvariantUnderMonotoneTransform) {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> p(20), q(20);
    for (std::size_t i = 0; i < 20; ++i) {
      p[i] = std::round(rng.uniform() * 10) / 10;  // forces ties
      q[i] = std::exp(3 * p[i]) - 7;
    }
    EXPECT_EQ(topk_keywords(p, 5), topk_keywords(q, 5));
  }
}

}  // namespace
}  // namespace maac::enc
