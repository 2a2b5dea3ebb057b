#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.hpp"
#include "rrtrack/errors.hpp"
#include "rrtrack/network.hpp"
#include "rrtrack/optim.hpp"

using namespace rrtrack;

namespace {

NetworkConfig tiny() {
  NetworkConfig c;
  c.crop_size = 16;
  c.conv_blocks = {{3, 4}, {3, 8}, {3, 8}};
  c.skip_channels = {1, 2, 4};
  c.embed_dim = 8;
  c.lstm_units = 6;
  return c;
}

Tensor random_crops(std::size_t b, std::size_t s, std::mt19937_64& rng) {
  return oracle::random_tensor({b, 3, s, s}, rng);
}

std::vector<double> row_of(const Tensor& t, std::size_t r) {
  const std::size_t w = t.size() / t.dim(0);
  return {t.data().begin() + r * w, t.data().begin() + (r + 1) * w};
}

}  // namespace

TEST(NetworkConfig, DeskFeatureLengthMatchesHandCount) {
  // Pools 24/12/6 with skips 4/8/16 plus the 64-channel 6x6 output.
  EXPECT_EQ(NetworkConfig::desk().stream_feature_length(), 24u * 24 * 4 + 12 * 12 * 8 + 6 * 6 * 16 + 6 * 6 * 64);
  EXPECT_EQ(NetworkConfig::desk().stream_feature_length(), 6336u);
  EXPECT_EQ(NetworkConfig::small().stream_feature_length(), 16u * 16 * 4 + 8 * 8 * 8 + 4 * 4 * 16 + 4 * 4 * 32);
}

TEST(NetworkConfig, PresetsValidate) {
  EXPECT_NO_THROW(NetworkConfig::desk().validate());
  EXPECT_NO_THROW(NetworkConfig::small().validate());
  EXPECT_NO_THROW(NetworkConfig::full_scale().validate());
  const auto shapes = NetworkConfig::full_scale().block_shapes();
  EXPECT_EQ(shapes[0].conv_size, 56u);
  EXPECT_EQ(shapes[2].pooled_size, 7u);
}

TEST(NetworkConfig, RejectsInconsistentTopologies) {
  auto c = NetworkConfig::desk();
  c.skip_channels = {4, 8};
  EXPECT_THROW(c.validate(), ShapeError);
  c = NetworkConfig::desk();
  c.skip_channels = {4, 12, 16};
  EXPECT_THROW(c.validate(), ShapeError);
  c = NetworkConfig::desk();
  c.crop_size = 50;  // 25 after the first pool, odd
  EXPECT_THROW(c.validate(), ShapeError);
  c = NetworkConfig::desk();
  c.skip_channels = {16, 32, 64};  // skip not narrower than its block
  EXPECT_THROW(c.validate(), ShapeError);
}

TEST(NetworkParams, InitialisationIsSeededAndStructured) {
  auto cfg = tiny();
  cfg.seed = 5;
  const auto a = NetworkParams::initialize(cfg);
  const auto b = NetworkParams::initialize(cfg);
  cfg.seed = 6;
  const auto c = NetworkParams::initialize(cfg);
  EXPECT_EQ(a.blocks[0].kernel.data()[3], b.blocks[0].kernel.data()[3]);
  EXPECT_NE(a.blocks[0].kernel.data()[3], c.blocks[0].kernel.data()[3]);
  for (double v : a.lstm[0].b_f.data()) EXPECT_EQ(v, 1.0);
  for (double v : a.lstm[1].b_i.data()) EXPECT_EQ(v, 0.0);
  for (double v : a.lstm[0].p_i.data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(std::vector<double>(a.head_b.data().begin(), a.head_b.data().end()),
            (std::vector<double>{0.25, 0.25, 0.75, 0.75}));
  EXPECT_EQ(a.lstm[1].w_z.dim(0), cfg.embed_dim + cfg.lstm_units);
}

TEST(NetworkParams, NamesAreUniqueAndRoundTrip) {
  const auto p = NetworkParams::initialize(tiny());
  const auto named = p.named_tensors();
  std::set<std::string> names;
  for (const auto& [n, t] : named) names.insert(n);
  EXPECT_EQ(names.size(), named.size());
  EXPECT_TRUE(names.count("block0.conv.weight"));
  EXPECT_TRUE(names.count("lstm1.W_z"));
  EXPECT_TRUE(names.count("head.bias"));
  const auto q = NetworkParams::from_named(tiny(), named);
  const auto qn = q.named_tensors();
  ASSERT_EQ(qn.size(), named.size());
  for (std::size_t i = 0; i < qn.size(); ++i) {
    EXPECT_EQ(qn[i].first, named[i].first);
    EXPECT_TRUE(std::equal(qn[i].second.data().begin(), qn[i].second.data().end(), named[i].second.data().begin()));
  }
  auto missing = named;
  missing.pop_back();
  EXPECT_THROW(NetworkParams::from_named(tiny(), missing), std::exception);
}

TEST(NetworkParams, CloneIsIndependent) {
  auto p = NetworkParams::initialize(tiny());
  auto q = p.clone();
  q.head_b.data()[0] = 42.0;
  EXPECT_EQ(p.head_b.data()[0], 0.25);
}

TEST(Lstm, MatchesLineByLineOracle) {
  std::mt19937_64 rng(21);
  for (int n = 0; n < 50; ++n) {
    const std::size_t D = 5, U = 4, B = 3;
    const auto p = oracle::random_lstm(D, U, rng);
    const auto x = oracle::random_tensor({B, D}, rng);
    LstmLayerState prev{oracle::random_tensor({B, U}, rng), oracle::random_tensor({B, U}, rng)};
    Graph g(false);
    const auto out = lstm_step(g, p, x, prev);
    for (std::size_t b = 0; b < B; ++b) {
      const auto ref = oracle::lstm(p, row_of(x, b), row_of(prev.y, b), row_of(prev.c, b));
      for (std::size_t u = 0; u < U; ++u) {
        EXPECT_NEAR(out.y.data()[b * U + u], ref.y[u], 1e-12);
        EXPECT_NEAR(out.c.data()[b * U + u], ref.c[u], 1e-12);
      }
    }
  }
}

TEST(Lstm, ZeroParametersGiveZeroState) {
  LstmLayerParams p;
  for (Tensor* w : {&p.w_z, &p.w_i, &p.w_f, &p.w_o}) *w = Tensor::zeros({3, 2});
  for (Tensor* r : {&p.r_z, &p.r_i, &p.r_f, &p.r_o}) *r = Tensor::zeros({2, 2});
  for (Tensor* v : {&p.p_i, &p.p_f, &p.p_o, &p.b_z, &p.b_i, &p.b_f, &p.b_o}) *v = Tensor::zeros({2});
  Graph g(false);
  const auto out = lstm_step(g, p, Tensor::filled({1, 3}, 0.7), {Tensor::zeros({1, 2}), Tensor::zeros({1, 2})});
  for (double v : out.y.data()) EXPECT_EQ(v, 0.0);
  for (double v : out.c.data()) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, SaturatedGatesHoldTheCellExactly) {
  std::mt19937_64 rng(22);
  auto p = oracle::random_lstm(4, 3, rng);
  p.b_i = Tensor::filled({3}, -1000.0);
  p.b_f = Tensor::filled({3}, 1000.0);
  LstmLayerState prev{oracle::random_tensor({2, 3}, rng), oracle::random_tensor({2, 3}, rng)};
  Graph g(false);
  const auto out = lstm_step(g, p, oracle::random_tensor({2, 4}, rng), prev);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(out.c.data()[i], prev.c.data()[i]);
}

TEST(Network, ForwardShapesAndBatchIndependence) {
  std::mt19937_64 rng(23);
  const auto params = NetworkParams::initialize(tiny());
  const auto a = random_crops(3, 16, rng), b = random_crops(3, 16, rng);
  Graph g(false);
  auto state = LstmState::zeros(3, 6);
  const auto out = forward_step(g, params, a, b, state);
  ASSERT_EQ(out.pred.dims(), (Shape{3, 4}));
  EXPECT_EQ(out.state.layers[1].c.dims(), (Shape{3, 6}));
  for (std::size_t r = 0; r < 3; ++r) {
    auto single_a = Tensor::from({1, 3, 16, 16}, row_of(a, r));
    auto single_b = Tensor::from({1, 3, 16, 16}, row_of(b, r));
    const auto one = forward_step(g, params, single_a, single_b, LstmState::zeros(1, 6));
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(one.pred.data()[k], out.pred.data()[r * 4 + k], 1e-12);
  }
  EXPECT_THROW(forward_step(g, params, random_crops(1, 12, rng), random_crops(1, 12, rng), LstmState::zeros(1, 6)),
               ShapeError);
}

TEST(Network, StateDetachAndBitEquality) {
  auto s = LstmState::zeros(2, 3);
  auto d = s.detached();
  EXPECT_TRUE(s.bit_equal(d));
  d.layers[1].c.data()[2] = 1e-300;
  EXPECT_FALSE(s.bit_equal(d));
  EXPECT_EQ(s.layers[1].c.data()[2], 0.0);
}

TEST(Network, UnrolledLossGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(24);
  auto cfg = tiny();
  cfg.seed = 3;
  auto params = NetworkParams::initialize(cfg);
  params.set_requires_grad(true);
  std::vector<UnrollStep> steps;
  for (int t = 0; t < 3; ++t) {
    steps.push_back({random_crops(2, 16, rng), random_crops(2, 16, rng), oracle::random_tensor({2, 4}, rng, 0, 1)});
  }
  auto tensors = params.tensors();
  GradCheckOptions opts;
  opts.tol = 1e-4;
  opts.max_coords_per_param = 6;
  const auto report = grad_check(
      [&](Graph& g) { return unrolled_loss(g, params, steps, LstmState::zeros(2, cfg.lstm_units)); }, tensors, opts);
  EXPECT_TRUE(report.passed()) << report.summary();
}

TEST(Network, TargetTensorRoundTrip) {
  const std::vector<CropFrameBox> boxes{{0.1, 0.2, 0.3, 0.4}, {0.5, 0.6, 0.7, 0.8}};
  const auto t = target_tensor(boxes);
  EXPECT_EQ(t.dims(), (Shape{2, 4}));
  EXPECT_EQ(crop_frame_row(t, 1).y2, 0.8);
  EXPECT_THROW(crop_frame_row(t, 2), ShapeError);
}
