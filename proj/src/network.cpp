#include "rrtrack/network.hpp"

#include <cmath>
#include <map>
#include <random>

#include "rrtrack/errors.hpp"
#include "rrtrack/ops.hpp"

namespace rrtrack {

NetworkConfig NetworkConfig::desk() { return NetworkConfig{}; }

NetworkConfig NetworkConfig::small() {
  NetworkConfig c;
  c.crop_size = 32;
  c.conv_blocks = {{5, 8}, {3, 16}, {3, 32}};
  c.skip_channels = {4, 8, 16};
  c.embed_dim = 128;
  c.lstm_units = 64;
  return c;
}

NetworkConfig NetworkConfig::full_scale() {
  NetworkConfig c;
  c.crop_size = 227;
  c.conv_blocks = {{11, 96, 4, 2}, {5, 256}, {3, 256}};
  c.skip_channels = {16, 32, 64};
  c.embed_dim = 2048;
  c.lstm_units = 1024;
  return c;
}

std::vector<NetworkConfig::BlockShape> NetworkConfig::block_shapes() const {
  std::vector<BlockShape> shapes;
  std::size_t size = crop_size;
  for (std::size_t b = 0; b < conv_blocks.size(); ++b) {
    const auto& blk = conv_blocks[b];
    if (blk.kernel == 0 || blk.stride == 0 || blk.channels == 0) {
      throw ShapeError("block " + std::to_string(b) + ": kernel, stride and channels must be positive");
    }
    if (blk.kernel > size + 2 * blk.padding()) {
      throw ShapeError("block " + std::to_string(b) + ": kernel exceeds padded input");
    }
    const std::size_t conv = (size + 2 * blk.padding() - blk.kernel) / blk.stride + 1;
    if (conv % 2 != 0) {
      throw ShapeError("block " + std::to_string(b) + ": conv output " + std::to_string(conv) +
                       " is odd and cannot be 2x2 pooled");
    }
    shapes.push_back({conv, conv / 2});
    size = conv / 2;
  }
  return shapes;
}

void NetworkConfig::validate() const {
  if (crop_size == 0 || embed_dim == 0 || lstm_units == 0) throw ShapeError("network sizes must be positive");
  if (conv_blocks.empty()) throw ShapeError("at least one conv block is required");
  if (skip_channels.size() != conv_blocks.size()) {
    throw ShapeError("one skip tap per pooling stage: " + std::to_string(skip_channels.size()) + " skips for " +
                     std::to_string(conv_blocks.size()) + " blocks");
  }
  for (std::size_t b = 0; b < skip_channels.size(); ++b) {
    if (skip_channels[b] == 0 || skip_channels[b] >= conv_blocks[b].channels) {
      throw ShapeError("skip " + std::to_string(b) + " must have fewer channels than its block");
    }
    if (b > 0 && skip_channels[b] != 2 * skip_channels[b - 1]) {
      throw ShapeError("skip channels must double from tap to tap");
    }
  }
  block_shapes();
}

std::size_t NetworkConfig::stream_feature_length() const {
  const auto shapes = block_shapes();
  std::size_t total = 0;
  for (std::size_t b = 0; b < shapes.size(); ++b) {
    total += shapes[b].pooled_size * shapes[b].pooled_size * skip_channels[b];
  }
  const auto last = shapes.back().pooled_size;
  return total + last * last * conv_blocks.back().channels;
}

LstmState LstmState::zeros(std::size_t batch, std::size_t units) {
  LstmState s;
  for (auto& l : s.layers) {
    l.y = Tensor::zeros({batch, units});
    l.c = Tensor::zeros({batch, units});
  }
  return s;
}

LstmState LstmState::detached() const {
  LstmState s;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    s.layers[i].y = Tensor::from(layers[i].y.dims(), {layers[i].y.data().begin(), layers[i].y.data().end()});
    s.layers[i].c = Tensor::from(layers[i].c.dims(), {layers[i].c.data().begin(), layers[i].c.data().end()});
  }
  return s;
}

bool LstmState::bit_equal(const LstmState& other) const {
  auto same = [](const Tensor& a, const Tensor& b) {
    return a.dims() == b.dims() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!same(layers[i].y, other.layers[i].y) || !same(layers[i].c, other.layers[i].c)) return false;
  }
  return true;
}

namespace {

Tensor uniform(std::mt19937_64& rng, Shape dims, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(shape_size(dims));
  for (auto& x : v) x = dist(rng);
  return Tensor::from(std::move(dims), std::move(v), true);
}

Tensor he_uniform(std::mt19937_64& rng, Shape dims, std::size_t fan_in) {
  return uniform(rng, std::move(dims), std::sqrt(6.0 / static_cast<double>(fan_in)));
}

Tensor glorot_uniform(std::mt19937_64& rng, Shape dims, std::size_t fan_in, std::size_t fan_out) {
  return uniform(rng, std::move(dims), std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
}

Tensor constant(Shape dims, double v) { return Tensor::filled(std::move(dims), v, true); }

constexpr double kPreluInit = 0.25;

LstmLayerParams init_lstm(std::mt19937_64& rng, std::size_t input, std::size_t units) {
  LstmLayerParams p;
  for (Tensor* w : {&p.w_z, &p.w_i, &p.w_f, &p.w_o}) *w = glorot_uniform(rng, {input, units}, input, units);
  for (Tensor* r : {&p.r_z, &p.r_i, &p.r_f, &p.r_o}) *r = glorot_uniform(rng, {units, units}, units, units);
  for (Tensor* pe : {&p.p_i, &p.p_f, &p.p_o}) *pe = constant({units}, 0.0);
  p.b_z = constant({units}, 0.0);
  p.b_i = constant({units}, 0.0);
  p.b_f = constant({units}, 1.0);
  p.b_o = constant({units}, 0.0);
  return p;
}

std::vector<std::pair<std::string, Tensor*>> lstm_slots(LstmLayerParams& p, const std::string& prefix) {
  return {{prefix + ".W_z", &p.w_z}, {prefix + ".W_i", &p.w_i}, {prefix + ".W_f", &p.w_f},
          {prefix + ".W_o", &p.w_o}, {prefix + ".R_z", &p.r_z}, {prefix + ".R_i", &p.r_i},
          {prefix + ".R_f", &p.r_f}, {prefix + ".R_o", &p.r_o}, {prefix + ".P_i", &p.p_i},
          {prefix + ".P_f", &p.p_f}, {prefix + ".P_o", &p.p_o}, {prefix + ".b_z", &p.b_z},
          {prefix + ".b_i", &p.b_i}, {prefix + ".b_f", &p.b_f}, {prefix + ".b_o", &p.b_o}};
}

// Registry order defines checkpoint order and the Adam slot order.
std::vector<std::pair<std::string, Tensor*>> slots(NetworkParams& p) {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (std::size_t b = 0; b < p.blocks.size(); ++b) {
    const std::string pre = "block" + std::to_string(b);
    auto& blk = p.blocks[b];
    out.insert(out.end(), {{pre + ".conv.weight", &blk.kernel},
                           {pre + ".conv.bias", &blk.bias},
                           {pre + ".prelu.slope", &blk.slope},
                           {pre + ".skip.weight", &blk.skip_kernel},
                           {pre + ".skip.bias", &blk.skip_bias},
                           {pre + ".skip.slope", &blk.skip_slope}});
  }
  out.insert(out.end(), {{"embed.weight", &p.embed_w}, {"embed.bias", &p.embed_b}, {"embed.slope", &p.embed_slope}});
  for (std::size_t l = 0; l < p.lstm.size(); ++l) {
    auto s = lstm_slots(p.lstm[l], "lstm" + std::to_string(l));
    out.insert(out.end(), s.begin(), s.end());
  }
  out.insert(out.end(), {{"head.weight", &p.head_w}, {"head.bias", &p.head_b}});
  return out;
}

}  // namespace

NetworkParams NetworkParams::initialize(const NetworkConfig& config) {
  config.validate();
  NetworkParams p;
  p.config_ = config;
  std::mt19937_64 rng(config.seed);
  std::size_t in_ch = 3;
  for (std::size_t b = 0; b < config.conv_blocks.size(); ++b) {
    const auto& spec = config.conv_blocks[b];
    const std::size_t skip = config.skip_channels[b];
    Block blk;
    blk.kernel = he_uniform(rng, {spec.channels, in_ch, spec.kernel, spec.kernel}, in_ch * spec.kernel * spec.kernel);
    blk.bias = constant({spec.channels}, 0.0);
    blk.slope = constant({spec.channels}, kPreluInit);
    blk.skip_kernel = he_uniform(rng, {skip, spec.channels, 1, 1}, spec.channels);
    blk.skip_bias = constant({skip}, 0.0);
    blk.skip_slope = constant({skip}, kPreluInit);
    p.blocks.push_back(std::move(blk));
    in_ch = spec.channels;
  }
  const std::size_t fused = 2 * config.stream_feature_length();
  p.embed_w = he_uniform(rng, {fused, config.embed_dim}, fused);
  p.embed_b = constant({config.embed_dim}, 0.0);
  p.embed_slope = constant({config.embed_dim}, kPreluInit);
  p.lstm[0] = init_lstm(rng, config.embed_dim, config.lstm_units);
  p.lstm[1] = init_lstm(rng, config.embed_dim + config.lstm_units, config.lstm_units);
  p.head_w = he_uniform(rng, {config.lstm_units, 4}, config.lstm_units);
  p.head_b = Tensor::from({4}, {0.25, 0.25, 0.75, 0.75}, true);
  return p;
}

NetworkParams NetworkParams::from_named(const NetworkConfig& config,
                                        const std::vector<std::pair<std::string, Tensor>>& named) {
  // Shapes come from a freshly initialized template; values from `named`.
  NetworkParams p = initialize(config);
  std::map<std::string, const Tensor*> lookup;
  for (const auto& [name, t] : named) lookup[name] = &t;
  for (auto& [name, slot] : slots(p)) {
    auto it = lookup.find(name);
    if (it == lookup.end()) throw FormatError("missing tensor '" + name + "'");
    if (it->second->dims() != slot->dims()) {
      throw FormatError("tensor '" + name + "' has dims " + shape_string(it->second->dims()) + ", expected " +
                        shape_string(slot->dims()));
    }
    *slot = it->second->clone();
    slot->set_requires_grad(true);
  }
  return p;
}

std::vector<std::pair<std::string, Tensor>> NetworkParams::named_tensors() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (auto& [name, slot] : slots(const_cast<NetworkParams&>(*this))) out.emplace_back(name, *slot);
  return out;
}

std::vector<Tensor> NetworkParams::tensors() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_tensors()) out.push_back(t);
  return out;
}

NetworkParams NetworkParams::clone() const {
  NetworkParams p = *this;
  for (auto& [name, slot] : slots(p)) *slot = slot->clone();
  return p;
}

void NetworkParams::set_requires_grad(bool on) {
  for (auto& [name, slot] : slots(*this)) slot->set_requires_grad(on);
}

void NetworkParams::zero_grad() {
  for (auto& [name, slot] : slots(*this)) slot->zero_grad();
}

LstmLayerState lstm_step(Graph& g, const LstmLayerParams& p, const Tensor& x, const LstmLayerState& prev) {
  using namespace ops;
  auto pre = [&](const Tensor& w, const Tensor& r, const Tensor& b) {
    return add(g, add(g, matmul(g, x, w), matmul(g, prev.y, r)), b);
  };
  const Tensor z = tanh(g, pre(p.w_z, p.r_z, p.b_z));
  const Tensor i = sigmoid(g, add(g, pre(p.w_i, p.r_i, p.b_i), mul(g, prev.c, p.p_i)));
  const Tensor f = sigmoid(g, add(g, pre(p.w_f, p.r_f, p.b_f), mul(g, prev.c, p.p_f)));
  const Tensor c = add(g, mul(g, i, z), mul(g, f, prev.c));
  const Tensor o = sigmoid(g, add(g, pre(p.w_o, p.r_o, p.b_o), mul(g, c, p.p_o)));
  const Tensor y = mul(g, o, tanh(g, c));
  return {y, c};
}

Tensor stream_features(Graph& g, const NetworkParams& params, const Tensor& crops) {
  using namespace ops;
  const auto& cfg = params.config();
  if (crops.rank() != 4 || crops.dim(1) != 3 || crops.dim(2) != cfg.crop_size || crops.dim(3) != cfg.crop_size) {
    throw ShapeError("crops must be [B,3," + std::to_string(cfg.crop_size) + "," + std::to_string(cfg.crop_size) +
                     "], got " + shape_string(crops.dims()));
  }
  std::vector<Tensor> pieces;
  Tensor x = crops;
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    const auto& blk = params.blocks[b];
    const auto& spec = cfg.conv_blocks[b];
    x = conv2d(g, x, blk.kernel, blk.bias, spec.stride, spec.padding());
    x = prelu(g, x, blk.slope);
    x = maxpool2x2(g, x);
    Tensor skip = prelu(g, conv2d(g, x, blk.skip_kernel, blk.skip_bias, 1, 0), blk.skip_slope);
    pieces.push_back(flatten(g, skip));
  }
  pieces.push_back(flatten(g, x));
  return concat(g, pieces, 1);
}

Tensor embed_crop_pair(Graph& g, const NetworkParams& params, const Tensor& crops_prev, const Tensor& crops_cur) {
  using namespace ops;
  if (crops_prev.dims() != crops_cur.dims()) throw ShapeError("crop pair dims differ");
  const std::array<Tensor, 2> streams{stream_features(g, params, crops_prev), stream_features(g, params, crops_cur)};
  const Tensor fused = concat(g, streams, 1);
  return prelu(g, fully_connected(g, fused, params.embed_w, params.embed_b), params.embed_slope);
}

StepOutput forward_step(Graph& g, const NetworkParams& params, const Tensor& crops_prev, const Tensor& crops_cur,
                        const LstmState& state) {
  using namespace ops;
  const Tensor features = embed_crop_pair(g, params, crops_prev, crops_cur);
  if (state.batch() != features.dim(0)) throw ShapeError("LSTM state batch does not match crop batch");
  StepOutput out;
  out.state.layers[0] = lstm_step(g, params.lstm[0], features, state.layers[0]);
  const std::array<Tensor, 2> second_input{features, out.state.layers[0].y};
  out.state.layers[1] = lstm_step(g, params.lstm[1], concat(g, second_input, 1), state.layers[1]);
  out.pred = fully_connected(g, out.state.layers[1].y, params.head_w, params.head_b);
  return out;
}

Tensor unrolled_loss(Graph& g, const NetworkParams& params, std::span<const UnrollStep> steps,
                     const LstmState& initial) {
  if (steps.empty()) throw UsageError("unrolled_loss: empty sequence");
  std::vector<Tensor> losses;
  LstmState state = initial;
  for (const auto& step : steps) {
    StepOutput out = forward_step(g, params, step.crops_prev, step.crops_cur, state);
    losses.push_back(ops::l1_loss(g, out.pred, step.target));
    state = std::move(out.state);
  }
  return ops::mean_of(g, losses);
}

CropFrameBox crop_frame_row(const Tensor& pred, std::size_t row) {
  if (pred.rank() != 2 || pred.dim(1) != 4 || row >= pred.dim(0)) throw ShapeError("prediction must be [B,4]");
  const auto v = pred.data().subspan(row * 4, 4);
  return {v[0], v[1], v[2], v[3]};
}

Tensor target_tensor(std::span<const CropFrameBox> targets) {
  std::vector<double> v;
  v.reserve(targets.size() * 4);
  for (const auto& t : targets) v.insert(v.end(), {t.x1, t.y1, t.x2, t.y2});
  return Tensor::from({targets.size(), 4}, std::move(v));
}

}  // namespace rrtrack
