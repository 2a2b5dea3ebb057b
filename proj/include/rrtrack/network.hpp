#pragma once

// Twin-stream crop-pair network: a shared conv tower with skip taps, late
// fusion into an embedding, a two-layer peephole LSTM fed the embedding at
// both layers, and a linear head regressing the four crop-frame corners.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rrtrack/autodiff.hpp"
#include "rrtrack/geometry.hpp"

namespace rrtrack {

struct ConvBlockSpec {
  std::size_t kernel = 3;
  std::size_t channels = 16;
  std::size_t stride = 1;
  // Zero padding; kernel/2 when negative.
  int pad = -1;

  std::size_t padding() const { return pad < 0 ? kernel / 2 : static_cast<std::size_t>(pad); }
  friend bool operator==(const ConvBlockSpec&, const ConvBlockSpec&) = default;
};

struct NetworkConfig {
  std::size_t crop_size = 48;
  std::vector<ConvBlockSpec> conv_blocks{{5, 16}, {3, 32}, {3, 64}};
  std::vector<std::size_t> skip_channels{4, 8, 16};
  std::size_t embed_dim = 256;
  std::size_t lstm_units = 128;
  std::uint64_t seed = 0;

  /// 48px crops, blocks 16/32/64, skips 4/8/16, embed 256, LSTM 128.
  static NetworkConfig desk();
  /// Reduced topology for fast CPU experiments: 32px, blocks 8/16/32,
  /// embed 128, LSTM 64.
  static NetworkConfig small();
  /// Full-size reference: 227px crops, skips 16/32/64, embed 2048, LSTM 1024.
  static NetworkConfig full_scale();

  /// Throws ShapeError when the topology is inconsistent.
  void validate() const;

  struct BlockShape {
    std::size_t conv_size;   // spatial size after the conv
    std::size_t pooled_size; // spatial size after the pool (skip tap input)
  };
  std::vector<BlockShape> block_shapes() const;

  /// Length of one stream's concatenated skip outputs + final block output.
  std::size_t stream_feature_length() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

struct LstmLayerParams {
  Tensor w_z, w_i, w_f, w_o;  // [input, units]
  Tensor r_z, r_i, r_f, r_o;  // [units, units]
  Tensor p_i, p_f, p_o;       // [units], diagonal peepholes
  Tensor b_z, b_i, b_f, b_o;  // [units]
};

struct LstmLayerState {
  Tensor y;  // [batch, units]
  Tensor c;  // [batch, units]
};

struct LstmState {
  std::array<LstmLayerState, 2> layers;

  static LstmState zeros(std::size_t batch, std::size_t units);
  std::size_t batch() const { return layers[0].y.dim(0); }
  /// Deep copy, detached from any graph.
  LstmState detached() const;
  bool bit_equal(const LstmState& other) const;
};

class NetworkParams {
 public:
  struct Block {
    Tensor kernel, bias, slope;
    Tensor skip_kernel, skip_bias, skip_slope;
  };

  NetworkParams() = default;

  /// Fresh parameters: fan-in scaled uniform weights, zero biases except the
  /// LSTM forget gates (+1) and the head, which starts at the centred-box
  /// output (0.25, 0.25, 0.75, 0.75).
  static NetworkParams initialize(const NetworkConfig& config);

  /// Rebuilds parameters from named tensors (checkpoint load).
  static NetworkParams from_named(const NetworkConfig& config,
                                  const std::vector<std::pair<std::string, Tensor>>& named);

  const NetworkConfig& config() const { return config_; }

  /// Every learnable tensor under a unique, stable name.
  std::vector<std::pair<std::string, Tensor>> named_tensors() const;
  std::vector<Tensor> tensors() const;

  NetworkParams clone() const;
  void set_requires_grad(bool on);
  void zero_grad();

  std::vector<Block> blocks;
  Tensor embed_w, embed_b, embed_slope;
  std::array<LstmLayerParams, 2> lstm;
  Tensor head_w, head_b;

 private:
  NetworkConfig config_;
};

/// One peephole LSTM step for a batch. x [B,D].
LstmLayerState lstm_step(Graph& g, const LstmLayerParams& layer, const Tensor& x, const LstmLayerState& prev);

/// Conv tower for one stream: [B,3,S,S] -> [B, stream_feature_length].
Tensor stream_features(Graph& g, const NetworkParams& params, const Tensor& crops);

/// Late fusion of the two streams followed by the embedding layer: [B, embed].
Tensor embed_crop_pair(Graph& g, const NetworkParams& params, const Tensor& crops_prev, const Tensor& crops_cur);

struct StepOutput {
  Tensor pred;  // [B,4] crop-frame corners
  LstmState state;
};

StepOutput forward_step(Graph& g, const NetworkParams& params, const Tensor& crops_prev, const Tensor& crops_cur,
                        const LstmState& state);

struct UnrollStep {
  Tensor crops_prev;  // [B,3,S,S]
  Tensor crops_cur;   // [B,3,S,S]
  Tensor target;      // [B,4]
};

/// Mean over time of per-step L1 losses with the recurrent state threaded
/// through every step.
Tensor unrolled_loss(Graph& g, const NetworkParams& params, std::span<const UnrollStep> steps,
                     const LstmState& initial);

CropFrameBox crop_frame_row(const Tensor& pred, std::size_t row);
Tensor target_tensor(std::span<const CropFrameBox> targets);

}  // namespace rrtrack
