#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "homnet/data.hpp"
#include "homnet/hierarchy.hpp"

namespace homnet {

enum class Activation { relu, identity };

inline constexpr double kLayerNormEps = 1e-5;

/// Description of one layer, used to assemble a Network.
struct LayerDesc {
  int out_width = 0;
  /// Input units feeding each output unit. Empty means fully connected.
  std::vector<std::vector<int>> mask_rows;
  bool layernorm = false;
  Activation activation = Activation::relu;
};

/// A weight layer inside a Network. Masked weights are stored row by row,
/// one scalar per mask nonzero; dense weights are stored row-major.
struct LayerSpec {
  int in_width = 0;
  int out_width = 0;
  bool dense = true;
  std::vector<std::vector<int>> mask_rows;  // empty when dense
  bool layernorm = false;
  Activation activation = Activation::relu;
  std::size_t weight_offset = 0;
  std::vector<std::size_t> row_offset;  // masked only; size out_width + 1
  std::size_t bias_offset = 0;

  std::size_t weight_count() const {
    return dense ? static_cast<std::size_t>(in_width) * static_cast<std::size_t>(out_width) : row_offset.back() - weight_offset;
  }
  std::size_t fan_in(int row) const {
    return dense ? static_cast<std::size_t>(in_width) : mask_rows[static_cast<std::size_t>(row)].size();
  }
};

/// Linear map from one hidden layer to a scalar: r = a . h + c.
struct ReadoutSpec {
  int layer = 0;
  std::size_t offset = 0;  // a occupies [offset, offset + width), c sits at offset + width
};

/**
 * Feedforward network over standardized features.
 *
 * Hidden layer l maps h_{l-1} to h_l = act(norm(W_l h_{l-1} + b_l)), with
 * h_0 the input features. Readouts attach to a subset of hidden layers.
 * With a combiner the prediction is sum_k beta_k r_k + d; without one it is
 * the single readout. All trainable scalars live in `params`.
 */
struct Network {
  int p = 0;
  std::string kind;
  std::vector<LayerSpec> layers;
  std::vector<ReadoutSpec> readouts;
  bool has_combiner = false;
  std::size_t combiner_offset = 0;  // beta_1..beta_R then d
  std::vector<double> params;

  std::size_t size() const { return params.size(); }
  int layer_width(int layer) const { return layers[static_cast<std::size_t>(layer)].out_width; }
};

Network assemble_network(int p, const std::vector<LayerDesc>& layers, const std::vector<int>& readout_layers,
                         bool combiner, std::string kind);

/// Sparse interaction network: one masked layer per order k >= 2, layer
/// norm, ReLU, a readout per order and a linear combiner.
Network build_hnn(const Wiring& wiring);
inline Network build_hnn(const InteractionHierarchy& h) { return build_hnn(h.wiring()); }

/// Same widths, normalization and readouts as build_hnn, fully connected.
Network build_mlp_hnn(const InteractionHierarchy& h);

/// Plain ReLU MLP with a single linear output.
Network build_mlp(int p, const std::vector<int>& hidden_widths);

/// One hidden layer of width round((target - 1) / (p + 2)), at least 1.
Network build_pm_mlp(int p, std::size_t target_params);

/// Copy of `net` with every masked layer replaced by a dense one whose
/// out-of-mask weights are zero.
Network densify(const Network& net);

void init_params(Network& net, std::uint64_t seed);

/// Per-layer intermediates, all m x width (samples in rows).
struct ForwardCache {
  int batch = 0;
  Matrix input;                   // m x p
  std::vector<Matrix> normalized; // per layer, after layer norm (== pre-activation without it)
  std::vector<Vector> inv_std;    // per layer with active layer norm
  std::vector<Matrix> activations;
  Matrix readouts;                // m x R
};

/// `batch` has samples in rows. Throws ConfigError on width mismatch or
/// non-finite input.
Vector forward(const Network& net, const Matrix& batch, ForwardCache& cache);
Vector predict(const Network& net, const Matrix& batch);

/// Reverse-mode gradient of a scalar loss given dloss/dyhat per sample.
/// The result has one entry per trainable parameter.
std::vector<double> backward(const Network& net, const ForwardCache& cache, const Vector& loss_grad);

/// Mean squared error and its per-sample gradient 2 (yhat - y) / m.
double mse(const Vector& pred, const Vector& target, Vector* grad = nullptr);

/// Binary checkpoint: "HOMNET1\n", u64 header length, JSON header,
/// then the parameters as little-endian float64.
void save_checkpoint(const Network& net, const std::filesystem::path& path, const nlohmann::json& extra = {});
Network load_checkpoint(const std::filesystem::path& path, nlohmann::json* extra = nullptr);

nlohmann::json architecture_json(const Network& net);

}  // namespace homnet
