#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "homnet/data.hpp"
#include "homnet/net.hpp"

namespace homnet {

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 1024;
  int max_epochs = 30000;
  int patience = 200;
  double min_delta = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

/// One bias-corrected Adam update. Throws RuntimeFailure on non-finite gradients.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const TrainConfig& cfg);

struct EpochStats {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
};

struct TrainResult {
  std::vector<double> best_params;
  std::vector<EpochStats> history;
  int stopped_epoch = 0;
  int best_epoch = 0;
  double best_val_mse = 0.0;
  bool restored = false;  // best_params differ from the last epoch's parameters
};

/**
 * Minibatch Adam on MSE with early stopping.
 *
 * The first epoch sets the reference loss. Later epochs count as an
 * improvement only when they lower the reference by more than min_delta;
 * `patience` epochs without improvement stop the run. Parameters with the
 * lowest validation loss seen are written back into `net`.
 */
TrainResult fit(Network& net, const Dataset& train, const Dataset& val, const TrainConfig& cfg);

/// epoch,train_mse,val_mse
void save_history_csv(const TrainResult& result, const std::filesystem::path& path);

}  // namespace homnet
