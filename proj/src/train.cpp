#include "homnet/train.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "homnet/error.hpp"
#include "homnet/rng.hpp"

namespace homnet {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (max_epochs < 1) throw ConfigError("max_epochs must be positive");
  if (patience < 1 || patience > max_epochs) throw ConfigError("patience must lie in [1, max_epochs]");
  if (!(min_delta >= 0.0)) throw ConfigError("min_delta must be non-negative");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const TrainConfig& cfg) {
  if (params.size() != grads.size()) throw ConfigError("adam_step: parameter and gradient lengths differ");
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
    state.step = 0;
  }
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (!std::isfinite(grads[i]))
      throw RuntimeFailure("adam_step: non-finite gradient at parameter " + std::to_string(i) + " (step " +
                           std::to_string(state.step + 1) + ")");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

TrainResult fit(Network& net, const Dataset& train, const Dataset& val, const TrainConfig& cfg) {
  cfg.validate();
  if (train.n() < 1 || val.n() < 1) throw ConfigError("fit: training and validation sets must be nonempty");
  if (train.p() != net.p || val.p() != net.p) throw ConfigError("fit: data width does not match the network");

  TrainResult result;
  AdamState adam;
  ForwardCache cache;
  Vector grad_out;
  const Rng shuffle_base = Rng(cfg.seed).split("epoch-shuffle");

  std::vector<int> order(static_cast<std::size_t>(train.n()));
  double reference = std::numeric_limits<double>::infinity();
  double lowest = std::numeric_limits<double>::infinity();
  int waited = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng = shuffle_base.split(static_cast<std::uint64_t>(epoch));
    rng.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::vector<int> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                  order.begin() + static_cast<std::ptrdiff_t>(stop));
      const Matrix xb = train.features(rows, Eigen::all);
      const Vector yb = train.target(rows);
      const Vector pred = forward(net, xb, cache);
      const double loss = mse(pred, yb, &grad_out);
      if (!std::isfinite(loss)) throw RuntimeFailure("training diverged (non-finite loss) in epoch " + std::to_string(epoch));
      loss_sum += loss * static_cast<double>(rows.size());
      const auto grads = backward(net, cache, grad_out);
      adam_step(net.params, grads, adam, cfg);
    }

    const double val_loss = mse(predict(net, val.features), val.target);
    if (!std::isfinite(val_loss))
      throw RuntimeFailure("training diverged (non-finite validation loss) in epoch " + std::to_string(epoch));
    result.history.push_back({epoch, loss_sum / static_cast<double>(order.size()), val_loss});
    result.stopped_epoch = epoch;

    if (val_loss < lowest) {
      lowest = val_loss;
      result.best_params = net.params;
      result.best_epoch = epoch;
    }
    if (epoch == 1 || reference - val_loss > cfg.min_delta) {
      reference = val_loss;
      waited = 0;
    } else if (++waited >= cfg.patience) {
      break;
    }
  }

  result.best_val_mse = lowest;
  result.restored = result.best_epoch != result.stopped_epoch;
  net.params = result.best_params;
  return result;
}

void save_history_csv(const TrainResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.precision(17);
  out << "epoch,train_mse,val_mse\n";
  for (const auto& e : result.history) out << e.epoch << ',' << e.train_mse << ',' << e.val_mse << '\n';
}

}  // namespace homnet
