#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "heatsdf/core.hpp"
#include "heatsdf/neuralfield.hpp"

namespace heatsdf {

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(std::size_t n = 0) : first_moment(n, 0.0), second_moment(n, 0.0) {}
};

// Standard bias-corrected Adam update. Any non-finite gradient entry aborts
// the step; silently skipping batches would hide loss-scale bugs.
inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                      double lr) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size())
    throw Error(ErrorKind::ShapeMismatch, "adam_step: parameter/gradient/state sizes differ");
  for (double g : grads)
    if (!std::isfinite(g)) throw Error(ErrorKind::NonFiniteGradient, "non-finite gradient entry");

  state.step_count += 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * grads[i];
    v = state.beta2 * v + (1.0 - state.beta2) * grads[i] * grads[i];
    params[i] -= lr * (m / c1) / (std::sqrt(v / c2) + state.eps);
  }
}

struct TrainSchedule {
  int epochs = 50;
  int batches_per_epoch = 1000;
  double initial_lr = 1e-4;
  double min_lr = 1e-8;
  int plateau_patience = 2;
  double plateau_factor = 0.1;
};

// Reduce-on-plateau: once the best epoch loss has gone patience+1 consecutive
// epochs without a relative improvement of at least `threshold`, the rate is
// multiplied by `factor` (floored at min_lr) and the bad-epoch count resets.
class PlateauScheduler {
 public:
  PlateauScheduler(double initial_lr, double min_lr, int patience, double factor,
                   double threshold = 1e-4)
      : lr_(initial_lr), min_lr_(min_lr), factor_(factor), threshold_(threshold), patience_(patience) {}

  double observe(double epoch_loss) {
    if (!seen_) {
      // the first epoch sets the baseline and starts the count
      seen_ = true;
      best_ = epoch_loss;
      bad_epochs_ = 1;
    } else if (epoch_loss < best_ - threshold_ * std::abs(best_)) {
      best_ = epoch_loss;
      bad_epochs_ = 0;
    } else {
      ++bad_epochs_;
      if (bad_epochs_ >= patience_ + 1) {
        lr_ = std::max(lr_ * factor_, min_lr_);
        bad_epochs_ = 0;
      }
    }
    return lr_;
  }

  double lr() const { return lr_; }

 private:
  double lr_, min_lr_, factor_, threshold_;
  int patience_;
  int bad_epochs_ = 0;
  bool seen_ = false;
  double best_ = std::numeric_limits<double>::infinity();
};

// Stateless form: replays the loss history through a fresh scheduler.
inline double plateau_update(std::span<const double> history, double initial_lr, int patience,
                             double factor, double min_lr) {
  PlateauScheduler sched(initial_lr, min_lr, patience, factor);
  double lr = initial_lr;
  for (double loss : history) lr = sched.observe(loss);
  return lr;
}

struct TrainResult {
  NeuralField field;
  std::vector<double> epoch_losses;
  std::vector<double> epoch_lrs;
};

// loss(field, seed, step, grad_out) fills grad_out (pre-zeroed) and returns
// the batch loss. `step` counts batches across the whole run, so the loss
// can derive per-batch sample streams deterministically.
using BatchLossFn =
    std::function<double(const NeuralField&, std::uint64_t seed, std::uint64_t step, std::span<double>)>;
using EpochCallback = std::function<void(const NeuralField&, int epoch, double epoch_loss)>;

inline TrainResult train(NeuralField field, const BatchLossFn& loss, const TrainSchedule& sched,
                         std::uint64_t seed, const EpochCallback& on_epoch = {}) {
  TrainResult result;
  AdamState adam(field.params.size());
  PlateauScheduler plateau(sched.initial_lr, sched.min_lr, sched.plateau_patience, sched.plateau_factor);
  std::vector<double> grad(field.params.size());
  double lr = sched.initial_lr;
  std::uint64_t step = 0;

  for (int epoch = 0; epoch < sched.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (int batch = 0; batch < sched.batches_per_epoch; ++batch, ++step) {
      std::fill(grad.begin(), grad.end(), 0.0);
      const double value = loss(field, seed, step, grad);
      epoch_loss += value;
      try {
        adam_step(field.params, grad, adam, lr);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::NonFiniteGradient)
          throw Error(ErrorKind::NonFiniteGradient,
                      std::string(e.what()) + " at epoch " + std::to_string(epoch) + " batch " +
                          std::to_string(batch));
        throw;
      }
    }
    epoch_loss /= static_cast<double>(sched.batches_per_epoch);
    result.epoch_losses.push_back(epoch_loss);
    result.epoch_lrs.push_back(lr);
    lr = plateau.observe(epoch_loss);
    if (on_epoch) on_epoch(field, epoch, epoch_loss);
  }
  result.field = std::move(field);
  return result;
}

}  // namespace heatsdf
