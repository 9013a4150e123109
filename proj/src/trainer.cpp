#include "doa/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <stdexcept>

#include "doa/covariance_ops.hpp"
#include "doa/rng.hpp"
#include "doa/subspace_estimators.hpp"

namespace doa {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// Ceiling on the global L2 norm of a batch gradient before the optimizer
// step; see the clipping note in the training loop.
constexpr double kGradClipNorm = 1.0;

double wrap_half_pi(double difference) {
  return difference - kPi * std::round(difference / kPi);
}

// Exhaustive best injective assignment of truth slots to candidate angles,
// branch-and-bound over the (tiny) source counts in play. Returns the summed
// squared wrapped error and, optionally, the winning slot -> candidate map.
double best_assignment_sq(const std::vector<double>& truth,
                          const std::vector<double>& candidates,
                          std::vector<int>* best_map_out) {
  const int slots = static_cast<int>(truth.size());
  const int options = static_cast<int>(candidates.size());
  std::vector<bool> used(static_cast<size_t>(options), false);
  std::vector<int> current(static_cast<size_t>(slots), -1);
  std::vector<int> best_map(static_cast<size_t>(slots), -1);
  double best = std::numeric_limits<double>::infinity();

  auto search = [&](auto&& self, int slot, double acc) -> void {
    if (acc >= best) return;
    if (slot == slots) {
      best = acc;
      best_map = current;
      return;
    }
    for (int c = 0; c < options; ++c) {
      if (used[static_cast<size_t>(c)]) continue;
      double d = wrap_half_pi(truth[static_cast<size_t>(slot)] -
                              candidates[static_cast<size_t>(c)]);
      used[static_cast<size_t>(c)] = true;
      current[static_cast<size_t>(slot)] = c;
      self(self, slot + 1, acc + d * d);
      used[static_cast<size_t>(c)] = false;
    }
  };
  search(search, 0, 0.0);
  if (best_map_out) *best_map_out = best_map;
  return best;
}

}  // namespace

double rmspe_value(const std::vector<double>& truth_rad,
                   const std::vector<double>& predicted_rad) {
  if (truth_rad.empty())
    throw std::invalid_argument("rmspe needs at least one true angle");
  std::vector<double> candidates = predicted_rad;
  while (candidates.size() < truth_rad.size()) candidates.push_back(0.0);
  double sq = best_assignment_sq(truth_rad, candidates, nullptr);
  return std::sqrt(sq / static_cast<double>(truth_rad.size()));
}

Var rmspe_loss_on_tape(Tape& tape, const std::vector<double>& truth_rad, Var predicted,
                       int predicted_count) {
  const int m = static_cast<int>(truth_rad.size());
  if (m < 1) throw std::invalid_argument("rmspe needs at least one true angle");
  if (predicted_count < 0 || predicted_count > m)
    throw std::invalid_argument("rmspe on tape expects 0..M predictions");

  std::vector<double> candidates;
  candidates.reserve(static_cast<size_t>(m));
  for (int i = 0; i < predicted_count; ++i)
    candidates.push_back(tape.value(predicted).data[static_cast<size_t>(i)]);
  while (static_cast<int>(candidates.size()) < m) candidates.push_back(0.0);
  std::vector<int> slot_to_candidate;
  best_assignment_sq(truth_rad, candidates, &slot_to_candidate);

  std::vector<Var> slots;
  slots.reserve(static_cast<size_t>(m));
  for (int j = 0; j < m; ++j) {
    int c = slot_to_candidate[static_cast<size_t>(j)];
    if (c < predicted_count)
      slots.push_back(tape.gather(predicted, {c}));
    else
      slots.push_back(tape.constant_scalar(0.0));
  }
  Var stacked = tape.stack_scalars(slots);

  Tensor truth_t = Tensor::zeros({m});
  for (int j = 0; j < m; ++j) truth_t.data[static_cast<size_t>(j)] = truth_rad[static_cast<size_t>(j)];
  Var diff = tape.sub(tape.constant(std::move(truth_t)), stacked);
  Var wrapped = tape.wrap_mod(diff, kPi);
  Var squared = tape.mul(wrapped, wrapped);
  return tape.sqrt_elem(tape.mean(squared));
}

TapeAngles rootmusic_angles_on_tape(Tape& tape, CVar covariance, int num_sensors,
                                    std::optional<int> m_override) {
  const int n = num_sensors;
  if (n < 2) throw std::invalid_argument("root-form head needs at least two sensors");
  Tape::EighResult eig = tape.eigh(covariance);

  int m_hat;
  if (m_override) {
    m_hat = *m_override;
  } else {
    const Tensor& lam = tape.value(eig.eigenvalues);
    Eigen::VectorXd lam_v(n);
    for (int i = 0; i < n; ++i) lam_v(i) = lam.data[static_cast<size_t>(i)];
    m_hat = estimate_num_sources(lam_v);
  }
  if (m_hat < 1 || m_hat > n - 1)
    throw std::invalid_argument("root-form head needs 1 <= m_hat <= N-1");

  CVar noise{tape.slice_cols(eig.vectors.re, m_hat, n - m_hat),
             tape.slice_cols(eig.vectors.im, m_hat, n - m_hat)};
  CVar projector = cmatmul(tape, noise, cadjoint(tape, noise));

  // Diagonal sums of the projector give the Hermitian-symmetric coefficient
  // vector c, index n - 1 + d for diagonal d.
  std::vector<Var> coeff_re(static_cast<size_t>(2 * n - 1));
  std::vector<Var> coeff_im(static_cast<size_t>(2 * n - 1));
  for (int d = 0; d < n; ++d) {
    std::vector<int> idx;
    idx.reserve(static_cast<size_t>(n - d));
    for (int i = 0; i + d < n; ++i) idx.push_back(i * n + i + d);
    Var sre = tape.sum(tape.gather(projector.re, idx));
    Var sim = tape.sum(tape.gather(projector.im, idx));
    coeff_re[static_cast<size_t>(n - 1 + d)] = sre;
    coeff_im[static_cast<size_t>(n - 1 + d)] = sim;
    if (d > 0) {
      coeff_re[static_cast<size_t>(n - 1 - d)] = sre;
      coeff_im[static_cast<size_t>(n - 1 - d)] = tape.neg(sim);
    }
  }
  CVar coeffs{tape.stack_scalars(coeff_re), tape.stack_scalars(coeff_im)};
  CVar roots = tape.polyroots(coeffs);

  // Selection happens on values and is frozen into the graph, mirroring the
  // inference path: conjugate-reciprocal pairing, discard pairs entirely
  // outside the disc, rank by the inside member's distance to the circle.
  const Tensor& rre = tape.value(roots.re);
  const Tensor& rim = tape.value(roots.im);
  const int degree = 2 * n - 2;
  Eigen::VectorXcd root_values(degree);
  for (int k = 0; k < degree; ++k)
    root_values(k) = std::complex<double>(rre.data[static_cast<size_t>(k)],
                                          rim.data[static_cast<size_t>(k)]);

  struct Candidate {
    double circle_distance;
    double mean_arg;
    int inside;
    int outside;
  };
  std::vector<Candidate> candidates;
  for (const auto& [inside, outside] : pair_roots_by_reciprocal(root_values)) {
    const std::complex<double> z_in = root_values(inside);
    if (std::abs(z_in) > 1.0 + 1e-6) continue;
    const double arg_in = std::arg(z_in);
    double diff = std::arg(root_values(outside)) - arg_in;
    diff -= 2.0 * kPi * std::round(diff / (2.0 * kPi));
    double mean_arg = arg_in + 0.5 * diff;
    mean_arg -= 2.0 * kPi * std::round(mean_arg / (2.0 * kPi));
    candidates.push_back({std::abs(1.0 - std::abs(z_in)), mean_arg, inside, outside});
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.circle_distance < b.circle_distance ||
           (a.circle_distance == b.circle_distance && a.mean_arg < b.mean_arg);
  });

  TapeAngles out;
  out.m_hat = m_hat;
  out.count = static_cast<int>(std::min<size_t>(candidates.size(), static_cast<size_t>(m_hat)));
  out.shortfall = out.count < m_hat;
  if (out.count == 0) return out;

  std::vector<int> inside_idx, outside_idx;
  for (int i = 0; i < out.count; ++i) {
    inside_idx.push_back(candidates[static_cast<size_t>(i)].inside);
    outside_idx.push_back(candidates[static_cast<size_t>(i)].outside);
  }
  Var in_re = tape.gather(roots.re, inside_idx);
  Var in_im = tape.gather(roots.im, inside_idx);
  Var out_re = tape.gather(roots.re, outside_idx);
  Var out_im = tape.gather(roots.im, outside_idx);
  Var arg_in = tape.atan2_elem(in_im, in_re);
  Var arg_out = tape.atan2_elem(out_im, out_re);
  Var half_span = tape.scale(tape.wrap_mod(tape.sub(arg_out, arg_in), 2.0 * kPi), 0.5);
  Var mean_arg = tape.wrap_mod(tape.add(arg_in, half_span), 2.0 * kPi);
  out.angles = tape.neg(tape.asin_clamped(tape.scale(mean_arg, 1.0 / kPi)));
  return out;
}

namespace {

double validation_rmspe(const SurrogateModel& model, const Dataset& dataset,
                        const std::vector<int>& indices, bool m_known) {
  double total = 0.0;
  for (int idx : indices) {
    const DatasetSample& sample = dataset[static_cast<size_t>(idx)];
    CovarianceLike cov = surrogate_covariance(model, sample.snapshots);
    std::optional<int> m_opt;
    if (m_known) m_opt = static_cast<int>(sample.thetas_rad.size());
    SubspaceDecomposition dec = decompose(cov, m_opt);
    DoaEstimate est = rootmusic_doa(dec, dec.num_sources_est).first;
    total += rmspe_value(sample.thetas_rad, est.angles_rad);
  }
  return total / static_cast<double>(indices.size());
}

}  // namespace

TrainResult train(const Dataset& dataset, const Hyperparameters& hp,
                  const SurrogateModel& initial, std::ostream* epoch_log) {
  if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
  if (!(hp.learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
  if (hp.batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
  if (hp.max_epochs < 1) throw std::invalid_argument("train: need at least one epoch");
  const int n = initial.num_sensors;
  for (const DatasetSample& sample : dataset) {
    if (static_cast<int>(sample.snapshots.rows()) != n)
      throw std::invalid_argument("train: dataset sensor count does not match the model");
    const int m = static_cast<int>(sample.thetas_rad.size());
    if (m < 1 || m > n - 1)
      throw std::invalid_argument("train: sample source count outside 1..N-1");
  }

  const int total = static_cast<int>(dataset.size());
  std::vector<Tensor> features;
  features.reserve(static_cast<size_t>(total));
  for (const DatasetSample& sample : dataset)
    features.push_back(extract_features(sample.snapshots, initial.num_lags));

  const int val_count = total / 10;
  std::vector<int> train_idx, val_idx;
  for (int i = 0; i < total - val_count; ++i) train_idx.push_back(i);
  for (int i = total - val_count; i < total; ++i) val_idx.push_back(i);
  if (val_idx.empty()) val_idx = train_idx;  // degenerate tiny datasets

  SurrogateModel work = initial;
  std::vector<double> params = flatten_parameters(work);
  AdamState adam;
  double lr = hp.learning_rate;
  bool halved = false;

  TrainResult result;
  result.model = initial;
  std::vector<double> best_params = params;

  int epoch = 1;
  while (epoch <= hp.max_epochs) {
    const std::vector<double> params_snapshot = params;
    const AdamState adam_snapshot = adam;
    // Annealed step size: full rate through the fast-descent phase (decaying
    // earlier freezes the model mid-descent), then a cosine ramp down to a 5%
    // floor so the noisy subspace loss settles instead of bouncing around the
    // valley at full step. Runs of 20 epochs or fewer never decay.
    double epoch_lr = lr;
    constexpr int kDecayStartEpoch = 21;
    constexpr double kLrFloorRatio = 0.05;
    if (epoch >= kDecayStartEpoch && hp.max_epochs > kDecayStartEpoch) {
      const double progress = static_cast<double>(epoch - kDecayStartEpoch + 1) /
                              static_cast<double>(hp.max_epochs - kDecayStartEpoch + 1);
      epoch_lr = lr * (kLrFloorRatio +
                       (1.0 - kLrFloorRatio) * 0.5 * (1.0 + std::cos(kPi * progress)));
    }

    std::vector<int> order = train_idx;
    std::mt19937_64 shuffle_rng = make_rng(mix_seed(hp.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss_sum = 0.0;
    long epoch_samples = 0;
    long gap_clamps = 0;
    long root_warnings = 0;
    bool aborted = false;

    for (size_t start = 0; start < order.size() && !aborted; start += static_cast<size_t>(hp.batch_size)) {
      const size_t stop = std::min(order.size(), start + static_cast<size_t>(hp.batch_size));
      std::vector<double> grads(params.size(), 0.0);
      double batch_loss = 0.0;

      for (size_t pos = start; pos < stop; ++pos) {
        const int idx = order[pos];
        const DatasetSample& sample = dataset[static_cast<size_t>(idx)];
        double loss_value;
        try {
          Tape tape;
          Var feats = tape.constant(features[static_cast<size_t>(idx)]);
          std::vector<Var> staged = stage_weights(tape, work, true);
          CVar cov = surrogate_forward(tape, work, staged, feats);
          std::optional<int> m_opt;
          if (hp.m_known) m_opt = static_cast<int>(sample.thetas_rad.size());
          TapeAngles head = rootmusic_angles_on_tape(tape, cov, n, m_opt);
          if (head.shortfall) ++root_warnings;
          if (head.count == 0) {
            loss_value = rmspe_value(sample.thetas_rad, {});
          } else {
            Var loss = rmspe_loss_on_tape(tape, sample.thetas_rad, head.angles, head.count);
            loss_value = tape.value(loss).data[0];
            if (std::isfinite(loss_value)) {
              tape.backward(loss);
              size_t offset = 0;
              for (const Var& w : staged) {
                const Tensor& g = tape.grad(w);
                for (size_t i = 0; i < g.data.size(); ++i) grads[offset + i] += g.data[i];
                offset += g.data.size();
              }
              gap_clamps += tape.gap_clamp_count();
              root_warnings += tape.multiple_root_count();
            }
          }
        } catch (const std::runtime_error&) {
          // Numerical failure inside the pipeline counts as a diverged step.
          loss_value = std::numeric_limits<double>::quiet_NaN();
        }
        if (!std::isfinite(loss_value)) {
          aborted = true;
          break;
        }
        batch_loss += loss_value;
        epoch_loss_sum += loss_value;
        ++epoch_samples;
      }
      if (aborted) break;

      const double inv = 1.0 / static_cast<double>(stop - start);
      for (double& g : grads) g *= inv;
      // Near-degenerate eigenvalue gaps or root clusters occasionally spike
      // the batch gradient by orders of magnitude; clipping the global norm
      // keeps one bad batch from undoing the settled parameters.
      double sq = 0.0;
      for (double g : grads) sq += g * g;
      const double gnorm = std::sqrt(sq);
      if (gnorm > kGradClipNorm) {
        const double scale = kGradClipNorm / gnorm;
        for (double& g : grads) g *= scale;
      }
      adam_step(params, grads, adam, epoch_lr);
      assign_parameters(work, params);
      (void)batch_loss;
    }

    if (aborted) {
      if (halved)
        throw std::runtime_error(
            "train: non-finite loss recurred after halving the learning rate");
      params = params_snapshot;
      adam = adam_snapshot;
      assign_parameters(work, params);
      lr *= 0.5;
      halved = true;
      continue;  // rerun the same epoch with the smaller step
    }

    const double train_rmspe = epoch_loss_sum / static_cast<double>(std::max<long>(epoch_samples, 1));
    const double val_rmspe = validation_rmspe(work, dataset, val_idx, hp.m_known);
    result.report.train_rmspe.push_back(train_rmspe);
    result.report.val_rmspe.push_back(val_rmspe);
    result.report.gap_clamps.push_back(gap_clamps);
    result.report.root_warnings.push_back(root_warnings);
    if (val_rmspe < result.report.best_val_rmspe) {
      result.report.best_val_rmspe = val_rmspe;
      result.report.best_epoch = epoch;
      best_params = params;
    }
    if (epoch_log) {
      char line[160];
      std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%ld,%ld\n", epoch, train_rmspe,
                    val_rmspe, gap_clamps, root_warnings);
      (*epoch_log) << line;
      epoch_log->flush();
    }
    ++epoch;
  }

  assign_parameters(result.model, best_params);
  result.model.epochs_trained = static_cast<std::uint32_t>(result.report.train_rmspe.size());
  result.model.train_loss_history = result.report.train_rmspe;
  result.model.val_loss_history = result.report.val_rmspe;
  return result;
}

EvalStats evaluate(const SurrogateModel& model, ClassicEstimator estimator,
                   const Dataset& dataset, bool m_known) {
  if (dataset.empty()) throw std::invalid_argument("evaluate: dataset is empty");
  const int n = model.num_sensors;
  ArrayGeometry geometry = ArrayGeometry::nominal(n);

  double sum = 0.0;
  double sum_sq = 0.0;
  long trials = 0;
  for (const DatasetSample& sample : dataset) {
    if (static_cast<int>(sample.snapshots.rows()) != n)
      throw std::invalid_argument("evaluate: dataset sensor count does not match the model");
    const int m_true = static_cast<int>(sample.thetas_rad.size());
    CovarianceLike cov = surrogate_covariance(model, sample.snapshots);
    std::optional<int> m_opt;
    if (m_known) m_opt = m_true;

    DoaEstimate est;
    switch (estimator) {
      case ClassicEstimator::kMusic: {
        SubspaceDecomposition dec = decompose(cov, m_opt);
        est = music_doa(music_spectrum(dec, geometry), dec.num_sources_est);
        break;
      }
      case ClassicEstimator::kRootMusic: {
        SubspaceDecomposition dec = decompose(cov, m_opt);
        est = rootmusic_doa(dec, dec.num_sources_est).first;
        break;
      }
      case ClassicEstimator::kEsprit: {
        int m_hat = m_opt ? *m_opt : decompose(cov).num_sources_est;
        est = esprit_doa(cov, std::min(m_hat, n - 2));
        break;
      }
      case ClassicEstimator::kMvdr: {
        int m_hat = m_opt ? *m_opt : decompose(cov).num_sources_est;
        est = music_doa(mvdr_beampattern(cov, geometry), m_hat);
        break;
      }
    }
    const double r = rmspe_value(sample.thetas_rad, est.angles_rad);
    sum += r;
    sum_sq += r * r;
    ++trials;
  }

  EvalStats stats;
  stats.trials = trials;
  stats.rmspe_mean = sum / static_cast<double>(trials);
  if (trials > 1) {
    const double var =
        (sum_sq - sum * sum / static_cast<double>(trials)) / static_cast<double>(trials - 1);
    stats.rmspe_std = std::sqrt(std::max(var, 0.0));
  }
  return stats;
}

}  // namespace doa
