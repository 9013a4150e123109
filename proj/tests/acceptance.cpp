// Acceptance gate: ten scripted checks covering analytic correctness,
// gradient fidelity, invariants, benchmark trends, training outcomes, and
// determinism. Each criterion prints exactly one PASS/FAIL line; the binary
// exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doa/bench.hpp"
#include "doa/covariance_ops.hpp"
#include "doa/rng.hpp"
#include "doa/signal_sim.hpp"
#include "doa/subspace_estimators.hpp"
#include "doa/surrogate_net.hpp"
#include "doa/trainer.hpp"
#include "grad_checks.hpp"

using namespace doa;

namespace {

constexpr double kDeg = 0.017453292519943295;
constexpr double kGridCell = 0.5 * kDeg;

// Desk-scale training knobs, calibrated on this single-core box. Small
// batches buy update count — the binding constraint at 5000-sample scale —
// and 50 epochs stays inside both the epoch allowance and the runtime budget.
constexpr int kEpochsNarrowband = 50;
constexpr int kEpochsFewSnapshot = 50;
constexpr int kEpochsBroadband = 50;
constexpr int kTrainBatch = 8;
constexpr double kTrainLr = 1e-3;
constexpr std::uint64_t kTrainSeed = 20260819ULL;

const std::string kOutDir = "acceptance_out";

int g_failures = 0;
int g_run = 0;
std::set<int> g_selected;  // empty = run everything

void report(int id, const std::string& label, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", id, label.c_str(),
              detail.c_str());
  std::fflush(stdout);
  ++g_run;
  if (!pass) ++g_failures;
}

void run_criterion(int id, const std::string& label,
                   const std::function<std::pair<bool, std::string>()>& body) {
  if (!g_selected.empty() && g_selected.count(id) == 0) return;
  try {
    auto [pass, detail] = body();
    report(id, label, pass, detail);
  } catch (const std::exception& e) {
    report(id, label, false, std::string("exception: ") + e.what());
  }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CovarianceLike analytic_covariance(int n, const std::vector<double>& thetas, double sigma2) {
  const Eigen::MatrixXcd a = steering_matrix(ArrayGeometry::nominal(n), thetas);
  CovarianceLike cov;
  cov.matrix = a * a.adjoint() + sigma2 * Eigen::MatrixXcd::Identity(n, n);
  cov.matrix = 0.5 * (cov.matrix + cov.matrix.adjoint());
  return cov;
}

enum class Route { kNone, kSps };

// Classic estimator on a dataset: empirical or smoothed covariance, true
// source count supplied, mean RMSPE across samples.
double classic_mean(const Dataset& ds, ClassicEstimator which, Route route) {
  double sum = 0.0;
  for (const DatasetSample& sample : ds) {
    const int n = static_cast<int>(sample.snapshots.rows());
    const int m_true = static_cast<int>(sample.thetas_rad.size());
    CovarianceLike cov;
    ArrayGeometry geometry = ArrayGeometry::nominal(n);
    if (route == Route::kSps) {
      // Forward-backward smoothed subarrays: the strongest classical
      // decorrelator for coherent sources, so the trained models are compared
      // against the hardest honest baseline.
      const int subarray = n / 2 + 1;
      cov = forward_backward(spatial_smoothing(sample.snapshots, subarray));
      geometry = ArrayGeometry::nominal(subarray);
    } else {
      cov = empirical_covariance(sample.snapshots);
    }
    const int rows = static_cast<int>(cov.matrix.rows());
    const int m_hat = std::min(m_true, rows - 1);
    DoaEstimate est;
    switch (which) {
      case ClassicEstimator::kMusic: {
        SubspaceDecomposition dec = decompose(cov, m_hat);
        est = music_doa(music_spectrum(dec, geometry), m_hat);
        break;
      }
      case ClassicEstimator::kRootMusic: {
        SubspaceDecomposition dec = decompose(cov, m_hat);
        est = rootmusic_doa(dec, m_hat).first;
        break;
      }
      case ClassicEstimator::kEsprit:
        est = esprit_doa(cov, std::min(m_hat, rows - 2));
        break;
      case ClassicEstimator::kMvdr: {
        est = music_doa(mvdr_beampattern(cov, geometry), m_hat);
        break;
      }
    }
    sum += rmspe_value(sample.thetas_rad, est.angles_rad);
  }
  return sum / static_cast<double>(ds.size());
}

Scenario narrowband_scenario(bool coherent, int snapshots, double snr_db,
                             std::uint64_t seed) {
  Scenario sc;
  sc.geometry = ArrayGeometry::nominal(8);
  sc.num_sources = 2;
  sc.num_snapshots = snapshots;
  sc.snr_db = snr_db;
  sc.coherence = coherent ? Coherence::kFullyCoherent : Coherence::kNonCoherent;
  sc.rng_seed = seed;
  return sc;
}

// OFDM wideband scenario; snr_db is stated relative to unit signal power, and
// the multicarrier source rows carry power 1/L, so an effective per-source
// snr of about 10 dB needs 10 + 10*log10(L) here.
Scenario broadband_scenario(std::uint64_t seed) {
  Scenario sc;
  sc.geometry = ArrayGeometry::nominal(8);
  sc.num_sources = 2;
  sc.num_snapshots = 200;
  sc.snr_db = 10.0 + 10.0 * std::log10(500.0);
  sc.coherence = Coherence::kFullyCoherent;
  sc.kind = SignalKind::kOfdm;
  sc.ofdm.num_subcarriers = 500;
  sc.ofdm.bandwidth_hz = 500.0;
  sc.ofdm.sample_rate_hz = 200.0;
  sc.rng_seed = seed;
  return sc;
}

// Trained artifacts shared across criteria.
std::optional<SurrogateModel> g_narrowband_model;
Dataset g_narrowband_val;  // held-out slice used by criteria 5 and 6

}  // namespace

int main(int argc, char** argv) {
  // Optional criterion ids on the command line restrict the run (dev tool for
  // iterating on one criterion without re-running the trainings).
  for (int i = 1; i < argc; ++i) g_selected.insert(std::atoi(argv[i]));
  std::filesystem::create_directories(kOutDir);

  run_criterion(1, "analytic oracles, root/rotation exact and noise floor flat", [] {
    const std::vector<double> all_thetas = {-19.7 * kDeg, 5.3 * kDeg, 34.9 * kDeg};
    double worst_rm = 0.0, worst_es = 0.0, worst_mu = 0.0, worst_eig = 0.0;
    for (double sigma2 : {0.1, 1.0}) {
      for (int m = 1; m <= 3; ++m) {
        const std::vector<double> thetas(all_thetas.begin(), all_thetas.begin() + m);
        CovarianceLike cov = analytic_covariance(8, thetas, sigma2);
        SubspaceDecomposition dec = decompose(cov, m);
        for (int i = m; i < 8; ++i)
          worst_eig = std::max(worst_eig, std::abs(dec.eigenvalues(i) - sigma2));

        DoaEstimate rm = rootmusic_doa(dec, m).first;
        DoaEstimate es = esprit_doa(cov, m);
        DoaEstimate mu = music_doa(music_spectrum(dec, ArrayGeometry::nominal(8)), m);
        for (int i = 0; i < m; ++i) {
          worst_rm = std::max(worst_rm, std::abs(rm.angles_rad[i] - thetas[i]));
          worst_es = std::max(worst_es, std::abs(es.angles_rad[i] - thetas[i]));
          worst_mu = std::max(worst_mu, std::abs(mu.angles_rad[i] - thetas[i]));
        }
      }
    }
    const bool pass = worst_rm < 1e-8 && worst_es < 1e-8 &&
                      worst_mu <= kGridCell + 1e-12 && worst_eig < 1e-10;
    return std::make_pair(
        pass, fmt("max err: rootmusic %.2e, esprit %.2e, music %.2e rad, noise eig %.2e",
                  worst_rm, worst_es, worst_mu, worst_eig));
  });

  run_criterion(2, "gradient suite vs central differences", [] {
    const auto start = std::chrono::steady_clock::now();
    doa_testing::FdReport prim = doa_testing::fd_primitives(10);
    doa_testing::FdReport eig = doa_testing::fd_eigh(10);
    doa_testing::FdReport roots = doa_testing::fd_polyroots(10);
    doa_testing::FdReport pipe = doa_testing::fd_end_to_end(10);
    const double wall = seconds_since(start);
    const bool pass = prim.max_rel < 1e-4 && eig.max_rel < 1e-4 && roots.max_rel < 1e-4 &&
                      pipe.max_rel < 1e-3 && wall < 60.0;
    return std::make_pair(
        pass, fmt("rel err: primitives %.2e, eigh %.2e, polyroots %.2e, end-to-end %.2e; "
                  "%.1f s",
                  prim.max_rel, eig.max_rel, roots.max_rel, pipe.max_rel, wall));
  });

  run_criterion(3, "invariant suite", [] {
    const auto start = std::chrono::steady_clock::now();
    std::string failure;

    // Hermitian / PSD across producers, spectral floor for the surrogate.
    SurrogateModel model = make_surrogate_model(8, 8, 1.0, 3);
    for (std::uint64_t seed = 0; seed < 3 && failure.empty(); ++seed) {
      std::mt19937_64 rng = make_rng(seed);
      Eigen::MatrixXcd x(8, 20);
      for (int j = 0; j < 20; ++j)
        for (int i = 0; i < 8; ++i) x(i, j) = complex_gaussian(rng, 1.0);
      const CovarianceLike candidates[] = {
          empirical_covariance(x), spatial_smoothing(x, 5),
          forward_backward(empirical_covariance(x)), surrogate_covariance(model, x)};
      for (const CovarianceLike& cov : candidates) {
        if ((cov.matrix - cov.matrix.adjoint()).norm() != 0.0) failure = "hermitian storage";
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(cov.matrix);
        if (es.eigenvalues().minCoeff() < -1e-10) failure = "positive semidefiniteness";
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> floor_check(
          surrogate_covariance(model, x).matrix);
      if (floor_check.eigenvalues().minCoeff() < 1.0 - 1e-9)
        failure = "surrogate spectral floor";
    }

    // rmspe loss properties
    if (failure.empty()) {
      std::mt19937_64 rng = make_rng(99);
      std::uniform_real_distribution<double> u(-1.5, 1.5);
      for (int round = 0; round < 10 && failure.empty(); ++round) {
        std::vector<double> truth = {u(rng), u(rng)};
        std::vector<double> pred = {u(rng), u(rng)};
        const double base = rmspe_value(truth, pred);
        if (std::abs(rmspe_value(truth, {pred[1], pred[0]}) - base) > 1e-12)
          failure = "rmspe permutation invariance";
        std::vector<double> lifted = {pred[0] + 3.141592653589793, pred[1]};
        if (std::abs(rmspe_value(truth, lifted) - base) > 1e-9)
          failure = "rmspe pi-periodicity";
        if (rmspe_value(truth, truth) != 0.0) failure = "rmspe zero at truth";
        if (base < 0.0) failure = "rmspe nonnegativity";
      }
    }

    // scale invariance of the estimators
    if (failure.empty()) {
      CovarianceLike cov = analytic_covariance(8, {-0.35, 0.25}, 0.2);
      CovarianceLike scaled;
      scaled.matrix = 5.7 * cov.matrix;
      SubspaceDecomposition d1 = decompose(cov, 2);
      SubspaceDecomposition d2 = decompose(scaled, 2);
      const ArrayGeometry g = ArrayGeometry::nominal(8);
      DoaEstimate m1 = music_doa(music_spectrum(d1, g), 2);
      DoaEstimate m2 = music_doa(music_spectrum(d2, g), 2);
      if (m1.angles_rad != m2.angles_rad) failure = "music scale invariance";
      auto r1 = rootmusic_doa(d1, 2).first.angles_rad;
      auto r2 = rootmusic_doa(d2, 2).first.angles_rad;
      auto e1 = esprit_doa(cov, 2).angles_rad;
      auto e2 = esprit_doa(scaled, 2).angles_rad;
      for (int i = 0; i < 2; ++i) {
        if (std::abs(r1[i] - r2[i]) > 1e-9) failure = "rootmusic scale invariance";
        if (std::abs(e1[i] - e2[i]) > 1e-9) failure = "esprit scale invariance";
      }
      DoaEstimate v1 = music_doa(mvdr_beampattern(cov, g), 2);
      DoaEstimate v2 = music_doa(mvdr_beampattern(scaled, g), 2);
      if (v1.angles_rad != v2.angles_rad) failure = "mvdr scale invariance";
    }

    // feature shape independence from the snapshot count
    if (failure.empty()) {
      std::mt19937_64 rng = make_rng(4);
      auto snapshots = [&rng](int t) {
        Eigen::MatrixXcd x(8, t);
        for (int j = 0; j < t; ++j)
          for (int i = 0; i < 8; ++i) x(i, j) = complex_gaussian(rng, 1.0);
        return x;
      };
      const std::vector<int> want = {8, 16, 8};
      for (int t : {2, 5, 100})
        if (extract_features(snapshots(t), 8).shape != want)
          failure = "feature shape independence";
    }

    const double wall = seconds_since(start);
    const bool pass = failure.empty() && wall < 60.0;
    return std::make_pair(pass, failure.empty() ? fmt("all invariants hold; %.1f s", wall)
                                                : ("violated: " + failure));
  });

  run_criterion(4, "classic baseline trends at 1000 trials", [] {
    const auto start = std::chrono::steady_clock::now();
    const int trials = 1000;

    Scenario nc = narrowband_scenario(false, 100, 10.0, 101);
    double music_sum = 0.0, rm_sum = 0.0, es_sum = 0.0;
    for (int t = 0; t < trials; ++t) {
      const DatasetSample s = generate_sample(nc, static_cast<std::uint64_t>(t));
      Dataset one = {s};
      music_sum += classic_mean(one, ClassicEstimator::kMusic, Route::kNone);
      rm_sum += classic_mean(one, ClassicEstimator::kRootMusic, Route::kNone);
      es_sum += classic_mean(one, ClassicEstimator::kEsprit, Route::kNone);
    }
    const double music_nc = music_sum / trials;
    const double rm_nc = rm_sum / trials;
    const double es_nc = es_sum / trials;

    Scenario coh = narrowband_scenario(true, 100, 10.0, 102);
    double rm_coh_sum = 0.0, sps_sum = 0.0;
    for (int t = 0; t < trials; ++t) {
      const DatasetSample s = generate_sample(coh, static_cast<std::uint64_t>(t));
      Dataset one = {s};
      rm_coh_sum += classic_mean(one, ClassicEstimator::kRootMusic, Route::kNone);
      sps_sum += classic_mean(one, ClassicEstimator::kRootMusic, Route::kSps);
    }
    const double rm_coh = rm_coh_sum / trials;
    const double sps_coh = sps_sum / trials;

    const double wall = seconds_since(start);
    const bool pass = music_nc < 0.02 && rm_nc < 0.02 && es_nc < 0.02 && rm_coh >= 0.1 &&
                      rm_coh <= 0.35 && sps_coh < 0.05 && wall < 300.0;
    return std::make_pair(
        pass,
        fmt("non-coherent music %.4f rm %.4f esprit %.4f; coherent rm %.4f sps-rm %.4f; "
            "%.0f s",
            music_nc, rm_nc, es_nc, rm_coh, sps_coh, wall));
  });

  run_criterion(5, "surrogate training beats spatial smoothing", [] {
    Scenario sc = narrowband_scenario(true, 100, 10.0, kTrainSeed);
    Dataset ds = generate_dataset(sc, 5000);

    Hyperparameters hp;
    hp.learning_rate = kTrainLr;
    hp.batch_size = kTrainBatch;
    hp.max_epochs = kEpochsNarrowband;
    hp.seed = kTrainSeed;

    SurrogateModel initial = make_surrogate_model(8, 8, 1.0, kTrainSeed);
    std::ofstream log(kOutDir + "/train_log_narrowband.csv");
    log << "epoch,train_rmspe,val_rmspe,gap_clamps,root_warnings\n";

    const auto start = std::chrono::steady_clock::now();
    TrainResult result = train(ds, hp, initial, &log);
    const double wall = seconds_since(start);

    save_checkpoint(result.model, kOutDir + "/ssn_narrowband.ssn");
    g_narrowband_model = result.model;
    g_narrowband_val.assign(ds.end() - 500, ds.end());

    const double ssn_rm =
        evaluate(*g_narrowband_model, ClassicEstimator::kRootMusic, g_narrowband_val)
            .rmspe_mean;
    const double sps_rm =
        classic_mean(g_narrowband_val, ClassicEstimator::kRootMusic, Route::kSps);

    const bool pass =
        ssn_rm < 0.02 && ssn_rm < sps_rm && hp.max_epochs <= 50 && wall <= 1800.0;
    return std::make_pair(
        pass, fmt("ssn+rm %.5f vs sps-rm %.5f on 500 held-out samples; %d epochs, %.0f s "
                  "(best epoch %d)",
                  ssn_rm, sps_rm, hp.max_epochs, wall, result.report.best_epoch));
  });

  run_criterion(6, "checkpoint plugs into music and esprit", [] {
    if (!g_narrowband_model) return std::make_pair(false, std::string("no checkpoint"));
    const auto start = std::chrono::steady_clock::now();
    const double ssn_music =
        evaluate(*g_narrowband_model, ClassicEstimator::kMusic, g_narrowband_val).rmspe_mean;
    const double ssn_esprit =
        evaluate(*g_narrowband_model, ClassicEstimator::kEsprit, g_narrowband_val).rmspe_mean;
    const double classic_music =
        classic_mean(g_narrowband_val, ClassicEstimator::kMusic, Route::kNone);
    const double classic_esprit =
        classic_mean(g_narrowband_val, ClassicEstimator::kEsprit, Route::kNone);
    const double wall = seconds_since(start);
    const bool pass = ssn_music < 0.1 && ssn_esprit < 0.1 && ssn_music < classic_music &&
                      ssn_esprit < classic_esprit && wall < 300.0;
    return std::make_pair(
        pass, fmt("ssn+music %.4f (classic %.4f), ssn+esprit %.4f (classic %.4f); %.0f s",
                  ssn_music, classic_music, ssn_esprit, classic_esprit, wall));
  });

  run_criterion(7, "few-snapshot regime, T = 2", [] {
    Scenario sc = narrowband_scenario(true, 2, 5.0, kTrainSeed + 7);
    Dataset ds = generate_dataset(sc, 5000);

    Hyperparameters hp;
    hp.learning_rate = kTrainLr;
    hp.batch_size = kTrainBatch;
    hp.max_epochs = kEpochsFewSnapshot;
    hp.seed = kTrainSeed + 7;

    SurrogateModel initial = make_surrogate_model(8, 2, 1.0, kTrainSeed + 7);
    std::ofstream log(kOutDir + "/train_log_t2.csv");
    log << "epoch,train_rmspe,val_rmspe,gap_clamps,root_warnings\n";
    const auto start = std::chrono::steady_clock::now();
    TrainResult result = train(ds, hp, initial, &log);
    const double wall = seconds_since(start);
    save_checkpoint(result.model, kOutDir + "/ssn_t2.ssn");

    Scenario test_sc = sc;
    test_sc.rng_seed = kTrainSeed + 77;
    Dataset test = generate_dataset(test_sc, 1000);
    const double ssn_rm =
        evaluate(result.model, ClassicEstimator::kRootMusic, test).rmspe_mean;
    const double classic_rm = classic_mean(test, ClassicEstimator::kRootMusic, Route::kNone);

    const bool pass = ssn_rm < 0.15 && classic_rm > 0.3;
    return std::make_pair(
        pass, fmt("ssn+rm %.4f vs classic rm %.4f on 1000 trials; train %.0f s", ssn_rm,
                  classic_rm, wall));
  });

  run_criterion(8, "broadband ordering: ssn+music < binned music < narrowband music", [] {
    Scenario eval_sc = broadband_scenario(kTrainSeed + 8);
    Dataset test = generate_dataset(eval_sc, 1000);

    const double nb_music = classic_mean(test, ClassicEstimator::kMusic, Route::kNone);
    double bb_sum = 0.0;
    for (const DatasetSample& s : test) {
      DoaEstimate est = broadband_music(s.snapshots, 2, 50, 200.0, 500.0);
      bb_sum += rmspe_value(s.thetas_rad, est.angles_rad);
    }
    const double bb_music = bb_sum / static_cast<double>(test.size());

    Scenario train_sc = broadband_scenario(kTrainSeed + 88);
    Dataset ds = generate_dataset(train_sc, 5000);
    Hyperparameters hp;
    hp.learning_rate = kTrainLr;
    hp.batch_size = kTrainBatch;
    hp.max_epochs = kEpochsBroadband;
    hp.seed = kTrainSeed + 88;
    SurrogateModel initial = make_surrogate_model(8, 8, 1.0, kTrainSeed + 88);
    std::ofstream log(kOutDir + "/train_log_broadband.csv");
    log << "epoch,train_rmspe,val_rmspe,gap_clamps,root_warnings\n";
    const auto start = std::chrono::steady_clock::now();
    TrainResult result = train(ds, hp, initial, &log);
    const double wall = seconds_since(start);
    save_checkpoint(result.model, kOutDir + "/ssn_broadband.ssn");

    const double ssn_music =
        evaluate(result.model, ClassicEstimator::kMusic, test).rmspe_mean;

    const bool pass = bb_music < nb_music && ssn_music < bb_music;
    return std::make_pair(
        pass, fmt("narrowband music %.4f > binned music %.4f > ssn+music %.4f; train %.0f s",
                  nb_music, bb_music, ssn_music, wall));
  });

  run_criterion(9, "surrogate restores the coherent M = 3 eigenvalue gap", [] {
    if (!g_narrowband_model) return std::make_pair(false, std::string("no checkpoint"));
    Scenario sc = narrowband_scenario(true, 100, 10.0, kTrainSeed + 9);
    sc.num_sources = 3;
    sc.thetas_rad = {-0.6, 0.1, 0.7};
    const DatasetSample sample = generate_sample(sc, 0);

    auto ratio34 = [](const Eigen::MatrixXcd& r) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(r);
      const Eigen::VectorXd lam = es.eigenvalues();  // ascending
      const int n = static_cast<int>(lam.size());
      return lam(n - 3) / std::max(lam(n - 4), 1e-300);  // third over fourth largest
    };
    const double empirical = ratio34(empirical_covariance(sample.snapshots).matrix);
    const double surrogate =
        ratio34(surrogate_covariance(*g_narrowband_model, sample.snapshots).matrix);

    const bool pass = surrogate >= 5.0 * empirical;
    return std::make_pair(pass, fmt("lambda3/lambda4: surrogate %.3f vs empirical %.3f (x%.1f)",
                                    surrogate, empirical, surrogate / empirical));
  });

  run_criterion(10, "byte-identical reruns of train and eval", [] {
    // eval determinism through the benchmark front end
    RunConfig config = parse_config_text(
        "sensors = 8\nsources = 2\nsnapshots = 50\ntrials = 50\nseed = 5\n"
        "estimators = rootmusic, music\npreprocessing = none, sps\n"
        "sweep_axis = snr\nsweep_values = 0, 10\n");
    write_metrics_csv(run_sweep(config), kOutDir + "/metrics_a.csv");
    write_metrics_csv(run_sweep(config), kOutDir + "/metrics_b.csv");
    const bool eval_ok = slurp(kOutDir + "/metrics_a.csv") == slurp(kOutDir + "/metrics_b.csv") &&
                         !slurp(kOutDir + "/metrics_a.csv").empty();

    // training determinism at a reduced scale
    Scenario sc = narrowband_scenario(true, 25, 10.0, 5);
    Dataset ds = generate_dataset(sc, 64);
    Hyperparameters hp;
    hp.learning_rate = 1e-3;
    hp.batch_size = 16;
    hp.max_epochs = 2;
    hp.seed = 5;
    SurrogateModel initial = make_surrogate_model(8, 8, 1.0, 5);
    save_checkpoint(train(ds, hp, initial).model, kOutDir + "/ckpt_a.ssn");
    save_checkpoint(train(ds, hp, initial).model, kOutDir + "/ckpt_b.ssn");
    const bool train_ok =
        slurp(kOutDir + "/ckpt_a.ssn") == slurp(kOutDir + "/ckpt_b.ssn") &&
        !slurp(kOutDir + "/ckpt_a.ssn").empty();

    return std::make_pair(eval_ok && train_ok,
                          fmt("eval tables identical: %s; checkpoints identical: %s",
                              eval_ok ? "yes" : "no", train_ok ? "yes" : "no"));
  });

  std::printf("%d/%d criteria passed\n", g_run - g_failures,
              g_selected.empty() ? 10 : g_run);
  return g_failures == 0 ? 0 : 1;
}
