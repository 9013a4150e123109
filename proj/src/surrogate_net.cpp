#include "doa/surrogate_net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include "doa/rng.hpp"

namespace doa {

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'S', 'N', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<int> weight_shape(const LayerSpec& layer) {
  if (layer.kind == LayerSpec::kConv)
    return {layer.out_channels, layer.in_channels, layer.kernel, layer.kernel};
  return {layer.in_channels, layer.out_channels, layer.kernel, layer.kernel};
}

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw std::runtime_error("truncated checkpoint file");
  return value;
}

void write_doubles(std::ostream& out, const std::vector<double>& values) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(values.size()));
  if (!values.empty())
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::istream& in) {
  auto count = read_pod<std::uint32_t>(in);
  std::vector<double> values(count);
  if (count > 0) {
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated checkpoint file");
  }
  return values;
}

}  // namespace

std::vector<LayerSpec> surrogate_layer_plan(int num_lags) {
  if (num_lags < 1) throw std::invalid_argument("layer plan needs at least one input channel");
  // After every stage but the last the activation doubles the channel count,
  // so each in_channels below is twice the previous out_channels.
  std::vector<LayerSpec> plan(6);
  plan[0] = {LayerSpec::kConv, num_lags, 16, 2};
  plan[1] = {LayerSpec::kConv, 32, 32, 2};
  plan[2] = {LayerSpec::kConv, 64, 64, 2};
  plan[3] = {LayerSpec::kDeconv, 128, 32, 2};
  plan[4] = {LayerSpec::kDeconv, 64, 16, 2};
  plan[5] = {LayerSpec::kDeconv, 32, 1, 2};
  return plan;
}

SurrogateModel make_surrogate_model(int num_sensors, int num_lags, double epsilon,
                                    std::uint64_t init_seed) {
  if (num_sensors < 4)
    throw std::invalid_argument(
        "surrogate model needs at least 4 sensors for the three 2x2 stages");
  if (num_lags < 1) throw std::invalid_argument("surrogate model needs num_lags >= 1");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");

  SurrogateModel model;
  model.num_sensors = num_sensors;
  model.num_lags = num_lags;
  model.epsilon = epsilon;
  model.layers = surrogate_layer_plan(num_lags);

  std::mt19937_64 rng = make_rng(mix_seed(init_seed, 3));
  for (const LayerSpec& layer : model.layers) {
    // Variance-preserving uniform fan-in bound: the doubling activation is
    // energy-conserving, so sqrt(3 / fan_in) keeps activation scale flat
    // through the stack. Biases start at zero so the initial output plane is
    // data-driven rather than a constant (a constant plane collapses the
    // surrogate to rank one and flattens the loss landscape).
    double bound = std::sqrt(
        3.0 / (static_cast<double>(layer.in_channels) * layer.kernel * layer.kernel));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    Tensor weight = Tensor::zeros(weight_shape(layer));
    for (double& x : weight.data) x = uniform(rng);
    model.weights.push_back(std::move(weight));
    model.weights.push_back(Tensor::zeros({layer.out_channels}));
  }
  return model;
}

long parameter_count(const SurrogateModel& model) {
  long total = 0;
  for (const Tensor& t : model.weights) total += t.numel();
  return total;
}

Tensor extract_features(const Eigen::MatrixXcd& snapshots, int num_lags) {
  int n = static_cast<int>(snapshots.rows());
  int t = static_cast<int>(snapshots.cols());
  if (n < 1 || t < 1) throw std::invalid_argument("feature extraction needs a nonempty block");
  if (num_lags < 1) throw std::invalid_argument("feature extraction needs num_lags >= 1");

  int active = std::min(num_lags, t);
  AutocorrTensor ac = lagged_autocorrelation(snapshots, active - 1);
  double trace = ac.lags[0].real().trace();
  double scale = 1.0 / std::max(trace, 1e-30);

  Tensor out = Tensor::zeros({num_lags, 2 * n, n});
  for (int tau = 0; tau < active; ++tau) {
    const Eigen::MatrixXcd& slice = ac.lags[static_cast<size_t>(tau)];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        out.data[static_cast<size_t>((tau * 2 * n + i) * n + j)] = scale * slice(i, j).real();
        out.data[static_cast<size_t>((tau * 2 * n + n + i) * n + j)] =
            scale * slice(i, j).imag();
      }
  }
  return out;
}

std::vector<Var> stage_weights(Tape& tape, const SurrogateModel& model, bool trainable) {
  std::vector<Var> staged;
  staged.reserve(model.weights.size());
  for (const Tensor& w : model.weights) staged.push_back(tape.input(w, trainable));
  return staged;
}

CVar surrogate_forward(Tape& tape, const SurrogateModel& model,
                       const std::vector<Var>& staged_weights, Var features) {
  if (staged_weights.size() != model.weights.size())
    throw std::invalid_argument("staged weight count does not match the model");
  const Tensor& fv = tape.value(features);
  int n = model.num_sensors;
  if (fv.shape != std::vector<int>{model.num_lags, 2 * n, n})
    throw std::invalid_argument("feature tensor shape does not match the model");

  Var x = features;
  for (size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& layer = model.layers[i];
    Var w = staged_weights[2 * i];
    Var b = staged_weights[2 * i + 1];
    x = layer.kind == LayerSpec::kConv ? tape.conv2d(x, w, b) : tape.deconv2d(x, w, b);
    if (i + 1 < model.layers.size()) x = tape.arelu(x);
  }
  Var plane = tape.reshape(x, {2 * n, n});
  CVar k{tape.slice_rows(plane, 0, n), tape.slice_rows(plane, n, n)};
  return hermitian_gram(tape, k, model.epsilon);
}

CovarianceLike surrogate_covariance(const SurrogateModel& model,
                                    const Eigen::MatrixXcd& snapshots) {
  if (static_cast<int>(snapshots.rows()) != model.num_sensors)
    throw std::invalid_argument("snapshot sensor count does not match the model");
  Tape tape;
  Var features = tape.constant(extract_features(snapshots, model.num_lags));
  std::vector<Var> staged = stage_weights(tape, model, false);
  CVar cov = surrogate_forward(tape, model, staged, features);
  Eigen::MatrixXcd m = matrix_from_tensors(tape.value(cov.re), tape.value(cov.im));
  CovarianceLike out;
  out.matrix = 0.5 * (m + m.adjoint().eval());
  out.provenance = CovProvenance::kSurrogate;
  return out;
}

std::vector<double> flatten_parameters(const SurrogateModel& model) {
  std::vector<double> flat;
  flat.reserve(static_cast<size_t>(parameter_count(model)));
  for (const Tensor& t : model.weights)
    flat.insert(flat.end(), t.data.begin(), t.data.end());
  return flat;
}

void assign_parameters(SurrogateModel& model, const std::vector<double>& flat) {
  if (static_cast<long>(flat.size()) != parameter_count(model))
    throw std::invalid_argument("flat parameter vector has the wrong length");
  size_t offset = 0;
  for (Tensor& t : model.weights) {
    std::copy(flat.begin() + static_cast<long>(offset),
              flat.begin() + static_cast<long>(offset + t.data.size()), t.data.begin());
    offset += t.data.size();
  }
}

void save_checkpoint(const SurrogateModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint file for writing: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_pod<std::uint32_t>(out, kCheckpointVersion);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(model.num_sensors));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(model.num_lags));
  write_pod<double>(out, model.epsilon);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(model.layers.size()));
  for (const LayerSpec& layer : model.layers) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(layer.kind));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(layer.in_channels));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(layer.out_channels));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(layer.kernel));
  }
  write_pod<std::uint32_t>(out, model.epochs_trained);
  write_doubles(out, model.train_loss_history);
  write_doubles(out, model.val_loss_history);
  for (const Tensor& t : model.weights)
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  if (!out) throw std::runtime_error("failed writing checkpoint file: " + path);
}

SurrogateModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint file: " + path);
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw std::runtime_error("not a checkpoint file (bad magic): " + path);
  auto version = read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  auto num_sensors = read_pod<std::uint32_t>(in);
  auto num_lags = read_pod<std::uint32_t>(in);
  auto epsilon = read_pod<double>(in);
  if (num_sensors < 4 || num_lags < 1 || !(epsilon > 0.0))
    throw std::runtime_error("checkpoint header is malformed: " + path);

  SurrogateModel model;
  model.num_sensors = static_cast<int>(num_sensors);
  model.num_lags = static_cast<int>(num_lags);
  model.epsilon = epsilon;

  auto layer_count = read_pod<std::uint32_t>(in);
  std::vector<LayerSpec> expected = surrogate_layer_plan(model.num_lags);
  if (layer_count != expected.size())
    throw std::runtime_error("checkpoint layer table does not match this build: " + path);
  for (std::uint32_t i = 0; i < layer_count; ++i) {
    LayerSpec layer;
    layer.kind = static_cast<LayerSpec::Kind>(read_pod<std::uint32_t>(in));
    layer.in_channels = static_cast<int>(read_pod<std::uint32_t>(in));
    layer.out_channels = static_cast<int>(read_pod<std::uint32_t>(in));
    layer.kernel = static_cast<int>(read_pod<std::uint32_t>(in));
    const LayerSpec& want = expected[i];
    if (layer.kind != want.kind || layer.in_channels != want.in_channels ||
        layer.out_channels != want.out_channels || layer.kernel != want.kernel)
      throw std::runtime_error("checkpoint layer table does not match this build: " + path);
    model.layers.push_back(layer);
  }

  model.epochs_trained = read_pod<std::uint32_t>(in);
  model.train_loss_history = read_doubles(in);
  model.val_loss_history = read_doubles(in);

  for (const LayerSpec& layer : model.layers) {
    Tensor weight = Tensor::zeros(weight_shape(layer));
    in.read(reinterpret_cast<char*>(weight.data.data()),
            static_cast<std::streamsize>(weight.data.size() * sizeof(double)));
    Tensor bias = Tensor::zeros({layer.out_channels});
    in.read(reinterpret_cast<char*>(bias.data.data()),
            static_cast<std::streamsize>(bias.data.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated checkpoint file");
    model.weights.push_back(std::move(weight));
    model.weights.push_back(std::move(bias));
  }
  return model;
}

}  // namespace doa
