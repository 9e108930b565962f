#include "drgrade/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "drgrade/error.hpp"
#include "drgrade/gradcheck.hpp"
#include "drgrade/random.hpp"

namespace drgrade::ml {

void MlpConfig::validate() const {
  if (hidden_sizes.empty()) throw Error(Errc::ConfigError, "mlp hidden_sizes must be non-empty");
  for (int h : hidden_sizes) {
    if (h < 1) throw Error(Errc::ConfigError, "mlp hidden sizes must be >= 1");
  }
  if (!(learning_rate > 0.0)) throw Error(Errc::ConfigError, "mlp learning_rate must be > 0");
  if (epochs < 1) throw Error(Errc::ConfigError, "mlp epochs must be >= 1");
  if (batch_size < 1) throw Error(Errc::ConfigError, "mlp batch_size must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw Error(Errc::ConfigError, "adam betas must be in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw Error(Errc::ConfigError, "adam epsilon must be > 0");
}

std::size_t argmax(std::span<const double> values) noexcept {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

Mlp::Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw Error(Errc::InvalidArgument, "network needs input and output layers");
  for (int s : sizes_) {
    if (s < 1) throw Error(Errc::InvalidArgument, "layer sizes must be >= 1");
  }
  layout();
}

void Mlp::layout() {
  weight_offsets_.clear();
  bias_offsets_.clear();
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const auto in = static_cast<std::size_t>(sizes_[l]);
    const auto out = static_cast<std::size_t>(sizes_[l + 1]);
    weight_offsets_.push_back(offset);
    offset += in * out;
    bias_offsets_.push_back(offset);
    offset += out;
  }
  params_.assign(offset, 0.0);
}

Mlp Mlp::initialized(std::vector<int> layer_sizes, std::uint64_t seed) {
  Mlp net(std::move(layer_sizes));
  Rng rng(seed);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto in = static_cast<std::size_t>(net.sizes_[l]);
    const auto out = static_cast<std::size_t>(net.sizes_[l + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(in));
    double* w = net.params_.data() + net.weight_offsets_[l];
    for (std::size_t i = 0; i < in * out; ++i) w[i] = rng.uniform(-limit, limit);
  }
  return net;
}

namespace {

// Scratch buffers for one forward/backward pass.
struct Workspace {
  std::vector<std::vector<double>> pre;   // pre-activations per layer
  std::vector<std::vector<double>> post;  // activations (post[0] = input)
  std::vector<double> delta;
  std::vector<double> delta_prev;

  explicit Workspace(const std::vector<int>& sizes) {
    post.resize(sizes.size());
    pre.resize(sizes.size());
    for (std::size_t l = 0; l < sizes.size(); ++l) {
      post[l].assign(static_cast<std::size_t>(sizes[l]), 0.0);
      pre[l].assign(static_cast<std::size_t>(sizes[l]), 0.0);
    }
  }
};

// Stable log-sum-exp cross-entropy; fills `probs` with the softmax.
double softmax_xent(std::span<const double> logits, int label, std::vector<double>& probs) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  probs.resize(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) {
    probs[k] = std::exp(logits[k] - peak);
    sum += probs[k];
  }
  for (double& p : probs) p /= sum;
  return std::log(sum) + peak - logits[static_cast<std::size_t>(label)];
}

void check_label(int label, int n_out) {
  if (label < 0 || label >= n_out) {
    throw Error(Errc::OutOfRangeLabel, "label " + std::to_string(label) + " out of range");
  }
}


void forward(const std::vector<int>& sizes, const std::vector<double>& params,
             const std::vector<std::size_t>& w_off, const std::vector<std::size_t>& b_off,
             std::span<const double> x, Workspace& ws) {
  std::copy(x.begin(), x.end(), ws.post[0].begin());
  const std::size_t layers = sizes.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto in = static_cast<std::size_t>(sizes[l]);
    const auto out = static_cast<std::size_t>(sizes[l + 1]);
    const double* w = params.data() + w_off[l];
    const double* b = params.data() + b_off[l];
    const auto& a = ws.post[l];
    auto& z = ws.pre[l + 1];
    auto& h = ws.post[l + 1];
    const bool hidden = l + 1 < layers;
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b[o];
      const double* wrow = w + o * in;
      for (std::size_t i = 0; i < in; ++i) acc += wrow[i] * a[i];
      z[o] = acc;
      h[o] = hidden ? std::max(acc, 0.0) : acc;
    }
  }
}

}  // namespace

std::vector<double> Mlp::logits(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(sizes_.front())) {
    throw Error(Errc::SchemaMismatch, "input width does not match the network");
  }
  Workspace ws(sizes_);
  forward(sizes_, params_, weight_offsets_, bias_offsets_, x, ws);
  return ws.post.back();
}

std::vector<double> Mlp::probabilities(std::span<const double> x) const {
  auto z = logits(x);
  std::vector<double> p;
  softmax_xent(z, 0, p);
  return p;
}

int Mlp::predict(std::span<const double> x) const {
  const auto z = logits(x);
  return static_cast<int>(argmax(z));
}

double Mlp::loss(const Dataset& data, std::span<const std::size_t> batch) const {
  Workspace ws(sizes_);
  std::vector<double> probs;
  double total = 0.0;
  for (const auto idx : batch) {
    check_label(data.y[idx], sizes_.back());
    forward(sizes_, params_, weight_offsets_, bias_offsets_, data.row(idx), ws);
    total += softmax_xent(ws.post.back(), data.y[idx], probs);
  }
  return total;
}

double Mlp::loss_and_gradient(const Dataset& data, std::span<const std::size_t> batch,
                              std::span<double> grad) const {
  if (grad.size() != params_.size()) {
    throw Error(Errc::LengthMismatch, "gradient buffer size does not match parameters");
  }
  if (data.n_features != static_cast<std::size_t>(sizes_.front())) {
    throw Error(Errc::SchemaMismatch, "input width does not match the network");
  }
  std::fill(grad.begin(), grad.end(), 0.0);
  Workspace ws(sizes_);
  std::vector<double> probs;
  double total = 0.0;
  const std::size_t layers = num_layers();

  for (const auto idx : batch) {
    const int label = data.y[idx];
    check_label(label, sizes_.back());
    forward(sizes_, params_, weight_offsets_, bias_offsets_, data.row(idx), ws);
    total += softmax_xent(ws.post.back(), label, probs);

    ws.delta.assign(probs.begin(), probs.end());
    ws.delta[static_cast<std::size_t>(label)] -= 1.0;

    for (std::size_t l = layers; l-- > 0;) {
      const auto in = static_cast<std::size_t>(sizes_[l]);
      const auto out = static_cast<std::size_t>(sizes_[l + 1]);
      double* gw = grad.data() + weight_offsets_[l];
      double* gb = grad.data() + bias_offsets_[l];
      const auto& a = ws.post[l];
      for (std::size_t o = 0; o < out; ++o) {
        const double d = ws.delta[o];
        gb[o] += d;
        if (d == 0.0) continue;
        double* grow = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) grow[i] += d * a[i];
      }
      if (l == 0) break;
      const double* w = params_.data() + weight_offsets_[l];
      ws.delta_prev.assign(in, 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        const double d = ws.delta[o];
        if (d == 0.0) continue;
        const double* wrow = w + o * in;
        for (std::size_t i = 0; i < in; ++i) ws.delta_prev[i] += wrow[i] * d;
      }
      const auto& z = ws.pre[l];
      for (std::size_t i = 0; i < in; ++i) {
        if (!(z[i] > 0.0)) ws.delta_prev[i] = 0.0;
      }
      ws.delta.swap(ws.delta_prev);
    }
  }
  return total;
}

nlohmann::json Mlp::to_json() const {
  return {{"layer_sizes", sizes_}, {"params", params_}};
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  Mlp net(j.at("layer_sizes").get<std::vector<int>>());
  auto params = j.at("params").get<std::vector<double>>();
  if (params.size() != net.params_.size()) {
    throw Error(Errc::ParseError, "mlp parameter count does not match its layer sizes");
  }
  net.params_ = std::move(params);
  return net;
}

Mlp train_mlp(const Dataset& data, const MlpConfig& cfg) {
  cfg.validate();
  if (data.size() == 0) throw Error(Errc::EmptyTable, "cannot train on an empty table");

  std::vector<int> sizes{static_cast<int>(data.n_features)};
  sizes.insert(sizes.end(), cfg.hidden_sizes.begin(), cfg.hidden_sizes.end());
  sizes.push_back(3);

  Rng rng(cfg.seed);
  Mlp net = Mlp::initialized(sizes, rng.next_u64());
  AdamState state(net.params().size());
  const AdamConfig adam = cfg.adam();
  std::vector<double> grad(net.params().size());
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t len = std::min(batch_size, order.size() - start);
      const std::span<const std::size_t> batch(order.data() + start, len);
      const double loss = net.loss_and_gradient(data, batch, grad);
      if (!std::isfinite(loss)) {
        throw Error(Errc::NonFiniteLoss, "non-finite loss at epoch " + std::to_string(epoch) +
                                             ", batch starting at " + std::to_string(start));
      }
      const double scale = 1.0 / static_cast<double>(len);
      for (double& g : grad) g *= scale;
      adam_update(net.params(), grad, state, adam);
    }
  }
  return net;
}

double mlp_gradient_check(const Mlp& model, const Dataset& data,
                          std::span<const std::size_t> batch, std::uint64_t seed) {
  Mlp probe = model;
  const std::vector<std::size_t> rows(batch.begin(), batch.end());
  LossFunction fn = [&probe, &data, &rows](std::span<const double> params,
                                           std::span<double> grad) {
    std::copy(params.begin(), params.end(), probe.params().begin());
    if (grad.empty()) return probe.loss(data, rows);
    return probe.loss_and_gradient(data, rows, grad);
  };
  const auto p = model.params();
  return finite_difference_check(fn, {p.begin(), p.end()}, {200, 1e-5, seed});
}

}  // namespace drgrade::ml
