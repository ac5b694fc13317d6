#include "mep/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace mep {

namespace {

double activate(Activation a, double x) {
  switch (a) {
    case Activation::relu:
      return x > 0.0 ? x : 0.0;
    case Activation::tanh:
      return std::tanh(x);
    case Activation::identity:
      break;
  }
  return x;
}

// Derivative expressed through the post-activation value y.
double activate_grad(Activation a, double y) {
  switch (a) {
    case Activation::relu:
      return y > 0.0 ? 1.0 : 0.0;
    case Activation::tanh:
      return 1.0 - y * y;
    case Activation::identity:
      break;
  }
  return 1.0;
}

Activation layer_activation(const MlpParams& p, std::size_t layer) {
  return layer + 1 == p.num_layers() ? p.output_activation : p.hidden_activation;
}

}  // namespace

MlpParams MlpParams::zeros(std::vector<std::size_t> sizes, Activation hidden, Activation output) {
  require_shape(sizes.size() >= 2, "mlp needs at least an input and an output layer");
  for (auto s : sizes) require_shape(s > 0, "layer sizes must be positive");
  MlpParams p;
  p.layer_sizes = std::move(sizes);
  p.hidden_activation = hidden;
  p.output_activation = output;
  for (std::size_t l = 0; l + 1 < p.layer_sizes.size(); ++l) {
    p.weights.emplace_back(p.layer_sizes[l + 1], p.layer_sizes[l]);
    p.biases.emplace_back(p.layer_sizes[l + 1], 0.0);
  }
  return p;
}

MlpParams MlpParams::random(std::vector<std::size_t> sizes, Activation hidden, Activation output,
                            Rng& rng) {
  MlpParams p = zeros(std::move(sizes), hidden, output);
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.layer_sizes[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& w : p.weights[l].data) w = dist(rng);
    for (auto& b : p.biases[l]) b = dist(rng);
  }
  return p;
}

MlpParams MlpParams::zeros_like() const {
  return zeros(layer_sizes, hidden_activation, output_activation);
}

std::size_t MlpParams::num_parameters() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < num_layers(); ++l) n += weights[l].data.size() + biases[l].size();
  return n;
}

Vector MlpParams::flatten() const {
  Vector flat;
  flat.reserve(num_parameters());
  for (std::size_t l = 0; l < num_layers(); ++l) {
    flat.insert(flat.end(), weights[l].data.begin(), weights[l].data.end());
    flat.insert(flat.end(), biases[l].begin(), biases[l].end());
  }
  return flat;
}

void MlpParams::assign_flat(std::span<const double> flat) {
  require_shape(flat.size() == num_parameters(), "flat parameter vector has wrong length");
  std::size_t k = 0;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    for (auto& w : weights[l].data) w = flat[k++];
    for (auto& b : biases[l]) b = flat[k++];
  }
}

void MlpParams::validate() const {
  require_shape(layer_sizes.size() >= 2, "mlp needs at least two layer sizes");
  require_shape(weights.size() + 1 == layer_sizes.size() && biases.size() == weights.size(),
                "layer count does not match layer_sizes");
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const auto& w = weights[l];
    require_shape(w.rows == layer_sizes[l + 1] && w.cols == layer_sizes[l] &&
                      w.data.size() == w.rows * w.cols,
                  "weight matrix " + std::to_string(l) + " does not chain with layer_sizes");
    require_shape(biases[l].size() == layer_sizes[l + 1],
                  "bias " + std::to_string(l) + " has wrong length");
  }
  require_shape(all_finite(), "mlp parameters contain non-finite entries");
}

bool MlpParams::same_shape(const MlpParams& other) const {
  if (layer_sizes != other.layer_sizes || num_layers() != other.num_layers()) return false;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    if (weights[l].data.size() != other.weights[l].data.size()) return false;
    if (biases[l].size() != other.biases[l].size()) return false;
  }
  return true;
}

bool MlpParams::all_finite() const {
  auto finite = [](double v) { return std::isfinite(v); };
  for (std::size_t l = 0; l < num_layers(); ++l) {
    if (!std::all_of(weights[l].data.begin(), weights[l].data.end(), finite)) return false;
    if (!std::all_of(biases[l].begin(), biases[l].end(), finite)) return false;
  }
  return true;
}

Vector mlp_forward(const MlpParams& params, std::span<const double> input) {
  ForwardCache cache;
  return mlp_forward(params, input, cache);
}

Vector mlp_forward(const MlpParams& params, std::span<const double> input, ForwardCache& cache) {
  require_shape(!params.layer_sizes.empty() && input.size() == params.input_size(),
                "mlp input has length " + std::to_string(input.size()) + ", expected " +
                    std::to_string(params.layer_sizes.empty() ? 0 : params.input_size()));
  cache.activations.resize(params.num_layers() + 1);
  cache.activations[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    const Matrix& w = params.weights[l];
    const Vector& b = params.biases[l];
    const Vector& x = cache.activations[l];
    Vector& y = cache.activations[l + 1];
    y.resize(w.rows);
    const Activation act = layer_activation(params, l);
    for (std::size_t o = 0; o < w.rows; ++o) {
      const double* row = w.data.data() + o * w.cols;
      double sum = b[o];
      for (std::size_t i = 0; i < w.cols; ++i) sum += row[i] * x[i];
      y[o] = activate(act, sum);
    }
  }
  return cache.activations.back();
}

namespace {

void backward_impl(const MlpParams& params, const ForwardCache& cache,
                   std::span<const double> upstream, MlpParams* grad_acc, Vector* input_grad) {
  require_shape(cache.activations.size() == params.num_layers() + 1,
                "forward cache does not belong to this network");
  require_shape(upstream.size() == params.output_size(), "upstream gradient has wrong length");
  require_shape(grad_acc == nullptr || grad_acc->same_shape(params),
                "gradient accumulator has wrong shape");
  for (double g : upstream) require(std::isfinite(g), "non-finite upstream gradient");

  Vector delta(upstream.begin(), upstream.end());
  Vector prev;
  for (std::size_t l = params.num_layers(); l-- > 0;) {
    const Matrix& w = params.weights[l];
    const Vector& x = cache.activations[l];
    const Vector& y = cache.activations[l + 1];
    const Activation act = layer_activation(params, l);
    for (std::size_t o = 0; o < w.rows; ++o) delta[o] *= activate_grad(act, y[o]);

    const bool need_prev = l > 0 || input_grad != nullptr;
    if (need_prev) prev.assign(w.cols, 0.0);
    for (std::size_t o = 0; o < w.rows; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* wrow = w.data.data() + o * w.cols;
      if (grad_acc != nullptr) {
        grad_acc->biases[l][o] += d;
        double* grow = grad_acc->weights[l].data.data() + o * w.cols;
        for (std::size_t i = 0; i < w.cols; ++i) grow[i] += d * x[i];
      }
      if (need_prev)
        for (std::size_t i = 0; i < w.cols; ++i) prev[i] += wrow[i] * d;
    }
    if (!need_prev) break;
    delta.swap(prev);
  }
  if (input_grad != nullptr) *input_grad = std::move(delta);
}

}  // namespace

void mlp_backward_accumulate(const MlpParams& params, const ForwardCache& cache,
                             std::span<const double> upstream, MlpParams& grad_acc,
                             Vector* input_grad) {
  backward_impl(params, cache, upstream, &grad_acc, input_grad);
}

Vector mlp_input_gradient(const MlpParams& params, const ForwardCache& cache,
                          std::span<const double> upstream) {
  Vector g;
  backward_impl(params, cache, upstream, nullptr, &g);
  return g;
}

BackwardResult mlp_backward(const MlpParams& params, const ForwardCache& cache,
                            std::span<const double> upstream) {
  BackwardResult result{params.zeros_like(), {}};
  mlp_backward_accumulate(params, cache, upstream, result.grad, &result.input_grad);
  return result;
}

AdamState AdamState::for_params(const MlpParams& params, double learning_rate) {
  AdamState s;
  s.first_moment = params.zeros_like();
  s.second_moment = params.zeros_like();
  s.learning_rate = learning_rate;
  return s;
}

void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state) {
  require_shape(params.same_shape(grads), "gradient shape does not match parameters");
  require_shape(params.same_shape(state.first_moment) && params.same_shape(state.second_moment),
                "adam moments do not match parameters");
  require(grads.all_finite(), "adam update rejected: non-finite gradient");

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  auto update = [&](std::span<double> p, std::span<const double> g, std::span<double> m,
                    std::span<double> v) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  };
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    update(params.weights[l].data, grads.weights[l].data, state.first_moment.weights[l].data,
           state.second_moment.weights[l].data);
    update(params.biases[l], grads.biases[l], state.first_moment.biases[l],
           state.second_moment.biases[l]);
  }
}

GradientCheckReport gradient_check(const MlpParams& params, const LossFn& loss,
                                   const MlpParams& analytic_grad, double tolerance,
                                   double step) {
  require_shape(params.same_shape(analytic_grad), "analytic gradient shape mismatch");
  const Vector theta = params.flatten();
  const Vector analytic = analytic_grad.flatten();
  MlpParams probe = params;
  Vector work = theta;
  GradientCheckReport report;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    work[i] = theta[i] + step;
    probe.assign_flat(work);
    const double up = loss(probe);
    work[i] = theta[i] - step;
    probe.assign_flat(work);
    const double down = loss(probe);
    work[i] = theta[i];
    const double numeric = (up - down) / (2.0 * step);
    const double rel =
        std::abs(analytic[i] - numeric) / (std::abs(analytic[i]) + std::abs(numeric) + 1e-6);
    if (rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_index = i;
    }
  }
  report.pass = report.max_relative_error < tolerance;
  return report;
}

namespace binio {

void write_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(buf, 8);
}

void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  require(static_cast<bool>(in), "unexpected end of checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

void write_magic(std::ostream& out, const char (&magic)[7]) { out.write(magic, 6); }

void expect_magic(std::istream& in, const char (&magic)[7]) {
  char buf[6];
  in.read(buf, 6);
  require(in && std::memcmp(buf, magic, 6) == 0,
          std::string("bad checkpoint magic, expected ") + magic);
}

}  // namespace binio

void write_mlp(std::ostream& out, const MlpParams& params) {
  params.validate();
  binio::write_magic(out, "MEPNN1");
  binio::write_u64(out, params.layer_sizes.size());
  for (auto s : params.layer_sizes) binio::write_u64(out, s);
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    for (double w : params.weights[l].data) binio::write_f64(out, w);
    for (double b : params.biases[l]) binio::write_f64(out, b);
  }
}

MlpParams read_mlp(std::istream& in, Activation hidden, Activation output) {
  binio::expect_magic(in, "MEPNN1");
  const auto n = binio::read_u64(in);
  require(n >= 2 && n < 1024, "checkpoint has implausible layer count");
  std::vector<std::size_t> sizes(n);
  for (auto& s : sizes) {
    s = binio::read_u64(in);
    require(s > 0 && s < (1u << 24), "checkpoint has implausible layer size");
  }
  MlpParams p = MlpParams::zeros(sizes, hidden, output);
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    for (double& w : p.weights[l].data) w = binio::read_f64(in);
    for (double& b : p.biases[l]) b = binio::read_f64(in);
  }
  p.validate();
  return p;
}

void save_mlp(const std::string& path, const MlpParams& params) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot open " + path + " for writing");
  write_mlp(out, params);
  require(static_cast<bool>(out), "failed writing " + path);
}

MlpParams load_mlp(const std::string& path, Activation hidden, Activation output) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot open " + path);
  return read_mlp(in, hidden, output);
}

}  // namespace mep
