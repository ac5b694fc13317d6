#pragma once

// Fixed-topology multilayer perceptrons with hand-written backpropagation,
// Adam, finite-difference gradient verification and a small binary
// checkpoint format. Everything is double precision.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mep/common.hpp"

namespace mep {

// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vector data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

enum class Activation : std::uint8_t { identity, relu, tanh };

// Parameters of an MLP. weights[l] maps layer l (cols) to layer l + 1 (rows).
// The same structure doubles as the gradient container.
struct MlpParams {
  std::vector<std::size_t> layer_sizes;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  Activation hidden_activation = Activation::relu;
  Activation output_activation = Activation::identity;

  static MlpParams zeros(std::vector<std::size_t> sizes,
                         Activation hidden = Activation::relu,
                         Activation output = Activation::identity);
  // Uniform in +-1/sqrt(fan_in) for weights and biases.
  static MlpParams random(std::vector<std::size_t> sizes, Activation hidden, Activation output, Rng& rng);

  MlpParams zeros_like() const;

  std::size_t num_layers() const { return weights.size(); }
  std::size_t input_size() const { return layer_sizes.front(); }
  std::size_t output_size() const { return layer_sizes.back(); }
  std::size_t num_parameters() const;

  // Flat order: layer by layer, weights row-major then bias.
  Vector flatten() const;
  void assign_flat(std::span<const double> flat);

  // Throws ShapeError when shapes do not chain or an entry is non-finite.
  void validate() const;
  bool same_shape(const MlpParams& other) const;
  bool all_finite() const;

  bool operator==(const MlpParams&) const = default;
};

// Post-activation values of every layer; activations[0] is the input.
struct ForwardCache {
  std::vector<Vector> activations;
};

Vector mlp_forward(const MlpParams& params, std::span<const double> input);
Vector mlp_forward(const MlpParams& params, std::span<const double> input, ForwardCache& cache);

struct BackwardResult {
  MlpParams grad;
  Vector input_grad;
};

// Gradient of <upstream, f(input)> w.r.t. parameters and input, using the
// cache filled by the matching mlp_forward call.
BackwardResult mlp_backward(const MlpParams& params, const ForwardCache& cache,
                            std::span<const double> upstream);

// Batched form: adds the parameter gradient into grad_acc and, when
// input_grad is non-null, writes the input gradient there.
void mlp_backward_accumulate(const MlpParams& params, const ForwardCache& cache,
                             std::span<const double> upstream, MlpParams& grad_acc,
                             Vector* input_grad = nullptr);

// Input gradient only; parameter gradients are not formed.
Vector mlp_input_gradient(const MlpParams& params, const ForwardCache& cache,
                          std::span<const double> upstream);

struct AdamState {
  std::uint64_t step_count = 0;
  MlpParams first_moment;
  MlpParams second_moment;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const MlpParams& params, double learning_rate = 1e-3);
};

// Bias-corrected Adam. Rejects non-finite gradients without touching
// params or state.
void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state);

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  bool pass = false;
};

using LossFn = std::function<double(const MlpParams&)>;

// Compares analytic_grad against central differences of loss at params.
// Relative error per entry: |a - n| / (|a| + |n| + 1e-6). The floor sits above
// central-difference roundoff (about 1e-16 * |loss| / step) for O(1) losses.
GradientCheckReport gradient_check(const MlpParams& params, const LossFn& loss,
                                   const MlpParams& analytic_grad, double tolerance,
                                   double step = 1e-5);

// Checkpoint: "MEPNN1", u64 count of layer sizes, u64 sizes, then per layer
// the row-major weights followed by the bias, all little-endian f64.
void write_mlp(std::ostream& out, const MlpParams& params);
MlpParams read_mlp(std::istream& in, Activation hidden = Activation::relu,
                   Activation output = Activation::identity);
void save_mlp(const std::string& path, const MlpParams& params);
MlpParams load_mlp(const std::string& path, Activation hidden = Activation::relu,
                   Activation output = Activation::identity);

namespace binio {
void write_u64(std::ostream& out, std::uint64_t v);
void write_f64(std::ostream& out, double v);
std::uint64_t read_u64(std::istream& in);
double read_f64(std::istream& in);
void write_magic(std::ostream& out, const char (&magic)[7]);
void expect_magic(std::istream& in, const char (&magic)[7]);
}  // namespace binio

}  // namespace mep
