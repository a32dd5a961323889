#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace chordroll::neural {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

Vec sigmoid(const Vec& z);
/// Max-shifted softmax: sums to 1, entries strictly positive, no overflow.
Vec softmax(const Vec& z);

/// -log p[target], probabilities clamped to [1e-12, 1-1e-12] before the log.
double cross_entropy_categorical(const Vec& probs, int target);
/// Per-note binary cross entropy summed over the vector, same clamping.
double cross_entropy_binary(const Vec& probs, const Vec& targets);

/// Weights of one LSTM layer plus its output head.
struct LstmParams {
  Mat U_i, U_f, U_o, U_g;  // input weights, hidden x input
  Mat V_i, V_f, V_o, V_g;  // recurrent weights, hidden x hidden
  Vec b_i, b_f, b_o, b_g;
  Mat W_out;  // output x hidden
  Vec b_out;

  int input_size() const { return int(U_i.cols()); }
  int hidden_size() const { return int(U_i.rows()); }
  int output_size() const { return int(W_out.rows()); }

  /// Uniform init in [-scale, scale]; the forget-gate bias starts at
  /// `forget_bias` to keep early cell gradients alive (set 0 to disable).
  static LstmParams init(int input, int hidden, int output, std::mt19937_64& rng,
                         double scale = 0.08, double forget_bias = 1.0);
};

struct LstmState {
  Vec h, c;
  static LstmState zero(int hidden);
};

/// Forward activations of one step, recorded for the backward pass.
struct LstmStepCache {
  Vec x, h_prev, c_prev;
  Vec i, f, o, g, c, tanh_c, h;
  int embed_id = -1;  // embedding column that produced x, -1 when x is raw input
};

/// One cell update:
///   i,f,o = sigmoid(U x + V h + b),  g = tanh(U_g x + V_g h + b_g)
///   c_t = f (*) c_{t-1} + i (*) g,   h_t = o (*) tanh(c_t)
/// Returns the pre-activation output W_out h_t + b_out; the caller applies
/// the output activation.
Vec lstm_step(const LstmParams& p, LstmState& state, const Vec& x, LstmStepCache* cache = nullptr);

struct LstmGrads {
  Mat U_i, U_f, U_o, U_g, V_i, V_f, V_o, V_g;
  Vec b_i, b_f, b_o, b_g;
  Mat W_out;
  Vec b_out;

  static LstmGrads zero_like(const LstmParams& p);
  void set_zero();
};

/// Backpropagation through time over a recorded window. dz[t] is the loss
/// gradient w.r.t. the pre-activation output of step t (for softmax or
/// sigmoid heads with cross entropy that is probs - target). Gradients
/// accumulate into `grads`; `dx`, when non-null, receives per-step input
/// gradients (used to train embedding columns).
void lstm_backward(const LstmParams& p, std::span<const LstmStepCache> steps,
                   std::span<const Vec> dz, LstmGrads& grads, std::vector<Vec>* dx = nullptr);

/// Flat named view of one parameter tensor. Data is Eigen column-major;
/// vectors have cols == 1.
struct TensorRef {
  std::string name;
  double* data = nullptr;
  Eigen::Index rows = 0, cols = 0;

  Eigen::Index size() const { return rows * cols; }
};

TensorRef tensor_ref(const std::string& name, Mat& m);
TensorRef tensor_ref(const std::string& name, Vec& v);
std::vector<TensorRef> tensor_refs(LstmParams& p, const std::string& prefix = "");
std::vector<TensorRef> tensor_refs(LstmGrads& g, const std::string& prefix = "");

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  long long t = 0;
  std::vector<double> m, v;  // first/second moments over the flattened parameters
};

AdamState make_adam(const std::vector<TensorRef>& params, AdamConfig config);
/// Standard bias-corrected Adam step; params and grads must line up with the
/// refs make_adam saw.
void adam_update(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads,
                 AdamState& adam);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  Eigen::Index worst_index = -1;
};

/// Central-difference check of analytic gradients: perturbs every parameter
/// by +-epsilon, re-evaluates `loss`, and reports the worst relative error
/// |a - n| / max(|a|, |n|, 1e-8).
GradCheckResult gradient_check(const std::vector<TensorRef>& params,
                               const std::vector<TensorRef>& analytic,
                               const std::function<double()>& loss, double epsilon);

// ---------------------------------------------------------------------------
// Checkpoints. Layout: magic "JMBT", u32 version, 4-char model kind, u32
// hyperparameter count + u32 values, u32 tensor count, then per tensor
// u32 name length, name bytes, u32 rows, u32 cols, row-major little-endian
// float64 data. Save/load round-trips bit-exactly.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const std::string& kind,
                     const std::vector<std::uint32_t>& hyper,
                     const std::vector<TensorRef>& tensors);

struct Checkpoint {
  std::string kind;
  std::vector<std::uint32_t> hyper;
  std::vector<std::pair<std::string, Mat>> tensors;

  const Mat& tensor(const std::string& name) const;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Copy checkpoint tensors into the given refs; names and shapes must match.
void restore_tensors(const Checkpoint& ckpt, const std::vector<TensorRef>& refs);

}  // namespace chordroll::neural
