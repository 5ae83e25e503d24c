#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace sdwan {

// Dense multi-layer perceptron over doubles: ReLU hidden layers, linear or
// tanh output. Parameters live in one flat buffer (weights then bias per
// layer, row-major (out x in) weights), which keeps the optimizer, soft
// updates, and checkpointing shape-agnostic.
enum class OutputAct { kLinear, kTanh };

class Mlp {
 public:
  Mlp() = default;
  // He-style uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)) per layer,
  // deterministic in seed.
  Mlp(std::vector<int> dims, OutputAct act, std::uint64_t seed);

  const std::vector<int>& dims() const { return dims_; }
  OutputAct output_activation() const { return act_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  int n_layers() const { return static_cast<int>(dims_.size()) - 1; }
  std::size_t param_count() const { return p_.size(); }
  std::span<double> params() { return p_; }
  std::span<const double> params() const { return p_; }

  // layer l views into the flat buffer
  double* w(int l) { return p_.data() + w_off_[l]; }
  const double* w(int l) const { return p_.data() + w_off_[l]; }
  double* bias(int l) { return p_.data() + b_off_[l]; }
  const double* bias(int l) const { return p_.data() + b_off_[l]; }
  std::size_t w_offset(int l) const { return w_off_[l]; }
  std::size_t b_offset(int l) const { return b_off_[l]; }

  // Activations recorded by a training forward pass, consumed by backward.
  struct Tape {
    int batch = 0;
    std::vector<std::vector<double>> act;  // act[0]=input, act[l+1]=layer l out
    std::vector<std::vector<double>> pre;  // hidden pre-activations
  };

  std::vector<double> forward(std::span<const double> x) const;
  // x row-major (batch, input_dim) -> y (batch, output_dim)
  void forward_batch(int batch, const double* x, double* y) const;
  void forward_batch(int batch, const double* x, double* y, Tape& tape) const;

  // Gradient of sum(dy . y) w.r.t. parameters into `grads` (flat, same layout
  // as params; accumulate=false overwrites). Optionally also w.r.t. the
  // input. Throws std::logic_error if the tape is missing or stale.
  void backward(const Tape& tape, const double* dy, std::span<double> grads,
                double* dx = nullptr, bool accumulate = false) const;

 private:
  std::vector<int> dims_;
  OutputAct act_ = OutputAct::kLinear;
  std::vector<std::size_t> w_off_, b_off_;
  std::vector<double> p_;
};

struct AdamState {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<double> m, v;  // lazily sized to the parameter count
};

// One Adam update. clip_norm > 0 rescales the gradient to that global L2 norm
// first (no-op when already below); grads are modified in place. Throws
// std::runtime_error if any parameter is non-finite afterwards.
void adam_step(std::span<double> params, std::span<double> grads,
               AdamState& st, double clip_norm);

// target <- (1 - tau) * target + tau * online, elementwise over parameters.
void soft_update(Mlp& target, const Mlp& online, double tau);

// Named-array container with a bit-exact binary file format (little-endian;
// see README). Doubles round-trip without any text formatting involved.
struct Checkpoint {
  std::map<std::string, std::vector<double>> f64;
  std::map<std::string, std::vector<std::int64_t>> i64;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);  // throws on bad file
};

// Mlp <-> checkpoint under a key prefix ("<prefix>/dims" etc).
void save_mlp(Checkpoint& ck, const std::string& prefix, const Mlp& net);
Mlp load_mlp(const Checkpoint& ck, const std::string& prefix);
void save_adam(Checkpoint& ck, const std::string& prefix, const AdamState& st);
AdamState load_adam(const Checkpoint& ck, const std::string& prefix);

}  // namespace sdwan
