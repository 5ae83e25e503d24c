#include "sdwan/nn.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "sdwan/kernels.hpp"
#include "sdwan/rng.hpp"

namespace sdwan {

Mlp::Mlp(std::vector<int> dims, OutputAct act, std::uint64_t seed)
    : dims_(std::move(dims)), act_(act) {
  if (dims_.size() < 2) throw std::invalid_argument("mlp: need >= 2 layer dims");
  for (int d : dims_)
    if (d < 1) throw std::invalid_argument("mlp: layer dims must be >= 1");

  std::size_t off = 0;
  for (int l = 0; l < n_layers(); ++l) {
    w_off_.push_back(off);
    off += static_cast<std::size_t>(dims_[l + 1]) * dims_[l];
    b_off_.push_back(off);
    off += dims_[l + 1];
  }
  p_.resize(off);

  StreamRng rng(seed);
  for (int l = 0; l < n_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims_[l]));
    double* wl = w(l);
    const std::size_t nw = static_cast<std::size_t>(dims_[l + 1]) * dims_[l];
    for (std::size_t i = 0; i < nw; ++i) wl[i] = rng.uniform(-bound, bound);
    double* bl = bias(l);
    for (int i = 0; i < dims_[l + 1]; ++i) bl[i] = rng.uniform(-bound, bound);
  }
}

namespace {

void add_bias_rows(int batch, int n, const double* b, double* y) {
  for (int r = 0; r < batch; ++r)
    for (int c = 0; c < n; ++c) y[static_cast<std::size_t>(r) * n + c] += b[c];
}

}  // namespace

std::vector<double> Mlp::forward(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != input_dim())
    throw std::invalid_argument("mlp: input length does not match");
  std::vector<double> y(output_dim());
  forward_batch(1, x.data(), y.data());
  return y;
}

void Mlp::forward_batch(int batch, const double* x, double* y) const {
  Tape scratch;
  forward_batch(batch, x, y, scratch);
}

void Mlp::forward_batch(int batch, const double* x, double* y,
                        Tape& tape) const {
  if (batch < 1) throw std::invalid_argument("mlp: batch must be >= 1");
  const kernels::Ops& K = kernels::ops();
  const int L = n_layers();
  tape.batch = batch;
  tape.act.assign(L + 1, {});
  tape.pre.assign(L, {});
  tape.act[0].assign(x, x + static_cast<std::size_t>(batch) * dims_[0]);

  for (int l = 0; l < L; ++l) {
    const int in = dims_[l], out = dims_[l + 1];
    const bool last = l == L - 1;
    std::vector<double>& z = last ? tape.act[L] : tape.pre[l];
    z.resize(static_cast<std::size_t>(batch) * out);
    K.gemm_nt(batch, out, in, tape.act[l].data(), in, w(l), in, z.data(), out,
              false);
    add_bias_rows(batch, out, bias(l), z.data());
    if (!last) {
      tape.act[l + 1] = z;  // keep pre-activations for the backward mask
      K.relu(z.size(), tape.act[l + 1].data());
    } else if (act_ == OutputAct::kTanh) {
      for (double& v : z) v = std::tanh(v);
    }
  }
  std::memcpy(y, tape.act[L].data(),
              static_cast<std::size_t>(batch) * dims_[L] * sizeof(double));
}

void Mlp::backward(const Tape& tape, const double* dy, std::span<double> grads,
                   double* dx, bool accumulate) const {
  if (tape.batch < 1 || static_cast<int>(tape.act.size()) != n_layers() + 1)
    throw std::logic_error("mlp: backward without a matching forward tape");
  if (grads.size() != p_.size())
    throw std::invalid_argument("mlp: gradient buffer size mismatch");
  const kernels::Ops& K = kernels::ops();
  const int L = n_layers();
  const int batch = tape.batch;

  std::vector<double> cur(dy, dy + static_cast<std::size_t>(batch) * dims_[L]);
  if (act_ == OutputAct::kTanh) {
    const std::vector<double>& y = tape.act[L];
    for (std::size_t i = 0; i < cur.size(); ++i) cur[i] *= 1.0 - y[i] * y[i];
  }

  std::vector<double> prev;
  for (int l = L - 1; l >= 0; --l) {
    const int in = dims_[l], out = dims_[l + 1];
    K.gemm_tn(out, in, batch, cur.data(), out, tape.act[l].data(), in,
              grads.data() + w_off_[l], in, accumulate);
    double* db = grads.data() + b_off_[l];
    if (!accumulate) std::memset(db, 0, sizeof(double) * out);
    for (int r = 0; r < batch; ++r)
      for (int c = 0; c < out; ++c)
        db[c] += cur[static_cast<std::size_t>(r) * out + c];

    if (l == 0) {
      if (dx != nullptr)
        K.gemm_nn(batch, in, out, cur.data(), out, w(l), in, dx, in, false);
      break;
    }
    prev.resize(static_cast<std::size_t>(batch) * in);
    K.gemm_nn(batch, in, out, cur.data(), out, w(l), in, prev.data(), in,
              false);
    K.relu_mask(prev.size(), tape.pre[l - 1].data(), prev.data());
    cur.swap(prev);
  }
}

void adam_step(std::span<double> params, std::span<double> grads,
               AdamState& st, double clip_norm) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adam: parameter/gradient size mismatch");
  if (st.m.empty()) st.m.assign(params.size(), 0.0);
  if (st.v.empty()) st.v.assign(params.size(), 0.0);
  if (st.m.size() != params.size() || st.v.size() != params.size())
    throw std::invalid_argument("adam: moment buffers do not match parameters");

  const kernels::Ops& K = kernels::ops();
  if (clip_norm > 0.0) {
    const double norm =
        std::sqrt(K.dot(grads.size(), grads.data(), grads.data()));
    if (norm > clip_norm) {
      const double s = clip_norm / norm;
      for (double& g : grads) g *= s;
    }
  }

  ++st.step;
  const double lr_t = st.lr *
                      std::sqrt(1.0 - std::pow(st.beta2, st.step)) /
                      (1.0 - std::pow(st.beta1, st.step));
  K.adam_step(params.size(), params.data(), grads.data(), st.m.data(),
              st.v.data(), lr_t, st.beta1, st.beta2, st.eps);

  for (double p : params)
    if (!std::isfinite(p))
      throw std::runtime_error(
          "adam: non-finite parameter after update (diverged?)");
}

void soft_update(Mlp& target, const Mlp& online, double tau) {
  if (target.dims() != online.dims())
    throw std::invalid_argument("soft_update: network shapes differ");
  if (tau < 0.0 || tau > 1.0)
    throw std::invalid_argument("soft_update: tau must be in [0, 1]");
  std::span<double> t = target.params();
  std::span<const double> o = online.params();
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = (1.0 - tau) * t[i] + tau * o[i];
}

void save_mlp(Checkpoint& ck, const std::string& prefix, const Mlp& net) {
  std::vector<std::int64_t> dims(net.dims().begin(), net.dims().end());
  ck.i64[prefix + "/dims"] = std::move(dims);
  ck.i64[prefix + "/output_act"] = {
      net.output_activation() == OutputAct::kTanh ? 1 : 0};
  ck.f64[prefix + "/params"] = {net.params().begin(), net.params().end()};
}

Mlp load_mlp(const Checkpoint& ck, const std::string& prefix) {
  const auto di = ck.i64.find(prefix + "/dims");
  const auto ai = ck.i64.find(prefix + "/output_act");
  const auto pi = ck.f64.find(prefix + "/params");
  if (di == ck.i64.end() || ai == ck.i64.end() || pi == ck.f64.end())
    throw std::runtime_error("checkpoint: missing network entries under " +
                             prefix);
  std::vector<int> dims(di->second.begin(), di->second.end());
  const OutputAct act =
      ai->second.at(0) == 1 ? OutputAct::kTanh : OutputAct::kLinear;
  Mlp net(dims, act, 0);
  if (pi->second.size() != net.param_count())
    throw std::runtime_error("checkpoint: parameter count mismatch under " +
                             prefix);
  std::copy(pi->second.begin(), pi->second.end(), net.params().begin());
  return net;
}

void save_adam(Checkpoint& ck, const std::string& prefix, const AdamState& st) {
  ck.f64[prefix + "/hyper"] = {st.lr, st.beta1, st.beta2, st.eps};
  ck.i64[prefix + "/step"] = {st.step};
  ck.f64[prefix + "/m"] = st.m;
  ck.f64[prefix + "/v"] = st.v;
}

AdamState load_adam(const Checkpoint& ck, const std::string& prefix) {
  const auto hi = ck.f64.find(prefix + "/hyper");
  const auto si = ck.i64.find(prefix + "/step");
  const auto mi = ck.f64.find(prefix + "/m");
  const auto vi = ck.f64.find(prefix + "/v");
  if (hi == ck.f64.end() || si == ck.i64.end() || mi == ck.f64.end() ||
      vi == ck.f64.end())
    throw std::runtime_error("checkpoint: missing optimizer entries under " +
                             prefix);
  AdamState st;
  st.lr = hi->second.at(0);
  st.beta1 = hi->second.at(1);
  st.beta2 = hi->second.at(2);
  st.eps = hi->second.at(3);
  st.step = si->second.at(0);
  st.m = mi->second;
  st.v = vi->second;
  return st;
}

}  // namespace sdwan
