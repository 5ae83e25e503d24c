#include <cmath>
#include <stdexcept>

#include "sdwan/agents.hpp"

namespace sdwan {

namespace detail {

std::vector<int> mlp_dims(int in, int hidden, int layers, int out) {
  std::vector<int> d;
  d.reserve(layers + 2);
  d.push_back(in);
  for (int i = 0; i < layers; ++i) d.push_back(hidden);
  d.push_back(out);
  return d;
}

std::vector<int> tunnel_offsets(const LoadModel& lm) {
  std::vector<int> off(lm.n_tunnels() + 1);
  for (int k = 0; k < lm.n_tunnels(); ++k) off[k] = lm.tp_begin(k);
  off[lm.n_tunnels()] = lm.n_paths();
  return off;
}

}  // namespace detail

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw std::invalid_argument("replay: capacity must be >= 1");
  data_.reserve(capacity);
}

void ReplayBuffer::push(Experience e) {
  if (size() < capacity_) {
    data_.push_back(std::move(e));
  } else {
    data_[next_] = std::move(e);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<int> ReplayBuffer::sample_indices(int batch, StreamRng& rng) const {
  if (batch < 1 || batch > size())
    throw std::invalid_argument("replay: batch larger than buffer");
  // partial Fisher-Yates: first `batch` entries are a uniform draw without
  // replacement
  std::vector<int> idx(size());
  for (int i = 0; i < size(); ++i) idx[i] = i;
  for (int i = 0; i < batch; ++i) {
    const int j = i + static_cast<int>(rng.below(size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(batch);
  return idx;
}

std::vector<double> normalize_state(const DemandVector& demand, double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("normalize_state: scale must be > 0");
  std::vector<double> s(demand.demands.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = demand.demands[i] / scale;
  return s;
}

SplitAction softmax_action(std::span<const int> tp_off,
                           std::span<const double> logits) {
  SplitAction a;
  a.splits.resize(logits.size());
  const int n_tunnels = static_cast<int>(tp_off.size()) - 1;
  for (int k = 0; k < n_tunnels; ++k) {
    const int lo = tp_off[k], hi = tp_off[k + 1];
    double m = logits[lo];
    for (int tp = lo + 1; tp < hi; ++tp) m = std::max(m, logits[tp]);
    double sum = 0.0;
    for (int tp = lo; tp < hi; ++tp) {
      a.splits[tp] = std::exp(logits[tp] - m);
      sum += a.splits[tp];
    }
    for (int tp = lo; tp < hi; ++tp) a.splits[tp] /= sum;
  }
  return a;
}

}  // namespace sdwan
