#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "chromasem/tensor.hpp"

namespace chromasem {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
};

/// Named, shaped parameter collection in insertion order. Element addresses are
/// stable for the lifetime of the collection.
template <typename T>
class NetWeights {
 public:
  Parameter<T>& add(std::string name, Shape shape) {
    return add(std::move(name), Tensor<T>(shape));
  }

  Parameter<T>& add(std::string name, Tensor<T> value) {
    if (index_.count(name)) throw TensorNameError("duplicate tensor name: " + name);
    index_.emplace(name, params_.size());
    params_.push_back(Parameter<T>{std::move(name), std::move(value)});
    return params_.back();
  }

  const Parameter<T>* find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &params_[it->second];
  }
  Parameter<T>* find(std::string_view name) {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &params_[it->second];
  }

  const Parameter<T>& get(std::string_view name) const {
    const Parameter<T>* p = find(name);
    if (!p) throw TensorNameError("unknown tensor: " + std::string(name));
    return *p;
  }
  Parameter<T>& get(std::string_view name) {
    Parameter<T>* p = find(name);
    if (!p) throw TensorNameError("unknown tensor: " + std::string(name));
    return *p;
  }

  std::deque<Parameter<T>>& params() { return params_; }
  const std::deque<Parameter<T>>& params() const { return params_; }
  std::size_t tensor_count() const { return params_.size(); }

  /// Total scalar count, optionally restricted to names starting with `prefix`.
  std::size_t parameter_count(std::string_view prefix = {}) const {
    std::size_t total = 0;
    for (const auto& p : params_)
      if (std::string_view(p.name).substr(0, prefix.size()) == prefix) total += p.value.size();
    return total;
  }

 private:
  std::deque<Parameter<T>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Fills `w` with N(0, 2/fan_in) samples (He initialization for leaky units).
template <typename T>
void he_normal(Tensor<T>& w, double fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  for (auto& v : w.values()) v = static_cast<T>(dist(rng));
}

/// Declared shape of one tensor in a network. `fan_in == 0` marks a bias
/// (zero-initialized).
struct TensorSpec {
  std::string name;
  Shape shape;
  double fan_in = 0.0;
};

using Layout = std::vector<TensorSpec>;

template <typename T>
NetWeights<T> init_from_layout(const Layout& layout, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  NetWeights<T> w;
  for (const auto& spec : layout) {
    auto& p = w.add(spec.name, spec.shape);
    if (spec.fan_in > 0.0) he_normal(p.value, spec.fan_in, rng);
  }
  return w;
}

/// Checks that `w` holds exactly the tensors of `layout`: an unknown or missing
/// name raises TensorNameError, a wrong extent raises ShapeError.
template <typename T>
void validate_layout(const NetWeights<T>& w, const Layout& layout, const std::string& network) {
  for (const auto& spec : layout) {
    const Parameter<T>* p = w.find(spec.name);
    if (!p) throw TensorNameError(network + ": missing tensor " + spec.name);
    if (p->value.shape() != spec.shape)
      throw ShapeError(network + ": tensor " + spec.name + " has shape " + p->value.shape().str() +
                       ", expected " + spec.shape.str());
  }
  if (w.tensor_count() != layout.size()) {
    for (const auto& p : w.params()) {
      bool known = false;
      for (const auto& spec : layout) known = known || spec.name == p.name;
      if (!known) throw TensorNameError(network + ": unknown tensor " + p.name);
    }
  }
}

template <typename To, typename From>
NetWeights<To> weights_cast(const NetWeights<From>& src) {
  NetWeights<To> out;
  for (const auto& p : src.params()) out.add(p.name, tensor_cast<To>(p.value));
  return out;
}

}  // namespace chromasem
