#pragma once

#include <deque>
#include <random>
#include <string>

#include "ptdt/diffcore/ndarray.hpp"

namespace ptdt::diff {

template <typename T>
struct Parameter {
  std::string name;
  NdArray<T> value;
  NdArray<T> grad;

  Parameter(std::string n, NdArray<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape(), T{0}) {}

  void zero_grad() { grad.fill(T{0}); }
};

// Ordered, address-stable collection of named parameters. Iteration order is
// registration order, which is also the checkpoint serialization order.
template <typename T>
class ParamStore {
 public:
  Parameter<T>& add(std::string name, NdArray<T> value) {
    for (const auto& p : params_) {
      if (p.name == name) throw ContractError("duplicate parameter name '" + name + "'");
    }
    return params_.emplace_back(std::move(name), std::move(value));
  }

  Parameter<T>& get(const std::string& name) {
    for (auto& p : params_) {
      if (p.name == name) return p;
    }
    throw ContractError("unknown parameter '" + name + "'");
  }
  const Parameter<T>& get(const std::string& name) const {
    return const_cast<ParamStore*>(this)->get(name);
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }
  Parameter<T>& operator[](std::size_t i) { return params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return params_[i]; }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& p : params_) out.add(p.name, p.value.template cast<U>());
    return out;
  }

 private:
  std::deque<Parameter<T>> params_;
};

template <typename T, typename Rng>
NdArray<T> normal_init(Shape shape, double stddev, Rng& rng) {
  NdArray<T> a(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : a.data()) v = static_cast<T>(dist(rng));
  return a;
}

}  // namespace ptdt::diff
