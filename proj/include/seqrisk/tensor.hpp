// Dense row-major double tensors and named parameter collections.
#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace seqrisk {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape) {
    Tensor t;
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    t.shape = std::move(shape);
    t.data.assign(n, 0.0);
    return t;
  }

  static Tensor matrix(std::size_t rows, std::size_t cols) { return zeros({rows, cols}); }
  static Tensor vector(std::size_t n) { return zeros({n}); }

  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }

  double& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

  // Pointer to the start of row r of a matrix.
  double* row(std::size_t r) { return data.data() + r * shape[1]; }
  const double* row(std::size_t r) const { return data.data() + r * shape[1]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (double x : data)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

// Ordered, name-addressed collection of tensors.  Iteration order is the
// insertion order, which keeps every reduction over parameters deterministic.
class ParamSet {
 public:
  ParamSet() = default;

  Tensor& add(const std::string& name, Tensor t) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    index_.emplace(name, entries_.size());
    entries_.emplace_back(name, std::move(t));
    return entries_.back().second;
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  Tensor& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
    return entries_[it->second].second;
  }
  const Tensor& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
    return entries_[it->second].second;
  }

  std::size_t size() const { return entries_.size(); }
  const std::pair<std::string, Tensor>& entry(std::size_t i) const { return entries_[i]; }
  std::pair<std::string, Tensor>& entry(std::size_t i) { return entries_[i]; }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.second.size();
    return n;
  }

  bool same_shapes(const ParamSet& o) const {
    if (entries_.size() != o.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].first != o.entries_[i].first) return false;
      if (!entries_[i].second.same_shape(o.entries_[i].second)) return false;
    }
    return true;
  }

  ParamSet zeros_like() const {
    ParamSet z;
    for (const auto& e : entries_) z.add(e.first, Tensor::zeros(e.second.shape));
    return z;
  }

  // this += a * other
  void axpy(double a, const ParamSet& other) {
    if (!same_shapes(other)) throw std::invalid_argument("parameter shape mismatch in axpy");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      auto& dst = entries_[i].second.data;
      const auto& src = other.entries_[i].second.data;
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += a * src[k];
    }
  }

  void scale(double a) {
    for (auto& e : entries_)
      for (double& x : e.second.data) x *= a;
  }

  bool all_finite() const {
    for (const auto& e : entries_)
      if (!e.second.all_finite()) return false;
    return true;
  }

  double max_abs_diff(const ParamSet& o) const {
    if (!same_shapes(o)) throw std::invalid_argument("parameter shape mismatch in max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& a = entries_[i].second.data;
      const auto& b = o.entries_[i].second.data;
      for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::fabs(a[k] - b[k]));
    }
    return m;
  }

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace seqrisk
