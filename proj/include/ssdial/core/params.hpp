#pragma once

#include "ssdial/core/errors.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>

namespace ssdial {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// A trainable tensor (rank <= 2) with its accumulated gradient.
struct Parameter {
  Matrix value;
  Matrix grad;
};

/// Named collection of trainable tensors. std::map keeps addresses stable, so tapes can
/// hold raw pointers to entries for the lifetime of a forward/backward pass.
class ParamSet {
 public:
  explicit ParamSet(std::uint64_t rng_seed = 0) : rng_seed_(rng_seed) {}

  Parameter& add(const std::string& name, Matrix init) {
    auto [it, inserted] = entries_.try_emplace(name);
    if (!inserted) throw ConfigError("parameter '" + name + "' registered twice");
    it->second.value = std::move(init);
    it->second.grad = Matrix::Zero(it->second.value.rows(), it->second.value.cols());
    return it->second;
  }

  Parameter& at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return it->second;
  }
  const Parameter& at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return it->second;
  }

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  void zero_grad() {
    for (auto& [_, p] : entries_) p.grad.setZero();
  }

  /// Total number of scalar entries across all parameters.
  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& [_, p] : entries_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

  std::map<std::string, Parameter>& entries() { return entries_; }
  const std::map<std::string, Parameter>& entries() const { return entries_; }

  std::uint64_t rng_seed() const { return rng_seed_; }

  bool all_finite() const {
    for (const auto& [_, p] : entries_)
      if (!p.value.allFinite()) return false;
    return true;
  }

 private:
  std::map<std::string, Parameter> entries_;
  std::uint64_t rng_seed_;
};

}  // namespace ssdial
