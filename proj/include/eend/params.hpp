#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "eend/rng.hpp"
#include "eend/tensor.hpp"

namespace eend {

// Named trainable parameters. Iteration is always in name order so optimizer
// updates and checkpoints are deterministic.
class ParamStore {
 public:
  Value create(const std::string& name, Tensor init);
  Value get(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) > 0; }
  std::size_t count() const { return params_.size(); }

  const std::map<std::string, Value>& items() const { return params_; }

  void zero_grad();

  // Checkpoint container: little-endian binary, parameter names mapped to
  // shape + row-major float64 data, plus a string metadata section. Loading
  // then saving reproduces the file byte for byte.
  void save(const std::string& path, const std::map<std::string, std::string>& meta) const;
  static ParamStore load(const std::string& path, std::map<std::string, std::string>* meta);

 private:
  std::map<std::string, Value> params_;
};

// Uniform fan-in initialization, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor init_linear(std::size_t fan_in, std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace eend
