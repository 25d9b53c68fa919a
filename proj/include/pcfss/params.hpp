#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "pcfss/common.hpp"
#include "pcfss/rng.hpp"

namespace pcfss {

// Learning-rate groups for the episodic optimizer.
enum ParamGroup : int { kGroupExtractor = 0, kGroupRest = 1 };

struct Param {
  std::string name;
  Mat value;
  Mat grad;
  Mat m;  // Adam first moment
  Mat v;  // Adam second moment
  int group = kGroupRest;
};

// Named parameter tensors with deterministic initialization. Creation order
// is part of the model definition: the store owns one RNG stream seeded at
// construction and every add() consumes from it.
class ParamStore {
 public:
  explicit ParamStore(uint64_t init_seed) : init_seed_(init_seed), rng_(init_seed) {}

  // uniform(-limit, limit) with limit = sqrt(6 / fan_in)
  Param& add_kaiming(const std::string& name, int rows, int cols, int fan_in,
                     int group = kGroupRest);
  Param& add_zeros(const std::string& name, int rows, int cols,
                   int group = kGroupRest);

  Param& get(const std::string& name);
  const Param& get(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) > 0; }

  std::deque<Param>& all() { return params_; }
  const std::deque<Param>& all() const { return params_; }

  void zero_grads();
  uint64_t init_seed() const { return init_seed_; }

 private:
  Param& insert(const std::string& name, Mat value, int group);

  uint64_t init_seed_;
  Rng rng_;
  std::deque<Param> params_;  // deque: stable addresses for tape bindings
  std::map<std::string, int> index_;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One optimizer step; lr_by_group[p.group] supplies the learning rate.
void adam_step(ParamStore& store, int64_t& t, const AdamConfig& cfg,
               const std::vector<double>& lr_by_group);

}  // namespace pcfss
