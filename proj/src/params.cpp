#include "pcfss/params.hpp"

#include <cmath>

namespace pcfss {

Param& ParamStore::insert(const std::string& name, Mat value, int group) {
  require(index_.count(name) == 0, "ParamStore: duplicate parameter " + name);
  Param p;
  p.name = name;
  p.grad = Mat::Zero(value.rows(), value.cols());
  p.m = Mat::Zero(value.rows(), value.cols());
  p.v = Mat::Zero(value.rows(), value.cols());
  p.value = std::move(value);
  p.group = group;
  params_.push_back(std::move(p));
  index_[name] = static_cast<int>(params_.size()) - 1;
  return params_.back();
}

Param& ParamStore::add_kaiming(const std::string& name, int rows, int cols,
                               int fan_in, int group) {
  require(fan_in >= 1, "ParamStore: fan_in must be >= 1");
  double limit = std::sqrt(6.0 / fan_in);
  Mat v(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) v(i, j) = rng_.uniform(-limit, limit);
  return insert(name, std::move(v), group);
}

Param& ParamStore::add_zeros(const std::string& name, int rows, int cols,
                             int group) {
  return insert(name, Mat::Zero(rows, cols), group);
}

Param& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  require(it != index_.end(), "ParamStore: unknown parameter " + name);
  return params_[it->second];
}

const Param& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  require(it != index_.end(), "ParamStore: unknown parameter " + name);
  return params_[it->second];
}

void ParamStore::zero_grads() {
  for (auto& p : params_) p.grad.setZero();
}

void adam_step(ParamStore& store, int64_t& t, const AdamConfig& cfg,
               const std::vector<double>& lr_by_group) {
  t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (auto& p : store.all()) {
    require(p.group >= 0 && p.group < static_cast<int>(lr_by_group.size()),
            "adam_step: no learning rate for group");
    const double lr = lr_by_group[p.group];
    p.m = cfg.beta1 * p.m + (1.0 - cfg.beta1) * p.grad;
    p.v = cfg.beta2 * p.v.array().matrix() +
          (1.0 - cfg.beta2) * p.grad.array().square().matrix();
    Mat m_hat = p.m / bc1;
    Mat v_hat = p.v / bc2;
    p.value.array() -=
        lr * m_hat.array() / (v_hat.array().sqrt() + cfg.eps);
  }
}

}  // namespace pcfss
