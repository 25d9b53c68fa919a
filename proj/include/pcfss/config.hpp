#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pcfss/bpa.hpp"
#include "pcfss/hr.hpp"
#include "pcfss/neural.hpp"
#include "pcfss/predictor.hpp"

namespace pcfss {

// Full run configuration. Parsed from dotted key=value text; every key is
// validated with an explicit range error and unknown keys are rejected.
struct TrainConfig {
  uint64_t seed = 0;
  std::string data_dir;
  int split = 0;
  std::string predictor = "proto";  // proto | mpti

  int n_way = 1, k_shot = 1, t_query = 1;

  std::string protos_mode = "auto";  // auto | single | multi
  int n_s = 10, n_q = 10;

  std::vector<int> ext_widths{32, 32, 64};
  int ext_k = 10, ext_dim = 64;
  std::string ext_head = "auto";  // auto | linear | attention

  bool bpa_enabled = false;
  bool bpa_use_c1 = true, bpa_use_g = true, bpa_use_r = true;
  bool bpa_apply_fg = false;
  std::string bpa_filter = "gate";  // gate | subtract | projector
  std::string bpa_corr = "paper";   // paper | no_fg | mlp

  bool hr_enabled = false;
  std::string hr_mode = "kl";  // kl | l1 | l2
  double hr_t_kl = 1.0, hr_lambda_kl = 1.0;

  double t_ce = 15.0;
  double alpha = 0.99;
  int graph_k = 20;
  double bandwidth = 0.0;  // <= 0: self-tuning median

  int iters = 2000;
  double lr_extractor = 1e-4, lr_rest = 1e-3;
  int halve_every = 5000;
  int min_class_points = 50;

  int pre_epochs = 10, pre_batch = 8;
  double pre_lr = 1e-3;

  double jitter_sigma = 0.01, jitter_clip = 0.05;
  bool rotate = true;

  int eval_episodes = 100;
  uint64_t eval_seed = 9000;
  bool eval_record_timing = false;
  bool miou_include_bg = false;

  // resolved accessors
  bool multi_prototypes() const;
  ExtractorConfig extractor_config() const;
  PredictorConfig predictor_config() const;
  BpaConfig bpa_config() const;
  HrConfig hr_config() const;
  double lr_at(int group, int64_t iteration) const;
};

// key=value lines, '#' comments; returns the raw map
std::map<std::string, std::string> read_config_file(const std::string& path);

// build + validate from key=value pairs applied over the defaults
TrainConfig parse_config(const std::map<std::string, std::string>& kv);

// canonical serialization; parse_config(config_to_kv(c)) == c
std::map<std::string, std::string> config_to_kv(const TrainConfig& c);
std::string config_to_text(const TrainConfig& c);

}  // namespace pcfss
