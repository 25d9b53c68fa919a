#include "pcfss/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pcfss {

bool TrainConfig::multi_prototypes() const {
  if (protos_mode == "multi") return true;
  if (protos_mode == "single") return false;
  return predictor == "mpti";
}

ExtractorConfig TrainConfig::extractor_config() const {
  ExtractorConfig e;
  e.widths = ext_widths;
  e.k = ext_k;
  e.out_dim = ext_dim;
  std::string head = ext_head;
  if (head == "auto") head = predictor == "mpti" ? "attention" : "linear";
  e.head = head == "attention" ? ExtractorConfig::Head::SelfAttention
                               : ExtractorConfig::Head::LinearProjector;
  return e;
}

PredictorConfig TrainConfig::predictor_config() const {
  PredictorConfig p;
  p.kind = predictor == "mpti" ? PredictorConfig::Kind::Mpti
                               : PredictorConfig::Kind::Proto;
  p.t = t_ce;
  p.alpha = alpha;
  p.graph_k = graph_k;
  p.bandwidth = bandwidth;
  return p;
}

BpaConfig TrainConfig::bpa_config() const {
  BpaConfig b;
  b.enabled = bpa_enabled;
  b.use_c1 = bpa_use_c1;
  b.use_g = bpa_use_g;
  b.use_r = bpa_use_r;
  b.apply_fg = bpa_apply_fg;
  b.filter = bpa_filter == "subtract"  ? BpaConfig::Filter::Subtract
             : bpa_filter == "projector" ? BpaConfig::Filter::Projector
                                         : BpaConfig::Filter::Gate;
  b.corr = bpa_corr == "no_fg" ? BpaConfig::Corr::NoFg
           : bpa_corr == "mlp" ? BpaConfig::Corr::Mlp
                               : BpaConfig::Corr::Paper;
  return b;
}

HrConfig TrainConfig::hr_config() const {
  HrConfig h;
  h.enabled = hr_enabled;
  h.mode = hr_mode == "l1"   ? HrConfig::Mode::L1
           : hr_mode == "l2" ? HrConfig::Mode::L2
                             : HrConfig::Mode::Kl;
  h.t_kl = hr_t_kl;
  h.lambda_kl = hr_lambda_kl;
  return h;
}

double TrainConfig::lr_at(int group, int64_t iteration) const {
  double base = group == kGroupExtractor ? lr_extractor : lr_rest;
  int64_t halvings = iteration / halve_every;
  return base / static_cast<double>(int64_t(1) << std::min<int64_t>(halvings, 62));
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "config: cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    // trim
    size_t a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    size_t b = line.find_last_not_of(" \t\r");
    line = line.substr(a, b - a + 1);
    size_t eq = line.find('=');
    require(eq != std::string::npos, path + ":" + std::to_string(line_no) +
                                         ": expected key=value");
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    require(!key.empty(), path + ":" + std::to_string(line_no) + ": empty key");
    kv[key] = val;
  }
  return kv;
}

namespace {

int to_int(const std::string& key, const std::string& v) {
  char* end = nullptr;
  long x = std::strtol(v.c_str(), &end, 10);
  require(end == v.c_str() + v.size() && !v.empty(),
          "config: " + key + ": expected integer, got '" + v + "'");
  return static_cast<int>(x);
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  char* end = nullptr;
  unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  require(end == v.c_str() + v.size() && !v.empty(),
          "config: " + key + ": expected unsigned integer, got '" + v + "'");
  return x;
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  double x = std::strtod(v.c_str(), &end);
  require(end == v.c_str() + v.size() && !v.empty(),
          "config: " + key + ": expected number, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw PcfssError("config: " + key + ": expected true/false, got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ','))
    out.push_back(to_int(key, tok));
  require(!out.empty(), "config: " + key + ": empty list");
  return out;
}

void check_choice(const std::string& key, const std::string& v,
                  const std::vector<std::string>& allowed) {
  for (const auto& a : allowed)
    if (v == a) return;
  std::string opts;
  for (const auto& a : allowed) opts += a + "|";
  throw PcfssError("config: " + key + ": '" + v + "' not one of " + opts);
}

}  // namespace

TrainConfig parse_config(const std::map<std::string, std::string>& kv) {
  TrainConfig c;
  for (const auto& [k, v] : kv) {
    if (k == "seed") c.seed = to_u64(k, v);
    else if (k == "data.dir") c.data_dir = v;
    else if (k == "split") c.split = to_int(k, v);
    else if (k == "predictor") c.predictor = v;
    else if (k == "n_way") c.n_way = to_int(k, v);
    else if (k == "k_shot") c.k_shot = to_int(k, v);
    else if (k == "t_query") c.t_query = to_int(k, v);
    else if (k == "protos.mode") c.protos_mode = v;
    else if (k == "protos.n_s") c.n_s = to_int(k, v);
    else if (k == "protos.n_q") c.n_q = to_int(k, v);
    else if (k == "extractor.widths") c.ext_widths = to_int_list(k, v);
    else if (k == "extractor.k") c.ext_k = to_int(k, v);
    else if (k == "extractor.dim") c.ext_dim = to_int(k, v);
    else if (k == "extractor.head") c.ext_head = v;
    else if (k == "bpa.enabled") c.bpa_enabled = to_bool(k, v);
    else if (k == "bpa.use_c1") c.bpa_use_c1 = to_bool(k, v);
    else if (k == "bpa.use_g") c.bpa_use_g = to_bool(k, v);
    else if (k == "bpa.use_r") c.bpa_use_r = to_bool(k, v);
    else if (k == "bpa.apply_fg") c.bpa_apply_fg = to_bool(k, v);
    else if (k == "bpa.filter") c.bpa_filter = v;
    else if (k == "bpa.corr") c.bpa_corr = v;
    else if (k == "hr.enabled") c.hr_enabled = to_bool(k, v);
    else if (k == "hr.mode") c.hr_mode = v;
    else if (k == "hr.t_kl") c.hr_t_kl = to_double(k, v);
    else if (k == "hr.lambda_kl") c.hr_lambda_kl = to_double(k, v);
    else if (k == "predict.t") c.t_ce = to_double(k, v);
    else if (k == "prop.alpha") c.alpha = to_double(k, v);
    else if (k == "prop.k") c.graph_k = to_int(k, v);
    else if (k == "prop.bandwidth") c.bandwidth = to_double(k, v);
    else if (k == "train.iters") c.iters = to_int(k, v);
    else if (k == "train.lr_extractor") c.lr_extractor = to_double(k, v);
    else if (k == "train.lr_rest") c.lr_rest = to_double(k, v);
    else if (k == "train.halve_every") c.halve_every = to_int(k, v);
    else if (k == "train.min_class_points") c.min_class_points = to_int(k, v);
    else if (k == "pretrain.epochs") c.pre_epochs = to_int(k, v);
    else if (k == "pretrain.batch") c.pre_batch = to_int(k, v);
    else if (k == "pretrain.lr") c.pre_lr = to_double(k, v);
    else if (k == "aug.jitter_sigma") c.jitter_sigma = to_double(k, v);
    else if (k == "aug.jitter_clip") c.jitter_clip = to_double(k, v);
    else if (k == "aug.rotate") c.rotate = to_bool(k, v);
    else if (k == "eval.episodes") c.eval_episodes = to_int(k, v);
    else if (k == "eval.seed") c.eval_seed = to_u64(k, v);
    else if (k == "eval.record_timing") c.eval_record_timing = to_bool(k, v);
    else if (k == "miou.include_bg") c.miou_include_bg = to_bool(k, v);
    else throw PcfssError("config: unknown key '" + k + "'");
  }

  // range validation, one explicit error per key
  check_choice("predictor", c.predictor, {"proto", "mpti"});
  check_choice("protos.mode", c.protos_mode, {"auto", "single", "multi"});
  check_choice("extractor.head", c.ext_head, {"auto", "linear", "attention"});
  check_choice("bpa.filter", c.bpa_filter, {"gate", "subtract", "projector"});
  check_choice("bpa.corr", c.bpa_corr, {"paper", "no_fg", "mlp"});
  check_choice("hr.mode", c.hr_mode, {"kl", "l1", "l2"});
  require(c.split == 0 || c.split == 1, "config: split must be 0 or 1");
  require(c.n_way >= 1, "config: n_way must be >= 1");
  require(c.k_shot >= 1, "config: k_shot must be >= 1");
  require(c.t_query >= 1, "config: t_query must be >= 1");
  require(c.n_s >= 1 && c.n_q >= 1, "config: prototype counts must be >= 1");
  require(!c.ext_widths.empty(), "config: extractor.widths must be nonempty");
  for (int w : c.ext_widths)
    require(w >= 1, "config: extractor.widths entries must be >= 1");
  require(c.ext_k >= 1, "config: extractor.k must be >= 1");
  require(c.ext_dim >= 2, "config: extractor.dim must be >= 2");
  require(c.hr_t_kl > 0, "config: hr.t_kl must be > 0");
  require(c.hr_lambda_kl >= 0, "config: hr.lambda_kl must be >= 0");
  require(c.t_ce > 0, "config: predict.t must be > 0");
  require(c.alpha >= 0 && c.alpha < 1, "config: prop.alpha must be in [0,1)");
  require(c.graph_k >= 1, "config: prop.k must be >= 1");
  require(c.iters >= 1, "config: train.iters must be >= 1");
  require(c.lr_extractor > 0 && c.lr_rest > 0, "config: learning rates must be > 0");
  require(c.halve_every >= 1, "config: train.halve_every must be >= 1");
  require(c.min_class_points >= 1, "config: train.min_class_points must be >= 1");
  require(c.pre_epochs >= 0, "config: pretrain.epochs must be >= 0");
  require(c.pre_batch >= 1, "config: pretrain.batch must be >= 1");
  require(c.pre_lr > 0, "config: pretrain.lr must be > 0");
  require(c.jitter_sigma >= 0, "config: aug.jitter_sigma must be >= 0");
  require(c.jitter_clip >= 0, "config: aug.jitter_clip must be >= 0");
  require(c.eval_episodes >= 1, "config: eval.episodes must be >= 1");
  return c;
}

std::map<std::string, std::string> config_to_kv(const TrainConfig& c) {
  auto fmt = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  std::map<std::string, std::string> kv;
  kv["seed"] = std::to_string(c.seed);
  kv["data.dir"] = c.data_dir;
  kv["split"] = std::to_string(c.split);
  kv["predictor"] = c.predictor;
  kv["n_way"] = std::to_string(c.n_way);
  kv["k_shot"] = std::to_string(c.k_shot);
  kv["t_query"] = std::to_string(c.t_query);
  kv["protos.mode"] = c.protos_mode;
  kv["protos.n_s"] = std::to_string(c.n_s);
  kv["protos.n_q"] = std::to_string(c.n_q);
  {
    std::string w;
    for (size_t i = 0; i < c.ext_widths.size(); ++i)
      w += (i ? "," : "") + std::to_string(c.ext_widths[i]);
    kv["extractor.widths"] = w;
  }
  kv["extractor.k"] = std::to_string(c.ext_k);
  kv["extractor.dim"] = std::to_string(c.ext_dim);
  kv["extractor.head"] = c.ext_head;
  kv["bpa.enabled"] = c.bpa_enabled ? "true" : "false";
  kv["bpa.use_c1"] = c.bpa_use_c1 ? "true" : "false";
  kv["bpa.use_g"] = c.bpa_use_g ? "true" : "false";
  kv["bpa.use_r"] = c.bpa_use_r ? "true" : "false";
  kv["bpa.apply_fg"] = c.bpa_apply_fg ? "true" : "false";
  kv["bpa.filter"] = c.bpa_filter;
  kv["bpa.corr"] = c.bpa_corr;
  kv["hr.enabled"] = c.hr_enabled ? "true" : "false";
  kv["hr.mode"] = c.hr_mode;
  kv["hr.t_kl"] = fmt(c.hr_t_kl);
  kv["hr.lambda_kl"] = fmt(c.hr_lambda_kl);
  kv["predict.t"] = fmt(c.t_ce);
  kv["prop.alpha"] = fmt(c.alpha);
  kv["prop.k"] = std::to_string(c.graph_k);
  kv["prop.bandwidth"] = fmt(c.bandwidth);
  kv["train.iters"] = std::to_string(c.iters);
  kv["train.lr_extractor"] = fmt(c.lr_extractor);
  kv["train.lr_rest"] = fmt(c.lr_rest);
  kv["train.halve_every"] = std::to_string(c.halve_every);
  kv["train.min_class_points"] = std::to_string(c.min_class_points);
  kv["pretrain.epochs"] = std::to_string(c.pre_epochs);
  kv["pretrain.batch"] = std::to_string(c.pre_batch);
  kv["pretrain.lr"] = fmt(c.pre_lr);
  kv["aug.jitter_sigma"] = fmt(c.jitter_sigma);
  kv["aug.jitter_clip"] = fmt(c.jitter_clip);
  kv["aug.rotate"] = c.rotate ? "true" : "false";
  kv["eval.episodes"] = std::to_string(c.eval_episodes);
  kv["eval.seed"] = std::to_string(c.eval_seed);
  kv["eval.record_timing"] = c.eval_record_timing ? "true" : "false";
  kv["miou.include_bg"] = c.miou_include_bg ? "true" : "false";
  return kv;
}

std::string config_to_text(const TrainConfig& c) {
  std::string out;
  for (const auto& [k, v] : config_to_kv(c)) out += k + "=" + v + "\n";
  return out;
}

}  // namespace pcfss
