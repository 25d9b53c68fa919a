#include "pcfss/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pcfss/geometry.hpp"

namespace fs = std::filesystem;

namespace pcfss {

// ---------------------------------------------------------------------------
// class tables and splits

int ClassTable::id_of(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i) + 1;
  throw PcfssError("ClassTable: unknown class name '" + name + "'");
}

ClassTable synthetic_class_table() {
  return ClassTable{{"sphere", "box", "cylinder", "cone", "ridge", "torus",
                     "bracket", "wedge", "cross", "stairs", "pyramid",
                     "tube"}};
}

ClassTable s3dis_class_table() {
  return ClassTable{{"beam", "board", "bookcase", "ceiling", "chair", "column",
                     "door", "floor", "sofa", "table", "wall", "window"}};
}

ClassTable scannet_class_table() {
  return ClassTable{{"bathtub", "bed", "bookshelf", "cabinet", "chair",
                     "counter", "curtain", "desk", "door", "floor",
                     "otherfurniture", "picture", "refrigerator",
                     "show curtain", "sink", "sofa", "table", "toilet", "wall",
                     "window"}};
}

namespace {

bool same_names(const ClassTable& a, const ClassTable& b) {
  std::set<std::string> sa(a.names.begin(), a.names.end());
  std::set<std::string> sb(b.names.begin(), b.names.end());
  return sa == sb;
}

SplitSpec split_from_test_names(const ClassTable& table,
                                const std::vector<std::string>& test_names,
                                int split_id) {
  SplitSpec s;
  s.id = split_id;
  std::set<int> test_ids;
  for (const auto& n : test_names) test_ids.insert(table.id_of(n));
  for (int id = 1; id <= table.count(); ++id) {
    if (test_ids.count(id))
      s.test_classes.push_back(id);
    else
      s.train_classes.push_back(id);
  }
  return s;
}

const std::vector<std::string> kS3disTest0 = {"beam",    "board", "bookcase",
                                              "ceiling", "chair", "column"};
const std::vector<std::string> kS3disTest1 = {"door",  "floor", "sofa",
                                              "table", "wall",  "window"};
const std::vector<std::string> kScannetTest0 = {
    "otherfurniture", "picture", "refrigerator", "show curtain", "sink",
    "sofa",           "table",   "toilet",       "wall",         "window"};
const std::vector<std::string> kScannetTest1 = {
    "bathtub", "bed",     "bookshelf", "cabinet", "chair",
    "counter", "curtain", "desk",      "door",    "floor"};

}  // namespace

SplitSpec split_classes(const ClassTable& table, int split_id) {
  require(split_id == 0 || split_id == 1, "split_classes: split id must be 0 or 1");
  require(table.count() % 2 == 0, "split_classes: class count must be even");

  if (same_names(table, s3dis_class_table()))
    return split_from_test_names(table, split_id == 0 ? kS3disTest0 : kS3disTest1,
                                 split_id);
  if (same_names(table, scannet_class_table()))
    return split_from_test_names(
        table, split_id == 0 ? kScannetTest0 : kScannetTest1, split_id);

  // synthetic rule: even table indices test in split 0, odd in split 1
  SplitSpec s;
  s.id = split_id;
  for (int idx = 0; idx < table.count(); ++idx) {
    int id = idx + 1;
    bool test0 = (idx % 2 == 0);
    if ((split_id == 0) == test0)
      s.test_classes.push_back(id);
    else
      s.train_classes.push_back(id);
  }
  return s;
}

// ---------------------------------------------------------------------------
// blocks

double snap9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return std::strtod(buf, nullptr);
}

void PointBlock::recount() {
  class_counts.clear();
  for (int l : labels) class_counts[l] += 1;
}

// ---------------------------------------------------------------------------
// primitive surface samplers (canonical pose: footprint within ~[-0.5,0.5]^2,
// resting on z = 0)

namespace {

using Row = Eigen::RowVector3d;

Row sample_sphere(Rng& rng) {
  double x = rng.normal(), y = rng.normal(), z = rng.normal();
  double n = std::sqrt(x * x + y * y + z * z);
  if (n < 1e-12) return Row(0.5, 0, 0.5);
  return Row(0.5 * x / n, 0.5 * y / n, 0.5 + 0.5 * z / n);
}

Row sample_box_surface(Rng& rng, double hx, double hy, double hz) {
  double ax = hy * hz, ay = hx * hz, az = hx * hy;
  double u = rng.uniform() * (ax + ay + az);
  double s = rng.uniform() < 0.5 ? -1.0 : 1.0;
  double a = rng.uniform() * 2 - 1, b = rng.uniform() * 2 - 1;
  if (u < ax) return Row(s * hx, a * hy, hz + b * hz);
  if (u < ax + ay) return Row(a * hx, s * hy, hz + b * hz);
  return Row(a * hx, b * hy, hz + s * hz);
}

Row sample_box(Rng& rng) { return sample_box_surface(rng, 0.4, 0.4, 0.4); }

Row sample_cylinder(Rng& rng) {
  double r = 0.35, h = 0.9;
  double side_area = 2 * M_PI * r * h, cap_area = M_PI * r * r;
  double u = rng.uniform() * (side_area + 2 * cap_area);
  double th = rng.uniform(0, 2 * M_PI);
  if (u < side_area)
    return Row(r * std::cos(th), r * std::sin(th), rng.uniform(0, h));
  double rr = r * std::sqrt(rng.uniform());
  double z = (u < side_area + cap_area) ? 0.0 : h;
  return Row(rr * std::cos(th), rr * std::sin(th), z);
}

Row sample_cone(Rng& rng) {
  double r = 0.45, h = 0.9;
  double slant = std::sqrt(r * r + h * h);
  double lat_area = M_PI * r * slant, base_area = M_PI * r * r;
  double th = rng.uniform(0, 2 * M_PI);
  if (rng.uniform() * (lat_area + base_area) < lat_area) {
    double f = std::sqrt(rng.uniform());  // radius fraction, uniform on cone
    return Row(f * r * std::cos(th), f * r * std::sin(th), h * (1 - f));
  }
  double rr = r * std::sqrt(rng.uniform());
  return Row(rr * std::cos(th), rr * std::sin(th), 0.0);
}

Row sample_ridge(Rng& rng) {
  // tent: two slanted rectangles meeting along the y-axis apex line
  double w = 0.45, h = 0.7, len = 0.5;
  double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
  double f = rng.uniform();  // 0 at eave, 1 at apex
  return Row(side * w * (1 - f), rng.uniform(-len, len), h * f);
}

Row sample_torus(Rng& rng) {
  double R = 0.32, r = 0.13;
  // rejection on the major angle keeps the surface density uniform
  double th = rng.uniform(0, 2 * M_PI);
  double ph;
  for (;;) {
    ph = rng.uniform(0, 2 * M_PI);
    if (rng.uniform() * (R + r) <= R + r * std::cos(ph)) break;
  }
  double rad = R + r * std::cos(ph);
  return Row(rad * std::cos(th), rad * std::sin(th), r + r * std::sin(ph));
}

Row sample_bracket(Rng& rng) {
  // L-shape: upright slab plus a foot slab
  if (rng.uniform() < 0.55) {
    Row p = sample_box_surface(rng, 0.08, 0.35, 0.45);
    return Row(p.x() - 0.3, p.y(), p.z());
  }
  Row p = sample_box_surface(rng, 0.3, 0.35, 0.08);
  return Row(p.x() + 0.08, p.y(), p.z());
}

Row sample_wedge(Rng& rng) {
  // right-triangular prism: triangle in xz extruded along y
  double x, z;
  for (;;) {
    x = rng.uniform(0, 0.9);
    z = rng.uniform(0, 0.8);
    if (z <= 0.8 * (1 - x / 0.9)) break;  // keep the solid region, take faces
  }
  double face = rng.uniform();
  double y = rng.uniform(-0.3, 0.3);
  if (face < 0.34) return Row(x - 0.45, -0.3, z);
  if (face < 0.68) return Row(x - 0.45, 0.3, z);
  if (face < 0.84) return Row(x - 0.45, y, 0.0);  // base
  // hypotenuse face
  double f = rng.uniform();
  return Row(0.9 * f - 0.45, y, 0.8 * (1 - f));
}

Row sample_cross(Rng& rng) {
  if (rng.uniform() < 0.5) return sample_box_surface(rng, 0.45, 0.12, 0.3);
  return sample_box_surface(rng, 0.12, 0.45, 0.3);
}

Row sample_stairs(Rng& rng) {
  int step = rng.uniform_int(0, 2);
  Row p = sample_box_surface(rng, 0.15, 0.4, 0.13);
  return Row(p.x() - 0.3 + 0.3 * step, p.y(), p.z() + 0.26 * step);
}

Row sample_pyramid(Rng& rng) {
  double half = 0.45, h = 0.8;
  if (rng.uniform() < 0.25) {  // base
    return Row(rng.uniform(-half, half), rng.uniform(-half, half), 0.0);
  }
  int face = rng.uniform_int(0, 3);
  double u = rng.uniform(), v = rng.uniform();
  if (u + v > 1) {
    u = 1 - u;
    v = 1 - v;
  }
  Row a, b, apex(0, 0, h);
  switch (face) {
    case 0: a = Row(-half, -half, 0); b = Row(half, -half, 0); break;
    case 1: a = Row(half, -half, 0); b = Row(half, half, 0); break;
    case 2: a = Row(half, half, 0); b = Row(-half, half, 0); break;
    default: a = Row(-half, half, 0); b = Row(-half, -half, 0); break;
  }
  return a + u * (b - a) + v * (apex - a);
}

Row sample_tube(Rng& rng) {
  double r = 0.3, h = 0.9;
  double th = rng.uniform(0, 2 * M_PI);
  double rr = rng.uniform() < 0.8 ? r : 0.24;  // outer shell plus hints of inner
  return Row(rr * std::cos(th), rr * std::sin(th), rng.uniform(0, h));
}

Row sample_primitive(int class_id, Rng& rng) {
  switch (class_id) {
    case 1: return sample_sphere(rng);
    case 2: return sample_box(rng);
    case 3: return sample_cylinder(rng);
    case 4: return sample_cone(rng);
    case 5: return sample_ridge(rng);
    case 6: return sample_torus(rng);
    case 7: return sample_bracket(rng);
    case 8: return sample_wedge(rng);
    case 9: return sample_cross(rng);
    case 10: return sample_stairs(rng);
    case 11: return sample_pyramid(rng);
    default: return sample_tube(rng);
  }
}

}  // namespace

void SceneConfig::validate() const {
  require(room_x > 0 && room_y > 0 && room_z > 0, "SceneConfig: bad room extent");
  require(min_instances >= 1 && max_instances >= min_instances,
          "SceneConfig: bad instance range");
  require(n_classes >= 2 && n_classes <= 12, "SceneConfig: n_classes in [2,12]");
  require(clutter_density >= 0 && noise >= 0, "SceneConfig: negative density");
}

Scene generate_scene(const SceneConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<Row> pts;
  std::vector<int> labels;

  auto emit = [&](const Row& p, int label) {
    pts.push_back(p);
    labels.push_back(label);
  };

  // floor
  int n_floor = static_cast<int>(cfg.floor_density * cfg.room_x * cfg.room_y);
  for (int i = 0; i < n_floor; ++i)
    emit(Row(rng.uniform(0, cfg.room_x), rng.uniform(0, cfg.room_y), 0.0), 0);

  // walls
  int n_wall = static_cast<int>(cfg.wall_density * cfg.room_z *
                                2 * (cfg.room_x + cfg.room_y));
  for (int i = 0; i < n_wall; ++i) {
    double z = rng.uniform(0, cfg.room_z);
    int side = rng.uniform_int(0, 3);
    switch (side) {
      case 0: emit(Row(rng.uniform(0, cfg.room_x), 0.0, z), 0); break;
      case 1: emit(Row(rng.uniform(0, cfg.room_x), cfg.room_y, z), 0); break;
      case 2: emit(Row(0.0, rng.uniform(0, cfg.room_y), z), 0); break;
      default: emit(Row(cfg.room_x, rng.uniform(0, cfg.room_y), z), 0); break;
    }
  }

  Scene scene;

  // labeled instances
  int n_inst = rng.uniform_int(cfg.min_instances, cfg.max_instances);
  for (int k = 0; k < n_inst; ++k) {
    int cls = rng.uniform_int(1, cfg.n_classes);
    double scale = rng.uniform(0.35, 0.75);
    double margin = 0.6;
    double cx = rng.uniform(margin, cfg.room_x - margin);
    double cy = rng.uniform(margin, cfg.room_y - margin);
    double rot = rng.uniform(0, 2 * M_PI);
    double cr = std::cos(rot), sr = std::sin(rot);
    int n_pts = static_cast<int>(cfg.points_per_instance * rng.uniform(0.8, 1.25));
    for (int i = 0; i < n_pts; ++i) {
      Row p = sample_primitive(cls, rng) * scale;
      emit(Row(cx + cr * p.x() - sr * p.y(), cy + sr * p.x() + cr * p.y(),
               p.z()),
           cls);
    }
    scene.instance_xy.push_back({cx, cy});
    scene.instance_class.push_back(cls);
  }

  // clutter blobs, structural label
  int n_blobs = static_cast<int>(cfg.clutter_density * cfg.room_x * cfg.room_y);
  for (int b = 0; b < n_blobs; ++b) {
    double cx = rng.uniform(0.2, cfg.room_x - 0.2);
    double cy = rng.uniform(0.2, cfg.room_y - 0.2);
    double cz = rng.uniform(0.0, 0.4);
    int n_pts = rng.uniform_int(20, 60);
    for (int i = 0; i < n_pts; ++i)
      emit(Row(cx + rng.normal(0, 0.08), cy + rng.normal(0, 0.08),
               std::abs(cz + rng.normal(0, 0.06))),
           0);
  }

  scene.coords.resize(static_cast<int>(pts.size()), 3);
  for (size_t i = 0; i < pts.size(); ++i) {
    Row p = pts[i];
    if (cfg.noise > 0)
      p += Row(rng.normal(0, cfg.noise), rng.normal(0, cfg.noise),
               rng.normal(0, cfg.noise));
    scene.coords.row(static_cast<int>(i)) = p;
  }
  scene.labels = std::move(labels);
  return scene;
}

namespace {

std::vector<int> window_candidates(const Scene& scene, double ox, double oy,
                                   double size) {
  std::vector<int> idx;
  for (int i = 0; i < scene.coords.rows(); ++i) {
    double x = scene.coords(i, 0), y = scene.coords(i, 1);
    if (x >= ox && x < ox + size && y >= oy && y < oy + size)
      idx.push_back(i);
  }
  return idx;
}

// deterministic partial Fisher-Yates draw of n items
std::vector<int> draw_without_replacement(std::vector<int> items, int n,
                                          Rng& rng) {
  for (int i = 0; i < n; ++i) {
    int j = rng.uniform_int(i, static_cast<int>(items.size()) - 1);
    std::swap(items[i], items[j]);
  }
  items.resize(n);
  return items;
}

}  // namespace

PointBlock sample_block(const Scene& scene, double origin_x, double origin_y,
                        double size_m, int n_points, Rng& rng) {
  require(n_points >= 1, "sample_block: n_points must be >= 1");
  std::vector<int> cand = window_candidates(scene, origin_x, origin_y, size_m);
  require(static_cast<int>(cand.size()) >= n_points,
          "sample_block: window holds " + std::to_string(cand.size()) +
              " points, need " + std::to_string(n_points));
  std::vector<int> picked = draw_without_replacement(cand, n_points, rng);

  PointBlock b;
  b.coords.resize(n_points, 3);
  b.labels.resize(n_points);
  const double cx = origin_x + size_m / 2, cy = origin_y + size_m / 2;
  for (int i = 0; i < n_points; ++i) {
    b.coords(i, 0) = snap9(scene.coords(picked[i], 0) - cx);
    b.coords(i, 1) = snap9(scene.coords(picked[i], 1) - cy);
    b.coords(i, 2) = snap9(scene.coords(picked[i], 2));
    b.labels[i] = scene.labels[picked[i]];
  }
  b.recount();
  return b;
}

PointBlock sample_block_random(const Scene& scene, double size_m, int n_points,
                               Rng& rng, int max_retries) {
  double max_x = scene.coords.col(0).maxCoeff();
  double max_y = scene.coords.col(1).maxCoeff();
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    double ox = rng.uniform(0, std::max(max_x - size_m, 0.0));
    double oy = rng.uniform(0, std::max(max_y - size_m, 0.0));
    std::vector<int> cand = window_candidates(scene, ox, oy, size_m);
    if (static_cast<int>(cand.size()) >= n_points)
      return sample_block(scene, ox, oy, size_m, n_points, rng);
  }
  throw PcfssError("sample_block_random: no window with " +
                   std::to_string(n_points) + " points after " +
                   std::to_string(max_retries) + " retries");
}

// ---------------------------------------------------------------------------
// episodes

std::vector<int> BlockPool::blocks_with_class(int class_id,
                                              int min_count) const {
  std::vector<int> out;
  for (size_t i = 0; i < blocks_.size(); ++i) {
    auto it = blocks_[i].class_counts.find(class_id);
    if (it != blocks_[i].class_counts.end() && it->second >= min_count)
      out.push_back(static_cast<int>(i));
  }
  return out;
}

Episode sample_episode(const BlockPool& pool, const SplitSpec& split,
                       bool use_test_classes, int n_way, int k_shot,
                       int t_query, Rng& rng, int min_class_points) {
  require(n_way >= 1 && k_shot >= 1 && t_query >= 1,
          "sample_episode: bad N/K/T");
  const std::vector<int>& cls_pool =
      use_test_classes ? split.test_classes : split.train_classes;

  std::vector<int> usable;
  for (int c : cls_pool) {
    if (static_cast<int>(pool.blocks_with_class(c, min_class_points).size()) >=
        k_shot + t_query)
      usable.push_back(c);
  }
  require(static_cast<int>(usable.size()) >= n_way,
          "sample_episode: only " + std::to_string(usable.size()) +
              " classes have >= K+T eligible blocks, need " +
              std::to_string(n_way));

  Episode ep;
  ep.n_way = n_way;
  ep.k_shot = k_shot;
  ep.class_ids = draw_without_replacement(usable, n_way, rng);

  std::set<int> used;
  ep.support.resize(n_way);
  ep.support_mask.resize(n_way);
  for (int n = 0; n < n_way; ++n) {
    int cls = ep.class_ids[n];
    std::vector<int> eligible = pool.blocks_with_class(cls, min_class_points);
    std::vector<int> avail;
    for (int b : eligible)
      if (!used.count(b)) avail.push_back(b);
    require(static_cast<int>(avail.size()) >= k_shot,
            "sample_episode: class " + std::to_string(cls) +
                " has too few unused support blocks");
    std::vector<int> picked = draw_without_replacement(avail, k_shot, rng);
    for (int b : picked) {
      used.insert(b);
      const PointBlock& blk = pool.blocks()[b];
      std::vector<int> mask(blk.labels.size());
      for (size_t i = 0; i < blk.labels.size(); ++i)
        mask[i] = blk.labels[i] == cls ? 1 : 0;
      ep.support[n].push_back(blk);
      ep.support_mask[n].push_back(std::move(mask));
    }
  }

  std::set<int> query_cand_set;
  for (int cls : ep.class_ids)
    for (int b : pool.blocks_with_class(cls, min_class_points))
      if (!used.count(b)) query_cand_set.insert(b);
  std::vector<int> query_cand(query_cand_set.begin(), query_cand_set.end());
  require(static_cast<int>(query_cand.size()) >= t_query,
          "sample_episode: class " + std::to_string(ep.class_ids[0]) +
              ": too few query blocks");
  std::vector<int> q_picked = draw_without_replacement(query_cand, t_query, rng);
  for (int b : q_picked) {
    const PointBlock& blk = pool.blocks()[b];
    std::vector<int> mask(blk.labels.size(), 0);
    for (size_t i = 0; i < blk.labels.size(); ++i) {
      for (int n = 0; n < n_way; ++n)
        if (blk.labels[i] == ep.class_ids[n]) mask[i] = n + 1;
    }
    ep.query.push_back(blk);
    ep.query_mask.push_back(std::move(mask));
  }
  return ep;
}

// ---------------------------------------------------------------------------
// file formats

void write_block_file(const std::string& path, const PointBlock& block) {
  std::ofstream out(path);
  require(out.good(), "write_block_file: cannot open " + path);
  const bool rgb = block.has_color();
  out << "pcfss-block v1 n=" << block.size() << " cols="
      << (rgb ? "xyzrgb" : "xyz") << "\n";
  char buf[200];
  for (int i = 0; i < block.size(); ++i) {
    if (rgb)
      std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g %.9g %.9g %.9g %d\n",
                    block.coords(i, 0), block.coords(i, 1), block.coords(i, 2),
                    block.color(i, 0), block.color(i, 1), block.color(i, 2),
                    block.labels[i]);
    else
      std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g %d\n", block.coords(i, 0),
                    block.coords(i, 1), block.coords(i, 2), block.labels[i]);
    out << buf;
  }
  require(out.good(), "write_block_file: write failed for " + path);
}

namespace {

double parse_double(const std::string& tok, const std::string& path, int line) {
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size() || tok.empty())
    throw PcfssError(path + ":" + std::to_string(line) +
                     ": non-numeric token '" + tok + "'");
  return v;
}

int parse_int(const std::string& tok, const std::string& path, int line) {
  char* end = nullptr;
  long v = std::strtol(tok.c_str(), &end, 10);
  if (end != tok.c_str() + tok.size() || tok.empty())
    throw PcfssError(path + ":" + std::to_string(line) +
                     ": non-integer token '" + tok + "'");
  return static_cast<int>(v);
}

}  // namespace

PointBlock load_block_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "load_block_file: cannot open " + path);
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic, version, n_field, cols_field;
  hs >> magic >> version >> n_field >> cols_field;
  require(magic == "pcfss-block" && version == "v1",
          path + ":1: bad header '" + header + "'");
  require(n_field.rfind("n=", 0) == 0 && cols_field.rfind("cols=", 0) == 0,
          path + ":1: bad header fields");
  int n = parse_int(n_field.substr(2), path, 1);
  std::string cols = cols_field.substr(5);
  require(cols == "xyz" || cols == "xyzrgb", path + ":1: bad cols spec");
  const bool rgb = cols == "xyzrgb";

  PointBlock b;
  b.coords.resize(n, 3);
  if (rgb) b.color.resize(n, 3);
  b.labels.resize(n);

  std::string line;
  int row = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    require(row < n, path + ":" + std::to_string(line_no) +
                         ": more points than header n=" + std::to_string(n));
    std::istringstream ls(line);
    std::vector<std::string> toks;
    std::string t;
    while (ls >> t) toks.push_back(t);
    const size_t expect = rgb ? 7 : 4;
    require(toks.size() == expect,
            path + ":" + std::to_string(line_no) + ": expected " +
                std::to_string(expect) + " fields, got " +
                std::to_string(toks.size()));
    for (int c = 0; c < 3; ++c)
      b.coords(row, c) = parse_double(toks[c], path, line_no);
    if (rgb)
      for (int c = 0; c < 3; ++c)
        b.color(row, c) = parse_double(toks[3 + c], path, line_no);
    b.labels[row] = parse_int(toks.back(), path, line_no);
    ++row;
  }
  require(row == n, path + ": header says n=" + std::to_string(n) +
                        " but body has " + std::to_string(row) + " points");
  b.id = fs::path(path).stem().string();
  b.recount();
  return b;
}

// ---------------------------------------------------------------------------
// dataset generation and manifest

void generate_dataset(const std::string& dir, const GenConfig& cfg) {
  fs::create_directories(fs::path(dir) / "blocks");
  Rng master(cfg.seed);
  ClassTable table = synthetic_class_table();
  table.names.resize(cfg.scene.n_classes);

  nlohmann::json manifest;
  manifest["format"] = "pcfss-manifest v1";
  manifest["block_size_m"] = cfg.block_size_m;
  manifest["points_per_block"] = cfg.points_per_block;
  manifest["class_names"] = table.names;
  manifest["blocks"] = nlohmann::json::array();

  for (int s = 0; s < cfg.scenes; ++s) {
    Rng rng(master.fork_seed());
    Scene scene = generate_scene(cfg.scene, rng);
    std::vector<PointBlock> blocks;

    // one window per labeled instance, jittered around its center
    for (size_t k = 0; k < scene.instance_xy.size(); ++k) {
      auto [cx, cy] = scene.instance_xy[k];
      for (int attempt = 0; attempt < 5; ++attempt) {
        double ox = cx - cfg.block_size_m / 2 + rng.uniform(-0.15, 0.15);
        double oy = cy - cfg.block_size_m / 2 + rng.uniform(-0.15, 0.15);
        std::vector<int> cand = window_candidates(scene, ox, oy, cfg.block_size_m);
        if (static_cast<int>(cand.size()) >= cfg.points_per_block) {
          blocks.push_back(sample_block(scene, ox, oy, cfg.block_size_m,
                                        cfg.points_per_block, rng));
          break;
        }
      }
    }
    for (int r = 0; r < cfg.random_blocks_per_scene; ++r) {
      try {
        blocks.push_back(sample_block_random(scene, cfg.block_size_m,
                                             cfg.points_per_block, rng));
      } catch (const PcfssError&) {
        break;  // sparse scene, keep what we have
      }
    }

    for (size_t b = 0; b < blocks.size(); ++b) {
      char name[64];
      std::snprintf(name, sizeof(name), "s%03d_b%02d.txt", s,
                    static_cast<int>(b));
      blocks[b].id = fs::path(name).stem().string();
      std::string rel = std::string("blocks/") + name;
      write_block_file((fs::path(dir) / rel).string(), blocks[b]);
      nlohmann::json entry;
      entry["path"] = rel;
      nlohmann::json classes = nlohmann::json::object();
      for (auto& [cls, cnt] : blocks[b].class_counts)
        classes[std::to_string(cls)] = cnt;
      entry["classes"] = classes;
      manifest["blocks"].push_back(entry);
    }
  }

  std::ofstream out(fs::path(dir) / "manifest.json");
  require(out.good(), "generate_dataset: cannot write manifest");
  out << manifest.dump(2) << "\n";
}

BlockPool BlockPool::load(const std::string& manifest_dir) {
  fs::path dir(manifest_dir);
  std::ifstream in(dir / "manifest.json");
  require(in.good(), "BlockPool: cannot open manifest in " + manifest_dir);
  nlohmann::json manifest;
  in >> manifest;
  require(manifest.value("format", "") == "pcfss-manifest v1",
          "BlockPool: unsupported manifest format");

  BlockPool pool;
  ClassTable table;
  for (const auto& n : manifest["class_names"])
    table.names.push_back(n.get<std::string>());
  pool.set_classes(std::move(table));
  for (const auto& entry : manifest["blocks"]) {
    pool.add(load_block_file((dir / entry["path"].get<std::string>()).string()));
  }
  return pool;
}

}  // namespace pcfss
