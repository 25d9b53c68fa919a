#pragma once

#include <map>
#include <string>
#include <vector>

#include "pcfss/common.hpp"
#include "pcfss/rng.hpp"

namespace pcfss {

// Label 0 is structural background (floor, walls, clutter) and never a
// few-shot target; ids 1..N index the class table.
struct ClassTable {
  std::vector<std::string> names;

  int id_of(const std::string& name) const;  // 1-based; throws when unknown
  int count() const { return static_cast<int>(names.size()); }
};

ClassTable synthetic_class_table();  // 12 primitive shape classes
ClassTable s3dis_class_table();
ClassTable scannet_class_table();

struct SplitSpec {
  int id = 0;
  std::vector<int> train_classes;
  std::vector<int> test_classes;
};

// Synthetic tables alternate: even table indices test in split 0, odd in
// split 1. The published S3DIS/ScanNet lists are used verbatim when the
// table's names match those datasets.
SplitSpec split_classes(const ClassTable& table, int split_id);

// One sampled scene window. Coordinates are snapped to 9 significant decimal
// digits at construction so the text block format round-trips bitwise.
struct PointBlock {
  Mat coords;               // n x 3, block frame (x,y recentered)
  Mat color;                // n x 3 in [0,1], or 0x0 when absent
  std::vector<int> labels;  // global ids; 0 = structural background
  std::string id;
  std::map<int, int> class_counts;

  int size() const { return static_cast<int>(coords.rows()); }
  bool has_color() const { return color.size() > 0; }
  void recount();
};

double snap9(double v);  // decimal round-trip through %.9g

struct SceneConfig {
  double room_x = 6.0, room_y = 6.0, room_z = 3.0;
  int min_instances = 3, max_instances = 8;
  double clutter_density = 0.3;    // expected clutter blobs per m^2
  double noise = 0.005;            // gaussian surface noise, meters
  int points_per_instance = 384;   // mean surface samples per instance
  double floor_density = 220.0;    // points per m^2
  double wall_density = 40.0;      // points per m^2
  int n_classes = 12;

  void validate() const;
};

struct Scene {
  Mat coords;
  std::vector<int> labels;
  // instance centers, for emitting class-rich blocks
  std::vector<std::pair<double, double>> instance_xy;
  std::vector<int> instance_class;
};

Scene generate_scene(const SceneConfig& cfg, Rng& rng);

// Fixed-window sample: errors when the window holds fewer than n_points.
PointBlock sample_block(const Scene& scene, double origin_x, double origin_y,
                        double size_m, int n_points, Rng& rng);
// Random windows with bounded retries before giving up.
PointBlock sample_block_random(const Scene& scene, double size_m,
                               int n_points, Rng& rng, int max_retries = 50);

struct Episode {
  int n_way = 1, k_shot = 1;
  std::vector<int> class_ids;                            // global, size N
  std::vector<std::vector<PointBlock>> support;          // [N][K]
  std::vector<std::vector<std::vector<int>>> support_mask;
  std::vector<PointBlock> query;                         // T blocks
  std::vector<std::vector<int>> query_mask;              // values 0..N
  uint64_t seed = 0;
};

class BlockPool {
 public:
  void add(PointBlock block) { blocks_.push_back(std::move(block)); }
  const std::vector<PointBlock>& blocks() const { return blocks_; }
  const ClassTable& classes() const { return table_; }
  void set_classes(ClassTable t) { table_ = std::move(t); }
  // indices of blocks holding at least min_count points of class_id
  std::vector<int> blocks_with_class(int class_id, int min_count) const;

  static BlockPool load(const std::string& manifest_dir);

 private:
  std::vector<PointBlock> blocks_;
  ClassTable table_;
};

// Samples N classes from the chosen side of the split, K support blocks per
// class (mask = labels == class) and T query blocks containing at least one
// episode class; query masks map episode classes to 1..N, all else to 0.
Episode sample_episode(const BlockPool& pool, const SplitSpec& split,
                       bool use_test_classes, int n_way, int k_shot,
                       int t_query, Rng& rng, int min_class_points);

// --- file formats ------------------------------------------------------------

// header: pcfss-block v1 n=<count> cols=<xyz|xyzrgb>
// body:   x y z [r g b] label   (one point per line, %.9g)
void write_block_file(const std::string& path, const PointBlock& block);
PointBlock load_block_file(const std::string& path);

struct GenConfig {
  int scenes = 24;
  int random_blocks_per_scene = 2;
  int points_per_block = 512;
  double block_size_m = 1.0;
  uint64_t seed = 1;
  SceneConfig scene;
};

// Emits blocks/*.txt plus manifest.json under dir.
void generate_dataset(const std::string& dir, const GenConfig& cfg);

}  // namespace pcfss
