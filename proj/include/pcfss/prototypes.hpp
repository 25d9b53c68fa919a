#pragma once

#include <string>
#include <vector>

#include "pcfss/common.hpp"
#include "pcfss/geometry.hpp"

namespace pcfss {

// Per-category prototype matrices: index 0 is the background category, 1..N
// the episode foreground classes. m rows per category (1 in single-prototype
// mode). A category whose source points were empty carries a zero prototype
// and a degeneracy flag.
struct PrototypeSet {
  enum class Source { Support, Query, Adapted };

  int n_way = 0;
  std::vector<Mat> protos;
  std::vector<char> degenerate;
  Source source = Source::Support;

  int categories() const { return static_cast<int>(protos.size()); }
  int dim() const { return protos.empty() ? 0 : int(protos[0].cols()); }
  int total_rows() const;
  // prefix offsets into the row-concatenated prototype matrix, one entry per
  // category boundary (size categories()+1)
  std::vector<int> offsets() const;
  Mat stacked() const;
};

struct MaskPoolResult {
  Vec fg;
  Vec bg;
  bool fg_empty = false;
  bool bg_empty = false;
};

// Masked means of the two sides of a binary mask; an empty side yields a zero
// vector plus its degeneracy flag.
MaskPoolResult mask_pool(const Mat& f, const std::vector<int>& y);

struct MergedShots {
  Mat features;
  std::vector<int> mask;
};

// Row-wise concatenation of K shots (features and masks), shot order kept.
MergedShots merge_shots(const std::vector<Mat>& features,
                        const std::vector<std::vector<int>>& masks);

// Which seed each category point ended up with.
struct SeedAssignment {
  std::vector<int> seed_rows;    // seed positions within the category subset
  std::vector<int> member_rows;  // original row index of each category point
  std::vector<int> assign;       // per category point: seed ordinal
  std::vector<int> counts;       // members per seed
};

struct MultiProtoResult {
  Mat prototypes;  // min(m, count) x d
  SeedAssignment assignment;
};

// FPS seeds over the masked rows of f, nearest-seed assignment (ties toward
// the lower seed ordinal), prototype = mean of assigned features. A seed that
// loses all its members to earlier duplicates keeps its own feature row.
MultiProtoResult multi_prototype_generate(const Mat& f,
                                          const std::vector<int>& y, int m,
                                          int start,
                                          const std::string& category_name);

// m x n pooling matrix carrying the mean weights of a seed assignment; the
// prototype matrix equals pooling * f for the full feature matrix.
Mat assignment_pooling(int n_total, const SeedAssignment& a);

// 1 x n pooling row for one side of a binary mask (zero row when the side is
// empty).
Mat mask_pooling_row(const std::vector<int>& y, int side);

struct FlattenedPrototypes {
  Mat bg;                    // m_bg x d
  Mat fg;                    // (sum of fg rows) x d
  std::vector<int> fg_rows;  // rows per foreground class, to un-flatten
};

FlattenedPrototypes flatten_for_bpa(const PrototypeSet& ps);
PrototypeSet unflatten_from_bpa(const FlattenedPrototypes& flat,
                                const PrototypeSet& original);

}  // namespace pcfss
