#include "pcfss/neural.hpp"

#include <cmath>

namespace pcfss {

using ad::Tape;
using ad::Var;

// ---------------------------------------------------------------------------
// MLP

Mlp Mlp::create(ParamStore& store, const std::string& prefix,
                std::vector<int> widths, int group) {
  require(widths.size() >= 2, "Mlp: need at least input and output widths");
  for (size_t l = 0; l + 1 < widths.size(); ++l) {
    store.add_kaiming(prefix + ".lin" + std::to_string(l) + ".w", widths[l],
                      widths[l + 1], widths[l], group);
    store.add_zeros(prefix + ".lin" + std::to_string(l) + ".b", 1,
                    widths[l + 1], group);
  }
  return Mlp{prefix, std::move(widths)};
}

Var Mlp::forward(Tape& t, ParamStore& store, Var x, bool final_relu) const {
  require(t.val(x).cols() == widths.front(),
          prefix + ": input dim " + std::to_string(t.val(x).cols()) +
              " != " + std::to_string(widths.front()));
  Var h = x;
  for (size_t l = 0; l + 1 < widths.size(); ++l) {
    Var w = t.leaf_param(store.get(prefix + ".lin" + std::to_string(l) + ".w"));
    Var b = t.leaf_param(store.get(prefix + ".lin" + std::to_string(l) + ".b"));
    h = t.add_row_bias(t.matmul(h, w), b);
    if (l + 2 < widths.size() || final_relu) h = t.relu(h);
  }
  return h;
}

Var mlp_forward(Tape& t, ParamStore& store, Var x, const std::string& prefix,
                const std::vector<int>& widths, bool final_relu) {
  Mlp m{prefix, widths};
  return m.forward(t, store, x, final_relu);
}

// ---------------------------------------------------------------------------
// attention

AttentionParams AttentionParams::create(ParamStore& store,
                                        const std::string& prefix, int dim,
                                        int group) {
  require(dim >= 1, "AttentionParams: dim must be >= 1");
  store.add_kaiming(prefix + ".wq", dim, dim, dim, group);
  store.add_kaiming(prefix + ".wk", dim, dim, dim, group);
  store.add_kaiming(prefix + ".wv", dim, dim, dim, group);
  return AttentionParams{prefix, dim};
}

Var cross_attention_forward(Tape& t, ParamStore& store,
                            const AttentionParams& p, Var q_in, Var kv_in) {
  require(t.val(kv_in).rows() >= 1, "cross_attention: empty key/value input");
  require(t.val(q_in).cols() == p.dim && t.val(kv_in).cols() == p.dim,
          "cross_attention: feature dim mismatch");
  Var wq = t.leaf_param(store.get(p.prefix + ".wq"));
  Var wk = t.leaf_param(store.get(p.prefix + ".wk"));
  Var wv = t.leaf_param(store.get(p.prefix + ".wv"));
  Var q = t.matmul(q_in, wq);
  Var k = t.matmul(kv_in, wk);
  Var v = t.matmul(kv_in, wv);
  Var scores = t.scale(t.matmul_nt(q, k), 1.0 / std::sqrt(double(p.dim)));
  Var attn = t.softmax_rows(scores);
  return t.matmul(attn, v);
}

Var self_attention_forward(Tape& t, ParamStore& store,
                           const AttentionParams& p, Var f) {
  return t.add(f, cross_attention_forward(t, store, p, f, f));
}

// ---------------------------------------------------------------------------
// EdgeConv

Var edgeconv_forward(Tape& t, ParamStore& store, const Mlp& edge_mlp, Var f,
                     const NeighborIndex& neighbors) {
  const int n = static_cast<int>(t.val(f).rows());
  require(neighbors.indices.rows() == n, "edgeconv: neighbor row mismatch");
  require(neighbors.k >= 1, "edgeconv: empty neighbor rows");
  const int k = neighbors.k;

  std::vector<int> centers(static_cast<size_t>(n) * k);
  std::vector<int> nbrs(static_cast<size_t>(n) * k);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      centers[static_cast<size_t>(i) * k + j] = i;
      nbrs[static_cast<size_t>(i) * k + j] = neighbors.indices(i, j);
    }
  }
  Var fc = t.gather_rows(f, std::move(centers));
  Var fn = t.gather_rows(f, std::move(nbrs));
  Var edge_in = t.concat_cols(fc, t.sub(fn, fc));
  Var h = edge_mlp.forward(t, store, edge_in, /*final_relu=*/true);
  return t.group_rows_max(h, k);
}

// ---------------------------------------------------------------------------
// extractor

void ExtractorConfig::validate() const {
  require(!widths.empty(), "ExtractorConfig: widths must be nonempty");
  require(k >= 1, "ExtractorConfig: k must be >= 1");
  require(out_dim >= 2, "ExtractorConfig: out_dim must be >= 2");
}

Extractor Extractor::create(ParamStore& store, const std::string& prefix,
                            const ExtractorConfig& cfg) {
  cfg.validate();
  Extractor e;
  e.cfg = cfg;
  int d_in = 3;
  int skip_total = 0;
  for (size_t l = 0; l < cfg.widths.size(); ++l) {
    e.edge_mlps.push_back(
        Mlp::create(store, prefix + ".ec" + std::to_string(l),
                    {2 * d_in, cfg.widths[l]}, kGroupExtractor));
    d_in = cfg.widths[l];
    skip_total += cfg.widths[l];
  }
  e.head_proj = Mlp::create(store, prefix + ".head",
                            {skip_total, cfg.out_dim}, kGroupExtractor);
  e.head_attn = AttentionParams::create(store, prefix + ".attn", cfg.out_dim,
                                        kGroupExtractor);
  return e;
}

Var Extractor::forward(Tape& t, ParamStore& store, const Mat& coords) const {
  require(coords.cols() == 3, "Extractor: expects n x 3 coordinates");
  require(coords.rows() >= cfg.k + 1,
          "Extractor: needs at least k+1 points, got " +
              std::to_string(coords.rows()));
  Var f = t.leaf(coords, false);
  std::vector<Var> skips;
  for (size_t l = 0; l < edge_mlps.size(); ++l) {
    // dynamic graph: neighbors recomputed in the current feature space
    NeighborIndex nb = knn_indices(t.val(f), cfg.k, false);
    f = edgeconv_forward(t, store, edge_mlps[l], f, nb);
    skips.push_back(f);
  }
  Var cat = skips.size() == 1 ? skips[0] : [&] {
    Var c = skips[0];
    for (size_t i = 1; i < skips.size(); ++i) c = t.concat_cols(c, skips[i]);
    return c;
  }();
  Var out = head_proj.forward(t, store, cat);
  if (cfg.head == ExtractorConfig::Head::SelfAttention)
    out = self_attention_forward(t, store, head_attn, out);
  return out;
}

// ---------------------------------------------------------------------------
// finite-difference gradient check

GradCheckReport grad_check(ParamStore& store,
                           const std::function<Var(Tape&)>& build_loss,
                           double eps) {
  GradCheckReport rep;

  store.zero_grads();
  double base;
  {
    Tape t;
    Var loss = build_loss(t);
    base = t.val(loss)(0, 0);
    t.backward(loss);
  }
  if (!std::isfinite(base)) {
    rep.finite = false;
    return rep;
  }

  auto eval = [&]() {
    Tape t;
    return t.val(build_loss(t))(0, 0);
  };

  for (auto& p : store.all()) {
    if (!std::isfinite(p.grad.sum())) {
      rep.finite = false;
      rep.worst_param = p.name;
      return rep;
    }
    for (int i = 0; i < p.value.size(); ++i) {
      double saved = p.value.data()[i];
      p.value.data()[i] = saved + eps;
      double up = eval();
      p.value.data()[i] = saved - eps;
      double dn = eval();
      p.value.data()[i] = saved;
      double fd = (up - dn) / (2.0 * eps);
      double an = p.grad.data()[i];
      if (!std::isfinite(fd) || !std::isfinite(an)) {
        rep.finite = false;
        rep.worst_param = p.name;
        rep.worst_entry = i;
        return rep;
      }
      double rel =
          std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-3});
      if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        rep.worst_param = p.name;
        rep.worst_entry = i;
      }
    }
  }
  return rep;
}

}  // namespace pcfss
