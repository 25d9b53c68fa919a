#include "pcfss/bpa.hpp"

namespace pcfss {

using ad::Tape;
using ad::Var;

BpaModule BpaModule::create(ParamStore& store, const std::string& prefix,
                            int dim) {
  BpaModule m;
  m.dim = dim;
  m.attn = AttentionParams::create(store, prefix + ".attn", dim);
  m.gate = Mlp::create(store, prefix + ".gate", {dim, dim, dim});
  m.projector = Mlp::create(store, prefix + ".proj", {2 * dim, dim, dim});
  m.corr_mlp = Mlp::create(store, prefix + ".corr", {3 * dim, dim, dim});
  return m;
}

Var inclusive_correlation(Tape& t, ParamStore& store,
                          const AttentionParams& attn, Var p_bg, Var f_q) {
  return cross_attention_forward(t, store, attn, p_bg, f_q);
}

Var exclusive_correlation(Tape& t, ParamStore& store,
                          const AttentionParams& attn, Var p_bg, Var p_fg) {
  return cross_attention_forward(t, store, attn, p_bg, p_fg);
}

Var fg_filter(Tape& t, ParamStore& store, const BpaModule& m, Var r_q,
              Var r_s, BpaConfig::Filter mode) {
  switch (mode) {
    case BpaConfig::Filter::Gate: {
      Var gate = t.sigmoid(m.gate.forward(t, store, r_s));
      return t.mul(r_q, t.affine(gate, -1.0, 1.0));  // r_q * (1 - sigmoid)
    }
    case BpaConfig::Filter::Subtract:
      return t.sub(r_q, r_s);
    case BpaConfig::Filter::Projector:
      return m.projector.forward(t, store, t.concat_cols(r_q, r_s));
  }
  throw PcfssError("fg_filter: unknown mode");
}

Var rectify(Tape& t, ParamStore& store, const AttentionParams& attn, Var p_bg,
            Var r) {
  return cross_attention_forward(t, store, attn, p_bg, r);
}

Var BpaModule::adapt(Tape& t, ParamStore& store, Var p_bg, Var p_fg, Var f_q,
                     const BpaConfig& cfg) const {
  Var r_q = cfg.use_c1 ? inclusive_correlation(t, store, attn, p_bg, f_q)
                       : p_bg;
  Var r = r_q;
  switch (cfg.corr) {
    case BpaConfig::Corr::Paper:
      if (cfg.use_g) {
        Var r_s = exclusive_correlation(t, store, attn, p_bg, p_fg);
        r = fg_filter(t, store, *this, r_q, r_s, cfg.filter);
      }
      break;
    case BpaConfig::Corr::NoFg:
      break;  // correlation from the query features alone
    case BpaConfig::Corr::Mlp: {
      // The plain-MLP correlation has to bridge differing row counts, so the
      // query features and fg prototypes enter as their row means.
      const int m_bg = static_cast<int>(t.val(p_bg).rows());
      Var fq_mean = t.repeat_row(t.row_mean(f_q), m_bg);
      Var fg_mean = t.repeat_row(t.row_mean(p_fg), m_bg);
      Var joint = t.concat_cols(t.concat_cols(p_bg, fq_mean), fg_mean);
      r = corr_mlp.forward(t, store, joint);
      break;
    }
  }
  return cfg.use_r ? rectify(t, store, attn, p_bg, r) : r;
}

}  // namespace pcfss
