#include "tagg/blocks.hpp"

#include <cmath>

namespace tagg {

namespace {

Rng no_rng;  // dropout is a no-op in eval mode; keeps call sites simple

Rng& fwd_rng(const Fwd& fwd) { return fwd.rng ? *fwd.rng : no_rng; }

void check_feat(const Tensor& m, int feat_dim, const char* what) {
  if (m.rank() != 2 || m.extent(0) != feat_dim) {
    throw DimError(std::string(what) + ": expected feature dim " + std::to_string(feat_dim) +
                   ", got " + shape_str(m.shape()));
  }
}

}  // namespace

NlbMode nlb_mode_from_string(const std::string& s) {
  if (s == "attention") return NlbMode::kAttention;
  if (s == "concat_linear") return NlbMode::kConcatLinear;
  throw ConfigError("unknown nlb mode '" + s + "'");
}

std::string nlb_mode_to_string(NlbMode m) {
  return m == NlbMode::kAttention ? "attention" : "concat_linear";
}

CbMode cb_mode_from_string(const std::string& s) {
  if (s == "full") return CbMode::kFull;
  if (s == "couple_ss_only") return CbMode::kCoupleSSOnly;
  if (s == "couple_rr_only") return CbMode::kCoupleRROnly;
  if (s == "concat_linear") return CbMode::kConcatLinear;
  throw ConfigError("unknown cb mode '" + s + "'");
}

std::string cb_mode_to_string(CbMode m) {
  switch (m) {
    case CbMode::kFull: return "full";
    case CbMode::kCoupleSSOnly: return "couple_ss_only";
    case CbMode::kCoupleRROnly: return "couple_rr_only";
    case CbMode::kConcatLinear: return "concat_linear";
  }
  return "full";
}

// --- NLB ----------------------------------------------------------------------

NlbParams NlbParams::create(int feat_dim, int attn_dim, double dropout_rate, NlbMode mode,
                            Rng& rng) {
  NlbParams p;
  p.mode = mode;
  p.dropout_rate = dropout_rate;
  p.feat_dim = feat_dim;
  p.attn_dim = attn_dim;
  if (mode == NlbMode::kAttention) {
    p.w_theta = xavier_uniform(feat_dim, attn_dim, rng);
    p.w_phi = xavier_uniform(feat_dim, attn_dim, rng);
    p.w_g = xavier_uniform(feat_dim, attn_dim, rng);
    // Small output-map init keeps the block near pass-through at the start
    // (residual + layer norm) while every parameter still receives gradient.
    p.w_out = scale(xavier_uniform(attn_dim, feat_dim, rng), 0.01);
  } else {
    p.fuse_w = xavier_uniform(feat_dim, 2 * feat_dim, rng);
    p.fuse_b = Tensor::zeros({feat_dim});
  }
  p.ln_in_gain = Tensor::full({feat_dim}, 1.0);
  p.ln_in_bias = Tensor::zeros({feat_dim});
  p.ln_out_gain = Tensor::full({feat_dim}, 1.0);
  p.ln_out_bias = Tensor::zeros({feat_dim});
  return p;
}

void NlbParams::visit(const std::string& prefix, const ParamVisitor& fn) {
  if (mode == NlbMode::kAttention) {
    fn(prefix + ".w_theta", w_theta);
    fn(prefix + ".w_phi", w_phi);
    fn(prefix + ".w_g", w_g);
    fn(prefix + ".w_out", w_out);
  } else {
    fn(prefix + ".fuse_w", fuse_w);
    fn(prefix + ".fuse_b", fuse_b);
  }
  fn(prefix + ".ln_in_gain", ln_in_gain);
  fn(prefix + ".ln_in_bias", ln_in_bias);
  fn(prefix + ".ln_out_gain", ln_out_gain);
  fn(prefix + ".ln_out_bias", ln_out_bias);
}

Tensor nlb_forward(const Tensor& context, const Tensor& query, const NlbParams& p,
                   const Fwd& fwd) {
  check_feat(context, p.feat_dim, "nlb context");
  check_feat(query, p.feat_dim, "nlb query");

  Tensor q_pos = transpose(query);    // Kq x D, raw query for the residual
  Tensor c_pos = transpose(context);  // Kc x D

  Tensor branch;
  if (p.mode == NlbMode::kAttention) {
    Tensor q_norm = layer_norm(q_pos, p.ln_in_gain, p.ln_in_bias);
    Tensor c_norm = layer_norm(c_pos, p.ln_in_gain, p.ln_in_bias);
    Tensor theta = matmul(q_norm, p.w_theta);  // Kq x d
    Tensor phi = matmul(c_norm, p.w_phi);      // Kc x d
    Tensor g = matmul(c_norm, p.w_g);          // Kc x d
    Tensor logits = scale(matmul(theta, transpose(phi)), 1.0 / std::sqrt(double(p.attn_dim)));
    Tensor attn = softmax(logits, 1);          // rows sum to 1 over context
    branch = matmul(matmul(attn, g), p.w_out); // Kq x D
  } else {
    Tensor ctx_pool = flatten_pool(context);                    // D
    Tensor both = concat({q_pos, tile_rows(ctx_pool, query.extent(1))}, 1);  // Kq x 2D
    branch = add_rowvec(matmul(both, transpose(p.fuse_w)), p.fuse_b);
  }
  Tensor out = layer_norm(add(q_pos, dropout(branch, p.dropout_rate, fwd.training, fwd_rng(fwd))),
                          p.ln_out_gain, p.ln_out_bias);
  return transpose(out);  // D x Kq
}

// --- CB -------------------------------------------------------------------------

CbParams CbParams::create(int feat_dim, int attn_dim, int hidden, double dropout_rate,
                          NlbMode nlb_mode, CbMode cb_mode, Rng& rng) {
  CbParams p;
  p.mode = cb_mode;
  p.feat_dim = feat_dim;
  p.hidden = hidden;
  if (cb_mode != CbMode::kConcatLinear) {
    p.nlb_self = NlbParams::create(feat_dim, attn_dim, dropout_rate, nlb_mode, rng);
  }
  if (cb_mode == CbMode::kFull) {
    p.nlb_cross = NlbParams::create(feat_dim, attn_dim, dropout_rate, nlb_mode, rng);
  }
  p.fuse_recent_w = xavier_uniform(hidden, 2 * feat_dim, rng);
  p.fuse_recent_b = Tensor::zeros({hidden});
  p.fuse_spanning_w = xavier_uniform(hidden, 2 * feat_dim, rng);
  p.fuse_spanning_b = Tensor::zeros({hidden});
  return p;
}

void CbParams::visit(const std::string& prefix, const ParamVisitor& fn) {
  if (mode != CbMode::kConcatLinear) nlb_self.visit(prefix + ".nlb_self", fn);
  if (mode == CbMode::kFull) nlb_cross.visit(prefix + ".nlb_cross", fn);
  fn(prefix + ".fuse_recent_w", fuse_recent_w);
  fn(prefix + ".fuse_recent_b", fuse_recent_b);
  fn(prefix + ".fuse_spanning_w", fuse_spanning_w);
  fn(prefix + ".fuse_spanning_b", fuse_spanning_b);
}

Tensor flatten_pool(const Tensor& snippets) { return max_over_axis(snippets, 1); }

Tensor fused_linear(const Tensor& w, const Tensor& b, const Tensor& x) {
  return relu(add(matmul(w, x), b));
}

std::pair<Tensor, Tensor> cb_forward(const Tensor& recent, const Tensor& spanning,
                                     const CbParams& p, const Fwd& fwd) {
  check_feat(recent, p.feat_dim, "cb recent");
  check_feat(spanning, p.feat_dim, "cb spanning");

  Tensor r2, s2;
  switch (p.mode) {
    case CbMode::kFull: {
      Tensor s_att = nlb_forward(spanning, spanning, p.nlb_self, fwd);
      Tensor r_att = nlb_forward(s_att, recent, p.nlb_cross, fwd);
      Tensor r_pool = flatten_pool(r_att);
      r2 = fused_linear(p.fuse_recent_w, p.fuse_recent_b,
                        concat({r_pool, flatten_pool(recent)}, 0));
      s2 = fused_linear(p.fuse_spanning_w, p.fuse_spanning_b,
                        concat({r_pool, flatten_pool(s_att)}, 0));
      break;
    }
    case CbMode::kCoupleSSOnly: {
      Tensor s_att = nlb_forward(spanning, spanning, p.nlb_self, fwd);
      Tensor r_pool = flatten_pool(recent);
      Tensor s_pool = flatten_pool(s_att);
      r2 = fused_linear(p.fuse_recent_w, p.fuse_recent_b, concat({r_pool, r_pool}, 0));
      s2 = fused_linear(p.fuse_spanning_w, p.fuse_spanning_b, concat({s_pool, s_pool}, 0));
      break;
    }
    case CbMode::kCoupleRROnly: {
      Tensor r_att = nlb_forward(recent, recent, p.nlb_self, fwd);
      Tensor s_pool = flatten_pool(spanning);
      r2 = fused_linear(p.fuse_recent_w, p.fuse_recent_b,
                        concat({flatten_pool(r_att), flatten_pool(recent)}, 0));
      s2 = fused_linear(p.fuse_spanning_w, p.fuse_spanning_b, concat({s_pool, s_pool}, 0));
      break;
    }
    case CbMode::kConcatLinear: {
      Tensor both = concat({flatten_pool(recent), flatten_pool(spanning)}, 0);
      r2 = fused_linear(p.fuse_recent_w, p.fuse_recent_b, both);
      s2 = fused_linear(p.fuse_spanning_w, p.fuse_spanning_b, both);
      break;
    }
  }
  return {r2, s2};
}

// --- TAB ------------------------------------------------------------------------

TabParams TabParams::create(int n_scales, int feat_dim, int attn_dim, int hidden,
                            double dropout_rate, NlbMode nlb_mode, CbMode cb_mode, Rng& rng) {
  TabParams p;
  p.hidden = hidden;
  for (int s = 0; s < n_scales; ++s) {
    p.cbs.push_back(
        CbParams::create(feat_dim, attn_dim, hidden, dropout_rate, nlb_mode, cb_mode, rng));
  }
  p.fuse_recent_w = xavier_uniform(hidden, n_scales * hidden, rng);
  p.fuse_recent_b = Tensor::zeros({hidden});
  return p;
}

void TabParams::visit(const std::string& prefix, const ParamVisitor& fn) {
  for (size_t s = 0; s < cbs.size(); ++s) {
    cbs[s].visit(prefix + ".cb" + std::to_string(s), fn);
  }
  fn(prefix + ".fuse_recent_w", fuse_recent_w);
  fn(prefix + ".fuse_recent_b", fuse_recent_b);
}

std::pair<Tensor, Tensor> tab_forward(const Tensor& recent, const std::vector<Tensor>& spanning,
                                      const TabParams& p, const Fwd& fwd) {
  if (spanning.size() != p.cbs.size()) {
    throw ConfigError("tab_forward: " + std::to_string(spanning.size()) +
                      " spanning scales vs " + std::to_string(p.cbs.size()) + " coupling blocks");
  }
  std::vector<Tensor> r2s, s2_rows;
  for (size_t s = 0; s < spanning.size(); ++s) {
    auto [r2, s2] = cb_forward(recent, spanning[s], p.cbs[s], fwd);
    r2s.push_back(r2);
    s2_rows.push_back(reshape(s2, {1, p.hidden}));
  }
  Tensor r3 = fused_linear(p.fuse_recent_w, p.fuse_recent_b, concat(r2s, 0));
  Tensor s3 = spanning.size() == 1 ? reshape(s2_rows[0], {p.hidden})
                                   : max_over_axis(concat(s2_rows, 0), 0);
  return {r3, s3};
}

}  // namespace tagg
