// Attention stack: non-local blocks, coupling blocks, temporal aggregation.
//
// Snippet matrices are D x K (columns are snippets). Internally the blocks
// work position-major (K x D) so layer normalization runs over the feature
// axis. Every fusing linear layer is followed by ReLU; dropout is applied
// only inside the non-local block.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tagg/common.hpp"
#include "tagg/rng.hpp"
#include "tagg/tensor.hpp"

namespace tagg {

// Forward-pass context: training toggles dropout, rng feeds it.
struct Fwd {
  bool training = false;
  Rng* rng = nullptr;
};

// Visitation callback for parameter registration (checkpointing, Adam).
using ParamVisitor = std::function<void(const std::string&, Tensor&)>;

enum class NlbMode {
  kAttention,     // scaled dot-product attention
  kConcatLinear,  // ablation: concat(query col, max-pooled context) + linear
};
enum class CbMode {
  kFull,          // S' = NLB(S,S); R' = NLB(S',R); fuse both
  kCoupleSSOnly,  // ablation: only the S-S NLB
  kCoupleRROnly,  // ablation: only an R-R NLB
  kConcatLinear,  // ablation: no NLBs, fuse pooled R and S directly
};

NlbMode nlb_mode_from_string(const std::string& s);
std::string nlb_mode_to_string(NlbMode m);
CbMode cb_mode_from_string(const std::string& s);
std::string cb_mode_to_string(CbMode m);

struct NlbParams {
  // Attention path: D x d_attn maps, d_attn x D output map, layer norms on D.
  Tensor w_theta, w_phi, w_g, w_out;
  Tensor ln_in_gain, ln_in_bias, ln_out_gain, ln_out_bias;
  // Concat+linear replacement path: D x 2D map and bias.
  Tensor fuse_w, fuse_b;

  NlbMode mode = NlbMode::kAttention;
  double dropout_rate = 0.0;
  int feat_dim = 0;
  int attn_dim = 0;

  static NlbParams create(int feat_dim, int attn_dim, double dropout_rate, NlbMode mode,
                          Rng& rng);
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

// context: D x Kc, query: D x Kq -> D x Kq. Attention softmax runs over
// context positions; the residual comes from the raw query and the output is
// layer-normalized.
Tensor nlb_forward(const Tensor& context, const Tensor& query, const NlbParams& p, const Fwd& fwd);

struct CbParams {
  NlbParams nlb_self;   // spanning self-attention (recent in kCoupleRROnly)
  NlbParams nlb_cross;  // recent attending the attended spanning (kFull only)
  Tensor fuse_recent_w, fuse_recent_b;      // H x 2D, H
  Tensor fuse_spanning_w, fuse_spanning_b;  // H x 2D, H

  CbMode mode = CbMode::kFull;
  int feat_dim = 0;
  int hidden = 0;

  static CbParams create(int feat_dim, int attn_dim, int hidden, double dropout_rate,
                         NlbMode nlb_mode, CbMode cb_mode, Rng& rng);
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

// recent: D x K_R, spanning: D x K -> (R'': H, S'': H).
std::pair<Tensor, Tensor> cb_forward(const Tensor& recent, const Tensor& spanning,
                                     const CbParams& p, const Fwd& fwd);

struct TabParams {
  std::vector<CbParams> cbs;  // one per spanning scale
  Tensor fuse_recent_w, fuse_recent_b;  // H x (S*H), H

  int hidden = 0;

  static TabParams create(int n_scales, int feat_dim, int attn_dim, int hidden,
                          double dropout_rate, NlbMode nlb_mode, CbMode cb_mode, Rng& rng);
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

// recent: D x K_R plus the whole spanning bank -> (R''': H, S''': H).
// R''' fuses the per-scale R'' by concat + linear; S''' is the elementwise
// max over the per-scale S''.
std::pair<Tensor, Tensor> tab_forward(const Tensor& recent, const std::vector<Tensor>& spanning,
                                      const TabParams& p, const Fwd& fwd);

// max over the snippet axis of a D x K matrix -> D vector.
Tensor flatten_pool(const Tensor& snippets);

// y = relu(W x + b) for rank-1 x.
Tensor fused_linear(const Tensor& w, const Tensor& b, const Tensor& x);

}  // namespace tagg
