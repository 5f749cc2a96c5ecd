// Straight-line dense oracle for the attention blocks: an independent
// re-derivation of the block math with flat loops over std::vector<double>.
// Matrices here are row-major position x feature (the transposed layout is
// applied explicitly).
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "tagg/blocks.hpp"

namespace tagg::oracle {
using namespace tagg;

using Mat = std::vector<std::vector<double>>;

inline Mat to_rows(const Tensor& dxk) {  // D x K -> K rows of D
  Mat m(static_cast<size_t>(dxk.extent(1)), std::vector<double>(static_cast<size_t>(dxk.extent(0))));
  for (int d = 0; d < dxk.extent(0); ++d)
    for (int k = 0; k < dxk.extent(1); ++k) m[static_cast<size_t>(k)][static_cast<size_t>(d)] = dxk.at({d, k});
  return m;
}

inline std::vector<double> ln_row(const std::vector<double>& x, const Tensor& gain, const Tensor& bias) {
  const int n = static_cast<int>(x.size());
  double mean = 0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  const double inv = 1.0 / std::sqrt(var + 1e-5);
  std::vector<double> y(x.size());
  for (int i = 0; i < n; ++i)
    y[static_cast<size_t>(i)] = gain.at({i}) * ((x[static_cast<size_t>(i)] - mean) * inv) + bias.at({i});
  return y;
}

inline std::vector<double> apply_map(const std::vector<double>& x, const Tensor& w) {
  // x (len D) times a D x d map -> length d.
  std::vector<double> y(static_cast<size_t>(w.extent(1)), 0.0);
  for (int d = 0; d < w.extent(0); ++d)
    for (int a = 0; a < w.extent(1); ++a) y[static_cast<size_t>(a)] += x[static_cast<size_t>(d)] * w.at({d, a});
  return y;
}

// Returns both output (query-major rows of D) and attention rows.
struct NlbOut {
  Mat out;
  Mat attn;
};

inline NlbOut nlb(const Tensor& context, const Tensor& query, const NlbParams& p) {
  const Mat c = to_rows(context), q = to_rows(query);
  Mat cn, qn;
  for (const auto& row : c) cn.push_back(ln_row(row, p.ln_in_gain, p.ln_in_bias));
  for (const auto& row : q) qn.push_back(ln_row(row, p.ln_in_gain, p.ln_in_bias));

  Mat theta, phi, g;
  for (const auto& row : qn) theta.push_back(apply_map(row, p.w_theta));
  for (const auto& row : cn) phi.push_back(apply_map(row, p.w_phi));
  for (const auto& row : cn) g.push_back(apply_map(row, p.w_g));

  const double scale = 1.0 / std::sqrt(static_cast<double>(p.attn_dim));
  Mat attn(q.size(), std::vector<double>(c.size()));
  for (size_t i = 0; i < q.size(); ++i) {
    double mx = -1e300;
    for (size_t j = 0; j < c.size(); ++j) {
      double dot = 0;
      for (size_t a = 0; a < theta[i].size(); ++a) dot += theta[i][a] * phi[j][a];
      attn[i][j] = dot * scale;
      mx = std::max(mx, attn[i][j]);
    }
    double total = 0;
    for (size_t j = 0; j < c.size(); ++j) {
      attn[i][j] = std::exp(attn[i][j] - mx);
      total += attn[i][j];
    }
    for (size_t j = 0; j < c.size(); ++j) attn[i][j] /= total;
  }

  Mat out;
  for (size_t i = 0; i < q.size(); ++i) {
    std::vector<double> mix(theta[i].size(), 0.0);
    for (size_t j = 0; j < c.size(); ++j)
      for (size_t a = 0; a < mix.size(); ++a) mix[a] += attn[i][j] * g[j][a];
    std::vector<double> proj(q[i].size(), 0.0);
    for (size_t a = 0; a < mix.size(); ++a)
      for (size_t d = 0; d < proj.size(); ++d)
        proj[d] += mix[a] * p.w_out.at({static_cast<int>(a), static_cast<int>(d)});
    std::vector<double> res(q[i].size());
    for (size_t d = 0; d < res.size(); ++d) res[d] = q[i][d] + proj[d];
    out.push_back(ln_row(res, p.ln_out_gain, p.ln_out_bias));
  }
  return {out, attn};
}

inline std::vector<double> pool_cols_max(const Mat& rows) {  // max over positions
  std::vector<double> v = rows[0];
  for (size_t r = 1; r < rows.size(); ++r)
    for (size_t d = 0; d < v.size(); ++d) v[d] = std::max(v[d], rows[r][d]);
  return v;
}

inline std::vector<double> fuse(const Tensor& w, const Tensor& b, const std::vector<double>& x) {
  std::vector<double> y(static_cast<size_t>(w.extent(0)));
  for (int r = 0; r < w.extent(0); ++r) {
    double acc = b.at({r});
    for (int c = 0; c < w.extent(1); ++c) acc += w.at({r, c}) * x[static_cast<size_t>(c)];
    y[static_cast<size_t>(r)] = std::max(0.0, acc);
  }
  return y;
}

inline std::vector<double> cat(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> r = a;
  r.insert(r.end(), b.begin(), b.end());
  return r;
}

struct CbOut {
  std::vector<double> r2, s2;
};

inline CbOut cb(const Tensor& recent, const Tensor& spanning, const CbParams& p) {
  const NlbOut s_att = nlb(spanning, spanning, p.nlb_self);
  // Feed the D x K attended spanning back through the cross NLB as context.
  Tensor s_att_t = Tensor::zeros({recent.extent(0), static_cast<int>(s_att.out.size())});
  for (size_t k = 0; k < s_att.out.size(); ++k)
    for (size_t d = 0; d < s_att.out[k].size(); ++d)
      s_att_t.data()[d * s_att.out.size() + k] = s_att.out[k][d];
  const NlbOut r_att = nlb(s_att_t, recent, p.nlb_cross);

  const auto r_pool = pool_cols_max(r_att.out);
  CbOut out;
  out.r2 = fuse(p.fuse_recent_w, p.fuse_recent_b, cat(r_pool, pool_cols_max(to_rows(recent))));
  out.s2 = fuse(p.fuse_spanning_w, p.fuse_spanning_b, cat(r_pool, pool_cols_max(s_att.out)));
  return out;
}

struct TabOut {
  std::vector<double> r3, s3;
};

inline TabOut tab(const Tensor& recent, const std::vector<Tensor>& spanning, const TabParams& p) {
  std::vector<double> concat_r2;
  std::vector<std::vector<double>> s2s;
  for (size_t s = 0; s < spanning.size(); ++s) {
    CbOut c = cb(recent, spanning[s], p.cbs[s]);
    concat_r2 = cat(concat_r2, c.r2);
    s2s.push_back(c.s2);
  }
  TabOut out;
  out.r3 = fuse(p.fuse_recent_w, p.fuse_recent_b, concat_r2);
  out.s3 = s2s[0];
  for (size_t s = 1; s < s2s.size(); ++s)
    for (size_t d = 0; d < out.s3.size(); ++d) out.s3[d] = std::max(out.s3[d], s2s[s][d]);
  return out;
}

}  // namespace tagg::oracle
