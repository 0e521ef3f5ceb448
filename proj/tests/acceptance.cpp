// Copyright 2026 The spurbench Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance gate. Ten end-to-end checks over the assembled toolkit, one
// PASS/FAIL line each with the measured values, nonzero exit if any fail.
// Tolerances and time budgets are pinned; do not loosen them to go green.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "spurbench/catalog.hpp"
#include "spurbench/embeddings.hpp"
#include "spurbench/episodes.hpp"
#include "spurbench/eval.hpp"
#include "spurbench/geometry.hpp"
#include "spurbench/heads.hpp"
#include "spurbench/heads_transductive.hpp"
#include "spurbench/loudness.hpp"
#include "spurbench/mixer.hpp"
#include "spurbench/resample.hpp"
#include "spurbench/rng.hpp"
#include "spurbench/runner.hpp"
#include "spurbench/waveform.hpp"

#include "episode_checker.hpp"

using namespace spurbench;

namespace {

using Vec = std::vector<double>;
using Mat = std::vector<std::vector<double>>;

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[768];
  std::snprintf(buf, sizeof buf, f, args...);
  return std::string(buf);
}

Eigen::VectorXd ev(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Vec to_vec(const Eigen::VectorXd& v) { return Vec(v.data(), v.data() + v.size()); }

double vdot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double vnorm(const Vec& a) { return std::sqrt(vdot(a, a)); }

Vec softmax_ref(Vec logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (auto& x : logits) {
    x = std::exp(x - m);
    z += x;
  }
  for (auto& x : logits) x /= z;
  return logits;
}

// Clustered synthetic episode, same recipe the head unit tests use.
ResolvedEpisode random_episode(int n_way, int k_shot, int n_query, int dim, std::uint64_t seed,
                               int n_frames = 0, double center_scale = 3.0, double noise = 0.5) {
  Rng rng(seed);
  std::vector<Eigen::VectorXd> centers;
  for (int c = 0; c < n_way; ++c) {
    Eigen::VectorXd m(dim);
    for (int i = 0; i < dim; ++i) m[i] = center_scale * rng.gaussian();
    centers.push_back(m);
  }
  ResolvedEpisode ep;
  ep.n_way = n_way;
  ep.dim = dim;
  const auto draw = [&](int label) {
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = centers[label][i] + noise * rng.gaussian();
    return v;
  };
  for (int c = 0; c < n_way; ++c) {
    for (int s = 0; s < k_shot; ++s) {
      ep.support.push_back(draw(c));
      ep.support_label.push_back(c);
      if (n_frames > 0) {
        std::vector<Eigen::VectorXd> rows;
        for (int f = 0; f < n_frames; ++f) rows.push_back(draw(c));
        ep.support_frames.push_back(rows);
      }
    }
  }
  for (int c = 0; c < n_way; ++c) {
    for (int q = 0; q < n_query; ++q) {
      ep.query.push_back(draw(c));
      ep.query_label.push_back(c);
      if (n_frames > 0) {
        std::vector<Eigen::VectorXd> rows;
        for (int f = 0; f < n_frames; ++f) rows.push_back(draw(c));
        ep.query_frames.push_back(rows);
      }
    }
  }
  return ep;
}

ResolvedEpisode positive_episode(int n_way, int k_shot, int n_query, int dim, std::uint64_t seed) {
  ResolvedEpisode ep = random_episode(n_way, k_shot, n_query, dim, seed);
  for (auto& s : ep.support) s = s.array().abs() + 0.1;
  for (auto& q : ep.query) q = q.array().abs() + 0.1;
  return ep;
}

double max_row_diff(const Mat& a, const Mat& b) {
  double md = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[i].size(); ++j) {
      md = std::max(md, std::abs(a[i][j] - b[i][j]));
    }
  }
  return md;
}

// ---------------------------------------------------------------------------
// criterion 1: re-measured loudness of the scaled background sits gamma_db
// below the foreground, within 0.5 LU, over 50 random tone/noise pairs.

bool c1(std::string& detail) {
  Timer t;
  Rng rng(1001);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double freq = 200.0 + 3300.0 * rng.uniform_real();
    const double fg_amp = 0.15 + 0.7 * rng.uniform_real();
    const double fg_dur = 3.0 + 4.0 * rng.uniform_real();
    const double bg_amp = 0.1 + 0.5 * rng.uniform_real();
    const double bg_dur = 2.0 + 6.0 * rng.uniform_real();
    const int bg_rate = i % 5 == 0 ? 44100 : 16000;
    const Waveform fg = make_sine(freq, fg_dur, 16000, fg_amp);
    const Waveform bg = make_noise(bg_dur, bg_rate, rng, bg_amp);

    MixParams p;  // alpha 1, gamma 8 LU
    const MixResult r = mix_pair(fg, bg, p);

    Waveform scaled = fit_duration(resample(bg, p.sample_rate), p.duration_s);
    for (auto& x : scaled.samples) x = static_cast<float>(x * r.bg_gain);
    const double remeasured = integrated_loudness(scaled).lufs;
    worst = std::max(worst, std::abs(remeasured - (r.fg_lufs - p.gamma_db)));
  }
  const double el = t.elapsed();
  detail = fmt("50 pairs, max |remeasured - (fg - 8)| = %.3f LU (limit 0.5), %.1fs (limit 30)",
               worst, el);
  return worst <= 0.5 && el < 30.0;
}

// criterion 2: a full-scale 997 Hz sine measures -3.01 LUFS within 0.1.

bool c2(std::string& detail) {
  const double l48 = integrated_loudness(make_sine(997.0, 5.0, 48000, 1.0)).lufs;
  const double l16 = integrated_loudness(make_sine(997.0, 5.0, 16000, 1.0)).lufs;
  detail = fmt("%.4f LUFS at 48 kHz, %.4f at 16 kHz (target -3.01 +/- 0.1)", l48, l16);
  return std::abs(l48 + 3.01) <= 0.1 && std::abs(l16 + 3.01) <= 0.1;
}

// criterion 3: alpha = 0 mixtures reduce to the peak-normalized foreground.

bool c3(std::string& detail) {
  Rng rng(1003);
  double worst = 0.0;
  const Waveform tone = make_sine(523.3, 4.2, 16000, 0.7);
  const Waveform hiss = make_noise(6.5, 16000, rng, 0.35);
  for (const Waveform& fg : {tone, hiss}) {
    const Waveform bg = make_noise(5.0, 16000, rng, 0.4);
    MixParams p;
    p.alpha = 0.0;
    const MixResult r = mix_pair(fg, bg, p);
    const Waveform expect = peak_normalize(fit_duration(resample(fg, p.sample_rate), p.duration_s));
    for (std::size_t i = 0; i < expect.samples.size(); ++i) {
      worst = std::max(worst, std::abs(static_cast<double>(r.mix.samples[i]) -
                                       static_cast<double>(expect.samples[i])));
    }
  }
  detail = fmt("max |mix - peak_normalized fg| = %.3g (limit 1e-6) over 2 foregrounds", worst);
  return worst < 1e-6;
}

// criterion 4: 10,000 sampled episodes per mode satisfy an independent
// brute-force re-verification of every episode invariant.

bool c4(std::string& detail) {
  Timer t;
  const PairingTable tstd = standard_pairing_table();
  const SplitAssignment sstd = assign_splits(tstd, true);
  const ClipPool pstd = synthetic_pool(tstd, sstd.test, 24);
  const PairingTable thard = hard_pairing_table();
  const SplitAssignment shard = assign_splits(thard, true);
  const ClipPool phard = synthetic_pool(thard, shard.test, 24);

  long checked = 0;
  int mode_idx = 0;
  for (const EpisodeMode mode : {EpisodeMode::iid, EpisodeMode::ood, EpisodeMode::hard_ood,
                                 EpisodeMode::clean_query}) {
    const bool hard = mode == EpisodeMode::hard_ood;
    const PairingTable& table = hard ? thard : tstd;
    const SplitAssignment& split = hard ? shard : sstd;
    const ClipPool& pool = hard ? phard : pstd;
    for (int i = 0; i < 10000; ++i) {
      EpisodeSpec spec;
      spec.mode = mode;
      spec.k_shot = i % 2 == 0 ? 1 : 5;
      spec.seed = derive_rng(4242 + static_cast<std::uint64_t>(mode_idx),
                             static_cast<std::uint64_t>(i));
      const Episode ep = sample_episode(table, split, spec, pool);
      const std::string verdict = spurbench_test::check_episode(ep, table, split, spec, pool);
      if (!verdict.empty()) {
        detail = fmt("mode %s episode %d rejected: %s", to_string(mode).c_str(), i,
                     verdict.c_str());
        return false;
      }
      ++checked;
    }
    ++mode_idx;
  }
  const double el = t.elapsed();
  detail = fmt("%ld episodes across 4 modes, k alternating 1/5, %.1fs (limit 60)", checked, el);
  return el < 60.0;
}

// ---------------------------------------------------------------------------
// criterion 5: every classification head and the rank test agree with an
// independently coded oracle to 1e-6.

Mat protolp_oracle(const ResolvedEpisode& ep, const HeadConfig& cfg) {
  const std::size_t ns = ep.support.size(), nq = ep.query.size();
  const int dim = ep.dim;
  Vec support_mean(dim, 0.0), query_mean(dim, 0.0);
  for (const auto& s : ep.support) {
    for (int d = 0; d < dim; ++d) support_mean[d] += s[d];
  }
  for (auto& x : support_mean) x /= static_cast<double>(ns);
  for (const auto& q : ep.query) {
    for (int d = 0; d < dim; ++d) query_mean[d] += q[d];
  }
  for (auto& x : query_mean) x /= static_cast<double>(nq);

  Mat nodes;
  for (const auto& s : ep.support) {
    Vec v = to_vec(s);
    const double n = vnorm(v);
    for (auto& x : v) x /= n;
    nodes.push_back(v);
  }
  for (const auto& q : ep.query) {
    Vec v = to_vec(q);
    for (int d = 0; d < dim; ++d) v[d] = v[d] - query_mean[d] + support_mean[d];
    const double n = vnorm(v);
    for (auto& x : v) x /= n;
    nodes.push_back(v);
  }
  const std::size_t n = nodes.size();

  const auto sqdist = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (int d = 0; d < dim; ++d) {
      const double diff = nodes[i][d] - nodes[j][d];
      s += diff * diff;
    }
    return s;
  };
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(cfg.lp_knn), n - 1);
  std::vector<std::vector<std::size_t>> nbr(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) d.push_back({sqdist(i, j), j});
    }
    std::sort(d.begin(), d.end());
    for (std::size_t j = 0; j < kk; ++j) nbr[i].push_back(d[j].second);
  }
  double bandwidth = 0.0;
  std::size_t edges = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : nbr[i]) {
      bandwidth += sqdist(i, j);
      ++edges;
    }
  }
  bandwidth = std::max(bandwidth / static_cast<double>(edges), 1e-12);

  Mat W(n, Vec(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : nbr[i]) {
      const double w = std::exp(-sqdist(i, j) / (2.0 * bandwidth));
      W[i][j] = w;
      W[j][i] = w;
    }
  }
  Vec dinv(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (double x : W[i]) deg += x;
    dinv[i] = 1.0 / std::sqrt(std::max(deg, 1e-300));
  }
  Mat S(n, Vec(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) S[i][j] = dinv[i] * W[i][j] * dinv[j];
  }

  // Neumann series for (I - rho S)^{-1} Y, instead of a factorization.
  const int n_way = ep.n_way;
  Mat F(n, Vec(n_way, 0.0)), term(n, Vec(n_way, 0.0));
  for (std::size_t i = 0; i < ns; ++i) {
    F[i][ep.support_label[i]] = 1.0;
    term[i][ep.support_label[i]] = 1.0;
  }
  for (int it = 0; it < 20000; ++it) {
    Mat next(n, Vec(n_way, 0.0));
    double mag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (int c = 0; c < n_way; ++c) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += cfg.lp_rho * S[i][j] * term[j][c];
        next[i][c] = s;
        F[i][c] += s;
        mag = std::max(mag, std::abs(s));
      }
    }
    term = std::move(next);
    if (mag < 1e-15) break;
  }

  Mat out;
  for (std::size_t i = 0; i < nq; ++i) {
    Vec row(n_way);
    double sum = 0.0;
    for (int c = 0; c < n_way; ++c) {
      row[c] = std::max(F[ns + i][c], 0.0);
      sum += row[c];
    }
    for (auto& x : row) x /= sum;
    out.push_back(row);
  }
  return out;
}

// Alternating row/column normalization in plain arrays. Returns false if the
// balancing never reaches the tolerance.
bool bpa_oracle(const ResolvedEpisode& ep, const HeadConfig& cfg, Mat& out) {
  const std::size_t ns = ep.support.size(), nq = ep.query.size();
  const std::size_t n = ns + nq;
  Mat items;
  for (const auto& s : ep.support) {
    Vec v = to_vec(s);
    const double nn = vnorm(v);
    for (auto& x : v) x /= nn;
    items.push_back(v);
  }
  for (const auto& q : ep.query) {
    Vec v = to_vec(q);
    const double nn = vnorm(v);
    for (auto& x : v) x /= nn;
    items.push_back(v);
  }
  Mat K(n, Vec(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) K[i][j] = std::exp(-(1.0 - vdot(items[i], items[j])) / cfg.sinkhorn_eps);
    }
  }
  double residual = 1.0;
  for (int it = 0; it < cfg.sinkhorn_iters && residual >= cfg.sinkhorn_tol; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (double x : K[i]) s += x;
      if (s > 0.0) {
        for (auto& x : K[i]) x /= s;
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += K[i][j];
      if (s > 0.0) {
        for (std::size_t i = 0; i < n; ++i) K[i][j] /= s;
      }
    }
    residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double rs = 0.0, cs = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        rs += K[i][j];
        cs += K[j][i];
      }
      residual = std::max({residual, std::abs(rs - 1.0), std::abs(cs - 1.0)});
    }
  }
  if (residual >= cfg.sinkhorn_tol) return false;

  const int n_way = ep.n_way;
  Mat protos(n_way, Vec(n, 0.0));
  std::vector<int> counts(n_way, 0);
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t j = 0; j < n; ++j) protos[ep.support_label[i]][j] += K[i][j];
    ++counts[ep.support_label[i]];
  }
  for (int c = 0; c < n_way; ++c) {
    for (auto& x : protos[c]) x /= counts[c];
  }
  out.clear();
  for (std::size_t i = 0; i < nq; ++i) {
    Vec logits(n_way);
    for (int c = 0; c < n_way; ++c) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double diff = K[ns + i][j] - protos[c][j];
        d2 += diff * diff;
      }
      logits[c] = -d2;
    }
    out.push_back(softmax_ref(logits));
  }
  return true;
}

Mat dn4_oracle(const ResolvedEpisode& ep, const HeadConfig& cfg) {
  Mat out;
  for (std::size_t qi = 0; qi < ep.query_frames.size(); ++qi) {
    Vec scores(static_cast<std::size_t>(ep.n_way), 0.0);
    for (const auto& d : ep.query_frames[qi]) {
      Vec dh = to_vec(d);
      const double dn = vnorm(dh);
      for (auto& x : dh) x /= dn;
      for (int c = 0; c < ep.n_way; ++c) {
        Vec sims;
        for (std::size_t si = 0; si < ep.support_frames.size(); ++si) {
          if (ep.support_label[si] != c) continue;
          for (const auto& s : ep.support_frames[si]) {
            Vec sh = to_vec(s);
            const double sn = vnorm(sh);
            for (auto& x : sh) x /= sn;
            sims.push_back(vdot(dh, sh));
          }
        }
        std::sort(sims.rbegin(), sims.rend());
        for (int j = 0; j < cfg.dn4_k && j < static_cast<int>(sims.size()); ++j) {
          scores[static_cast<std::size_t>(c)] += sims[j];
        }
      }
    }
    out.push_back(softmax_ref(scores));
  }
  return out;
}

double mw_oracle_p(const Vec& a, const Vec& b) {
  Vec pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t n = pooled.size();
  double observed = 0.0;
  for (double x : a) {
    for (double y : b) observed += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  }
  std::vector<int> mask(n, 0);
  for (std::size_t i = 0; i < a.size(); ++i) mask[i] = 1;
  std::sort(mask.begin(), mask.end());
  std::size_t total = 0, le = 0, ge = 0;
  do {
    Vec ga, gb;
    for (std::size_t i = 0; i < n; ++i) (mask[i] ? ga : gb).push_back(pooled[i]);
    double u = 0.0;
    for (double x : ga) {
      for (double y : gb) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
    }
    ++total;
    if (u <= observed + 1e-12) ++le;
    if (u >= observed - 1e-12) ++ge;
  } while (std::next_permutation(mask.begin(), mask.end()));
  const double p = 2.0 * std::min(static_cast<double>(le), static_cast<double>(ge)) /
                   static_cast<double>(total);
  return std::min(1.0, p);
}

bool c5(std::string& detail) {
  double md = 0.0;

  // Nearest-prototype softmax on a hand-solved fixture.
  {
    ResolvedEpisode ep;
    ep.n_way = 2;
    ep.dim = 2;
    ep.support = {ev({-1, 0}), ev({1, 0}), ev({2, 1}), ev({2, -1})};
    ep.support_label = {0, 0, 1, 1};
    ep.query = {ev({0.5, 0})};
    ep.query_label = {0};
    const Prediction p = classify_proto(ep);
    // Prototypes (0,0) and (2,0); logits -0.25 and -2.25.
    md = std::max(md, std::abs(p.posterior[0][0] - 0.8807970779778823));
  }

  // Local-descriptor head against exhaustive fully sorted pairing.
  {
    ResolvedEpisode ep = random_episode(3, 2, 3, 4, 55, 5);
    HeadConfig cfg;
    cfg.dn4_k = 3;
    md = std::max(md, max_row_diff(classify_dn4(ep, cfg).posterior, dn4_oracle(ep, cfg)));
  }

  // Label propagation (dense solve) against a series-expansion oracle.
  {
    ResolvedEpisode ep = random_episode(2, 2, 3, 3, 101);
    HeadConfig cfg;
    cfg.lp_rho = 0.9;
    cfg.lp_knn = 8;
    md = std::max(md, max_row_diff(classify_protolp(ep, cfg).posterior, protolp_oracle(ep, cfg)));
    ResolvedEpisode ep2 = random_episode(3, 2, 4, 4, 202);
    HeadConfig cfg2;
    cfg2.lp_rho = 0.5;
    cfg2.lp_knn = 4;
    md = std::max(md,
                  max_row_diff(classify_protolp(ep2, cfg2).posterior, protolp_oracle(ep2, cfg2)));
  }

  // Balanced affinity head against alternating row/column projections.
  {
    HeadConfig cfg;
    cfg.sinkhorn_iters = 500;
    for (std::uint64_t seed : {41ULL, 42ULL}) {
      ResolvedEpisode ep = seed == 41 ? positive_episode(2, 2, 3, 4, seed)
                                      : positive_episode(3, 1, 4, 5, seed);
      Mat expect;
      if (!bpa_oracle(ep, cfg, expect)) {
        detail = "alternating-projection oracle did not reach tolerance";
        return false;
      }
      md = std::max(md, max_row_diff(classify_bpa(ep, cfg).posterior, expect));
    }
  }

  // Rank-sum test against full permutation enumeration, with ties.
  {
    const Vec a = {1.0, 1.0, 2.0};
    const Vec b = {1.0, 2.0, 2.0};
    md = std::max(md, std::abs(mann_whitney_u(a, b).p - mw_oracle_p(a, b)));
    Rng rng(505);
    Vec ra, rb;
    for (int i = 0; i < 6; ++i) ra.push_back(std::round(rng.gaussian() * 2.0) / 2.0);
    for (int i = 0; i < 5; ++i) rb.push_back(std::round(rng.gaussian() * 2.0) / 2.0);
    md = std::max(md, std::abs(mann_whitney_u(ra, rb).p - mw_oracle_p(ra, rb)));
  }

  detail = fmt("max |implementation - oracle| = %.3g over five checks (limit 1e-6)", md);
  return md <= 1e-6;
}

// ---------------------------------------------------------------------------
// criterion 6: at the reference operating point, the magnitude-sensitive head
// loses at least 5 points between matched and swapped-background batches, the
// direction-only head at most 1.5, and under a batch-shared displacement the
// propagation head degrades no more than the direction-only head.

struct GapContext {
  PairingTable table;
  SplitAssignment split;
  ClipPool pool;
  std::vector<Episode> iid_eps, ood_eps;
};

GapContext build_gap_context(std::uint64_t seed, int n_episodes) {
  GapContext ctx;
  ctx.table = standard_pairing_table();
  ctx.split = assign_splits(ctx.table, true);
  ctx.pool = synthetic_pool(ctx.table, ctx.split.test, 200);
  const std::uint64_t twin_base = mix64(seed ^ kTwinSeedSalt);
  for (int i = 0; i < n_episodes; ++i) {
    EpisodeSpec spec;
    spec.n_way = 5;
    spec.k_shot = 5;
    spec.n_query = 10;
    spec.mode = EpisodeMode::iid;
    spec.seed = derive_rng(seed, static_cast<std::uint64_t>(i));
    ctx.iid_eps.push_back(sample_episode(ctx.table, ctx.split, spec, ctx.pool));
    ctx.ood_eps.push_back(ood_twin(ctx.iid_eps.back(), ctx.table, ctx.pool,
                                   derive_rng(twin_base, static_cast<std::uint64_t>(i))));
  }
  return ctx;
}

bool c6(std::string& detail) {
  Timer t;
  const std::uint64_t seed = 42;
  const GapContext ctx = build_gap_context(seed, 2000);

  ContractionParams params;
  params.model_seed = seed;
  const ContractionModel model = model_for_pool(ctx.pool, params);
  const EmbeddingSet emb = synth_embeddings(model, items_from_pool(ctx.pool), seed);

  EvalOptions opts;
  opts.jobs = 4;
  HeadConfig proto;
  HeadConfig cosine;
  cosine.kind = HeadKind::cosine;
  HeadConfig plp;
  plp.kind = HeadKind::protolp;

  const double d_proto = paired_gap_eval(ctx.iid_eps, ctx.ood_eps, proto, emb, opts).delta;
  const double d_cos = paired_gap_eval(ctx.iid_eps, ctx.ood_eps, cosine, emb, opts).delta;

  EvalOptions shifted = opts;
  shifted.pre_classify = make_shared_shift(model, derive_rng(seed, 777));
  const double s_plp = run_eval(ctx.iid_eps, plp, emb, opts).mean_acc -
                       run_eval(ctx.iid_eps, plp, emb, shifted).mean_acc;
  const double s_cos = run_eval(ctx.iid_eps, cosine, emb, opts).mean_acc -
                       run_eval(ctx.iid_eps, cosine, emb, shifted).mean_acc;

  const double el = t.elapsed();
  detail = fmt("proto gap %.2fpp (need >= 5), cosine gap %.2fpp (need <= 1.5), "
               "shared-shift drop: propagation %.2fpp <= cosine %.2fpp required, %.0fs (limit 300)",
               d_proto, d_cos, s_plp, s_cos, el);
  return d_proto >= 5.0 && d_cos <= 1.5 && s_plp <= s_cos && el < 300.0;
}

// criterion 7: the magnitude-sensitive gap is non-decreasing in the background
// weight; one adjacent inversion inside half its paired interval is tolerated.

bool c7(std::string& detail) {
  Timer t;
  const PairingTable table = standard_pairing_table();
  const SplitAssignment split = assign_splits(table, true);
  const ClipPool pool = synthetic_pool(table, split.test, 200);

  EpisodeSpec base;
  base.n_way = 5;
  base.k_shot = 5;
  base.n_query = 10;
  base.seed = 42;
  HeadConfig proto;
  ContractionParams params;
  params.model_seed = 42;
  const std::vector<double> strengths = {0.0, 0.1, 0.2, 0.3};
  const auto points = sweep_strengths(table, split, pool, base, proto, params, strengths, 2000, 4);

  int inversions = 0;
  bool within = true;
  std::string deltas;
  for (std::size_t i = 0; i < points.size(); ++i) {
    deltas += fmt(i ? " %.2f" : "%.2f", points[i].delta);
    if (i + 1 < points.size() && points[i].delta > points[i + 1].delta) {
      ++inversions;
      const double half_ci = 0.5 * std::sqrt(points[i + 1].ci_iid * points[i + 1].ci_iid +
                                             points[i + 1].ci_ood * points[i + 1].ci_ood);
      if (points[i].delta - points[i + 1].delta > half_ci) within = false;
    }
  }
  const double el = t.elapsed();
  detail = fmt("gaps over weights 0/0.1/0.2/0.3: %s pp, %d inversion(s), %.0fs", deltas.c_str(),
               inversions, el);
  return inversions <= 1 && within;
}

// criterion 8: geometry statistics at the operating point. The magnitude
// separation must already be overwhelming with only 500 vectors per slice;
// the angular drop is measured on larger slices (its single-realization
// noise at n = 500 is ~0.016, most of the 0.025 band) and must stay under
// the reporting floor for weights up to 0.05.

GeometryReport slice_report(double beta, int per_class, std::uint64_t base) {
  const std::vector<std::string> classes = {"c1", "c2", "c3", "c4", "c5"};
  const std::vector<std::string> bgs = {"b1", "b2", "b3", "b4"};
  ContractionParams params;
  params.beta = beta;
  params.model_seed = 7;
  const ContractionModel model(classes, bgs, params);
  std::map<std::string, Mat> clean_by_class, mixed_by_class;
  std::uint64_t idx = 0;
  for (const auto& cls : classes) {
    for (int i = 0; i < per_class; ++i) {
      Rng rng(derive_rng(base, idx++));
      const auto v = model.generate(cls, kNoBackground, rng);
      clean_by_class[cls].push_back(Vec(v.begin(), v.end()));
    }
    for (int i = 0; i < per_class; ++i) {
      Rng rng(derive_rng(base, idx++));
      const auto v = model.generate(cls, bgs[static_cast<std::size_t>(i) % bgs.size()], rng);
      mixed_by_class[cls].push_back(Vec(v.begin(), v.end()));
    }
  }
  return contraction_report(clean_by_class, mixed_by_class);
}

bool c8(std::string& detail) {
  const GeometryReport power = slice_report(0.02, 100, 900);
  const GeometryReport ang02 = slice_report(0.02, 800, 901);
  const GeometryReport ang05 = slice_report(0.05, 800, 902);
  detail = fmt("magnitude p %.2g at n = %zu (need < 1e-6); cosine diff %.4f at beta 0.02, "
               "%.4f at 0.05 over %zu per slice (need < 0.025)",
               power.magnitude.p, power.n_clean, ang02.cosine_diff, ang05.cosine_diff,
               ang02.n_clean);
  return power.n_clean == 500 && power.n_mixed == 500 && power.magnitude.p < 1e-6 &&
         ang02.cosine_diff < 0.025 && ang05.cosine_diff < 0.025;
}

// criterion 9: rerunning the command line from a saved run.json reproduces
// every output byte for byte.

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return "<missing " + p.string() + ">";
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool c9(std::string& detail) {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "spurbench_accept_rerun";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path a = root / "a", b = root / "b", c = root / "c", d = root / "d";

  // The runner narrates on stdout; keep the gate's transcript clean.
  std::ostringstream sink;
  std::streambuf* saved = std::cout.rdbuf(sink.rdbuf());
  int rc = cli::run_command({"eval", "--gap", "--episodes", "60", "--seed", "9",
                             "--out", a.string()});
  rc += cli::run_command({"eval", "--config", (a / "run.json").string(), "--out", b.string()});
  rc += cli::run_command({"sweep", "--episodes", "30", "--seed", "9", "--strengths", "0,0.2",
                          "--out", c.string()});
  rc += cli::run_command({"sweep", "--config", (c / "run.json").string(), "--out", d.string()});
  std::cout.rdbuf(saved);
  if (rc != 0) {
    detail = "a command exited nonzero";
    fs::remove_all(root);
    return false;
  }

  int same = 0, total = 0;
  std::string first_diff;
  const auto compare = [&](const fs::path& x, const fs::path& y) {
    ++total;
    if (slurp(x) == slurp(y)) {
      ++same;
    } else if (first_diff.empty()) {
      first_diff = x.filename().string();
    }
  };
  for (const char* f : {"report.csv", "report.json", "run.json"}) compare(a / f, b / f);
  for (const char* f : {"sweep.csv", "run.json"}) compare(c / f, d / f);
  fs::remove_all(root);

  if (same != total) {
    detail = fmt("%d/%d files identical; first difference in %s", same, total,
                 first_diff.c_str());
    return false;
  }
  detail = fmt("%d/%d replayed outputs byte-identical across eval and sweep", same, total);
  return true;
}

// criterion 10: the distribution distance is exactly zero on identical
// samples and matches a Monte-Carlo reference on displaced Gaussians.

bool c10(std::string& detail) {
  Rng rng(77);
  Mat X;
  for (int i = 0; i < 60; ++i) {
    Vec v(5);
    for (auto& x : v) x = rng.gaussian();
    X.push_back(v);
  }
  const double self = mmd_rbf(X, X).mmd;

  const int n = 800;
  const double h = 1.5, delta = 2.0;
  Rng grng(78);
  Mat GX, GY;
  for (int i = 0; i < n; ++i) {
    Vec x = {grng.gaussian(), grng.gaussian()};
    Vec y = {grng.gaussian() + delta, grng.gaussian()};
    GX.push_back(x);
    GY.push_back(y);
  }
  const double lib = mmd_rbf(GX, GY, h).mmd;

  // Fresh-draw Monte-Carlo estimate of the same V-statistic, including the
  // diagonal bias terms.
  Rng mc(79);
  const auto kernel = [&](double dx, double dy) {
    return std::exp(-(dx * dx + dy * dy) / (2.0 * h * h));
  };
  double kxx = 0.0, kyy = 0.0, kxy = 0.0;
  const int m = 400000;
  for (int i = 0; i < m; ++i) {
    const double x1a = mc.gaussian(), x1b = mc.gaussian();
    const double x2a = mc.gaussian(), x2b = mc.gaussian();
    const double y1a = mc.gaussian() + delta, y1b = mc.gaussian();
    const double y2a = mc.gaussian() + delta, y2b = mc.gaussian();
    kxx += kernel(x1a - x2a, x1b - x2b);
    kyy += kernel(y1a - y2a, y1b - y2b);
    kxy += kernel(x1a - y1a, x1b - y1b);
  }
  kxx /= m;
  kyy /= m;
  kxy /= m;
  const double reference = kxx + kyy - 2.0 * kxy + (1.0 - kxx) / n + (1.0 - kyy) / n;
  const double rel = std::abs(lib - reference) / reference;

  detail = fmt("self distance %.2g (limit 1e-9); displaced Gaussians %.4f vs reference %.4f, "
               "relative error %.3f (limit 0.05)",
               self, lib, reference, rel);
  return self <= 1e-9 && rel <= 0.05;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* what;
    bool (*fn)(std::string&);
  };
  const std::vector<Criterion> checks = {
      {1, "background scaled to sit gamma below the foreground", c1},
      {2, "full-scale 997 Hz sine measures -3.01 LUFS", c2},
      {3, "alpha 0 mixtures equal the peak-normalized foreground", c3},
      {4, "sampled episodes satisfy the brute-force checker", c4},
      {5, "heads and rank test match independent oracles", c5},
      {6, "head gaps at the reference operating point", c6},
      {7, "gap grows with the background weight", c7},
      {8, "magnitude separates while angles barely move", c8},
      {9, "saved configs replay byte-identically", c9},
      {10, "distribution distance is calibrated", c10},
  };
  bool all = true;
  for (const auto& c : checks) {
    std::string detail;
    bool ok = false;
    try {
      ok = c.fn(detail);
    } catch (const std::exception& e) {
      detail = fmt("exception: %s", e.what());
    }
    std::printf("%s criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", c.id, c.what, detail.c_str());
    std::fflush(stdout);
    all = all && ok;
  }
  std::printf("%s\n", all ? "acceptance: 10/10 criteria passed"
                          : "acceptance: at least one criterion failed");
  return all ? 0 : 1;
}
