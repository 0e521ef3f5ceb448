/**
 * Copyright 2026 The spurbench Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "spurbench/embeddings.hpp"
#include "spurbench/episodes.hpp"
#include "spurbench/heads_transductive.hpp"

namespace spurbench {

// Twin batches draw from a salted stream so they never collide with the
// primary episode stream for the same base seed.
inline constexpr std::uint64_t kTwinSeedSalt = 0x7477696E73ULL;

enum class Aggregate { episodes, seeds };

inline Aggregate aggregate_from_string(const std::string& s) {
  if (s == "episodes") return Aggregate::episodes;
  if (s == "seeds") return Aggregate::seeds;
  throw std::invalid_argument("unknown aggregate: " + s);
}

struct EvalReport {
  std::string head;
  std::string emb_id;
  std::string mode;
  int n_episodes = 0;
  double mean_acc = 0.0;  // percent
  double ci = 0.0;        // half-width (episodes) or sd over seed means (seeds)
  std::vector<double> per_episode;  // percent, index order
  std::vector<std::pair<std::uint64_t, int>> seed_groups;  // (seed, episode count)
};

struct EvalOptions {
  int jobs = 1;
  Aggregate aggregate = Aggregate::episodes;
  std::string emb_id = "emb";
  std::vector<std::pair<std::uint64_t, int>> seed_groups;
  // Deterministic per-episode adjustment applied after resolution, before
  // classification (used to impose batch-shared query displacement).
  std::function<void(const Episode&, std::size_t, ResolvedEpisode&)> pre_classify;
};

namespace detail {

// Index-ordered work distribution; results land in index order and the
// lowest-index failure wins, so output is identical for any jobs count.
template <typename Fn>
inline void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  const auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  const int n_threads = std::min<int>(jobs, static_cast<int>(n));
  threads.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
  }
}

inline std::pair<double, double> mean_sd(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  if (xs.size() < 2) return {mean, 0.0};
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / (n - 1.0))};
}

}  // namespace detail

inline double episode_accuracy(const Prediction& pred, const std::vector<int>& labels) {
  if (pred.argmax.size() != labels.size()) {
    throw std::logic_error("prediction/label count mismatch");
  }
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (pred.argmax[i] == labels[i]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(labels.size());
}

inline EvalReport run_eval(const std::vector<Episode>& episodes, const HeadConfig& cfg,
                           const EmbeddingSet& emb, const EvalOptions& opts = {}) {
  if (episodes.empty()) throw std::invalid_argument("run_eval: no episodes");
  EvalReport rep;
  rep.head = to_string(cfg.kind);
  rep.emb_id = opts.emb_id;
  rep.mode = to_string(episodes[0].mode);
  rep.n_episodes = static_cast<int>(episodes.size());
  rep.per_episode.assign(episodes.size(), 0.0);
  rep.seed_groups = opts.seed_groups;

  detail::parallel_for(episodes.size(), opts.jobs, [&](std::size_t i) {
    try {
      ResolvedEpisode resolved =
          resolve_episode(episodes[i], emb, head_needs_frames(cfg.kind));
      if (opts.pre_classify) opts.pre_classify(episodes[i], i, resolved);
      const Prediction pred = classify(resolved, cfg);
      rep.per_episode[i] = episode_accuracy(pred, resolved.query_label);
    } catch (const std::exception& e) {
      throw std::runtime_error("episode " + std::to_string(i) + ": " + e.what());
    }
  });

  if (opts.aggregate == Aggregate::seeds && !opts.seed_groups.empty()) {
    std::vector<double> group_means;
    std::size_t pos = 0;
    for (const auto& [seed, count] : opts.seed_groups) {
      if (count <= 0 || pos + static_cast<std::size_t>(count) > rep.per_episode.size()) {
        throw std::invalid_argument("run_eval: seed groups do not partition the batch");
      }
      double m = 0.0;
      for (int j = 0; j < count; ++j) m += rep.per_episode[pos + static_cast<std::size_t>(j)];
      group_means.push_back(m / count);
      pos += static_cast<std::size_t>(count);
    }
    if (pos != rep.per_episode.size()) {
      throw std::invalid_argument("run_eval: seed groups do not partition the batch");
    }
    const auto [mean, sd] = detail::mean_sd(group_means);
    rep.mean_acc = mean;
    rep.ci = sd;  // std over seed means
  } else {
    const auto [mean, sd] = detail::mean_sd(rep.per_episode);
    rep.mean_acc = mean;
    rep.ci = 1.96 * sd / std::sqrt(static_cast<double>(rep.per_episode.size()));
  }
  return rep;
}

inline double gap_report(const EvalReport& iid, const EvalReport& ood) {
  if (iid.head != ood.head || iid.emb_id != ood.emb_id) {
    throw std::invalid_argument("incomparable reports: " + iid.head + "/" + iid.emb_id + " vs " +
                                ood.head + "/" + ood.emb_id);
  }
  return iid.mean_acc - ood.mean_acc;
}

struct GapResult {
  EvalReport iid;
  EvalReport ood;
  double delta = 0.0;
};

inline GapResult paired_gap_eval(const std::vector<Episode>& iid_eps,
                                 const std::vector<Episode>& ood_eps, const HeadConfig& cfg,
                                 const EmbeddingSet& emb, const EvalOptions& opts = {}) {
  GapResult out;
  out.iid = run_eval(iid_eps, cfg, emb, opts);
  out.ood = run_eval(ood_eps, cfg, emb, opts);
  out.delta = gap_report(out.iid, out.ood);
  return out;
}

// Batch-shared displacement: every query in an episode is shifted by the
// same vector, the radial offset a single out-of-episode background would
// induce. Deterministic per (shift_seed, episode index).
inline std::function<void(const Episode&, std::size_t, ResolvedEpisode&)>
make_shared_shift(const ContractionModel& model, std::uint64_t shift_seed) {
  return [&model, shift_seed](const Episode& ep, std::size_t index, ResolvedEpisode& resolved) {
    std::set<std::string> present;
    for (const auto& item : ep.support) present.insert(item.bg);
    for (const auto& item : ep.query) present.insert(item.bg);
    std::vector<std::string> candidates;
    for (const auto& bg : model.backgrounds()) {
      if (!present.count(bg)) candidates.push_back(bg);
    }
    if (candidates.empty()) return;  // nothing outside the episode; leave unshifted
    Rng rng(derive_rng(shift_seed, static_cast<std::uint64_t>(index)));
    const std::string& bg = candidates[rng.uniform(candidates.size())];
    const auto& nu = model.bg_direction(bg);
    const double scale = (model.bg_factor(bg) - 1.0) * model.params().mixed_mag_mean;
    Eigen::VectorXd offset(resolved.dim);
    for (int i = 0; i < resolved.dim; ++i) offset[i] = scale * nu[static_cast<std::size_t>(i)];
    for (auto& q : resolved.query) q += offset;
  };
}

struct SweepPoint {
  double strength = 0.0;
  double acc_iid = 0.0, ci_iid = 0.0;
  double acc_ood = 0.0, ci_ood = 0.0;
  double delta = 0.0;
};

// Gap curve over generator background weights. Episodes and per-clip noise
// draws are frozen across strengths, so points differ only through beta.
inline std::vector<SweepPoint> sweep_strengths(const PairingTable& table,
                                               const SplitAssignment& split, const ClipPool& pool,
                                               const EpisodeSpec& base_spec, const HeadConfig& cfg,
                                               ContractionParams params,
                                               const std::vector<double>& strengths,
                                               int n_episodes, int jobs) {
  if (strengths.empty()) throw std::invalid_argument("sweep_strengths: no strengths");
  if (n_episodes < 1) throw std::invalid_argument("sweep_strengths: need episodes");

  std::vector<Episode> iid_eps, ood_eps;
  iid_eps.reserve(static_cast<std::size_t>(n_episodes));
  ood_eps.reserve(static_cast<std::size_t>(n_episodes));
  const std::uint64_t twin_base = mix64(base_spec.seed ^ kTwinSeedSalt);
  for (int i = 0; i < n_episodes; ++i) {
    EpisodeSpec spec = base_spec;
    spec.mode = EpisodeMode::iid;
    spec.seed = derive_rng(base_spec.seed, static_cast<std::uint64_t>(i));
    iid_eps.push_back(sample_episode(table, split, spec, pool));
    ood_eps.push_back(
        ood_twin(iid_eps.back(), table, pool, derive_rng(twin_base, static_cast<std::uint64_t>(i))));
  }

  const auto items = items_from_pool(pool);
  std::vector<SweepPoint> out;
  for (double beta : strengths) {
    ContractionParams p = params;
    p.beta = beta;
    const ContractionModel model = model_for_pool(pool, p);
    const EmbeddingSet emb = synth_embeddings(model, items, p.model_seed);
    EvalOptions opts;
    opts.jobs = jobs;
    const GapResult gap = paired_gap_eval(iid_eps, ood_eps, cfg, emb, opts);
    SweepPoint pt;
    pt.strength = beta;
    pt.acc_iid = gap.iid.mean_acc;
    pt.ci_iid = gap.iid.ci;
    pt.acc_ood = gap.ood.mean_acc;
    pt.ci_ood = gap.ood.ci;
    pt.delta = gap.delta;
    out.push_back(pt);
  }
  return out;
}

// Heads x embedding-sets cross product on one frozen episode batch.
inline std::vector<std::vector<EvalReport>> head_swap_matrix(
    const std::vector<std::pair<std::string, const EmbeddingSet*>>& sets,
    const std::vector<HeadConfig>& heads, const std::vector<Episode>& episodes, int jobs) {
  if (sets.empty() || heads.empty()) {
    throw std::invalid_argument("head_swap_matrix: empty axis");
  }
  std::vector<std::vector<EvalReport>> matrix;
  for (std::size_t r = 0; r < heads.size(); ++r) {
    std::vector<EvalReport> row;
    for (std::size_t c = 0; c < sets.size(); ++c) {
      EvalOptions opts;
      opts.jobs = jobs;
      opts.emb_id = sets[c].first;
      try {
        row.push_back(run_eval(episodes, heads[r], *sets[c].second, opts));
      } catch (const std::exception& e) {
        throw std::runtime_error("head_swap_matrix[" + to_string(heads[r].kind) + "][" +
                                 sets[c].first + "]: " + e.what());
      }
    }
    matrix.push_back(std::move(row));
  }
  return matrix;
}

namespace detail {

inline std::string fmt6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

}  // namespace detail

inline std::string report_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  out << "head,emb,mode,n_episodes,mean_acc,ci\n";
  for (const auto& r : reports) {
    out << r.head << "," << r.emb_id << "," << r.mode << "," << r.n_episodes << ","
        << detail::fmt6(r.mean_acc) << "," << detail::fmt6(r.ci) << "\n";
  }
  return out.str();
}

inline std::string trace_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "episode,accuracy\n";
  for (std::size_t i = 0; i < report.per_episode.size(); ++i) {
    out << i << "," << detail::fmt6(report.per_episode[i]) << "\n";
  }
  return out.str();
}

inline std::string matrix_csv(const std::vector<std::vector<EvalReport>>& matrix) {
  std::ostringstream out;
  out << "head";
  if (!matrix.empty()) {
    for (const auto& cell : matrix[0]) out << "," << cell.emb_id;
  }
  out << "\n";
  for (const auto& row : matrix) {
    out << row[0].head;
    for (const auto& cell : row) out << "," << detail::fmt6(cell.mean_acc);
    out << "\n";
  }
  return out.str();
}

inline std::string sweep_csv(const std::vector<SweepPoint>& points) {
  std::ostringstream out;
  out << "strength,acc_iid,ci_iid,acc_ood,ci_ood,delta\n";
  for (const auto& p : points) {
    out << detail::fmt6(p.strength) << "," << detail::fmt6(p.acc_iid) << ","
        << detail::fmt6(p.ci_iid) << "," << detail::fmt6(p.acc_ood) << ","
        << detail::fmt6(p.ci_ood) << "," << detail::fmt6(p.delta) << "\n";
  }
  return out.str();
}

}  // namespace spurbench
