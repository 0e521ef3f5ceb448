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

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "spurbench/catalog.hpp"
#include "spurbench/rng.hpp"

namespace spurbench {

inline constexpr const char* kNoBackground = "NONE";

enum class EpisodeMode { iid, ood, hard_ood, clean_query };

inline std::string to_string(EpisodeMode m) {
  switch (m) {
    case EpisodeMode::iid: return "iid";
    case EpisodeMode::ood: return "ood";
    case EpisodeMode::hard_ood: return "hard-ood";
    case EpisodeMode::clean_query: return "clean-query";
  }
  return "?";
}

inline EpisodeMode episode_mode_from_string(const std::string& s) {
  if (s == "iid") return EpisodeMode::iid;
  if (s == "ood") return EpisodeMode::ood;
  if (s == "hard-ood" || s == "hard_ood") return EpisodeMode::hard_ood;
  if (s == "clean-query" || s == "clean_query") return EpisodeMode::clean_query;
  throw std::invalid_argument("unknown episode mode: " + s);
}

struct EpisodeSpec {
  int n_way = 5;
  int k_shot = 1;
  int n_query = 10;
  EpisodeMode mode = EpisodeMode::iid;
  std::uint64_t seed = 0;
};

struct EpisodeItem {
  std::string clip_ref;
  std::string fg;
  std::string bg;  // kNoBackground for foreground-only clips

  bool operator==(const EpisodeItem& o) const {
    return clip_ref == o.clip_ref && fg == o.fg && bg == o.bg;
  }
};

struct Episode {
  EpisodeMode mode = EpisodeMode::iid;
  std::vector<std::string> classes;  // episode class order defines labels
  std::vector<EpisodeItem> support;
  std::vector<EpisodeItem> query;

  int label_of(const EpisodeItem& item) const {
    for (std::size_t i = 0; i < classes.size(); ++i) {
      if (classes[i] == item.fg) return static_cast<int>(i);
    }
    throw std::logic_error("item class not in episode: " + item.fg);
  }

  bool operator==(const Episode& o) const {
    return mode == o.mode && classes == o.classes && support == o.support && query == o.query;
  }
};

// Clip index keyed by (foreground, background). Buckets are sets so that
// sampling sees identifiers in sorted order no matter how clips were added.
class ClipPool {
 public:
  void add(const std::string& clip_ref, const std::string& fg, const std::string& bg) {
    buckets_[{fg, bg}].insert(clip_ref);
  }

  const std::set<std::string>* find_bucket(const std::string& fg, const std::string& bg) const {
    const auto it = buckets_.find({fg, bg});
    return it == buckets_.end() ? nullptr : &it->second;
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& [key, clips] : buckets_) n += clips.size();
    return n;
  }

  const std::map<std::pair<std::string, std::string>, std::set<std::string>>& buckets() const {
    return buckets_;
  }

 private:
  std::map<std::pair<std::string, std::string>, std::set<std::string>> buckets_;
};

// Pool covering every (class, background-union) combination plus clean clips,
// with deterministic clip_refs of the form "fg/bg/NNN".
inline ClipPool synthetic_pool(const PairingTable& table, const std::set<std::string>& classes,
                               int clips_per_bucket, bool include_clean = true) {
  if (clips_per_bucket < 1) throw std::invalid_argument("clips_per_bucket must be positive");
  std::set<std::string> bg_union;
  for (const auto& fg : classes) {
    const auto& row = table.backgrounds_of(fg);
    bg_union.insert(row.begin(), row.end());
  }
  ClipPool pool;
  const auto fill = [&](const std::string& fg, const std::string& bg) {
    for (int i = 0; i < clips_per_bucket; ++i) {
      char idx[8];
      std::snprintf(idx, sizeof idx, "%03d", i);
      pool.add(fg + "/" + bg + "/" + idx, fg, bg);
    }
  };
  for (const auto& fg : classes) {
    for (const auto& bg : bg_union) fill(fg, bg);
    if (include_clean) fill(fg, kNoBackground);
  }
  return pool;
}

namespace detail {

struct HardOodInfeasible {};

// Draw one clip from the (fg, bg) bucket, without replacement within the
// episode. Throws HardOodInfeasible under retry, runtime_error otherwise.
class ClipDrawer {
 public:
  ClipDrawer(const ClipPool& pool, bool retryable) : pool_(pool), retryable_(retryable) {}

  std::string draw(const std::string& fg, const std::string& bg, Rng& rng) {
    const auto key = std::make_pair(fg, bg);
    auto it = remaining_.find(key);
    if (it == remaining_.end()) {
      const auto* bucket = pool_.find_bucket(fg, bg);
      std::vector<std::string> clips;
      if (bucket) clips.assign(bucket->begin(), bucket->end());
      it = remaining_.emplace(key, std::move(clips)).first;
    }
    auto& clips = it->second;
    if (clips.empty()) {
      if (retryable_) throw HardOodInfeasible{};
      throw std::runtime_error("pool exhausted: no clip for " + fg + " with " + bg);
    }
    const std::size_t j = rng.uniform(clips.size());
    std::string ref = clips[j];
    clips.erase(clips.begin() + static_cast<std::ptrdiff_t>(j));
    return ref;
  }

  // Mark a specific clip as used so later draws cannot return it.
  void reserve(const std::string& fg, const std::string& bg, const std::string& ref) {
    const auto key = std::make_pair(fg, bg);
    auto it = remaining_.find(key);
    if (it == remaining_.end()) {
      const auto* bucket = pool_.find_bucket(fg, bg);
      std::vector<std::string> clips;
      if (bucket) clips.assign(bucket->begin(), bucket->end());
      it = remaining_.emplace(key, std::move(clips)).first;
    }
    auto& clips = it->second;
    const auto pos = std::find(clips.begin(), clips.end(), ref);
    if (pos != clips.end()) clips.erase(pos);
  }

 private:
  const ClipPool& pool_;
  bool retryable_;
  std::map<std::pair<std::string, std::string>, std::vector<std::string>> remaining_;
};

inline std::vector<std::string> sorted_row(const PairingTable& table, const std::string& fg) {
  const auto& row = table.backgrounds_of(fg);
  std::vector<std::string> bgs(row.begin(), row.end());
  std::sort(bgs.begin(), bgs.end());
  bgs.erase(std::unique(bgs.begin(), bgs.end()), bgs.end());
  return bgs;
}

inline std::vector<std::string> other_class_bg_union(const PairingTable& table,
                                                     const std::vector<std::string>& classes,
                                                     std::size_t self,
                                                     const std::set<std::string>& exclude) {
  std::set<std::string> pool;
  for (std::size_t j = 0; j < classes.size(); ++j) {
    if (j == self) continue;
    const auto& row = table.backgrounds_of(classes[j]);
    pool.insert(row.begin(), row.end());
  }
  std::vector<std::string> out;
  for (const auto& bg : pool) {
    if (!exclude.count(bg)) out.push_back(bg);
  }
  return out;
}

inline Episode sample_episode_attempt(const PairingTable& table,
                                      const std::vector<std::string>& candidates,
                                      const EpisodeSpec& spec, const ClipPool& pool, Rng& rng,
                                      bool retryable) {
  Episode ep;
  ep.mode = spec.mode;

  std::vector<std::string> names = candidates;
  rng.shuffle(names);
  ep.classes.assign(names.begin(), names.begin() + spec.n_way);

  // Per-class support backgrounds. Hard mode pins one background per class,
  // pairwise distinct across classes, so coverage targets are well defined.
  std::vector<std::vector<std::string>> support_bgs(ep.classes.size());
  std::vector<std::set<std::string>> support_sets(ep.classes.size());
  if (spec.mode == EpisodeMode::hard_ood) {
    std::set<std::string> taken;
    for (std::size_t c = 0; c < ep.classes.size(); ++c) {
      std::vector<std::string> avail;
      for (const auto& bg : sorted_row(table, ep.classes[c])) {
        if (!taken.count(bg)) avail.push_back(bg);
      }
      if (avail.empty()) throw HardOodInfeasible{};
      const std::string bg = avail[rng.uniform(avail.size())];
      taken.insert(bg);
      support_bgs[c].assign(static_cast<std::size_t>(spec.k_shot), bg);
      support_sets[c] = {bg};
    }
  } else {
    for (std::size_t c = 0; c < ep.classes.size(); ++c) {
      auto row = sorted_row(table, ep.classes[c]);
      if (spec.k_shot <= static_cast<int>(row.size())) {
        rng.shuffle(row);
        support_bgs[c].assign(row.begin(), row.begin() + spec.k_shot);
      } else {
        for (int k = 0; k < spec.k_shot; ++k) support_bgs[c].push_back(row[rng.uniform(row.size())]);
      }
      support_sets[c].insert(support_bgs[c].begin(), support_bgs[c].end());
    }
  }

  // Per-class query backgrounds under the mode's constraint.
  std::vector<std::vector<std::string>> query_bgs(ep.classes.size());
  for (std::size_t c = 0; c < ep.classes.size(); ++c) {
    auto& bgs = query_bgs[c];
    switch (spec.mode) {
      case EpisodeMode::iid: {
        std::vector<std::string> realized(support_sets[c].begin(), support_sets[c].end());
        if (static_cast<int>(realized.size()) > spec.n_query) {
          throw std::invalid_argument(
              "n_query too small to realize the support background set for " + ep.classes[c]);
        }
        bgs = realized;
        while (static_cast<int>(bgs.size()) < spec.n_query) {
          bgs.push_back(realized[rng.uniform(realized.size())]);
        }
        rng.shuffle(bgs);
        break;
      }
      case EpisodeMode::ood: {
        const auto allowed = other_class_bg_union(table, ep.classes, c, support_sets[c]);
        if (allowed.empty()) {
          throw std::runtime_error("no admissible ood background for " + ep.classes[c]);
        }
        for (int q = 0; q < spec.n_query; ++q) bgs.push_back(allowed[rng.uniform(allowed.size())]);
        break;
      }
      case EpisodeMode::hard_ood: {
        const auto allowed = other_class_bg_union(table, ep.classes, c, support_sets[c]);
        std::vector<std::string> must_cover;
        for (std::size_t j = 0; j < ep.classes.size(); ++j) {
          if (j != c) must_cover.push_back(*support_sets[j].begin());
        }
        std::sort(must_cover.begin(), must_cover.end());
        must_cover.erase(std::unique(must_cover.begin(), must_cover.end()), must_cover.end());
        for (const auto& bg : must_cover) {
          if (!std::count(allowed.begin(), allowed.end(), bg)) throw HardOodInfeasible{};
        }
        if (static_cast<int>(must_cover.size()) > spec.n_query) throw HardOodInfeasible{};
        bgs = must_cover;
        while (static_cast<int>(bgs.size()) < spec.n_query) {
          bgs.push_back(allowed[rng.uniform(allowed.size())]);
        }
        rng.shuffle(bgs);
        break;
      }
      case EpisodeMode::clean_query: {
        bgs.assign(static_cast<std::size_t>(spec.n_query), kNoBackground);
        break;
      }
    }
  }

  ClipDrawer drawer(pool, retryable);
  for (std::size_t c = 0; c < ep.classes.size(); ++c) {
    for (const auto& bg : support_bgs[c]) {
      ep.support.push_back({drawer.draw(ep.classes[c], bg, rng), ep.classes[c], bg});
    }
  }
  for (std::size_t c = 0; c < ep.classes.size(); ++c) {
    for (const auto& bg : query_bgs[c]) {
      ep.query.push_back({drawer.draw(ep.classes[c], bg, rng), ep.classes[c], bg});
    }
  }
  return ep;
}

}  // namespace detail

inline Episode sample_episode(const PairingTable& table, const SplitAssignment& split,
                              const EpisodeSpec& spec, const ClipPool& pool) {
  if (spec.n_way < 2) throw std::invalid_argument("episode spec invalid: n_way must be >= 2");
  if (spec.k_shot < 1) throw std::invalid_argument("episode spec invalid: k_shot must be >= 1");
  if (spec.n_query < 1) throw std::invalid_argument("episode spec invalid: n_query must be >= 1");

  std::vector<std::string> candidates(split.test.begin(), split.test.end());
  if (static_cast<int>(candidates.size()) < spec.n_way) {
    throw std::invalid_argument("test split smaller than n_way");
  }
  for (const auto& fg : candidates) table.backgrounds_of(fg);  // classes must be in the table

  Rng rng(spec.seed);
  if (spec.mode != EpisodeMode::hard_ood) {
    return detail::sample_episode_attempt(table, candidates, spec, pool, rng, false);
  }
  constexpr int kMaxRetries = 64;
  for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
    try {
      return detail::sample_episode_attempt(table, candidates, spec, pool, rng, true);
    } catch (const detail::HardOodInfeasible&) {
      // resample the class tuple; rng state advances so retries differ
    }
  }
  throw std::runtime_error("hard-ood coverage infeasible for class tuple");
}

// Same classes, supports, and query labels; query backgrounds redrawn under
// the OOD constraint. Pairs each episode with a counterfactual twin so the
// IID-vs-OOD gap is measured on matched supports.
inline Episode ood_twin(const Episode& ep, const PairingTable& table, const ClipPool& pool,
                        std::uint64_t seed) {
  Episode twin;
  twin.mode = EpisodeMode::ood;
  twin.classes = ep.classes;
  twin.support = ep.support;

  std::vector<std::set<std::string>> support_sets(ep.classes.size());
  for (const auto& item : ep.support) {
    support_sets[static_cast<std::size_t>(ep.label_of(item))].insert(item.bg);
  }
  std::vector<int> queries_per_class(ep.classes.size(), 0);
  for (const auto& item : ep.query) {
    ++queries_per_class[static_cast<std::size_t>(ep.label_of(item))];
  }

  Rng rng(seed);
  detail::ClipDrawer drawer(pool, false);
  for (const auto& item : ep.support) drawer.reserve(item.fg, item.bg, item.clip_ref);

  for (std::size_t c = 0; c < ep.classes.size(); ++c) {
    const auto allowed = detail::other_class_bg_union(table, ep.classes, c, support_sets[c]);
    if (allowed.empty()) {
      throw std::runtime_error("no admissible ood background for " + ep.classes[c]);
    }
    for (int q = 0; q < queries_per_class[c]; ++q) {
      const auto& bg = allowed[rng.uniform(allowed.size())];
      twin.query.push_back({drawer.draw(ep.classes[c], bg, rng), ep.classes[c], bg});
    }
  }
  return twin;
}

// Line-oriented manifest: "episode <mode>" header then one tab-separated
// item per line (role, clip_ref, fg, bg).
inline std::string serialize_episodes(const std::vector<Episode>& episodes) {
  std::ostringstream out;
  for (const auto& ep : episodes) {
    out << "episode " << to_string(ep.mode) << "\n";
    out << "classes";
    for (const auto& c : ep.classes) out << "\t" << c;
    out << "\n";
    for (const auto& item : ep.support) {
      out << "support\t" << item.clip_ref << "\t" << item.fg << "\t" << item.bg << "\n";
    }
    for (const auto& item : ep.query) {
      out << "query\t" << item.clip_ref << "\t" << item.fg << "\t" << item.bg << "\n";
    }
  }
  return out.str();
}

inline std::vector<Episode> parse_episodes(const std::string& text) {
  std::vector<Episode> episodes;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;

    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const auto tab = line.find('\t', pos);
      fields.push_back(tab == std::string::npos ? line.substr(pos) : line.substr(pos, tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }

    if (fields[0].rfind("episode ", 0) == 0) {
      Episode ep;
      ep.mode = episode_mode_from_string(fields[0].substr(8));
      episodes.push_back(std::move(ep));
      continue;
    }
    if (episodes.empty()) throw std::invalid_argument("episode manifest: item before header");
    if (fields[0] == "classes") {
      episodes.back().classes.assign(fields.begin() + 1, fields.end());
      continue;
    }
    if (fields.size() != 4) throw std::invalid_argument("episode manifest: malformed line: " + line);
    EpisodeItem item{fields[1], fields[2], fields[3]};
    if (fields[0] == "support") {
      episodes.back().support.push_back(std::move(item));
    } else if (fields[0] == "query") {
      episodes.back().query.push_back(std::move(item));
    } else {
      throw std::invalid_argument("episode manifest: unknown role: " + fields[0]);
    }
  }
  return episodes;
}

}  // namespace spurbench
