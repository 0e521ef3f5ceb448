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
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "spurbench/episodes.hpp"
#include "spurbench/rng.hpp"

namespace spurbench {

// Global vector per clip, optional local descriptor rows per clip.
struct EmbeddingSet {
  int dim = 0;
  int frame_dim = 0;
  std::map<std::string, std::vector<float>> global_vecs;
  std::map<std::string, std::vector<std::vector<float>>> frame_vecs;
};

inline void validate_embedding_set(const EmbeddingSet& set) {
  if (set.dim <= 0) throw std::invalid_argument("embedding set: dim must be positive");
  for (const auto& [ref, vec] : set.global_vecs) {
    if (static_cast<int>(vec.size()) != set.dim) {
      throw std::invalid_argument("dimension mismatch for clip " + ref);
    }
    for (float x : vec) {
      if (!std::isfinite(x)) throw std::invalid_argument("non-finite embedding in clip " + ref);
    }
  }
  for (const auto& [ref, rows] : set.frame_vecs) {
    if (rows.empty()) throw std::invalid_argument("empty frame descriptors for clip " + ref);
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != set.frame_dim) {
        throw std::invalid_argument("dimension mismatch in frames of clip " + ref);
      }
      for (float x : row) {
        if (!std::isfinite(x)) throw std::invalid_argument("non-finite embedding in clip " + ref);
      }
    }
  }
}

namespace detail {

inline void append_f32_le(std::vector<std::uint8_t>& blob, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  for (int i = 0; i < 4; ++i) blob.push_back(static_cast<std::uint8_t>((u >> (8 * i)) & 0xFF));
}

inline float read_f32_le(const std::uint8_t* p) {
  const std::uint32_t u = static_cast<std::uint32_t>(p[0]) |
                          (static_cast<std::uint32_t>(p[1]) << 8) |
                          (static_cast<std::uint32_t>(p[2]) << 16) |
                          (static_cast<std::uint32_t>(p[3]) << 24);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

inline std::string dir_of(const std::string& path) {
  const auto slash = path.find_last_of('/');
  return slash == std::string::npos ? std::string() : path.substr(0, slash + 1);
}

inline std::string blob_name_for(const std::string& manifest_path) {
  const auto slash = manifest_path.find_last_of('/');
  std::string base = slash == std::string::npos ? manifest_path : manifest_path.substr(slash + 1);
  const auto dot = base.find_last_of('.');
  if (dot != std::string::npos && dot > 0) base.erase(dot);
  return base + ".bin";
}

}  // namespace detail

// On-disk layout: a text manifest plus a flat little-endian float32 blob.
// Manifest lines after the header: "g <clip> <offset>" for global vectors
// (length = dim) and "f <clip> <offset> <n_frames>" for descriptor rows
// (each row frame_dim long), offsets counted in float elements.
inline void save_embedding_set(const EmbeddingSet& set, const std::string& manifest_path) {
  validate_embedding_set(set);
  std::vector<std::uint8_t> blob;
  std::ostringstream man;
  const std::string blob_name = detail::blob_name_for(manifest_path);
  man << "# spurbench embeddings v1\n";
  man << "dim " << set.dim << "\n";
  man << "frame_dim " << set.frame_dim << "\n";
  man << "blob " << blob_name << "\n";
  for (const auto& [ref, vec] : set.global_vecs) {
    man << "g\t" << ref << "\t" << blob.size() / 4 << "\n";
    for (float x : vec) detail::append_f32_le(blob, x);
  }
  for (const auto& [ref, rows] : set.frame_vecs) {
    man << "f\t" << ref << "\t" << blob.size() / 4 << "\t" << rows.size() << "\n";
    for (const auto& row : rows) {
      for (float x : row) detail::append_f32_le(blob, x);
    }
  }
  std::ofstream mf(manifest_path, std::ios::binary);
  if (!mf) throw std::runtime_error("save_embedding_set: cannot open " + manifest_path);
  const std::string text = man.str();
  mf.write(text.data(), static_cast<std::streamsize>(text.size()));
  std::ofstream bf(detail::dir_of(manifest_path) + blob_name, std::ios::binary);
  if (!bf) throw std::runtime_error("save_embedding_set: cannot open blob for " + manifest_path);
  bf.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  if (!mf || !bf) throw std::runtime_error("save_embedding_set: short write for " + manifest_path);
}

inline EmbeddingSet load_embedding_set(const std::string& manifest_path) {
  std::ifstream mf(manifest_path, std::ios::binary);
  if (!mf) throw std::runtime_error("load_embedding_set: cannot open " + manifest_path);

  EmbeddingSet set;
  std::string blob_name;
  std::vector<std::uint8_t> blob;
  bool blob_loaded = false;
  std::string line;
  while (std::getline(mf, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    if (line.rfind("dim ", 0) == 0) {
      set.dim = std::stoi(line.substr(4));
      continue;
    }
    if (line.rfind("frame_dim ", 0) == 0) {
      set.frame_dim = std::stoi(line.substr(10));
      continue;
    }
    if (line.rfind("blob ", 0) == 0) {
      blob_name = line.substr(5);
      std::ifstream bf(detail::dir_of(manifest_path) + blob_name, std::ios::binary);
      if (!bf) throw std::runtime_error("manifest incomplete: blob file not found: " + blob_name);
      blob.assign(std::istreambuf_iterator<char>(bf), std::istreambuf_iterator<char>());
      blob_loaded = true;
      continue;
    }

    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const auto tab = line.find('\t', pos);
      fields.push_back(tab == std::string::npos ? line.substr(pos) : line.substr(pos, tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    if (!blob_loaded || set.dim <= 0) {
      throw std::invalid_argument("load_embedding_set: entries before header in " + manifest_path);
    }
    const auto fetch = [&](std::size_t offset, std::size_t count) {
      if ((offset + count) * 4 > blob.size()) {
        throw std::runtime_error("manifest incomplete: blob truncated at element " +
                                 std::to_string(offset));
      }
      std::vector<float> out(count);
      for (std::size_t i = 0; i < count; ++i) {
        out[i] = detail::read_f32_le(blob.data() + (offset + i) * 4);
      }
      return out;
    };
    if (fields[0] == "g" && fields.size() == 3) {
      set.global_vecs[fields[1]] = fetch(std::stoull(fields[2]), static_cast<std::size_t>(set.dim));
    } else if (fields[0] == "f" && fields.size() == 4) {
      const std::size_t offset = std::stoull(fields[2]);
      const std::size_t n_frames = std::stoull(fields[3]);
      if (set.frame_dim <= 0) {
        throw std::invalid_argument("load_embedding_set: frames without frame_dim");
      }
      auto& rows = set.frame_vecs[fields[1]];
      rows.clear();
      for (std::size_t r = 0; r < n_frames; ++r) {
        rows.push_back(fetch(offset + r * static_cast<std::size_t>(set.frame_dim),
                             static_cast<std::size_t>(set.frame_dim)));
      }
    } else {
      throw std::invalid_argument("load_embedding_set: malformed line: " + line);
    }
  }
  validate_embedding_set(set);
  return set;
}

struct ContractionParams {
  int dim = 32;
  double sigma = 0.3;            // isotropic angular noise scale
  double beta = 0.02;            // background direction weight
  double clean_mag_mean = 83.26;
  double clean_mag_sd = 8.0;
  double mixed_mag_mean = 58.69;
  double mixed_mag_sd = 3.0;
  double bg_mag_spread = 0.65;   // sd of per-background log contraction factors
  std::uint64_t model_seed = 0;
};

// Generative model: v = r * normalize(mu_fg + beta*nu_bg + sigma*g), with
// clean items using beta = 0 and the clean magnitude scale. Per-background
// contraction factors multiply the mixed magnitude mean so different
// backgrounds shift magnitudes by different amounts, which is what gives
// magnitude-sensitive heads something to latch onto.
class ContractionModel {
 public:
  ContractionModel(std::vector<std::string> classes, std::vector<std::string> bgs,
                   const ContractionParams& p)
      : params_(p) {
    if (p.dim < 1) throw std::invalid_argument("contraction model: dim must be positive");
    if (p.sigma < 0 || p.beta < 0 || p.bg_mag_spread < 0 || p.clean_mag_sd < 0 ||
        p.mixed_mag_sd < 0) {
      throw std::invalid_argument("contraction model: negative parameter");
    }
    if (p.mixed_mag_mean > p.clean_mag_mean) {
      throw std::invalid_argument(
          "contraction model: mixed magnitude mean must not exceed clean magnitude mean");
    }
    std::sort(classes.begin(), classes.end());
    std::sort(bgs.begin(), bgs.end());
    for (const auto& bg : bgs) {
      if (bg == kNoBackground) {
        throw std::invalid_argument("contraction model: NONE is not a background direction");
      }
    }
    classes_ = std::move(classes);
    bgs_ = std::move(bgs);
    if (classes_.empty()) throw std::invalid_argument("contraction model: no classes");

    const std::size_t n_dirs = classes_.size() + bgs_.size();
    Rng dir_rng(derive_rng(p.model_seed, fnv1a64("directions")));
    std::vector<std::vector<double>> dirs;
    const bool orthonormal = static_cast<std::size_t>(p.dim) >= n_dirs;
    while (dirs.size() < n_dirs) {
      std::vector<double> v(static_cast<std::size_t>(p.dim));
      for (auto& x : v) x = dir_rng.gaussian();
      if (orthonormal) {
        for (const auto& u : dirs) {
          double dot = 0.0;
          for (int i = 0; i < p.dim; ++i) dot += v[i] * u[i];
          for (int i = 0; i < p.dim; ++i) v[i] -= dot * u[i];
        }
      }
      double norm = 0.0;
      for (double x : v) norm += x * x;
      norm = std::sqrt(norm);
      if (norm < 1e-9) continue;  // redraw a degenerate direction
      for (auto& x : v) x /= norm;
      dirs.push_back(std::move(v));
    }
    for (std::size_t i = 0; i < classes_.size(); ++i) class_dirs_[classes_[i]] = dirs[i];
    for (std::size_t i = 0; i < bgs_.size(); ++i) bg_dirs_[bgs_[i]] = dirs[classes_.size() + i];

    // Lognormal contraction factors, z-scored so the log sample has exactly
    // the requested spread and the factors average exactly 1.
    if (!bgs_.empty()) {
      Rng fac_rng(derive_rng(p.model_seed, fnv1a64("factors")));
      std::vector<double> z(bgs_.size());
      for (auto& x : z) x = fac_rng.gaussian();
      double mean = 0.0;
      for (double x : z) mean += x;
      mean /= static_cast<double>(z.size());
      double var = 0.0;
      for (double x : z) var += (x - mean) * (x - mean);
      const double sd = std::sqrt(var / static_cast<double>(z.size()));
      std::vector<double> f(z.size());
      double fmean = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double zs = sd > 1e-12 ? (z[i] - mean) / sd : 0.0;
        f[i] = std::exp(p.bg_mag_spread * zs);
        fmean += f[i];
      }
      fmean /= static_cast<double>(f.size());
      for (std::size_t i = 0; i < bgs_.size(); ++i) bg_factors_[bgs_[i]] = f[i] / fmean;
    }
  }

  const ContractionParams& params() const { return params_; }
  const std::vector<std::string>& classes() const { return classes_; }
  const std::vector<std::string>& backgrounds() const { return bgs_; }

  const std::vector<double>& class_direction(const std::string& fg) const {
    const auto it = class_dirs_.find(fg);
    if (it == class_dirs_.end()) throw std::invalid_argument("unknown class direction: " + fg);
    return it->second;
  }

  const std::vector<double>& bg_direction(const std::string& bg) const {
    const auto it = bg_dirs_.find(bg);
    if (it == bg_dirs_.end()) throw std::invalid_argument("unknown background direction: " + bg);
    return it->second;
  }

  double bg_factor(const std::string& bg) const {
    const auto it = bg_factors_.find(bg);
    if (it == bg_factors_.end()) throw std::invalid_argument("unknown background factor: " + bg);
    return it->second;
  }

  // Draw order is fixed (dim noise gaussians, then the magnitude) so a given
  // rng state maps to one vector.
  std::vector<float> generate(const std::string& fg, const std::string& bg, Rng& rng) const {
    const bool clean = bg == kNoBackground;
    const auto& mu = class_direction(fg);
    const double* nu = nullptr;
    double factor = 1.0;
    if (!clean) {
      nu = bg_direction(bg).data();
      factor = bg_factor(bg);
    }
    std::vector<double> v(static_cast<std::size_t>(params_.dim));
    for (int i = 0; i < params_.dim; ++i) {
      v[i] = mu[i] + (clean ? 0.0 : params_.beta * nu[i]) + params_.sigma * rng.gaussian();
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    const double r = clean
        ? rng.truncated_gaussian(params_.clean_mag_mean, params_.clean_mag_sd)
        : rng.truncated_gaussian(params_.mixed_mag_mean * factor, params_.mixed_mag_sd);
    std::vector<float> out(static_cast<std::size_t>(params_.dim));
    for (int i = 0; i < params_.dim; ++i) {
      out[i] = static_cast<float>(r * (norm > 1e-12 ? v[i] / norm : mu[i]));
    }
    return out;
  }

 private:
  ContractionParams params_;
  std::vector<std::string> classes_, bgs_;
  std::map<std::string, std::vector<double>> class_dirs_, bg_dirs_;
  std::map<std::string, double> bg_factors_;
};

struct SynthItem {
  std::string clip_ref;
  std::string fg;
  std::string bg;  // kNoBackground for clean items
};

inline std::vector<SynthItem> items_from_pool(const ClipPool& pool) {
  std::vector<SynthItem> items;
  for (const auto& [key, clips] : pool.buckets()) {
    for (const auto& ref : clips) items.push_back({ref, key.first, key.second});
  }
  return items;
}

// Each item's stream is keyed by (base_seed, clip_ref), so generation order
// does not matter and sweeps over beta reuse identical noise draws per clip.
inline EmbeddingSet synth_embeddings(const ContractionModel& model,
                                     const std::vector<SynthItem>& items, std::uint64_t base_seed,
                                     int n_frames = 0) {
  EmbeddingSet set;
  set.dim = model.params().dim;
  set.frame_dim = n_frames > 0 ? model.params().dim : 0;
  for (const auto& item : items) {
    Rng rng(derive_rng(base_seed, fnv1a64(item.clip_ref)));
    set.global_vecs[item.clip_ref] = model.generate(item.fg, item.bg, rng);
    if (n_frames > 0) {
      auto& rows = set.frame_vecs[item.clip_ref];
      for (int f = 0; f < n_frames; ++f) rows.push_back(model.generate(item.fg, item.bg, rng));
    }
  }
  validate_embedding_set(set);
  return set;
}

inline ContractionModel model_for_pool(const ClipPool& pool, const ContractionParams& params) {
  std::set<std::string> classes, bgs;
  for (const auto& [key, clips] : pool.buckets()) {
    classes.insert(key.first);
    if (key.second != kNoBackground) bgs.insert(key.second);
  }
  return ContractionModel(std::vector<std::string>(classes.begin(), classes.end()),
                          std::vector<std::string>(bgs.begin(), bgs.end()), params);
}

}  // namespace spurbench
