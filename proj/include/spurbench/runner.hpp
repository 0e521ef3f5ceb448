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

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "spurbench/catalog.hpp"
#include "spurbench/embeddings.hpp"
#include "spurbench/episodes.hpp"
#include "spurbench/eval.hpp"
#include "spurbench/geometry.hpp"
#include "spurbench/mixer.hpp"
#include "spurbench/wav_io.hpp"

namespace spurbench {
namespace cli {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw std::runtime_error("short write to " + path);
}

inline std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    const auto comma = csv.find(',', pos);
    std::string item = comma == std::string::npos ? csv.substr(pos) : csv.substr(pos, comma - pos);
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) {
      item.clear();
    } else {
      const auto e = item.find_last_not_of(" \t");
      item = item.substr(b, e - b + 1);
    }
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline std::vector<double> parse_double_list(const std::string& csv, const char* what) {
  std::vector<double> out;
  for (const auto& s : split_list(csv)) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError(std::string(what) + ": not a number: " + s);
    }
  }
  if (out.empty()) throw UsageError(std::string(what) + ": empty list");
  return out;
}

inline std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> out;
  for (const auto& s : split_list(csv)) {
    try {
      out.push_back(std::stoull(s));
    } catch (const std::exception&) {
      throw UsageError("--seeds: not an integer: " + s);
    }
  }
  return out;
}

inline std::string basename_of(const std::string& path) {
  const auto slash = path.find_last_of('/');
  return slash == std::string::npos ? path : path.substr(slash + 1);
}

}  // namespace detail

// All options across subcommands; each subcommand registers the subset it
// accepts. Values resolve as: built-in default, then SPURBENCH_SEED (seed
// only), then --config file entries, then explicit flags.
struct Opts {
  std::string out = "out";
  std::string config_path;
  int jobs = 0;  // 0 = logical cores
  std::uint64_t seed = 0;

  std::vector<std::string> fg_paths, bg_paths;
  double alpha = 1.0;
  double gamma_db = 8.0;
  int rate = 16000;
  double duration = 5.0;
  bool pcm16 = false;

  std::string pairing;  // "", "standard", "hard", or a file path
  std::string split = "canonical";
  std::string pool_path;
  int clips_per_bucket = 24;

  std::string mode = "iid";
  int n_way = 5, k_shot = 1, n_query = 10, n_episodes = 100;
  std::string episodes_file;
  std::string seeds_csv;

  std::string embeddings_path;
  std::vector<std::string> embeddings_list;
  int dim = 32;
  double sigma = 0.3, beta = 0.02, spread = 0.65;
  double clean_mean = 83.26, clean_sd = 8.0, mixed_mean = 58.69, mixed_sd = 3.0;
  std::uint64_t model_seed = 0;
  bool model_seed_set = false;
  int frames = 0;

  std::string head = "proto";
  std::string heads_csv = "proto,cosine,linear,laplacianshot,bdcspn,protolp,bpa";
  std::string aggregate = "episodes";
  bool with_gap = false;
  std::string strengths_csv = "0,0.1,0.2,0.3";
  std::string betas_csv = "0.02";

  double tau = 10.0, lr = 0.01, l2 = 1e-3;
  int iters = 100, dn4_k = 3;
  double lap_lambda = 0.7;
  int lap_knn = 3, lap_iters = 20;
  double lp_rho = 0.9;
  int lp_knn = 8;
  double sinkhorn_eps = 0.05;
  int sinkhorn_iters = 100;
};

namespace detail {

inline void apply_config(const nlohmann::json& c, Opts& o) {
  const auto set_str = [&](const char* key, std::string& var) {
    if (c.contains(key)) var = c.at(key).get<std::string>();
  };
  const auto set_int = [&](const char* key, int& var) {
    if (c.contains(key)) var = c.at(key).get<int>();
  };
  const auto set_dbl = [&](const char* key, double& var) {
    if (c.contains(key)) var = c.at(key).get<double>();
  };
  const auto set_u64 = [&](const char* key, std::uint64_t& var) {
    if (c.contains(key)) var = c.at(key).get<std::uint64_t>();
  };
  const auto set_bool = [&](const char* key, bool& var) {
    if (c.contains(key)) var = c.at(key).get<bool>();
  };
  const auto set_vec = [&](const char* key, std::vector<std::string>& var) {
    if (c.contains(key)) var = c.at(key).get<std::vector<std::string>>();
  };

  set_int("jobs", o.jobs);
  set_u64("seed", o.seed);
  set_vec("fg", o.fg_paths);
  set_vec("bg", o.bg_paths);
  set_dbl("alpha", o.alpha);
  set_dbl("gamma", o.gamma_db);
  set_int("rate", o.rate);
  set_dbl("duration", o.duration);
  set_bool("pcm16", o.pcm16);
  set_str("pairing", o.pairing);
  set_str("split", o.split);
  set_str("pool", o.pool_path);
  set_int("clips-per-bucket", o.clips_per_bucket);
  set_str("mode", o.mode);
  set_int("n-way", o.n_way);
  set_int("k-shot", o.k_shot);
  set_int("n-query", o.n_query);
  set_int("episodes", o.n_episodes);
  set_str("episodes-file", o.episodes_file);
  set_str("seeds", o.seeds_csv);
  set_str("embeddings", o.embeddings_path);
  set_vec("embedding-sets", o.embeddings_list);
  set_int("dim", o.dim);
  set_dbl("sigma", o.sigma);
  set_dbl("beta", o.beta);
  set_dbl("spread", o.spread);
  set_dbl("clean-mean", o.clean_mean);
  set_dbl("clean-sd", o.clean_sd);
  set_dbl("mixed-mean", o.mixed_mean);
  set_dbl("mixed-sd", o.mixed_sd);
  if (c.contains("model-seed")) {
    o.model_seed = c.at("model-seed").get<std::uint64_t>();
    o.model_seed_set = true;
  }
  set_int("frames", o.frames);
  set_str("head", o.head);
  set_str("heads", o.heads_csv);
  set_str("aggregate", o.aggregate);
  set_bool("gap", o.with_gap);
  set_str("strengths", o.strengths_csv);
  set_str("betas", o.betas_csv);
  set_dbl("tau", o.tau);
  set_dbl("lr", o.lr);
  set_dbl("l2", o.l2);
  set_int("iters", o.iters);
  set_int("dn4-k", o.dn4_k);
  set_dbl("lap-lambda", o.lap_lambda);
  set_int("lap-knn", o.lap_knn);
  set_int("lap-iters", o.lap_iters);
  set_dbl("lp-rho", o.lp_rho);
  set_int("lp-knn", o.lp_knn);
  set_dbl("sinkhorn-eps", o.sinkhorn_eps);
  set_int("sinkhorn-iters", o.sinkhorn_iters);
}

inline void add_common_flags(CLI::App* sub, Opts& o) {
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--config", o.config_path, "JSON config file; explicit flags win");
  sub->add_option("--jobs", o.jobs, "worker threads (0 = logical cores)");
  sub->add_option("--seed", o.seed, "base seed");
}

inline void add_pool_flags(CLI::App* sub, Opts& o) {
  sub->add_option("--pairing", o.pairing, "standard | hard | path to a pairing file");
  sub->add_option("--split", o.split, "canonical | seeded:<seed>");
  sub->add_option("--pool", o.pool_path, "clip index file (clip_ref<TAB>fg<TAB>bg)");
  sub->add_option("--clips-per-bucket", o.clips_per_bucket,
                  "clips per (fg, bg) bucket for the synthetic pool");
}

inline void add_episode_flags(CLI::App* sub, Opts& o) {
  sub->add_option("--mode", o.mode, "iid | ood | hard-ood | clean-query");
  sub->add_option("--n-way", o.n_way, "classes per episode");
  sub->add_option("--k-shot", o.k_shot, "supports per class");
  sub->add_option("--n-query", o.n_query, "queries per class");
  sub->add_option("--episodes", o.n_episodes, "episode count (per seed)");
}

inline void add_generator_flags(CLI::App* sub, Opts& o, CLI::Option** model_seed_opt) {
  sub->add_option("--dim", o.dim, "embedding dimension");
  sub->add_option("--sigma", o.sigma, "angular noise scale");
  sub->add_option("--beta", o.beta, "background direction weight");
  sub->add_option("--spread", o.spread, "sd of per-background log magnitude factors");
  sub->add_option("--clean-mean", o.clean_mean, "clean magnitude mean");
  sub->add_option("--clean-sd", o.clean_sd, "clean magnitude sd");
  sub->add_option("--mixed-mean", o.mixed_mean, "mixed magnitude mean");
  sub->add_option("--mixed-sd", o.mixed_sd, "mixed magnitude sd");
  *model_seed_opt = sub->add_option("--model-seed", o.model_seed,
                                    "generator structure seed (defaults to --seed)");
  sub->add_option("--frames", o.frames, "local descriptors per clip (0 = none)");
}

inline void add_head_flags(CLI::App* sub, Opts& o) {
  sub->add_option("--tau", o.tau, "cosine logit scale");
  sub->add_option("--lr", o.lr, "gradient step size");
  sub->add_option("--l2", o.l2, "weight decay");
  sub->add_option("--iters", o.iters, "gradient iterations");
  sub->add_option("--dn4-k", o.dn4_k, "neighbors per descriptor");
  sub->add_option("--lap-lambda", o.lap_lambda, "pairwise weight");
  sub->add_option("--lap-knn", o.lap_knn, "query graph degree");
  sub->add_option("--lap-iters", o.lap_iters, "bound iterations");
  sub->add_option("--lp-rho", o.lp_rho, "propagation damping");
  sub->add_option("--lp-knn", o.lp_knn, "propagation graph degree");
  sub->add_option("--sinkhorn-eps", o.sinkhorn_eps, "entropic regularizer");
  sub->add_option("--sinkhorn-iters", o.sinkhorn_iters, "normalization budget");
}

inline HeadConfig head_config_from(const Opts& o, const std::string& name) {
  HeadConfig cfg;
  cfg.kind = head_kind_from_string(name);
  cfg.tau = o.tau;
  cfg.lr = o.lr;
  cfg.l2 = o.l2;
  cfg.iters = o.iters;
  cfg.dn4_k = o.dn4_k;
  cfg.lap_lambda = o.lap_lambda;
  cfg.lap_knn = o.lap_knn;
  cfg.lap_iters = o.lap_iters;
  cfg.lp_rho = o.lp_rho;
  cfg.lp_knn = o.lp_knn;
  cfg.sinkhorn_eps = o.sinkhorn_eps;
  cfg.sinkhorn_iters = o.sinkhorn_iters;
  return cfg;
}

inline int effective_jobs(const Opts& o) {
  if (o.jobs > 0) return o.jobs;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

inline PairingTable resolve_pairing(const Opts& o, EpisodeMode mode) {
  std::string choice = o.pairing;
  if (choice.empty()) choice = mode == EpisodeMode::hard_ood ? "hard" : "standard";
  if (choice == "standard") return standard_pairing_table();
  if (choice == "hard") return hard_pairing_table();
  const auto variant =
      mode == EpisodeMode::hard_ood ? PairingVariant::hard : PairingVariant::standard;
  return load_pairing_table(read_text_file(choice), variant);
}

inline SplitAssignment resolve_split(const PairingTable& table, const Opts& o) {
  if (o.split == "canonical") return assign_splits(table, true);
  if (o.split.rfind("seeded:", 0) == 0) {
    std::uint64_t s = 0;
    try {
      s = std::stoull(o.split.substr(7));
    } catch (const std::exception&) {
      throw UsageError("--split seeded:<seed> needs an integer seed");
    }
    return assign_splits(table, false, s);
  }
  throw UsageError("--split must be canonical or seeded:<seed>");
}

inline ClipPool load_clip_pool(const std::string& path) {
  ClipPool pool;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw std::runtime_error("clip index: malformed line: " + line);
    }
    const std::string ref = line.substr(0, t1);
    const std::string fg = normalize_class_name(line.substr(t1 + 1, t2 - t1 - 1));
    std::string bg = line.substr(t2 + 1);
    if (bg != kNoBackground) bg = normalize_class_name(bg);
    pool.add(ref, fg, bg);
  }
  if (pool.size() == 0) throw std::runtime_error("clip index is empty: " + path);
  return pool;
}

inline ClipPool resolve_pool(const Opts& o, const PairingTable& table,
                             const SplitAssignment& split) {
  if (!o.pool_path.empty()) return load_clip_pool(o.pool_path);
  return synthetic_pool(table, split.test, o.clips_per_bucket);
}

inline EpisodeSpec base_spec(const Opts& o) {
  EpisodeSpec spec;
  spec.n_way = o.n_way;
  spec.k_shot = o.k_shot;
  spec.n_query = o.n_query;
  spec.mode = episode_mode_from_string(o.mode);
  spec.seed = o.seed;
  return spec;
}

struct Batch {
  std::vector<Episode> episodes;
  std::vector<std::pair<std::uint64_t, int>> seed_groups;
};

inline Batch sample_batch(const PairingTable& table, const SplitAssignment& split,
                          const EpisodeSpec& spec, const ClipPool& pool, int n,
                          const std::vector<std::uint64_t>& seeds) {
  if (n < 1) throw UsageError("--episodes must be positive");
  Batch batch;
  const std::vector<std::uint64_t> bases = seeds.empty()
      ? std::vector<std::uint64_t>{spec.seed} : seeds;
  for (const std::uint64_t base : bases) {
    for (int i = 0; i < n; ++i) {
      EpisodeSpec ep_spec = spec;
      ep_spec.seed = derive_rng(base, static_cast<std::uint64_t>(i));
      batch.episodes.push_back(sample_episode(table, split, ep_spec, pool));
    }
    batch.seed_groups.emplace_back(base, n);
  }
  return batch;
}

inline EmbeddingSet resolve_embeddings(const Opts& o, const ClipPool& pool) {
  if (!o.embeddings_path.empty()) return load_embedding_set(o.embeddings_path);
  ContractionParams params;
  params.dim = o.dim;
  params.sigma = o.sigma;
  params.beta = o.beta;
  params.bg_mag_spread = o.spread;
  params.clean_mag_mean = o.clean_mean;
  params.clean_mag_sd = o.clean_sd;
  params.mixed_mag_mean = o.mixed_mean;
  params.mixed_mag_sd = o.mixed_sd;
  params.model_seed = o.model_seed_set ? o.model_seed : o.seed;
  const ContractionModel model = model_for_pool(pool, params);
  return synth_embeddings(model, items_from_pool(pool), params.model_seed, o.frames);
}

inline nlohmann::json run_json_base(const Opts& o, const std::string& subcommand) {
  nlohmann::json j;
  j["subcommand"] = subcommand;
  j["seed"] = o.seed;
  j["jobs"] = o.jobs;
  return j;
}

inline void put_pool_keys(nlohmann::json& j, const Opts& o, EpisodeMode mode) {
  j["pairing"] = o.pairing.empty()
      ? (mode == EpisodeMode::hard_ood ? "hard" : "standard") : o.pairing;
  j["split"] = o.split;
  if (!o.pool_path.empty()) j["pool"] = o.pool_path;
  j["clips-per-bucket"] = o.clips_per_bucket;
}

inline void put_episode_keys(nlohmann::json& j, const Opts& o) {
  j["mode"] = o.mode;
  j["n-way"] = o.n_way;
  j["k-shot"] = o.k_shot;
  j["n-query"] = o.n_query;
  j["episodes"] = o.n_episodes;
  if (!o.episodes_file.empty()) j["episodes-file"] = o.episodes_file;
  if (!o.seeds_csv.empty()) j["seeds"] = o.seeds_csv;
}

inline void put_generator_keys(nlohmann::json& j, const Opts& o) {
  j["dim"] = o.dim;
  j["sigma"] = o.sigma;
  j["beta"] = o.beta;
  j["spread"] = o.spread;
  j["clean-mean"] = o.clean_mean;
  j["clean-sd"] = o.clean_sd;
  j["mixed-mean"] = o.mixed_mean;
  j["mixed-sd"] = o.mixed_sd;
  if (o.model_seed_set) j["model-seed"] = o.model_seed;
  j["frames"] = o.frames;
}

inline void put_head_keys(nlohmann::json& j, const Opts& o) {
  j["tau"] = o.tau;
  j["lr"] = o.lr;
  j["l2"] = o.l2;
  j["iters"] = o.iters;
  j["dn4-k"] = o.dn4_k;
  j["lap-lambda"] = o.lap_lambda;
  j["lap-knn"] = o.lap_knn;
  j["lap-iters"] = o.lap_iters;
  j["lp-rho"] = o.lp_rho;
  j["lp-knn"] = o.lp_knn;
  j["sinkhorn-eps"] = o.sinkhorn_eps;
  j["sinkhorn-iters"] = o.sinkhorn_iters;
}

inline void write_run_json(const nlohmann::json& j, const std::string& out_dir) {
  write_text_file(out_dir + "/run.json", j.dump(2) + "\n");
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["head"] = r.head;
  j["emb"] = r.emb_id;
  j["mode"] = r.mode;
  j["n_episodes"] = r.n_episodes;
  j["mean_acc"] = r.mean_acc;
  j["ci"] = r.ci;
  j["per_episode"] = r.per_episode;
  if (!r.seed_groups.empty()) {
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& [seed, count] : r.seed_groups) {
      groups.push_back({{"seed", seed}, {"count", count}});
    }
    j["seed_groups"] = groups;
  }
  return j;
}

// ---- subcommand bodies ----

inline int cmd_mix(const Opts& o) {
  if (o.fg_paths.empty()) throw UsageError("mix: at least one --fg is required");
  if (o.fg_paths.size() != o.bg_paths.size()) {
    throw UsageError("mix: --fg and --bg counts must match");
  }
  std::filesystem::create_directories(o.out);
  MixParams params;
  params.alpha = o.alpha;
  params.gamma_db = o.gamma_db;
  params.sample_rate = o.rate;
  params.duration_s = o.duration;

  std::ostringstream manifest;
  manifest << "index,fg,bg,out,alpha,gamma_db,fg_lufs,bg_lufs,bg_gain\n";
  for (std::size_t i = 0; i < o.fg_paths.size(); ++i) {
    const Waveform fg = read_wav(o.fg_paths[i]);
    const Waveform bg = read_wav(o.bg_paths[i]);
    const MixResult res = mix_pair(fg, bg, params);
    char name[32];
    std::snprintf(name, sizeof name, "mix_%03zu.wav", i);
    write_wav(o.out + "/" + name, res.mix, o.pcm16 ? WavFormat::pcm16 : WavFormat::float32);
    manifest << i << "," << o.fg_paths[i] << "," << o.bg_paths[i] << "," << name << ","
             << spurbench::detail::fmt6(o.alpha) << "," << spurbench::detail::fmt6(o.gamma_db)
             << "," << spurbench::detail::fmt6(res.fg_lufs) << ","
             << spurbench::detail::fmt6(res.bg_lufs) << ","
             << spurbench::detail::fmt6(res.bg_gain) << "\n";
  }
  write_text_file(o.out + "/manifest.csv", manifest.str());

  nlohmann::json j = run_json_base(o, "mix");
  j["fg"] = o.fg_paths;
  j["bg"] = o.bg_paths;
  j["alpha"] = o.alpha;
  j["gamma"] = o.gamma_db;
  j["rate"] = o.rate;
  j["duration"] = o.duration;
  j["pcm16"] = o.pcm16;
  write_run_json(j, o.out);
  std::cout << "mix: wrote " << o.fg_paths.size() << " mixture(s) to " << o.out << "\n";
  return 0;
}

inline int cmd_episodes(const Opts& o) {
  const EpisodeSpec spec = base_spec(o);
  const PairingTable table = resolve_pairing(o, spec.mode);
  const SplitAssignment split = resolve_split(table, o);
  const ClipPool pool = resolve_pool(o, table, split);
  const auto seeds = o.seeds_csv.empty() ? std::vector<std::uint64_t>{}
                                         : parse_seed_list(o.seeds_csv);
  const Batch batch = sample_batch(table, split, spec, pool, o.n_episodes, seeds);

  std::filesystem::create_directories(o.out);
  write_text_file(o.out + "/episodes.txt", serialize_episodes(batch.episodes));
  nlohmann::json j = run_json_base(o, "episodes");
  put_pool_keys(j, o, spec.mode);
  put_episode_keys(j, o);
  write_run_json(j, o.out);
  std::cout << "episodes: wrote " << batch.episodes.size() << " episode(s) to " << o.out << "\n";
  return 0;
}

inline int cmd_synth(const Opts& o) {
  const EpisodeSpec spec = base_spec(o);
  const PairingTable table = resolve_pairing(o, spec.mode);
  const SplitAssignment split = resolve_split(table, o);
  const ClipPool pool = resolve_pool(o, table, split);
  const EmbeddingSet set = resolve_embeddings(o, pool);

  std::filesystem::create_directories(o.out);
  save_embedding_set(set, o.out + "/embeddings.manifest");
  nlohmann::json j = run_json_base(o, "synth");
  put_pool_keys(j, o, spec.mode);
  put_generator_keys(j, o);
  write_run_json(j, o.out);
  std::cout << "synth: wrote " << set.global_vecs.size() << " vector(s) of dim " << set.dim
            << " to " << o.out << "\n";
  return 0;
}

inline int cmd_eval(const Opts& o) {
  const EpisodeSpec spec = base_spec(o);
  const PairingTable table = resolve_pairing(o, spec.mode);
  const SplitAssignment split = resolve_split(table, o);
  const ClipPool pool = resolve_pool(o, table, split);

  Batch batch;
  if (!o.episodes_file.empty()) {
    batch.episodes = parse_episodes(read_text_file(o.episodes_file));
    if (batch.episodes.empty()) throw std::runtime_error("episode file is empty");
  } else {
    const auto seeds = o.seeds_csv.empty() ? std::vector<std::uint64_t>{}
                                           : parse_seed_list(o.seeds_csv);
    batch = sample_batch(table, split, spec, pool, o.n_episodes, seeds);
  }

  const EmbeddingSet emb = resolve_embeddings(o, pool);
  const HeadConfig cfg = head_config_from(o, o.head);
  EvalOptions opts;
  opts.jobs = effective_jobs(o);
  opts.aggregate = aggregate_from_string(o.aggregate);
  opts.emb_id = o.embeddings_path.empty() ? "synth" : basename_of(o.embeddings_path);
  opts.seed_groups = batch.seed_groups;

  std::vector<EvalReport> reports;
  reports.push_back(run_eval(batch.episodes, cfg, emb, opts));
  nlohmann::json j_reports = nlohmann::json::array();
  j_reports.push_back(report_to_json(reports[0]));

  nlohmann::json j;
  if (o.with_gap) {
    const std::uint64_t twin_base = mix64(o.seed ^ kTwinSeedSalt);
    std::vector<Episode> twins;
    twins.reserve(batch.episodes.size());
    for (std::size_t i = 0; i < batch.episodes.size(); ++i) {
      twins.push_back(ood_twin(batch.episodes[i], table, pool,
                               derive_rng(twin_base, static_cast<std::uint64_t>(i))));
    }
    reports.push_back(run_eval(twins, cfg, emb, opts));
    j_reports.push_back(report_to_json(reports[1]));
    j["delta"] = gap_report(reports[0], reports[1]);
  }

  std::filesystem::create_directories(o.out);
  write_text_file(o.out + "/report.csv", report_csv(reports));
  j["reports"] = j_reports;
  write_text_file(o.out + "/report.json", j.dump(2) + "\n");

  nlohmann::json run = run_json_base(o, "eval");
  put_pool_keys(run, o, spec.mode);
  put_episode_keys(run, o);
  if (!o.embeddings_path.empty()) {
    run["embeddings"] = o.embeddings_path;
  } else {
    put_generator_keys(run, o);
  }
  run["head"] = o.head;
  run["aggregate"] = o.aggregate;
  run["gap"] = o.with_gap;
  put_head_keys(run, o);
  write_run_json(run, o.out);

  std::cout << "eval: " << reports[0].head << " " << reports[0].mode << " mean "
            << spurbench::detail::fmt6(reports[0].mean_acc) << " +/- "
            << spurbench::detail::fmt6(reports[0].ci) << " over " << reports[0].n_episodes
            << " episode(s)\n";
  if (o.with_gap) {
    std::cout << "eval: ood mean " << spurbench::detail::fmt6(reports[1].mean_acc)
              << ", delta " << spurbench::detail::fmt6(j["delta"].get<double>()) << "\n";
  }
  return 0;
}

inline int cmd_swap(const Opts& o) {
  const EpisodeSpec spec = base_spec(o);
  const PairingTable table = resolve_pairing(o, spec.mode);
  const SplitAssignment split = resolve_split(table, o);
  const ClipPool pool = resolve_pool(o, table, split);

  Batch batch;
  if (!o.episodes_file.empty()) {
    batch.episodes = parse_episodes(read_text_file(o.episodes_file));
  } else {
    batch = sample_batch(table, split, spec, pool, o.n_episodes, {});
  }

  std::vector<EmbeddingSet> storage;
  std::vector<std::pair<std::string, const EmbeddingSet*>> sets;
  if (!o.embeddings_list.empty()) {
    storage.reserve(o.embeddings_list.size());
    for (const auto& path : o.embeddings_list) {
      storage.push_back(load_embedding_set(path));
      sets.emplace_back(basename_of(path), &storage.back());
    }
  } else {
    const auto betas = parse_double_list(o.betas_csv, "--betas");
    storage.reserve(betas.size());
    const auto items = items_from_pool(pool);
    for (const double beta : betas) {
      ContractionParams params;
      params.dim = o.dim;
      params.sigma = o.sigma;
      params.beta = beta;
      params.bg_mag_spread = o.spread;
      params.clean_mag_mean = o.clean_mean;
      params.clean_mag_sd = o.clean_sd;
      params.mixed_mag_mean = o.mixed_mean;
      params.mixed_mag_sd = o.mixed_sd;
      params.model_seed = o.model_seed_set ? o.model_seed : o.seed;
      const ContractionModel model = model_for_pool(pool, params);
      storage.push_back(synth_embeddings(model, items, params.model_seed, o.frames));
      char id[32];
      std::snprintf(id, sizeof id, "synth-b%g", beta);
      sets.emplace_back(id, &storage.back());
    }
  }

  std::vector<HeadConfig> heads;
  std::vector<std::string> head_names = split_list(o.heads_csv);
  if (head_names.empty()) throw UsageError("--heads: empty list");
  for (const auto& name : head_names) heads.push_back(head_config_from(o, name));

  const auto matrix = head_swap_matrix(sets, heads, batch.episodes, effective_jobs(o));

  std::filesystem::create_directories(o.out);
  write_text_file(o.out + "/matrix.csv", matrix_csv(matrix));
  std::vector<EvalReport> flat;
  for (const auto& row : matrix) {
    for (const auto& cell : row) flat.push_back(cell);
  }
  write_text_file(o.out + "/swap_detail.csv", report_csv(flat));

  nlohmann::json run = run_json_base(o, "swap");
  put_pool_keys(run, o, spec.mode);
  put_episode_keys(run, o);
  run["heads"] = o.heads_csv;
  if (!o.embeddings_list.empty()) {
    run["embedding-sets"] = o.embeddings_list;
  } else {
    run["betas"] = o.betas_csv;
    put_generator_keys(run, o);
  }
  put_head_keys(run, o);
  write_run_json(run, o.out);
  std::cout << "swap: " << heads.size() << " head(s) x " << sets.size() << " set(s) over "
            << batch.episodes.size() << " episode(s)\n";
  return 0;
}

inline int cmd_geometry(const Opts& o) {
  const EpisodeSpec spec = base_spec(o);
  const PairingTable table = resolve_pairing(o, spec.mode);
  const SplitAssignment split = resolve_split(table, o);
  const ClipPool pool = resolve_pool(o, table, split);
  const EmbeddingSet emb = resolve_embeddings(o, pool);

  std::map<std::string, std::vector<std::vector<double>>> clean_by_class, mixed_by_class;
  for (const auto& [key, clips] : pool.buckets()) {
    for (const auto& ref : clips) {
      const auto it = emb.global_vecs.find(ref);
      if (it == emb.global_vecs.end()) {
        throw std::runtime_error("missing embedding for clip: " + ref);
      }
      std::vector<double> v(it->second.begin(), it->second.end());
      (key.second == kNoBackground ? clean_by_class : mixed_by_class)[key.first]
          .push_back(std::move(v));
    }
  }
  if (clean_by_class.empty()) {
    throw std::runtime_error("geometry: no clean (background-free) clips in the pool");
  }

  std::ostringstream csv;
  csv << "class,n_clean,n_mixed,mag_clean_mean,mag_clean_ci,mag_mixed_mean,mag_mixed_ci,"
         "mag_u,mag_p,cos_clean_mean,cos_clean_ci,cos_mixed_mean,cos_mixed_ci,cos_u,cos_p,"
         "cos_diff\n";
  nlohmann::json j_classes = nlohmann::json::array();
  const auto emit = [&](const std::string& name, const GeometryReport& rep) {
    char u1[32], p1[32], u2[32], p2[32];
    std::snprintf(u1, sizeof u1, "%.6g", rep.magnitude.u);
    std::snprintf(p1, sizeof p1, "%.6g", rep.magnitude.p);
    std::snprintf(u2, sizeof u2, "%.6g", rep.cosine.u);
    std::snprintf(p2, sizeof p2, "%.6g", rep.cosine.p);
    csv << name << "," << rep.n_clean << "," << rep.n_mixed << ","
        << spurbench::detail::fmt6(rep.magnitude.clean_mean) << ","
        << spurbench::detail::fmt6(rep.magnitude.clean_ci) << ","
        << spurbench::detail::fmt6(rep.magnitude.mixed_mean) << ","
        << spurbench::detail::fmt6(rep.magnitude.mixed_ci) << "," << u1 << "," << p1 << ","
        << spurbench::detail::fmt6(rep.cosine.clean_mean) << ","
        << spurbench::detail::fmt6(rep.cosine.clean_ci) << ","
        << spurbench::detail::fmt6(rep.cosine.mixed_mean) << ","
        << spurbench::detail::fmt6(rep.cosine.mixed_ci) << "," << u2 << "," << p2 << ","
        << spurbench::detail::fmt6(rep.cosine_diff) << "\n";
    nlohmann::json jc;
    jc["class"] = name;
    jc["n_clean"] = rep.n_clean;
    jc["n_mixed"] = rep.n_mixed;
    jc["magnitude"] = {{"clean_mean", rep.magnitude.clean_mean},
                       {"clean_ci", rep.magnitude.clean_ci},
                       {"mixed_mean", rep.magnitude.mixed_mean},
                       {"mixed_ci", rep.magnitude.mixed_ci},
                       {"u", rep.magnitude.u},
                       {"p", rep.magnitude.p}};
    jc["cosine"] = {{"clean_mean", rep.cosine.clean_mean},
                    {"clean_ci", rep.cosine.clean_ci},
                    {"mixed_mean", rep.cosine.mixed_mean},
                    {"mixed_ci", rep.cosine.mixed_ci},
                    {"u", rep.cosine.u},
                    {"p", rep.cosine.p}};
    jc["cos_diff"] = rep.cosine_diff;
    j_classes.push_back(jc);
  };

  for (const auto& [cls, clean_vecs] : clean_by_class) {
    const auto mit = mixed_by_class.find(cls);
    if (mit == mixed_by_class.end()) continue;
    std::map<std::string, std::vector<std::vector<double>>> c{{cls, clean_vecs}};
    std::map<std::string, std::vector<std::vector<double>>> m{{cls, mit->second}};
    emit(cls, contraction_report(c, m));
  }
  emit("(all)", contraction_report(clean_by_class, mixed_by_class));

  std::vector<std::vector<double>> clean_all, mixed_all;
  for (const auto& [cls, vecs] : clean_by_class) {
    clean_all.insert(clean_all.end(), vecs.begin(), vecs.end());
  }
  for (const auto& [cls, vecs] : mixed_by_class) {
    mixed_all.insert(mixed_all.end(), vecs.begin(), vecs.end());
  }
  const DistributionReport dist = mmd_rbf(clean_all, mixed_all);

  std::filesystem::create_directories(o.out);
  write_text_file(o.out + "/geometry.csv", csv.str());
  nlohmann::json j;
  j["classes"] = j_classes;
  j["distribution"] = {{"mmd", dist.mmd},
                       {"centroid_cosine", dist.centroid_cosine},
                       {"bandwidth", dist.bandwidth}};
  write_text_file(o.out + "/geometry.json", j.dump(2) + "\n");
  write_text_file(o.out + "/distribution.json",
                  nlohmann::json(j["distribution"]).dump(2) + "\n");

  nlohmann::json run = run_json_base(o, "geometry");
  put_pool_keys(run, o, spec.mode);
  if (!o.embeddings_path.empty()) {
    run["embeddings"] = o.embeddings_path;
  } else {
    put_generator_keys(run, o);
  }
  write_run_json(run, o.out);
  std::cout << "geometry: " << j_classes.size() << " row(s), mmd "
            << spurbench::detail::fmt6(dist.mmd) << "\n";
  return 0;
}

inline int cmd_sweep(const Opts& o) {
  EpisodeSpec spec = base_spec(o);
  spec.mode = EpisodeMode::iid;  // the sweep pairs IID batches with OOD twins
  const PairingTable table = resolve_pairing(o, spec.mode);
  const SplitAssignment split = resolve_split(table, o);
  const ClipPool pool = resolve_pool(o, table, split);

  ContractionParams params;
  params.dim = o.dim;
  params.sigma = o.sigma;
  params.beta = o.beta;
  params.bg_mag_spread = o.spread;
  params.clean_mag_mean = o.clean_mean;
  params.clean_mag_sd = o.clean_sd;
  params.mixed_mag_mean = o.mixed_mean;
  params.mixed_mag_sd = o.mixed_sd;
  params.model_seed = o.model_seed_set ? o.model_seed : o.seed;

  const auto strengths = parse_double_list(o.strengths_csv, "--strengths");
  const HeadConfig cfg = head_config_from(o, o.head);
  const auto points = sweep_strengths(table, split, pool, spec, cfg, params, strengths,
                                      o.n_episodes, effective_jobs(o));

  std::filesystem::create_directories(o.out);
  write_text_file(o.out + "/sweep.csv", sweep_csv(points));
  nlohmann::json run = run_json_base(o, "sweep");
  put_pool_keys(run, o, spec.mode);
  run["n-way"] = o.n_way;
  run["k-shot"] = o.k_shot;
  run["n-query"] = o.n_query;
  run["episodes"] = o.n_episodes;
  run["head"] = o.head;
  run["strengths"] = o.strengths_csv;
  put_generator_keys(run, o);
  put_head_keys(run, o);
  write_run_json(run, o.out);
  std::cout << "sweep: " << points.size() << " point(s), delta "
            << spurbench::detail::fmt6(points.front().delta) << " -> "
            << spurbench::detail::fmt6(points.back().delta) << "\n";
  return 0;
}

}  // namespace detail

// argv excludes the program name. Returns the process exit status: 0 on
// success, 1 on runtime failure, 2 on usage errors.
inline int run_command(const std::vector<std::string>& argv) {
  Opts o;
  if (const char* env = std::getenv("SPURBENCH_SEED")) {
    try {
      o.seed = std::stoull(env);
    } catch (const std::exception&) {
      std::cerr << "error: SPURBENCH_SEED is not an integer: " << env << "\n";
      return 1;
    }
  }

  // The config file seeds option values before flag parsing, so flags win.
  for (std::size_t i = 0; i < argv.size(); ++i) {
    if (argv[i] == "--config" && i + 1 < argv.size()) {
      o.config_path = argv[i + 1];
    } else if (argv[i].rfind("--config=", 0) == 0) {
      o.config_path = argv[i].substr(9);
    }
  }
  if (!o.config_path.empty()) {
    try {
      const auto text = detail::read_text_file(o.config_path);
      detail::apply_config(nlohmann::json::parse(text), o);
    } catch (const std::exception& e) {
      std::cerr << "error: bad config " << o.config_path << ": " << e.what() << "\n";
      return 1;
    }
  }

  CLI::App app{"spurious foreground-background correlation benchmark toolkit", "spurbench"};
  app.require_subcommand(1);

  CLI::Option* model_seed_opt = nullptr;
  CLI::Option* model_seed_opt2 = nullptr;
  CLI::Option* model_seed_opt3 = nullptr;
  CLI::Option* model_seed_opt4 = nullptr;
  CLI::Option* model_seed_opt5 = nullptr;

  auto* mix = app.add_subcommand("mix", "mix foreground/background WAV pairs");
  detail::add_common_flags(mix, o);
  mix->add_option("--fg", o.fg_paths, "foreground WAV path (repeatable)");
  mix->add_option("--bg", o.bg_paths, "background WAV path (repeatable)");
  mix->add_option("--alpha", o.alpha, "background presence factor");
  mix->add_option("--gamma", o.gamma_db, "loudness margin in LU");
  mix->add_option("--rate", o.rate, "target sample rate");
  mix->add_option("--duration", o.duration, "target duration in seconds");
  mix->add_flag("--pcm16", o.pcm16, "write 16-bit PCM instead of float32");

  auto* episodes = app.add_subcommand("episodes", "sample episode manifests");
  detail::add_common_flags(episodes, o);
  detail::add_pool_flags(episodes, o);
  detail::add_episode_flags(episodes, o);
  episodes->add_option("--seeds", o.seeds_csv, "comma-separated base seeds");

  auto* synth = app.add_subcommand("synth", "generate a synthetic embedding set");
  detail::add_common_flags(synth, o);
  detail::add_pool_flags(synth, o);
  detail::add_generator_flags(synth, o, &model_seed_opt);

  auto* eval = app.add_subcommand("eval", "evaluate a head on an episode batch");
  detail::add_common_flags(eval, o);
  detail::add_pool_flags(eval, o);
  detail::add_episode_flags(eval, o);
  eval->add_option("--episodes-file", o.episodes_file, "replay an episode manifest");
  eval->add_option("--seeds", o.seeds_csv, "comma-separated base seeds");
  eval->add_option("--embeddings", o.embeddings_path, "embedding manifest path");
  detail::add_generator_flags(eval, o, &model_seed_opt2);
  eval->add_option("--head", o.head, "classifier head");
  eval->add_option("--aggregate", o.aggregate, "episodes | seeds");
  eval->add_flag("--gap", o.with_gap, "also evaluate OOD twins and report delta");
  detail::add_head_flags(eval, o);

  auto* swap = app.add_subcommand("swap", "heads x embedding-sets cross matrix");
  detail::add_common_flags(swap, o);
  detail::add_pool_flags(swap, o);
  detail::add_episode_flags(swap, o);
  swap->add_option("--episodes-file", o.episodes_file, "replay an episode manifest");
  swap->add_option("--embeddings", o.embeddings_list, "embedding manifest (repeatable)");
  swap->add_option("--heads", o.heads_csv, "comma-separated heads");
  swap->add_option("--betas", o.betas_csv, "synthetic set betas when no --embeddings");
  detail::add_generator_flags(swap, o, &model_seed_opt3);
  detail::add_head_flags(swap, o);

  auto* geometry = app.add_subcommand("geometry", "magnitude/angle and distribution reports");
  detail::add_common_flags(geometry, o);
  detail::add_pool_flags(geometry, o);
  geometry->add_option("--embeddings", o.embeddings_path, "embedding manifest path");
  detail::add_generator_flags(geometry, o, &model_seed_opt4);

  auto* sweep = app.add_subcommand("sweep", "gap curve over generator strengths");
  detail::add_common_flags(sweep, o);
  detail::add_pool_flags(sweep, o);
  detail::add_episode_flags(sweep, o);
  sweep->add_option("--head", o.head, "classifier head");
  sweep->add_option("--strengths", o.strengths_csv, "comma-separated betas");
  detail::add_generator_flags(sweep, o, &model_seed_opt5);
  detail::add_head_flags(sweep, o);

  try {
    std::vector<std::string> reversed(argv.rbegin(), argv.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::cerr << app.help();
    return 2;
  }

  for (CLI::Option* opt :
       {model_seed_opt, model_seed_opt2, model_seed_opt3, model_seed_opt4, model_seed_opt5}) {
    if (opt != nullptr && opt->count() > 0) o.model_seed_set = true;
  }

  try {
    if (mix->parsed()) return detail::cmd_mix(o);
    if (episodes->parsed()) return detail::cmd_episodes(o);
    if (synth->parsed()) return detail::cmd_synth(o);
    if (eval->parsed()) return detail::cmd_eval(o);
    if (swap->parsed()) return detail::cmd_swap(o);
    if (geometry->parsed()) return detail::cmd_geometry(o);
    if (sweep->parsed()) return detail::cmd_sweep(o);
    std::cerr << "error: no subcommand\n" << app.help();
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace cli
}  // namespace spurbench
