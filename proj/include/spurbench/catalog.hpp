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
#include <array>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "spurbench/pairing_data.hpp"
#include "spurbench/rng.hpp"

namespace spurbench {

enum class PairingVariant { standard, hard };

// Foreground class -> its four paired background classes. Immutable after
// load; row order in the source text carries no meaning.
struct PairingTable {
  PairingVariant variant = PairingVariant::standard;
  std::map<std::string, std::array<std::string, 4>> pairs;

  std::vector<std::string> foregrounds() const {
    std::vector<std::string> out;
    out.reserve(pairs.size());
    for (const auto& [fg, bgs] : pairs) out.push_back(fg);
    return out;
  }

  const std::array<std::string, 4>& backgrounds_of(const std::string& fg) const {
    const auto it = pairs.find(fg);
    if (it == pairs.end()) {
      throw std::invalid_argument("unknown foreground class: " + fg);
    }
    return it->second;
  }

  bool operator==(const PairingTable& o) const {
    return variant == o.variant && pairs == o.pairs;
  }
};

struct SplitAssignment {
  std::set<std::string> train, val, test;
};

struct CurationRecord {
  std::string clip_id;
  std::array<int, 4> scores{};
  bool kept = false;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

// A few class names circulate in two spellings; splits and CLI input accept
// either, the pairing tables use the right-hand forms.
inline std::string normalize_class_name(const std::string& name) {
  const std::string t = detail::trim(name);
  if (t == "coughing") return "cough";
  if (t == "clearing throat") return "throat clearing";
  return t;
}

inline PairingTable load_pairing_table(const std::string& source,
                                       PairingVariant variant = PairingVariant::standard) {
  PairingTable table;
  table.variant = variant;
  std::istringstream in(source);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;

    const auto arrow = line.find("->");
    if (arrow == std::string::npos) {
      throw std::invalid_argument("pairing row missing '->': " + line);
    }
    const std::string fg = normalize_class_name(line.substr(0, arrow));
    if (fg.empty()) throw std::invalid_argument("pairing row with empty foreground");

    std::vector<std::string> bgs;
    std::string rest = line.substr(arrow + 2);
    std::size_t pos = 0;
    while (pos <= rest.size()) {
      const auto comma = rest.find(',', pos);
      const std::string item = detail::trim(
          comma == std::string::npos ? rest.substr(pos) : rest.substr(pos, comma - pos));
      if (item.empty()) throw std::invalid_argument("empty background name for " + fg);
      bgs.push_back(normalize_class_name(item));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }

    if (bgs.size() != 4) {
      throw std::invalid_argument("pairing arity violation: " + fg + " has " +
                                  std::to_string(bgs.size()) + " backgrounds");
    }
    for (const auto& bg : bgs) {
      if (bg == fg) throw std::invalid_argument("self-pairing: " + fg);
    }
    if (table.pairs.count(fg)) throw std::invalid_argument("duplicate class: " + fg);
    table.pairs[fg] = {bgs[0], bgs[1], bgs[2], bgs[3]};
  }
  if (table.pairs.empty()) throw std::invalid_argument("empty pairing table");
  return table;
}

inline std::string serialize_pairing_table(const PairingTable& table) {
  std::ostringstream out;
  for (const auto& [fg, bgs] : table.pairs) {
    out << fg << " -> " << bgs[0] << ", " << bgs[1] << ", " << bgs[2] << ", " << bgs[3] << "\n";
  }
  return out.str();
}

inline PairingTable standard_pairing_table() {
  return load_pairing_table(kStandardPairingText, PairingVariant::standard);
}

inline PairingTable hard_pairing_table() {
  return load_pairing_table(kHardPairingText, PairingVariant::hard);
}

// Backgrounds serving more than `cap` foregrounds suggest a pairing edit
// reintroduced a dataset-wide shortcut. Advisory only.
inline std::vector<std::string> over_representation_warnings(const PairingTable& table,
                                                             int cap = 12) {
  std::map<std::string, int> uses;
  for (const auto& [fg, bgs] : table.pairs) {
    std::set<std::string> uniq(bgs.begin(), bgs.end());
    for (const auto& bg : uniq) ++uses[bg];
  }
  std::vector<std::string> warnings;
  for (const auto& [bg, n] : uses) {
    if (n > cap) {
      warnings.push_back("background '" + bg + "' serves " + std::to_string(n) +
                         " foregrounds (cap " + std::to_string(cap) + ")");
    }
  }
  return warnings;
}

// The fixed benchmark split. Backgrounds are shared across splits by design;
// only foreground classes are partitioned.
inline SplitAssignment canonical_split(const PairingTable& table) {
  static const char* kTest[] = {"crackling fire", "crow",     "chainsaw", "coughing",
                                "sneezing",       "blender",  "phone",    "pig"};
  static const char* kVal[] = {"page turn", "keys drop", "door slam", "clearing throat",
                               "drawer"};
  SplitAssignment split;
  for (const char* name : kTest) split.test.insert(normalize_class_name(name));
  for (const char* name : kVal) split.val.insert(normalize_class_name(name));
  for (const auto& [fg, bgs] : table.pairs) {
    if (!split.test.count(fg) && !split.val.count(fg)) split.train.insert(fg);
  }
  for (const auto& name : split.test) {
    if (!table.pairs.count(name)) {
      throw std::invalid_argument("canonical split requires benchmark class: " + name);
    }
  }
  for (const auto& name : split.val) {
    if (!table.pairs.count(name)) {
      throw std::invalid_argument("canonical split requires benchmark class: " + name);
    }
  }
  return split;
}

inline SplitAssignment assign_splits(const PairingTable& table, bool canonical,
                                     std::uint64_t seed = 0) {
  if (canonical) return canonical_split(table);
  std::vector<std::string> names = table.foregrounds();  // sorted by map order
  if (names.size() < 3) throw std::invalid_argument("cannot split: need at least 3 classes");

  Rng rng(seed);
  rng.shuffle(names);
  const auto n = names.size();
  const std::size_t n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n))));
  const std::size_t n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n))));
  if (n_val + n_test >= n) throw std::invalid_argument("cannot split: too few classes");

  SplitAssignment split;
  std::size_t i = 0;
  for (; i < n_test; ++i) split.test.insert(names[i]);
  for (; i < n_test + n_val; ++i) split.val.insert(names[i]);
  for (; i < n; ++i) split.train.insert(names[i]);
  return split;
}

inline CurationRecord curate(const std::array<int, 4>& scores, std::string clip_id = "") {
  for (int s : scores) {
    if (s < 1 || s > 5) throw std::invalid_argument("invalid score: " + std::to_string(s));
  }
  CurationRecord rec;
  rec.clip_id = std::move(clip_id);
  rec.scores = scores;
  const int sum = std::accumulate(scores.begin(), scores.end(), 0);
  rec.kept = sum >= 16;  // mean >= 4, "below 4" discards strictly
  return rec;
}

}  // namespace spurbench
