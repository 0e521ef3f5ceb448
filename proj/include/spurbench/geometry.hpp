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
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace spurbench {

struct Decomposition {
  double r = 0.0;
  std::vector<double> direction;
};

// Radial-angular split v = r * direction, ||direction|| = 1.
inline Decomposition decompose(const std::vector<double>& v) {
  double norm2 = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument("decompose: non-finite input");
    norm2 += x * x;
  }
  const double r = std::sqrt(norm2);
  if (r < 1e-300) throw std::invalid_argument("no direction for the zero vector");
  Decomposition d;
  d.r = r;
  d.direction.reserve(v.size());
  for (double x : v) d.direction.push_back(x / r);
  return d;
}

// Normalized arithmetic mean of raw clean vectors.
inline std::vector<double> clean_prototype(const std::vector<std::vector<double>>& clean) {
  if (clean.empty()) throw std::invalid_argument("clean_prototype: no vectors");
  std::vector<double> mean(clean[0].size(), 0.0);
  for (const auto& v : clean) {
    if (v.size() != mean.size()) throw std::invalid_argument("clean_prototype: dim mismatch");
    for (std::size_t i = 0; i < v.size(); ++i) mean[i] += v[i];
  }
  double norm2 = 0.0;
  for (auto& x : mean) {
    x /= static_cast<double>(clean.size());
    norm2 += x * x;
  }
  const double norm = std::sqrt(norm2);
  if (norm < 1e-12) throw std::invalid_argument("degenerate prototype: zero mean");
  for (auto& x : mean) x /= norm;
  return mean;
}

struct MannWhitneyResult {
  double u = 0.0;  // U statistic for the first sample
  double p = 1.0;  // two-sided
};

namespace detail {

// U for sample a against sample b, counting tied pairs as 1/2 (the midrank
// convention expressed pairwise).
inline double pairwise_u(const std::vector<double>& a, const std::vector<double>& b) {
  double u = 0.0;
  for (double x : a) {
    for (double y : b) {
      if (x > y) {
        u += 1.0;
      } else if (x == y) {
        u += 0.5;
      }
    }
  }
  return u;
}

inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace detail

// Two-sided Mann-Whitney U. Exact permutation enumeration for small samples
// (|a|*|b| <= 64), normal approximation with tie and continuity correction
// otherwise.
inline MannWhitneyResult mann_whitney_u(const std::vector<double>& a,
                                        const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("mann_whitney_u: empty sample");
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;
  MannWhitneyResult res;
  res.u = detail::pairwise_u(a, b);

  if (na * nb <= 64) {
    // Enumerate all assignments of the pooled multiset to the two groups.
    std::vector<double> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    std::vector<std::size_t> idx(na);
    for (std::size_t i = 0; i < na; ++i) idx[i] = i;
    std::size_t total = 0, le = 0, ge = 0;
    const double eps = 1e-12;
    while (true) {
      std::vector<bool> in_a(n, false);
      for (std::size_t i : idx) in_a[i] = true;
      std::vector<double> ga, gb;
      ga.reserve(na);
      gb.reserve(nb);
      for (std::size_t i = 0; i < n; ++i) (in_a[i] ? ga : gb).push_back(pooled[i]);
      const double u = detail::pairwise_u(ga, gb);
      ++total;
      if (u <= res.u + eps) ++le;
      if (u >= res.u - eps) ++ge;
      // next combination of indices
      std::size_t k = na;
      while (k > 0 && idx[k - 1] == n - na + k - 1) --k;
      if (k == 0) break;
      ++idx[k - 1];
      for (std::size_t j = k; j < na; ++j) idx[j] = idx[j - 1] + 1;
    }
    const double p_le = static_cast<double>(le) / static_cast<double>(total);
    const double p_ge = static_cast<double>(ge) / static_cast<double>(total);
    res.p = std::min(1.0, 2.0 * std::min(p_le, p_ge));
    return res;
  }

  const double mean = static_cast<double>(na) * static_cast<double>(nb) / 2.0;
  std::map<double, std::size_t> tie_counts;
  for (double x : a) ++tie_counts[x];
  for (double x : b) ++tie_counts[x];
  double tie_term = 0.0;
  for (const auto& [value, t] : tie_counts) {
    tie_term += static_cast<double>(t) * t * t - static_cast<double>(t);
  }
  const double nn = static_cast<double>(n);
  const double var = (static_cast<double>(na) * nb / 12.0) *
                     ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
  if (var <= 0.0) {
    res.p = 1.0;  // all pooled values identical
    return res;
  }
  const double z = (std::abs(res.u - mean) - 0.5) / std::sqrt(var);
  res.p = std::min(1.0, 2.0 * detail::normal_sf(std::max(z, 0.0)));
  return res;
}

struct ChannelStats {
  double clean_mean = 0.0, clean_ci = 0.0;
  double mixed_mean = 0.0, mixed_ci = 0.0;
  double u = 0.0, p = 1.0;
};

struct GeometryReport {
  ChannelStats magnitude;
  ChannelStats cosine;
  double cosine_diff = 0.0;
  std::size_t n_clean = 0, n_mixed = 0;
};

namespace detail {

inline std::pair<double, double> mean_ci(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  if (xs.size() < 2) return {mean, 0.0};
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= (n - 1.0);
  return {mean, 1.96 * std::sqrt(var / n)};
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na < 1e-300 || nb < 1e-300) throw std::invalid_argument("cosine: zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace detail

// Magnitude and cosine-to-own-clean-prototype statistics over clean vs
// mixed slices, grouped per class; prototypes come from the clean slices.
inline GeometryReport contraction_report(
    const std::map<std::string, std::vector<std::vector<double>>>& clean_by_class,
    const std::map<std::string, std::vector<std::vector<double>>>& mixed_by_class) {
  if (clean_by_class.empty() || mixed_by_class.empty()) {
    throw std::invalid_argument("contraction_report: empty slice");
  }
  std::map<std::string, std::vector<double>> prototypes;
  for (const auto& [cls, vecs] : clean_by_class) prototypes[cls] = clean_prototype(vecs);
  for (const auto& [cls, vecs] : mixed_by_class) {
    if (!prototypes.count(cls)) {
      throw std::invalid_argument("missing clean reference for class " + cls);
    }
  }

  std::vector<double> clean_mag, mixed_mag, clean_cos, mixed_cos;
  for (const auto& [cls, vecs] : clean_by_class) {
    for (const auto& v : vecs) {
      clean_mag.push_back(decompose(v).r);
      clean_cos.push_back(detail::cosine(v, prototypes[cls]));
    }
  }
  for (const auto& [cls, vecs] : mixed_by_class) {
    for (const auto& v : vecs) {
      mixed_mag.push_back(decompose(v).r);
      mixed_cos.push_back(detail::cosine(v, prototypes[cls]));
    }
  }

  GeometryReport rep;
  rep.n_clean = clean_mag.size();
  rep.n_mixed = mixed_mag.size();
  std::tie(rep.magnitude.clean_mean, rep.magnitude.clean_ci) = detail::mean_ci(clean_mag);
  std::tie(rep.magnitude.mixed_mean, rep.magnitude.mixed_ci) = detail::mean_ci(mixed_mag);
  std::tie(rep.cosine.clean_mean, rep.cosine.clean_ci) = detail::mean_ci(clean_cos);
  std::tie(rep.cosine.mixed_mean, rep.cosine.mixed_ci) = detail::mean_ci(mixed_cos);
  const auto mw_mag = mann_whitney_u(clean_mag, mixed_mag);
  rep.magnitude.u = mw_mag.u;
  rep.magnitude.p = mw_mag.p;
  const auto mw_cos = mann_whitney_u(clean_cos, mixed_cos);
  rep.cosine.u = mw_cos.u;
  rep.cosine.p = mw_cos.p;
  rep.cosine_diff = std::abs(rep.cosine.clean_mean - rep.cosine.mixed_mean);
  return rep;
}

struct DistributionReport {
  double mmd = 0.0;             // squared MMD, >= 0 up to numerical zero
  double centroid_cosine = 0.0;
  double bandwidth = 0.0;
};

// RBF-kernel squared MMD (V-statistic, so identical samples give exactly 0)
// with the median pairwise distance heuristic when no bandwidth is given.
inline DistributionReport mmd_rbf(const std::vector<std::vector<double>>& X,
                                  const std::vector<std::vector<double>>& Y,
                                  double bandwidth = 0.0) {
  if (X.empty() || Y.empty()) throw std::invalid_argument("mmd_rbf: empty sample");
  const std::size_t dim = X[0].size();
  for (const auto& v : X) {
    if (v.size() != dim) throw std::invalid_argument("mmd_rbf: dim mismatch");
  }
  for (const auto& v : Y) {
    if (v.size() != dim) throw std::invalid_argument("mmd_rbf: dim mismatch");
  }

  const auto sqdist = [dim](const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < dim; ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
    return d;
  };

  DistributionReport rep;
  if (bandwidth <= 0.0) {
    std::vector<std::vector<double>> pooled(X);
    pooled.insert(pooled.end(), Y.begin(), Y.end());
    std::vector<double> dists;
    for (std::size_t i = 0; i < pooled.size(); ++i) {
      for (std::size_t j = i + 1; j < pooled.size(); ++j) {
        dists.push_back(std::sqrt(sqdist(pooled[i], pooled[j])));
      }
    }
    if (dists.empty()) {
      bandwidth = 1.0;
    } else {
      std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2),
                       dists.end());
      bandwidth = dists[dists.size() / 2];
      if (bandwidth < 1e-12) bandwidth = 1.0;
    }
  }
  rep.bandwidth = bandwidth;

  const double denom = 2.0 * bandwidth * bandwidth;
  const auto kernel_mean = [&](const std::vector<std::vector<double>>& A,
                               const std::vector<std::vector<double>>& B) {
    double acc = 0.0;
    for (const auto& a : A) {
      for (const auto& b : B) acc += std::exp(-sqdist(a, b) / denom);
    }
    return acc / (static_cast<double>(A.size()) * static_cast<double>(B.size()));
  };
  rep.mmd = kernel_mean(X, X) + kernel_mean(Y, Y) - 2.0 * kernel_mean(X, Y);

  std::vector<double> mx(dim, 0.0), my(dim, 0.0);
  for (const auto& v : X) {
    for (std::size_t i = 0; i < dim; ++i) mx[i] += v[i];
  }
  for (const auto& v : Y) {
    for (std::size_t i = 0; i < dim; ++i) my[i] += v[i];
  }
  for (std::size_t i = 0; i < dim; ++i) {
    mx[i] /= static_cast<double>(X.size());
    my[i] /= static_cast<double>(Y.size());
  }
  rep.centroid_cosine = detail::cosine(mx, my);
  return rep;
}

}  // namespace spurbench
