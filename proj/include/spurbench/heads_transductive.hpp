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

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "spurbench/heads.hpp"

namespace spurbench {

namespace detail {

// Mutual k-NN indices by squared Euclidean distance, self excluded.
inline std::vector<std::vector<std::size_t>> knn_indices(const std::vector<Eigen::VectorXd>& pts,
                                                         int k) {
  const std::size_t n = pts.size();
  std::vector<std::vector<std::size_t>> out(n);
  if (n < 2 || k < 1) return out;
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> d;
    d.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) d.emplace_back((pts[i] - pts[j]).squaredNorm(), j);
    }
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), d.end());
    for (std::size_t j = 0; j < kk; ++j) out[i].push_back(d[j].second);
  }
  return out;
}

}  // namespace detail

// Bound optimization of a unary prototype-distance cost plus a Laplacian
// smoothness term over a k-NN query graph. lambda = 0 reduces to the proto
// head exactly.
inline Prediction classify_laplacianshot(const ResolvedEpisode& ep, const HeadConfig& cfg) {
  const auto protos = detail::class_prototypes(ep);
  const std::size_t nq = ep.query.size();

  std::vector<std::vector<double>> unary(nq, std::vector<double>(static_cast<std::size_t>(ep.n_way)));
  for (std::size_t i = 0; i < nq; ++i) {
    for (int c = 0; c < ep.n_way; ++c) {
      unary[i][static_cast<std::size_t>(c)] =
          (ep.query[i] - protos[static_cast<std::size_t>(c)]).squaredNorm();
    }
  }

  const auto neighbors = detail::knn_indices(ep.query, cfg.lap_knn);

  std::vector<std::vector<double>> y(nq);
  for (std::size_t i = 0; i < nq; ++i) {
    std::vector<double> logits(static_cast<std::size_t>(ep.n_way));
    for (int c = 0; c < ep.n_way; ++c) {
      logits[static_cast<std::size_t>(c)] = -unary[i][static_cast<std::size_t>(c)];
    }
    y[i] = detail::stable_softmax(logits);
  }

  for (int it = 0; it < cfg.lap_iters; ++it) {
    std::vector<std::vector<double>> next(nq);
    double change = 0.0;
    for (std::size_t i = 0; i < nq; ++i) {
      std::vector<double> logits(static_cast<std::size_t>(ep.n_way));
      for (int c = 0; c < ep.n_way; ++c) {
        double msg = 0.0;
        for (std::size_t j : neighbors[i]) msg += y[j][static_cast<std::size_t>(c)];
        logits[static_cast<std::size_t>(c)] =
            -unary[i][static_cast<std::size_t>(c)] + cfg.lap_lambda * msg;
      }
      next[i] = detail::stable_softmax(logits);
      for (int c = 0; c < ep.n_way; ++c) {
        change = std::max(change, std::abs(next[i][static_cast<std::size_t>(c)] -
                                           y[i][static_cast<std::size_t>(c)]));
      }
    }
    y = std::move(next);
    if (change < 1e-6) break;
  }

  Prediction pred;
  pred.n_way = ep.n_way;
  pred.posterior = std::move(y);
  detail::finalize(pred);
  return pred;
}

// Prototype rectification: remove the support/query mean shift, then update
// each prototype with softly assigned shifted queries; classify by cosine.
inline Prediction classify_bdcspn(const ResolvedEpisode& ep, const HeadConfig& cfg) {
  const auto protos = detail::class_prototypes(ep);
  const std::size_t nq = ep.query.size();

  Eigen::VectorXd support_mean = Eigen::VectorXd::Zero(ep.dim);
  for (const auto& s : ep.support) support_mean += s;
  support_mean /= static_cast<double>(ep.support.size());
  Eigen::VectorXd query_mean = Eigen::VectorXd::Zero(ep.dim);
  for (const auto& q : ep.query) query_mean += q;
  if (nq > 0) query_mean /= static_cast<double>(nq);
  const Eigen::VectorXd shift = nq > 0 ? (support_mean - query_mean).eval()
                                       : Eigen::VectorXd::Zero(ep.dim).eval();

  std::vector<Eigen::VectorXd> shifted;
  shifted.reserve(nq);
  for (const auto& q : ep.query) shifted.push_back(q + shift);

  const auto cos_to = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double na = a.norm(), nb = b.norm();
    if (na < 1e-12 || nb < 1e-12) {
      throw std::invalid_argument("classify_bdcspn: cannot normalize zero vector");
    }
    return a.dot(b) / (na * nb);
  };

  // Soft query-to-class assignment against the unrectified prototypes.
  std::vector<Eigen::VectorXd> rectified(protos);
  std::vector<double> mass(static_cast<std::size_t>(ep.n_way));
  std::vector<Eigen::VectorXd> accum(static_cast<std::size_t>(ep.n_way),
                                     Eigen::VectorXd::Zero(ep.dim));
  std::vector<int> counts(static_cast<std::size_t>(ep.n_way), 0);
  for (std::size_t i = 0; i < ep.support.size(); ++i) {
    accum[static_cast<std::size_t>(ep.support_label[i])] += ep.support[i];
    ++counts[static_cast<std::size_t>(ep.support_label[i])];
  }
  for (int c = 0; c < ep.n_way; ++c) mass[static_cast<std::size_t>(c)] = counts[static_cast<std::size_t>(c)];
  for (const auto& q : shifted) {
    std::vector<double> logits(static_cast<std::size_t>(ep.n_way));
    for (int c = 0; c < ep.n_way; ++c) {
      logits[static_cast<std::size_t>(c)] = cfg.tau * cos_to(q, protos[static_cast<std::size_t>(c)]);
    }
    const auto soft = detail::stable_softmax(logits);
    for (int c = 0; c < ep.n_way; ++c) {
      accum[static_cast<std::size_t>(c)] += soft[static_cast<std::size_t>(c)] * q;
      mass[static_cast<std::size_t>(c)] += soft[static_cast<std::size_t>(c)];
    }
  }
  for (int c = 0; c < ep.n_way; ++c) {
    rectified[static_cast<std::size_t>(c)] = accum[static_cast<std::size_t>(c)] / mass[static_cast<std::size_t>(c)];
  }

  Prediction pred;
  pred.n_way = ep.n_way;
  for (const auto& q : shifted) {
    std::vector<double> logits(static_cast<std::size_t>(ep.n_way));
    for (int c = 0; c < ep.n_way; ++c) {
      logits[static_cast<std::size_t>(c)] =
          cfg.tau * cos_to(q, rectified[static_cast<std::size_t>(c)]);
    }
    pred.posterior.push_back(detail::stable_softmax(logits));
  }
  detail::finalize(pred);
  return pred;
}

// Label propagation over a normalized k-NN Gaussian affinity, closed form
// F = (I - rho*S)^{-1} Y. Queries are mean-aligned to the support centroid
// and all nodes L2-normalized before graph construction, so batch-shared
// displacement and radial contraction cannot fragment the graph.
inline Prediction classify_protolp(const ResolvedEpisode& ep, const HeadConfig& cfg) {
  if (cfg.lp_rho < 0.0 || cfg.lp_rho >= 1.0) {
    throw std::invalid_argument("classify_protolp: rho must lie in [0, 1)");
  }
  const std::size_t ns = ep.support.size(), nq = ep.query.size();
  Prediction pred;
  pred.n_way = ep.n_way;
  if (nq == 0) {
    detail::finalize(pred);
    return pred;
  }

  Eigen::VectorXd support_mean = Eigen::VectorXd::Zero(ep.dim);
  for (const auto& s : ep.support) support_mean += s;
  support_mean /= static_cast<double>(ns);
  Eigen::VectorXd query_mean = Eigen::VectorXd::Zero(ep.dim);
  for (const auto& q : ep.query) query_mean += q;
  query_mean /= static_cast<double>(nq);

  std::vector<Eigen::VectorXd> nodes;
  nodes.reserve(ns + nq);
  for (const auto& s : ep.support) {
    nodes.push_back(detail::normalized_or_throw(s, "classify_protolp"));
  }
  for (const auto& q : ep.query) {
    nodes.push_back(
        detail::normalized_or_throw(q - query_mean + support_mean, "classify_protolp"));
  }
  const std::size_t n = nodes.size();

  const auto neighbors = detail::knn_indices(nodes, cfg.lp_knn);
  double bandwidth = 0.0;
  std::size_t edges = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : neighbors[i]) {
      bandwidth += (nodes[i] - nodes[j]).squaredNorm();
      ++edges;
    }
  }
  bandwidth = edges > 0 ? std::max(bandwidth / static_cast<double>(edges), 1e-12) : 1.0;

  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : neighbors[i]) {
      const double w = std::exp(-(nodes[i] - nodes[j]).squaredNorm() / (2.0 * bandwidth));
      W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w;
      W(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = w;
    }
  }
  Eigen::VectorXd deg = W.rowwise().sum();
  Eigen::VectorXd dinv = deg.array().max(1e-300).rsqrt();
  Eigen::MatrixXd S = dinv.asDiagonal() * W * dinv.asDiagonal();

  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(n, ep.n_way);
  for (std::size_t i = 0; i < ns; ++i) Y(static_cast<Eigen::Index>(i), ep.support_label[i]) = 1.0;

  const Eigen::MatrixXd A =
      Eigen::MatrixXd::Identity(n, n) - cfg.lp_rho * S;
  const Eigen::MatrixXd F = A.partialPivLu().solve(Y);

  for (std::size_t i = 0; i < nq; ++i) {
    std::vector<double> row(static_cast<std::size_t>(ep.n_way));
    for (int c = 0; c < ep.n_way; ++c) {
      row[static_cast<std::size_t>(c)] =
          std::max(F(static_cast<Eigen::Index>(ns + i), c), 0.0);
    }
    pred.posterior.push_back(std::move(row));
  }
  detail::finalize(pred);
  return pred;
}

// Balanced pairwise-affinity re-embedding: Sinkhorn-normalize the cosine
// affinity over all episode items (zero diagonal), then run the proto head
// on the affinity rows.
inline Prediction classify_bpa(const ResolvedEpisode& ep, const HeadConfig& cfg) {
  const std::size_t ns = ep.support.size(), nq = ep.query.size();
  const std::size_t n = ns + nq;
  std::vector<Eigen::VectorXd> items;
  items.reserve(n);
  for (const auto& s : ep.support) items.push_back(detail::normalized_or_throw(s, "classify_bpa"));
  for (const auto& q : ep.query) items.push_back(detail::normalized_or_throw(q, "classify_bpa"));

  Eigen::MatrixXd K(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 0.0;  // stays zero
      } else {
        const double cost = 1.0 - items[i].dot(items[j]);
        K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            std::exp(-cost / cfg.sinkhorn_eps);
      }
    }
  }

  double residual = 1.0;
  for (int it = 0; it < cfg.sinkhorn_iters; ++it) {
    for (Eigen::Index i = 0; i < K.rows(); ++i) {
      const double s = K.row(i).sum();
      if (s > 0.0) K.row(i) /= s;
    }
    for (Eigen::Index j = 0; j < K.cols(); ++j) {
      const double s = K.col(j).sum();
      if (s > 0.0) K.col(j) /= s;
    }
    residual = 0.0;
    for (Eigen::Index i = 0; i < K.rows(); ++i) {
      residual = std::max(residual, std::abs(K.row(i).sum() - 1.0));
    }
    for (Eigen::Index j = 0; j < K.cols(); ++j) {
      residual = std::max(residual, std::abs(K.col(j).sum() - 1.0));
    }
    if (residual < cfg.sinkhorn_tol) break;
  }
  if (residual >= cfg.sinkhorn_tol) {
    throw std::runtime_error("sinkhorn budget exceeded (residual " + std::to_string(residual) +
                             ")");
  }

  ResolvedEpisode re;
  re.n_way = ep.n_way;
  re.dim = static_cast<int>(n);
  for (std::size_t i = 0; i < ns; ++i) {
    re.support.push_back(K.row(static_cast<Eigen::Index>(i)).transpose());
    re.support_label.push_back(ep.support_label[i]);
  }
  for (std::size_t i = 0; i < nq; ++i) {
    re.query.push_back(K.row(static_cast<Eigen::Index>(ns + i)).transpose());
    re.query_label.push_back(ep.query_label[i]);
  }
  return classify_proto(re);
}

inline Prediction classify(const ResolvedEpisode& ep, const HeadConfig& cfg) {
  switch (cfg.kind) {
    case HeadKind::proto: return classify_proto(ep);
    case HeadKind::cosine: return classify_cosine(ep, cfg);
    case HeadKind::linear: return classify_linear(ep, cfg);
    case HeadKind::dn4: return classify_dn4(ep, cfg);
    case HeadKind::laplacianshot: return classify_laplacianshot(ep, cfg);
    case HeadKind::bdcspn: return classify_bdcspn(ep, cfg);
    case HeadKind::protolp: return classify_protolp(ep, cfg);
    case HeadKind::bpa: return classify_bpa(ep, cfg);
  }
  throw std::logic_error("unreachable head kind");
}

inline bool head_needs_frames(HeadKind kind) { return kind == HeadKind::dn4; }

}  // namespace spurbench
