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

#include "spurbench/embeddings.hpp"
#include "spurbench/episodes.hpp"

namespace spurbench {

enum class HeadKind { proto, cosine, linear, dn4, laplacianshot, bdcspn, protolp, bpa };

inline std::string to_string(HeadKind k) {
  switch (k) {
    case HeadKind::proto: return "proto";
    case HeadKind::cosine: return "cosine";
    case HeadKind::linear: return "linear";
    case HeadKind::dn4: return "dn4";
    case HeadKind::laplacianshot: return "laplacianshot";
    case HeadKind::bdcspn: return "bdcspn";
    case HeadKind::protolp: return "protolp";
    case HeadKind::bpa: return "bpa";
  }
  return "?";
}

inline HeadKind head_kind_from_string(const std::string& s) {
  if (s == "proto") return HeadKind::proto;
  if (s == "cosine") return HeadKind::cosine;
  if (s == "linear") return HeadKind::linear;
  if (s == "dn4") return HeadKind::dn4;
  if (s == "laplacianshot") return HeadKind::laplacianshot;
  if (s == "bdcspn") return HeadKind::bdcspn;
  if (s == "protolp") return HeadKind::protolp;
  if (s == "bpa") return HeadKind::bpa;
  throw std::invalid_argument("unknown head: " + s);
}

struct HeadConfig {
  HeadKind kind = HeadKind::proto;
  double tau = 10.0;          // cosine logit scale (cosine, bdcspn)
  double lr = 0.01;           // gradient step (cosine, linear)
  int iters = 100;            // gradient iterations (cosine, linear)
  double l2 = 1e-3;           // weight decay (cosine, linear)
  int dn4_k = 3;              // neighbors per descriptor
  double lap_lambda = 0.7;    // laplacianshot pairwise weight
  int lap_knn = 3;            // laplacianshot query graph degree
  int lap_iters = 20;         // laplacianshot bound iterations
  double lp_rho = 0.9;        // propagation damping, must stay < 1
  int lp_knn = 8;             // propagation graph degree
  double sinkhorn_eps = 0.05;
  int sinkhorn_iters = 100;
  double sinkhorn_tol = 1e-6;
};

struct Prediction {
  int n_way = 0;
  std::vector<std::vector<double>> posterior;  // one row per query, sums to 1
  std::vector<int> argmax;                     // ties break to the lowest class index
};

// Episode items resolved to dense vectors; labels index into ep.classes.
struct ResolvedEpisode {
  int n_way = 0;
  int dim = 0;
  std::vector<Eigen::VectorXd> support, query;
  std::vector<int> support_label, query_label;
  std::vector<std::vector<Eigen::VectorXd>> support_frames, query_frames;  // dn4 only
};

namespace detail {

inline Eigen::VectorXd to_eigen(const std::vector<float>& v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = v[static_cast<std::size_t>(i)];
  return out;
}

inline std::vector<double> stable_softmax(const std::vector<double>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    z += out[i];
  }
  for (auto& x : out) x /= z;
  return out;
}

inline void finalize(Prediction& pred) {
  for (auto& row : pred.posterior) {
    double sum = 0.0;
    for (double x : row) {
      if (x < 0.0) throw std::logic_error("negative posterior entry");
      sum += x;
    }
    if (sum <= 0.0) {
      std::fill(row.begin(), row.end(), 1.0 / static_cast<double>(row.size()));
    } else {
      for (auto& x : row) x /= sum;
    }
  }
  pred.argmax.clear();
  for (const auto& row : pred.posterior) {
    int best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[best]) best = static_cast<int>(c);
    }
    pred.argmax.push_back(best);
  }
}

inline Eigen::VectorXd normalized_or_throw(const Eigen::VectorXd& v, const char* who) {
  const double n = v.norm();
  if (n < 1e-12) throw std::invalid_argument(std::string(who) + ": cannot normalize zero vector");
  return v / n;
}

inline std::vector<Eigen::VectorXd> class_prototypes(const ResolvedEpisode& ep) {
  std::vector<Eigen::VectorXd> protos(static_cast<std::size_t>(ep.n_way),
                                      Eigen::VectorXd::Zero(ep.dim));
  std::vector<int> counts(static_cast<std::size_t>(ep.n_way), 0);
  for (std::size_t i = 0; i < ep.support.size(); ++i) {
    protos[static_cast<std::size_t>(ep.support_label[i])] += ep.support[i];
    ++counts[static_cast<std::size_t>(ep.support_label[i])];
  }
  for (int c = 0; c < ep.n_way; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) {
      throw std::logic_error("class without supports in episode");
    }
    protos[static_cast<std::size_t>(c)] /= counts[static_cast<std::size_t>(c)];
  }
  return protos;
}

}  // namespace detail

inline ResolvedEpisode resolve_episode(const Episode& ep, const EmbeddingSet& emb,
                                       bool need_frames = false) {
  ResolvedEpisode out;
  out.n_way = static_cast<int>(ep.classes.size());
  out.dim = emb.dim;
  const auto fetch = [&](const EpisodeItem& item) {
    const auto it = emb.global_vecs.find(item.clip_ref);
    if (it == emb.global_vecs.end()) {
      throw std::runtime_error("missing embedding for clip: " + item.clip_ref);
    }
    return detail::to_eigen(it->second);
  };
  const auto fetch_frames = [&](const EpisodeItem& item) {
    const auto it = emb.frame_vecs.find(item.clip_ref);
    if (it == emb.frame_vecs.end() || it->second.empty()) {
      throw std::runtime_error("no local descriptors for clip: " + item.clip_ref);
    }
    std::vector<Eigen::VectorXd> rows;
    rows.reserve(it->second.size());
    for (const auto& row : it->second) rows.push_back(detail::to_eigen(row));
    return rows;
  };
  for (const auto& item : ep.support) {
    out.support.push_back(fetch(item));
    out.support_label.push_back(ep.label_of(item));
    if (need_frames) out.support_frames.push_back(fetch_frames(item));
  }
  for (const auto& item : ep.query) {
    out.query.push_back(fetch(item));
    out.query_label.push_back(ep.label_of(item));
    if (need_frames) out.query_frames.push_back(fetch_frames(item));
  }
  return out;
}

// Softmax over negative squared Euclidean distances to class mean prototypes.
inline Prediction classify_proto(const ResolvedEpisode& ep) {
  const auto protos = detail::class_prototypes(ep);
  Prediction pred;
  pred.n_way = ep.n_way;
  for (const auto& q : ep.query) {
    std::vector<double> logits(static_cast<std::size_t>(ep.n_way));
    for (int c = 0; c < ep.n_way; ++c) {
      logits[static_cast<std::size_t>(c)] = -(q - protos[static_cast<std::size_t>(c)]).squaredNorm();
    }
    pred.posterior.push_back(detail::stable_softmax(logits));
  }
  detail::finalize(pred);
  return pred;
}

// Class weight vectors trained by full-batch gradient descent on
// cross-entropy over scaled cosine logits, initialized at normalized
// prototypes. Queries scored by cosine to the learned weights.
inline Prediction classify_cosine(const ResolvedEpisode& ep, const HeadConfig& cfg) {
  const auto protos = detail::class_prototypes(ep);
  std::vector<Eigen::VectorXd> w;
  for (const auto& p : protos) w.push_back(detail::normalized_or_throw(p, "classify_cosine"));

  std::vector<Eigen::VectorXd> xhat;
  for (const auto& x : ep.support) xhat.push_back(detail::normalized_or_throw(x, "classify_cosine"));

  const auto n_sup = ep.support.size();
  for (int it = 0; it < cfg.iters; ++it) {
    std::vector<Eigen::VectorXd> grad(static_cast<std::size_t>(ep.n_way),
                                      Eigen::VectorXd::Zero(ep.dim));
    for (std::size_t i = 0; i < n_sup; ++i) {
      std::vector<double> logits(static_cast<std::size_t>(ep.n_way));
      std::vector<double> cosines(static_cast<std::size_t>(ep.n_way));
      for (int c = 0; c < ep.n_way; ++c) {
        const auto& wc = w[static_cast<std::size_t>(c)];
        cosines[static_cast<std::size_t>(c)] = xhat[i].dot(wc) / wc.norm();
        logits[static_cast<std::size_t>(c)] = cfg.tau * cosines[static_cast<std::size_t>(c)];
      }
      const auto probs = detail::stable_softmax(logits);
      for (int c = 0; c < ep.n_way; ++c) {
        const double coeff =
            cfg.tau * (probs[static_cast<std::size_t>(c)] -
                       (ep.support_label[i] == c ? 1.0 : 0.0)) / static_cast<double>(n_sup);
        const auto& wc = w[static_cast<std::size_t>(c)];
        const double wn = wc.norm();
        // d cos(x, w)/d w = (x_hat - cos * w_hat) / ||w||
        grad[static_cast<std::size_t>(c)] +=
            coeff * (xhat[i] - cosines[static_cast<std::size_t>(c)] * (wc / wn)) / wn;
      }
    }
    for (int c = 0; c < ep.n_way; ++c) {
      auto& wc = w[static_cast<std::size_t>(c)];
      wc -= cfg.lr * (grad[static_cast<std::size_t>(c)] + cfg.l2 * wc);
    }
  }

  Prediction pred;
  pred.n_way = ep.n_way;
  for (const auto& q : ep.query) {
    const auto qhat = detail::normalized_or_throw(q, "classify_cosine");
    std::vector<double> logits(static_cast<std::size_t>(ep.n_way));
    for (int c = 0; c < ep.n_way; ++c) {
      const auto& wc = w[static_cast<std::size_t>(c)];
      logits[static_cast<std::size_t>(c)] = cfg.tau * qhat.dot(wc) / wc.norm();
    }
    pred.posterior.push_back(detail::stable_softmax(logits));
  }
  detail::finalize(pred);
  return pred;
}

// Multinomial logistic regression on the raw support vectors, full-batch
// gradient descent with a fixed budget and L2 penalty on the weights.
inline Prediction classify_linear(const ResolvedEpisode& ep, const HeadConfig& cfg) {
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(ep.n_way, ep.dim);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(ep.n_way);
  const auto n_sup = ep.support.size();

  for (int it = 0; it < cfg.iters; ++it) {
    Eigen::MatrixXd gW = Eigen::MatrixXd::Zero(ep.n_way, ep.dim);
    Eigen::VectorXd gb = Eigen::VectorXd::Zero(ep.n_way);
    for (std::size_t i = 0; i < n_sup; ++i) {
      Eigen::VectorXd logits = W * ep.support[i] + b;
      const double m = logits.maxCoeff();
      Eigen::VectorXd probs = (logits.array() - m).exp();
      probs /= probs.sum();
      probs[ep.support_label[i]] -= 1.0;
      gW += probs * ep.support[i].transpose() / static_cast<double>(n_sup);
      gb += probs / static_cast<double>(n_sup);
    }
    W -= cfg.lr * (gW + cfg.l2 * W);
    b -= cfg.lr * gb;
  }

  Prediction pred;
  pred.n_way = ep.n_way;
  for (const auto& q : ep.query) {
    Eigen::VectorXd logits = W * q + b;
    std::vector<double> l(logits.data(), logits.data() + logits.size());
    pred.posterior.push_back(detail::stable_softmax(l));
  }
  detail::finalize(pred);
  return pred;
}

// Image-to-class scoring over local descriptors: each query descriptor
// contributes the sum of its k best cosine similarities within a class.
inline Prediction classify_dn4(const ResolvedEpisode& ep, const HeadConfig& cfg) {
  if (ep.query_frames.size() != ep.query.size() ||
      ep.support_frames.size() != ep.support.size()) {
    throw std::runtime_error("no local descriptors for episode");
  }
  std::vector<std::vector<Eigen::VectorXd>> class_descs(static_cast<std::size_t>(ep.n_way));
  for (std::size_t i = 0; i < ep.support_frames.size(); ++i) {
    auto& bank = class_descs[static_cast<std::size_t>(ep.support_label[i])];
    for (const auto& d : ep.support_frames[i]) {
      bank.push_back(detail::normalized_or_throw(d, "classify_dn4"));
    }
  }

  Prediction pred;
  pred.n_way = ep.n_way;
  for (const auto& frames : ep.query_frames) {
    std::vector<double> scores(static_cast<std::size_t>(ep.n_way), 0.0);
    for (const auto& d : frames) {
      const auto dhat = detail::normalized_or_throw(d, "classify_dn4");
      for (int c = 0; c < ep.n_way; ++c) {
        const auto& bank = class_descs[static_cast<std::size_t>(c)];
        std::vector<double> sims;
        sims.reserve(bank.size());
        for (const auto& s : bank) sims.push_back(dhat.dot(s));
        const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cfg.dn4_k),
                                                    sims.size());
        std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(k), sims.end(),
                          std::greater<double>());
        for (std::size_t j = 0; j < k; ++j) scores[static_cast<std::size_t>(c)] += sims[j];
      }
    }
    pred.posterior.push_back(detail::stable_softmax(scores));
  }
  detail::finalize(pred);
  return pred;
}

}  // namespace spurbench
