#include "ortsae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/QR>

#include "ortsae/errors.hpp"
#include "ortsae/numerics.hpp"
#include "ortsae/sae.hpp"

namespace ortsae {

double explained_variance(const Matrix& x, const Matrix& x_hat) {
  if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols()) {
    throw ShapeError("explained_variance: shapes differ");
  }
  const double total = row_variance_total(x);
  if (total == 0.0) {
    throw DataError("explained_variance: input has zero total variance");
  }
  return 1.0 - row_variance_total(x - x_hat) / total;
}

namespace {

// Pairwise cosine matrix with the delta clamp; diagonal left at 1.
Matrix cosine_matrix(const Matrix& w, double delta) {
  const Vector norms = w.colwise().norm().transpose();
  Matrix cos = w.transpose() * w;
  for (Index i = 0; i < cos.rows(); ++i) {
    for (Index j = 0; j < cos.cols(); ++j) {
      cos(i, j) /= std::max(norms(i) * norms(j), delta);
    }
  }
  return cos;
}

}  // namespace

Vector nearest_cosines(const Matrix& w_dec, double delta) {
  const Index m = w_dec.cols();
  if (m < 2) throw ConfigError("m: need at least 2 decoder columns");
  const Matrix cos = cosine_matrix(w_dec, delta);
  Vector out(m);
  for (Index i = 0; i < m; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < m; ++j) {
      if (j != i) best = std::max(best, cos(i, j));
    }
    out(i) = best;
  }
  return out;
}

double mean_cos_sim(const Matrix& w_dec, double delta) {
  return nearest_cosines(w_dec, delta).mean();
}

std::vector<std::pair<double, double>> clustering_coefficient(
    const Matrix& w_dec, const std::vector<double>& thresholds, double delta) {
  const Index m = w_dec.cols();
  if (m < 3) throw ConfigError("m: clustering needs at least 3 columns");
  const Matrix cos = cosine_matrix(w_dec, delta);

  std::vector<std::pair<double, double>> out;
  out.reserve(thresholds.size());
  std::vector<std::vector<Index>> adj(static_cast<std::size_t>(m));
  for (double t : thresholds) {
    for (auto& nbrs : adj) nbrs.clear();
    std::uint64_t edges = 0;
    for (Index i = 0; i < m; ++i) {
      for (Index j = i + 1; j < m; ++j) {
        if (std::abs(cos(i, j)) > t) {
          adj[static_cast<std::size_t>(i)].push_back(j);
          adj[static_cast<std::size_t>(j)].push_back(i);
          ++edges;
        }
      }
    }
    const double density =
        2.0 * static_cast<double>(edges) /
        (static_cast<double>(m) * static_cast<double>(m - 1));

    // Triangles by neighbor intersection over i < j < k; triples from degrees.
    std::uint64_t triangles = 0;
    std::uint64_t triples = 0;
    for (Index i = 0; i < m; ++i) {
      const auto& nbrs = adj[static_cast<std::size_t>(i)];
      const std::uint64_t deg = nbrs.size();
      triples += deg * (deg - 1) / 2;
      for (std::size_t a = 0; a < nbrs.size(); ++a) {
        if (nbrs[a] <= i) continue;
        for (std::size_t b = a + 1; b < nbrs.size(); ++b) {
          if (nbrs[b] <= i) continue;
          const auto& ja = adj[static_cast<std::size_t>(nbrs[a])];
          if (std::binary_search(ja.begin(), ja.end(), nbrs[b])) ++triangles;
        }
      }
    }
    const double coefficient =
        triples == 0 ? 0.0
                     : 3.0 * static_cast<double>(triangles) /
                           static_cast<double>(triples);
    out.emplace_back(density, coefficient);
  }
  return out;
}

double unique_features(const Matrix& w_a, const Matrix& w_b, double threshold,
                       double delta) {
  if (w_a.rows() != w_b.rows()) {
    throw ShapeError("unique_features: dictionaries live in different spaces");
  }
  const Index ma = w_a.cols();
  Index unique = 0;
  for (Index i = 0; i < ma; ++i) {
    double best = 0.0;
    for (Index j = 0; j < w_b.cols(); ++j) {
      best = std::max(best,
                      std::abs(cosine_sim(w_a.col(i), w_b.col(j), delta)));
    }
    if (best < threshold) ++unique;
  }
  return static_cast<double>(unique) / static_cast<double>(ma);
}

double ground_truth_mmcs(const SyntheticWorld& world, const Matrix& w_dec,
                         double delta) {
  if (world.dim_n != w_dec.rows()) {
    throw ShapeError("ground_truth_mmcs: decoder does not match the world");
  }
  const Index f = world.feature_count();
  double acc = 0.0;
  for (Index i = 0; i < f; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < w_dec.cols(); ++j) {
      best = std::max(best,
                      cosine_sim(world.features.col(i), w_dec.col(j), delta));
    }
    acc += best;
  }
  return acc / static_cast<double>(f);
}

namespace {

void check_distribution(const Vector& p, const char* name) {
  for (Index i = 0; i < p.size(); ++i) {
    if (!(p(i) >= 0.0)) {
      throw DataError(std::string(name) + ": negative probability");
    }
  }
  if (std::abs(p.sum() - 1.0) > 1e-9) {
    throw DataError(std::string(name) + ": does not sum to 1");
  }
}

double kl_divergence(const Vector& p, const Vector& q) {
  double acc = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    if (p(i) > 0.0) acc += p(i) * std::log(p(i) / q(i));
  }
  return acc;
}

}  // namespace

double kl_divergence_score(const Vector& p_orig, const Vector& p_sae,
                           const Vector& p_ablated) {
  if (p_orig.size() != p_sae.size() || p_orig.size() != p_ablated.size()) {
    throw ShapeError("kl_divergence_score: distribution lengths differ");
  }
  check_distribution(p_orig, "p_orig");
  check_distribution(p_sae, "p_sae");
  check_distribution(p_ablated, "p_ablated");
  const double baseline = kl_divergence(p_ablated, p_orig);
  if (!std::isfinite(baseline) || baseline <= 0.0) {
    throw DataError(
        "kl_divergence_score: zero or undefined ablated baseline");
  }
  return (baseline - kl_divergence(p_sae, p_orig)) / baseline;
}

namespace {

Vector least_squares_on(const Matrix& w, const std::vector<Index>& support,
                        const Vector& target) {
  Matrix sub(w.rows(), static_cast<Index>(support.size()));
  for (std::size_t a = 0; a < support.size(); ++a) {
    sub.col(static_cast<Index>(a)) = w.col(support[a]);
  }
  return sub.colPivHouseholderQr().solve(target);
}

Vector reconstruct(const Matrix& w, const std::vector<Index>& support,
                   const Vector& coef) {
  Vector out = Vector::Zero(w.rows());
  for (std::size_t a = 0; a < support.size(); ++a) {
    out += coef(static_cast<Index>(a)) * w.col(support[a]);
  }
  return out;
}

}  // namespace

std::optional<Decomposition> decompose_feature(const Vector& target,
                                               const Matrix& w_dec,
                                               Index max_atoms,
                                               double cos_accept,
                                               double coef_min) {
  if (target.size() != w_dec.rows()) {
    throw ShapeError("decompose_feature: target does not match the dictionary");
  }
  if (max_atoms < 1) throw ConfigError("max_atoms: must be >= 1");
  const Index m = w_dec.cols();
  const Vector norms = w_dec.colwise().norm().transpose();

  std::vector<Index> support;
  Vector coef;
  Vector residual = target;
  std::vector<bool> used(static_cast<std::size_t>(m), false);

  for (Index round = 0; round < max_atoms; ++round) {
    Index pick = -1;
    double best = 1e-12;  // positive correlations only; ties keep the lowest j
    for (Index j = 0; j < m; ++j) {
      if (used[static_cast<std::size_t>(j)] || norms(j) < 1e-12) continue;
      const double corr = residual.dot(w_dec.col(j)) / norms(j);
      if (corr > best) {
        best = corr;
        pick = j;
      }
    }
    if (pick < 0) break;
    used[static_cast<std::size_t>(pick)] = true;
    support.push_back(pick);
    coef = least_squares_on(w_dec, support, target);
    residual = target - reconstruct(w_dec, support, coef);
    if (residual.norm() < 1e-12) break;
  }

  // Drop weak atoms and refit until the support is stable.
  while (!support.empty()) {
    std::vector<Index> kept;
    for (std::size_t a = 0; a < support.size(); ++a) {
      if (coef(static_cast<Index>(a)) >= coef_min) kept.push_back(support[a]);
    }
    if (kept.size() == support.size()) break;
    support = std::move(kept);
    if (support.empty()) break;
    coef = least_squares_on(w_dec, support, target);
  }
  if (support.empty()) return std::nullopt;

  Decomposition result;
  result.atoms = support;
  result.coefficients = coef;
  result.cosine =
      cosine_sim(target, Vector(reconstruct(w_dec, support, coef)), 1e-12);
  if (result.cosine <= cos_accept) return std::nullopt;
  for (Index a = 0; a < result.coefficients.size(); ++a) {
    if (result.coefficients(a) < coef_min) return std::nullopt;
  }
  return result;
}

}  // namespace ortsae
