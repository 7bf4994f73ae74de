#ifndef ORTSAE_METRICS_HPP
#define ORTSAE_METRICS_HPP

#include <optional>
#include <utility>
#include <vector>

#include "ortsae/datagen.hpp"
#include "ortsae/types.hpp"

namespace ortsae {

/// 1 - totalVar(x - x_hat) / totalVar(x), variances summed per column with
/// divisor rows. Throws DataError on zero total variance or rows < 2.
double explained_variance(const Matrix& x, const Matrix& x_hat);

/// Per-column max_{j != i} cos(col_i, col_j); signed, matching the
/// mean-cosine formula literally.
Vector nearest_cosines(const Matrix& w_dec, double delta);

/// (1/m) sum_i max_{j != i} cos(col_i, col_j).
double mean_cos_sim(const Matrix& w_dec, double delta);

/// For each threshold t, the similarity graph with edges |cos| > t: returns
/// (edge density, global clustering coefficient). The coefficient is
/// 3 * triangles / connected triples, or 0 when no triples exist.
std::vector<std::pair<double, double>> clustering_coefficient(
    const Matrix& w_dec, const std::vector<double>& thresholds, double delta);

/// Fraction of w_a's columns whose max |cos| against every column of w_b is
/// below the threshold.
double unique_features(const Matrix& w_a, const Matrix& w_b, double threshold,
                       double delta);

/// Mean over ground-truth atomic features of the max cosine similarity to
/// any learned decoder column: the desk-scale recovery proxy.
double ground_truth_mmcs(const SyntheticWorld& world, const Matrix& w_dec,
                         double delta);

/// (KL(abl||orig) - KL(sae||orig)) / KL(abl||orig): 1 for perfect
/// reconstruction, 0 for no improvement over the ablated baseline.
double kl_divergence_score(const Vector& p_orig, const Vector& p_sae,
                           const Vector& p_ablated);

struct Decomposition {
  std::vector<Index> atoms;
  Vector coefficients;
  double cosine = 0.0;  // cos(target, reconstruction)
};

/// Nonnegative orthogonal matching pursuit with least-squares refit on the
/// selected support. Accepts only if the approximation cosine exceeds
/// cos_accept and every coefficient is at least coef_min after dropping
/// sub-threshold atoms and refitting.
std::optional<Decomposition> decompose_feature(const Vector& target,
                                               const Matrix& w_dec,
                                               Index max_atoms = 5,
                                               double cos_accept = 0.95,
                                               double coef_min = 0.1);

}  // namespace ortsae

#endif
