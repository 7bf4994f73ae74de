#ifndef ORTSAE_DATAGEN_HPP
#define ORTSAE_DATAGEN_HPP

#include <utility>
#include <vector>

#include <json.hpp>

#include "ortsae/rng.hpp"
#include "ortsae/types.hpp"

namespace ortsae {

struct CompositePair {
  Index first = 0;
  Index second = 0;
  double co_fire_prob = 0.0;  // probability the two firings share one draw
};

struct HierarchyLink {
  Index parent = 0;
  Index child = 0;
  double conditional_prob = 0.0;  // child fires only when the parent fires
};

/// Ground-truth dictionary with known firing structure. fire_prob holds each
/// feature's marginal firing rate: for hierarchy children that is the derived
/// parent_marginal * conditional_prob, and composite pairs are coupled
/// through a shared draw so membership never changes the marginal.
struct SyntheticWorld {
  Index dim_n = 0;
  Matrix features;  // n x F unit-norm columns
  std::vector<double> fire_prob;
  std::vector<CompositePair> composite_pairs;
  std::vector<HierarchyLink> hierarchy;
  double magnitude_lo = 0.5;
  double magnitude_hi = 1.5;

  Index feature_count() const { return features.cols(); }

  /// Throws ConfigError/DataError on malformed worlds (non-unit features,
  /// probabilities outside [0,1], hierarchy cycles, overlapping roles).
  void validate() const;

  /// Children in dependency order, parents first.
  std::vector<Index> hierarchy_order() const;
};

/// Shape parameters for procedurally built worlds. Pairs occupy the first
/// 2*composite_pairs features, hierarchy links the next 2*hierarchy_links.
struct WorldSpec {
  Index dim_n = 32;
  Index num_features = 64;
  double fire_prob = 0.06;
  Index composite_pairs = 8;
  double co_fire_prob = 0.8;
  Index hierarchy_links = 8;
  double conditional_prob = 0.9;
  double magnitude_lo = 0.5;
  double magnitude_hi = 1.5;
};

/// Gaussian random unit feature directions plus the spec's firing structure;
/// with more features than dimensions this realizes superposition by
/// construction.
SyntheticWorld build_world(const WorldSpec& spec, RngStream& rng);

/// The default desk-scale world (n=32, F=64, fire_prob 0.06, 8 composite
/// pairs at 0.8, 8 parent->child links at 0.9).
SyntheticWorld default_world(RngStream& rng);

/// Which features fired per row, with their coefficients, in ascending
/// feature order.
struct SparseCodes {
  std::vector<std::vector<std::pair<Index, double>>> rows;
};

struct SampleResult {
  Matrix x;  // batch x n
  SparseCodes codes;
};

/// Each row is the sum of coefficient * feature over fired features, with
/// magnitudes uniform in [magnitude_lo, magnitude_hi].
SampleResult sample_batch(const SyntheticWorld& world, Index batch,
                          RngStream& rng);

nlohmann::json world_to_json(const SyntheticWorld& world);
SyntheticWorld world_from_json(const nlohmann::json& j);

void write_world(const std::string& path, const SyntheticWorld& world);
SyntheticWorld read_world(const std::string& path);

}  // namespace ortsae

#endif
