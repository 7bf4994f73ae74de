#include "ortsae/datagen.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <queue>

#include "ortsae/errors.hpp"

namespace ortsae {

void SyntheticWorld::validate() const {
  const Index f = feature_count();
  if (dim_n < 1) throw ConfigError("dim_n: must be >= 1");
  if (features.rows() != dim_n) {
    throw ConfigError("features: expected " + std::to_string(dim_n) + " rows");
  }
  if (static_cast<Index>(fire_prob.size()) != f) {
    throw ConfigError("fire_prob: expected one probability per feature");
  }
  for (Index j = 0; j < f; ++j) {
    if (std::abs(features.col(j).norm() - 1.0) > 1e-9) {
      throw ConfigError("features: column " + std::to_string(j) +
                        " is not unit-norm");
    }
    const double p = fire_prob[static_cast<std::size_t>(j)];
    if (p < 0.0 || p > 1.0) {
      throw ConfigError("fire_prob: probability out of [0,1] at feature " +
                        std::to_string(j));
    }
  }
  if (!(magnitude_lo >= 0.0) || !(magnitude_hi >= magnitude_lo)) {
    throw ConfigError("magnitude_range: need 0 <= lo <= hi");
  }

  std::vector<int> role(static_cast<std::size_t>(f), 0);  // 1 pair, 2 child
  for (const CompositePair& pair : composite_pairs) {
    if (pair.first < 0 || pair.first >= f || pair.second < 0 ||
        pair.second >= f || pair.first == pair.second) {
      throw ConfigError("composite_pairs: invalid feature indices");
    }
    if (pair.co_fire_prob < 0.0 || pair.co_fire_prob > 1.0) {
      throw ConfigError("co_fire_prob: probability out of [0,1]");
    }
    for (Index idx : {pair.first, pair.second}) {
      if (role[static_cast<std::size_t>(idx)] != 0) {
        throw ConfigError("composite_pairs: feature " + std::to_string(idx) +
                          " already has a structural role");
      }
      role[static_cast<std::size_t>(idx)] = 1;
    }
  }
  for (const HierarchyLink& link : hierarchy) {
    if (link.parent < 0 || link.parent >= f || link.child < 0 ||
        link.child >= f || link.parent == link.child) {
      throw ConfigError("hierarchy: invalid feature indices");
    }
    if (link.conditional_prob < 0.0 || link.conditional_prob > 1.0) {
      throw ConfigError("conditional_prob: probability out of [0,1]");
    }
    if (role[static_cast<std::size_t>(link.child)] != 0) {
      throw ConfigError("hierarchy: feature " + std::to_string(link.child) +
                        " already has a structural role");
    }
    role[static_cast<std::size_t>(link.child)] = 2;
  }
  hierarchy_order();  // throws on cycles
}

std::vector<Index> SyntheticWorld::hierarchy_order() const {
  // Kahn's algorithm over the parent -> child edges.
  const Index f = feature_count();
  std::vector<std::vector<std::size_t>> children_of(
      static_cast<std::size_t>(f));
  std::vector<int> pending(hierarchy.size(), 0);
  std::queue<std::size_t> ready;
  std::vector<bool> is_child(static_cast<std::size_t>(f), false);
  for (std::size_t e = 0; e < hierarchy.size(); ++e) {
    is_child[static_cast<std::size_t>(hierarchy[e].child)] = true;
  }
  for (std::size_t e = 0; e < hierarchy.size(); ++e) {
    if (is_child[static_cast<std::size_t>(hierarchy[e].parent)]) {
      pending[e] = 1;
      children_of[static_cast<std::size_t>(hierarchy[e].parent)].push_back(e);
    } else {
      ready.push(e);
    }
  }
  std::vector<Index> order;
  order.reserve(hierarchy.size());
  while (!ready.empty()) {
    const std::size_t e = ready.front();
    ready.pop();
    order.push_back(static_cast<Index>(e));
    for (std::size_t dep : children_of[static_cast<std::size_t>(
             hierarchy[e].child)]) {
      if (--pending[dep] == 0) ready.push(dep);
    }
  }
  if (order.size() != hierarchy.size()) {
    throw ConfigError("hierarchy: contains a cycle");
  }
  return order;
}

SyntheticWorld build_world(const WorldSpec& spec, RngStream& rng) {
  if (2 * spec.composite_pairs + 2 * spec.hierarchy_links >
      spec.num_features) {
    throw ConfigError(
        "num_features: too small for the requested pairs and hierarchy");
  }
  SyntheticWorld world;
  world.dim_n = spec.dim_n;
  world.magnitude_lo = spec.magnitude_lo;
  world.magnitude_hi = spec.magnitude_hi;
  world.features.resize(spec.dim_n, spec.num_features);
  for (Index j = 0; j < spec.num_features; ++j) {
    double norm = 0.0;
    do {
      for (Index i = 0; i < spec.dim_n; ++i) {
        world.features(i, j) = rng.next_gaussian();
      }
      norm = world.features.col(j).norm();
    } while (norm < 1e-12);
    world.features.col(j) /= norm;
  }
  world.fire_prob.assign(static_cast<std::size_t>(spec.num_features),
                         spec.fire_prob);
  for (Index p = 0; p < spec.composite_pairs; ++p) {
    world.composite_pairs.push_back(
        {2 * p, 2 * p + 1, spec.co_fire_prob});
  }
  const Index hier_base = 2 * spec.composite_pairs;
  for (Index h = 0; h < spec.hierarchy_links; ++h) {
    const Index parent = hier_base + 2 * h;
    const Index child = hier_base + 2 * h + 1;
    world.hierarchy.push_back({parent, child, spec.conditional_prob});
    // The stored fire_prob is the marginal: children fire only via parents.
    world.fire_prob[static_cast<std::size_t>(child)] =
        world.fire_prob[static_cast<std::size_t>(parent)] *
        spec.conditional_prob;
  }
  world.validate();
  return world;
}

SyntheticWorld default_world(RngStream& rng) {
  return build_world(WorldSpec{}, rng);
}

SampleResult sample_batch(const SyntheticWorld& world, Index batch,
                          RngStream& rng) {
  if (batch < 1) throw ConfigError("batch: must be >= 1");
  world.validate();
  const Index f = world.feature_count();
  const std::vector<Index> hier_order = world.hierarchy_order();

  std::vector<bool> is_child(static_cast<std::size_t>(f), false);
  std::vector<bool> in_pair(static_cast<std::size_t>(f), false);
  for (const HierarchyLink& link : world.hierarchy) {
    is_child[static_cast<std::size_t>(link.child)] = true;
  }
  for (const CompositePair& pair : world.composite_pairs) {
    in_pair[static_cast<std::size_t>(pair.first)] = true;
    in_pair[static_cast<std::size_t>(pair.second)] = true;
  }

  SampleResult out;
  out.x = Matrix::Zero(batch, world.dim_n);
  out.codes.rows.resize(static_cast<std::size_t>(batch));
  std::vector<bool> fired(static_cast<std::size_t>(f));

  for (Index r = 0; r < batch; ++r) {
    std::fill(fired.begin(), fired.end(), false);

    // Composite pairs first: with probability co_fire_prob both members fire
    // off one shared uniform (comonotone coupling), which correlates them
    // without changing either marginal.
    for (const CompositePair& pair : world.composite_pairs) {
      const double pi = world.fire_prob[static_cast<std::size_t>(pair.first)];
      const double pj = world.fire_prob[static_cast<std::size_t>(pair.second)];
      if (rng.next_double() < pair.co_fire_prob) {
        const double u = rng.next_double();
        fired[static_cast<std::size_t>(pair.first)] = u < pi;
        fired[static_cast<std::size_t>(pair.second)] = u < pj;
      } else {
        fired[static_cast<std::size_t>(pair.first)] = rng.next_double() < pi;
        fired[static_cast<std::size_t>(pair.second)] = rng.next_double() < pj;
      }
    }
    // Plain features.
    for (Index j = 0; j < f; ++j) {
      if (in_pair[static_cast<std::size_t>(j)] ||
          is_child[static_cast<std::size_t>(j)]) {
        continue;
      }
      fired[static_cast<std::size_t>(j)] =
          rng.next_double() < world.fire_prob[static_cast<std::size_t>(j)];
    }
    // Children fire only when their parent fired.
    for (Index e : hier_order) {
      const HierarchyLink& link = world.hierarchy[static_cast<std::size_t>(e)];
      if (fired[static_cast<std::size_t>(link.parent)]) {
        fired[static_cast<std::size_t>(link.child)] =
            rng.next_double() < link.conditional_prob;
      }
    }

    auto& codes = out.codes.rows[static_cast<std::size_t>(r)];
    for (Index j = 0; j < f; ++j) {
      if (!fired[static_cast<std::size_t>(j)]) continue;
      const double coef =
          rng.next_uniform(world.magnitude_lo, world.magnitude_hi);
      codes.emplace_back(j, coef);
      out.x.row(r) += coef * world.features.col(j).transpose();
    }
  }
  return out;
}

nlohmann::json world_to_json(const SyntheticWorld& world) {
  nlohmann::json j;
  j["dim_n"] = world.dim_n;
  j["magnitude_range"] = {world.magnitude_lo, world.magnitude_hi};
  j["fire_prob"] = world.fire_prob;
  nlohmann::json features = nlohmann::json::array();
  for (Index c = 0; c < world.feature_count(); ++c) {
    nlohmann::json col = nlohmann::json::array();
    for (Index i = 0; i < world.dim_n; ++i) col.push_back(world.features(i, c));
    features.push_back(std::move(col));
  }
  j["features"] = std::move(features);
  nlohmann::json pairs = nlohmann::json::array();
  for (const CompositePair& p : world.composite_pairs) {
    pairs.push_back({p.first, p.second, p.co_fire_prob});
  }
  j["composite_pairs"] = std::move(pairs);
  nlohmann::json links = nlohmann::json::array();
  for (const HierarchyLink& h : world.hierarchy) {
    links.push_back({h.parent, h.child, h.conditional_prob});
  }
  j["hierarchy"] = std::move(links);
  return j;
}

SyntheticWorld world_from_json(const nlohmann::json& j) {
  SyntheticWorld world;
  try {
    world.dim_n = j.at("dim_n").get<Index>();
    world.magnitude_lo = j.at("magnitude_range").at(0).get<double>();
    world.magnitude_hi = j.at("magnitude_range").at(1).get<double>();
    world.fire_prob = j.at("fire_prob").get<std::vector<double>>();
    const auto& features = j.at("features");
    const Index f = static_cast<Index>(features.size());
    world.features.resize(world.dim_n, f);
    for (Index c = 0; c < f; ++c) {
      const auto& col = features.at(static_cast<std::size_t>(c));
      if (static_cast<Index>(col.size()) != world.dim_n) {
        throw ConfigError("features: column length does not match dim_n");
      }
      for (Index i = 0; i < world.dim_n; ++i) {
        world.features(i, c) = col.at(static_cast<std::size_t>(i)).get<double>();
      }
    }
    for (const auto& p : j.at("composite_pairs")) {
      world.composite_pairs.push_back({p.at(0).get<Index>(),
                                       p.at(1).get<Index>(),
                                       p.at(2).get<double>()});
    }
    for (const auto& h : j.at("hierarchy")) {
      world.hierarchy.push_back({h.at(0).get<Index>(), h.at(1).get<Index>(),
                                 h.at(2).get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("world: malformed JSON document (") +
                      e.what() + ")");
  }
  world.validate();
  return world;
}

void write_world(const std::string& path, const SyntheticWorld& world) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open \"" + path + "\" for writing");
  out << world_to_json(world).dump(2) << "\n";
}

SyntheticWorld read_world(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open \"" + path + "\"");
  nlohmann::json j = nlohmann::json::parse(in, nullptr,
                                           /*allow_exceptions=*/false);
  if (j.is_discarded()) {
    throw ConfigError("world: file is not valid JSON: " + path);
  }
  return world_from_json(j);
}

}  // namespace ortsae
