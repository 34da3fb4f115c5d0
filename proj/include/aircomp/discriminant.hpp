#pragma once

// Pairwise discriminant gains of a received feature distribution: per class
// pair (l, l' > l) the variance-normalized squared centroid distance
//   G_{l,l'} = sum_m (mean_{l,m} - mean_{l',m})^2 / var_m,
// plus the minimum and average over all pairs.

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "aircomp/errors.hpp"
#include "aircomp/model.hpp"

namespace aircomp {

// Unordered class pairs enumerated as (0,1), (0,2), ..., (1,2), ...; this
// order also breaks argmin ties (lexicographically smallest pair wins).
inline int pair_count(int num_classes) { return num_classes * (num_classes - 1) / 2; }

inline std::vector<std::pair<int, int>> enumerate_pairs(int num_classes) {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(pair_count(num_classes));
  for (int l = 0; l + 1 < num_classes; ++l) {
    for (int lp = l + 1; lp < num_classes; ++lp) pairs.emplace_back(l, lp);
  }
  return pairs;
}

struct GainTable {
  int num_classes = 0;
  int num_features = 0;
  MatrixXd per_element;  // pair_count x M, row order matches enumerate_pairs
  VectorXd per_pair;     // pair_count
  double min_gain = 0.0;
  double avg_gain = 0.0;
  std::pair<int, int> argmin_pair{0, 0};

  double element(int pair_index, int m) const { return per_element(pair_index, m); }
};

inline GainTable gain_table(const ReceivedDistribution& dist) {
  if (!(dist.received_variances.array() > 0.0).all()) {
    throw DomainError("received variances must be positive");
  }
  GainTable table;
  table.num_classes = dist.num_classes();
  table.num_features = dist.num_features();
  const auto pairs = enumerate_pairs(table.num_classes);
  table.per_element.resize(static_cast<int>(pairs.size()), table.num_features);
  table.per_pair.resize(static_cast<int>(pairs.size()));
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [l, lp] = pairs[p];
    const Eigen::RowVectorXd diff =
        dist.received_means.row(l) - dist.received_means.row(lp);
    table.per_element.row(static_cast<int>(p)) =
        (diff.transpose().array().square() / dist.received_variances.array())
            .transpose()
            .matrix();
    table.per_pair(static_cast<int>(p)) = table.per_element.row(static_cast<int>(p)).sum();
  }
  int argmin = 0;
  table.per_pair.minCoeff(&argmin);
  table.min_gain = table.per_pair(argmin);
  table.avg_gain = table.per_pair.mean();
  table.argmin_pair = pairs[static_cast<std::size_t>(argmin)];
  return table;
}

// Canonical objective: minimum pairwise gain of the received distribution
// induced by `b`. Optimizer traces and acceptance checks all go through here.
inline double min_gain_of(const SystemInstance& instance, const PrecodingMatrix& b) {
  return gain_table(received_moments(instance, b)).min_gain;
}

inline double avg_gain_of(const SystemInstance& instance, const PrecodingMatrix& b) {
  return gain_table(received_moments(instance, b)).avg_gain;
}

}  // namespace aircomp
