#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "caudit/corpus.hpp"

namespace caudit {

struct AccuracyCell {
  long correct = 0;
  long total = 0;
  bool defined() const { return total > 0; }
  double value() const {
    return static_cast<double>(correct) / static_cast<double>(total);
  }
};

// Per-label accuracy on the with-concept and without-concept groups.
struct GroupAccuracy {
  std::string concept_name;
  std::vector<AccuracyCell> with_concept;     // indexed by gold label
  std::vector<AccuracyCell> without_concept;
};

// delta[i] = with-concept accuracy(i) - without-concept accuracy(i);
// unset where either cell has an empty group.
struct DeltaVector {
  std::string concept_name;
  std::vector<std::optional<double>> deltas;
};

struct BiasReport {
  std::string concept_name;
  double bias_at_c = 0.0;   // signed percentage points
  double acc_at_c = 0.0;    // percent
  double acc_at_noc = 0.0;  // percent
  long with_subset_per_label = 0;     // balanced subset size per label
  long without_subset_per_label = 0;
  long with_group_size = 0;
  long without_group_size = 0;
  std::uint64_t seed = 0;
};

GroupAccuracy group_accuracies(const Dataset& dataset,
                               const std::vector<PredictionRecord>& predictions,
                               const std::string& concept_name);

DeltaVector delta_vector(const GroupAccuracy& accuracy);

// Mean over unordered label pairs {i, j}, i > j, of delta[i] - delta[j].
// Equals delta[1] - delta[0] for binary label spaces. Throws if any delta
// is undefined, listing the empty cells.
double bias_at_c(const DeltaVector& deltas);

// Label-balanced subset of the selected group: every label keeps exactly
// min-class-size examples, sampled uniformly without replacement under the
// seed. Original example order is preserved.
Dataset balanced_test_subset(const Dataset& dataset, const std::string& concept_name,
                             bool with_concept, std::uint64_t seed);

// (Acc@C, Acc@NoC): plain accuracy on the two balanced subsets, as fractions.
std::pair<double, double> robust_accuracy(
    const Dataset& dataset, const std::vector<PredictionRecord>& predictions,
    const std::string& concept_name, std::uint64_t seed);

// One report per concept, in input order. Values reported in percent.
std::vector<BiasReport> measure(const Dataset& dataset,
                                const std::vector<PredictionRecord>& predictions,
                                const std::vector<std::string>& concepts,
                                std::uint64_t seed);

// Plain accuracy of the predictions over the whole dataset, as a fraction.
double overall_accuracy(const Dataset& dataset,
                        const std::vector<PredictionRecord>& predictions);

}  // namespace caudit
