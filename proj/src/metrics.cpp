#include "caudit/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "caudit/rng.hpp"

namespace caudit {

namespace {

std::unordered_map<std::string, int> prediction_map(
    const Dataset& dataset, const std::vector<PredictionRecord>& predictions) {
  std::unordered_map<std::string, int> map;
  map.reserve(predictions.size());
  for (const auto& p : predictions) map[p.id] = p.predicted;
  for (const auto& e : dataset.examples)
    if (!map.count(e.id))
      throw ValidationError("missing prediction for id " + e.id);
  return map;
}

void require_concept(const Dataset& dataset, const std::string& concept_name) {
  if (!dataset.concept_vocabulary.count(concept_name))
    throw ValidationError("unknown concept \"" + concept_name + "\"");
}

}  // namespace

GroupAccuracy group_accuracies(const Dataset& dataset,
                               const std::vector<PredictionRecord>& predictions,
                               const std::string& concept_name) {
  require_concept(dataset, concept_name);
  auto predicted = prediction_map(dataset, predictions);

  GroupAccuracy acc;
  acc.concept_name = concept_name;
  acc.with_concept.resize(dataset.label_space.size);
  acc.without_concept.resize(dataset.label_space.size);
  for (const auto& e : dataset.examples) {
    AccuracyCell& cell = e.has_concept(concept_name) ? acc.with_concept[e.label]
                                                : acc.without_concept[e.label];
    ++cell.total;
    if (predicted.at(e.id) == e.label) ++cell.correct;
  }
  return acc;
}

DeltaVector delta_vector(const GroupAccuracy& accuracy) {
  DeltaVector dv;
  dv.concept_name = accuracy.concept_name;
  dv.deltas.resize(accuracy.with_concept.size());
  for (std::size_t l = 0; l < accuracy.with_concept.size(); ++l) {
    const AccuracyCell& with = accuracy.with_concept[l];
    const AccuracyCell& without = accuracy.without_concept[l];
    if (with.defined() && without.defined())
      dv.deltas[l] = with.value() - without.value();
  }
  return dv;
}

double bias_at_c(const DeltaVector& deltas) {
  const int num_labels = static_cast<int>(deltas.deltas.size());
  std::string empty_cells;
  for (int l = 0; l < num_labels; ++l) {
    if (!deltas.deltas[l]) {
      if (!empty_cells.empty()) empty_cells += ", ";
      empty_cells += "(" + deltas.concept_name + ", " + std::to_string(l) + ")";
    }
  }
  if (!empty_cells.empty())
    throw ValidationError("bias undefined, empty accuracy cells: " + empty_cells);

  // Mean over unordered label pairs {i, j}, i > j, of delta_i - delta_j.
  // Each delta_i appears in that sum with net coefficient 2i - (L-1), so we
  // accumulate the weighted form instead, pairing the i and L-1-i terms.
  // That grouping makes the result negate exactly (bit for bit) under the
  // label reversal i -> L-1-i.
  double sum = 0.0;
  for (int i = 0; 2 * i < num_labels - 1; ++i) {
    const int mirror = num_labels - 1 - i;
    const double coeff = static_cast<double>(2 * i - (num_labels - 1));
    sum += coeff * *deltas.deltas[i] + (-coeff) * *deltas.deltas[mirror];
  }
  const long pairs = static_cast<long>(num_labels) * (num_labels - 1) / 2;
  return sum / static_cast<double>(pairs);
}

Dataset balanced_test_subset(const Dataset& dataset, const std::string& concept_name,
                             bool with_concept, std::uint64_t seed) {
  require_concept(dataset, concept_name);
  const int num_labels = dataset.label_space.size;

  std::vector<std::vector<std::size_t>> by_label(num_labels);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Example& e = dataset.examples[i];
    if (e.has_concept(concept_name) == with_concept) by_label[e.label].push_back(i);
  }
  const char* group_name = with_concept ? "with-concept" : "without-concept";
  std::size_t min_count = dataset.size();
  for (int l = 0; l < num_labels; ++l) {
    if (by_label[l].empty())
      throw ValidationError("label " + std::to_string(l) + " empty in " +
                            group_name + " group for concept \"" + concept_name + "\"");
    min_count = std::min(min_count, by_label[l].size());
  }

  Rng rng = make_rng(seed, derive_seed(with_concept ? 1 : 2, concept_name));
  std::vector<std::size_t> selected;
  for (int l = 0; l < num_labels; ++l) {
    auto& pool = by_label[l];
    std::shuffle(pool.begin(), pool.end(), rng);
    selected.insert(selected.end(), pool.begin(), pool.begin() + min_count);
  }
  std::sort(selected.begin(), selected.end());

  Dataset subset;
  subset.label_space = dataset.label_space;
  subset.concept_vocabulary = dataset.concept_vocabulary;
  for (std::size_t i : selected) subset.examples.push_back(dataset.examples[i]);
  return subset;
}

std::pair<double, double> robust_accuracy(
    const Dataset& dataset, const std::vector<PredictionRecord>& predictions,
    const std::string& concept_name, std::uint64_t seed) {
  auto predicted = prediction_map(dataset, predictions);
  auto accuracy_on = [&](const Dataset& subset) {
    long correct = 0;
    for (const auto& e : subset.examples)
      if (predicted.at(e.id) == e.label) ++correct;
    return static_cast<double>(correct) / static_cast<double>(subset.size());
  };
  Dataset with = balanced_test_subset(dataset, concept_name, true, seed);
  Dataset without = balanced_test_subset(dataset, concept_name, false, seed);
  return {accuracy_on(with), accuracy_on(without)};
}

std::vector<BiasReport> measure(const Dataset& dataset,
                                const std::vector<PredictionRecord>& predictions,
                                const std::vector<std::string>& concepts,
                                std::uint64_t seed) {
  std::vector<BiasReport> reports;
  for (const auto& concept_name : concepts) {
    BiasReport report;
    report.concept_name = concept_name;
    report.seed = seed;

    GroupAccuracy acc = group_accuracies(dataset, predictions, concept_name);
    report.bias_at_c = 100.0 * bias_at_c(delta_vector(acc));

    auto [acc_c, acc_noc] = robust_accuracy(dataset, predictions, concept_name, seed);
    report.acc_at_c = 100.0 * acc_c;
    report.acc_at_noc = 100.0 * acc_noc;

    for (const auto& cell : acc.with_concept) report.with_group_size += cell.total;
    for (const auto& cell : acc.without_concept)
      report.without_group_size += cell.total;
    Dataset with = balanced_test_subset(dataset, concept_name, true, seed);
    Dataset without = balanced_test_subset(dataset, concept_name, false, seed);
    report.with_subset_per_label =
        static_cast<long>(with.size()) / dataset.label_space.size;
    report.without_subset_per_label =
        static_cast<long>(without.size()) / dataset.label_space.size;
    reports.push_back(std::move(report));
  }
  return reports;
}

double overall_accuracy(const Dataset& dataset,
                        const std::vector<PredictionRecord>& predictions) {
  if (dataset.size() == 0) throw ValidationError("empty dataset");
  auto predicted = prediction_map(dataset, predictions);
  long correct = 0;
  for (const auto& e : dataset.examples)
    if (predicted.at(e.id) == e.label) ++correct;
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

}  // namespace caudit
