#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "caudit/error.hpp"

namespace caudit {

// Ordered label space 0..L-1 with a verbalizer map and a positive-class subset.
struct LabelSpace {
  int size = 2;
  std::map<int, std::string> verbalizer;
  std::set<int> positive_set;

  // 0 -> "negative", 1 -> "positive", positive class {1}.
  static LabelSpace binary();
  // Numeric verbalizer "0".."L-1"; positive class is the upper half
  // (e.g. {3,4} for L=5).
  static LabelSpace numeric(int num_labels);

  bool contains(int label) const { return label >= 0 && label < size; }
  void validate() const;
};

enum class Provenance { Original, Counterfactual, Masked };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

struct Example {
  std::string id;
  std::string text;
  int label = 0;
  std::set<std::string> concepts;
  Provenance provenance = Provenance::Original;

  bool has_concept(const std::string& concept_name) const {
    return concepts.count(concept_name) > 0;
  }
};

struct Dataset {
  std::vector<Example> examples;
  std::set<std::string> concept_vocabulary;
  LabelSpace label_space;

  std::size_t size() const { return examples.size(); }
  // Throws ValidationError on any invariant violation (duplicate ids,
  // labels out of range, concepts outside the vocabulary).
  void validate() const;
};

struct PredictionRecord {
  std::string id;
  int predicted = 0;
};

// One JSON record per line:
// {"id":..,"text":..,"label":..,"concepts":[..],"provenance":"original"}
// concepts and provenance are optional. Preserves file order.
Dataset load_dataset(const std::string& path, const LabelSpace& label_space,
                     const std::set<std::string>& vocabulary);
void save_dataset(const std::string& path, const Dataset& dataset);

// One JSON record per line: {"id":..,"predicted":..}
// Requires exactly one prediction per dataset example.
std::vector<PredictionRecord> load_predictions(const std::string& path,
                                               const Dataset& dataset);
void save_predictions(const std::string& path,
                      const std::vector<PredictionRecord>& predictions);

// Per-label counts over examples containing the concept; indexed by label.
std::vector<long> concept_label_distribution(const Dataset& dataset,
                                             const std::string& concept_name);

}  // namespace caudit
