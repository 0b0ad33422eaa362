#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "caudit/corpus.hpp"
#include "caudit/metrics.hpp"

namespace caudit {

struct SynthLexicons {
  std::vector<std::string> concept_tokens;
  std::vector<std::vector<std::string>> sentiment_tokens;  // one list per label
  std::vector<std::string> filler_tokens;

  // Synthetic vocabularies sized 20 / 20 per label / 100.
  static SynthLexicons defaults(int num_labels);
};

struct SynthConfig {
  std::uint64_t seed = 0;
  int n_train = 5000;
  int n_test = 2000;
  int num_labels = 2;
  // P(concept present | majority-side label) in the training split;
  // minority-side labels get 1 - rho. Test presence is 0.5 everywhere.
  double rho = 0.5;
  int text_length = 20;
  int sentiment_tokens_per_example = 4;
  int concept_tokens_per_example = 3;
  // chance a sentiment token is drawn from another label's lexicon instead
  double sentiment_noise = 0.3;
  bool majority_positive = true;  // majority side = the positive class
  std::string concept_name = "theme";
  SynthLexicons lexicons;

  void validate() const;
};

// (train, test) with ground-truth concept annotations. Label counts are
// exactly balanced (up to remainder) and the whole construction is a pure
// function of the config.
std::pair<Dataset, Dataset> generate(const SynthConfig& config);

// Multinomial logistic regression over binary bag-of-words features.
struct LinearModel {
  std::vector<std::string> vocabulary;  // sorted; feature index = position
  std::unordered_map<std::string, int> index;
  std::vector<std::vector<double>> weights;  // [label][feature]
  std::vector<double> bias;                  // [label]
  double learning_rate = 0.0;
  int epochs = 0;
  std::uint64_t seed = 0;

  std::vector<int> featurize(const std::string& text) const;  // active indices
  int predict_label(const std::string& text) const;  // argmax, ties -> smallest
};

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 5;
  int batch_size = 32;
  std::uint64_t seed = 0;
};

LinearModel train_classifier(const Dataset& train, const TrainConfig& config);

std::vector<PredictionRecord> predict(const LinearModel& model,
                                      const Dataset& dataset);

// Mean cross-entropy loss over the given examples; when grad_weights /
// grad_bias are non-null they receive the gradient (same shapes as the
// model parameters). Exposed for finite-difference checking.
double loss_and_gradient(const LinearModel& model,
                         const std::vector<std::vector<int>>& features,
                         const std::vector<int>& labels,
                         std::vector<std::vector<double>>* grad_weights,
                         std::vector<double>* grad_bias);

enum class Mitigation { None, Down, Up, Mask };

Mitigation mitigation_from_string(const std::string& s);
std::string to_string(Mitigation m);

struct SweepRow {
  double rho = 0.0;
  std::uint64_t seed = 0;
  double bias_at_c = 0.0;   // percentage points
  double acc_at_c = 0.0;    // percent
  double acc_at_noc = 0.0;  // percent
  double test_accuracy = 0.0;  // percent, whole test split
  std::string mitigation;
};

// Full generate -> (mitigate) -> train -> predict -> measure pipeline for
// every (rho, seed) cell. Uses the deterministic mock injector/annotator
// machinery for the "up" path; no network involved.
std::vector<SweepRow> bias_sweep(const SynthConfig& base,
                                 const std::vector<double>& rhos,
                                 const std::vector<std::uint64_t>& seeds,
                                 Mitigation mitigation);

}  // namespace caudit
