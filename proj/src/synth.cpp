#include "caudit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "caudit/annotate.hpp"
#include "caudit/assoc.hpp"
#include "caudit/rebalance.hpp"
#include "caudit/rng.hpp"

namespace caudit {

namespace {

std::string padded(const char* prefix, int i, int width) {
  std::string num = std::to_string(i);
  return prefix + std::string(width - std::min<int>(width, num.size()), '0') + num;
}

std::set<int> majority_side(const SynthConfig& config, const LabelSpace& ls) {
  if (config.majority_positive) return ls.positive_set;
  std::set<int> complement;
  for (int l = 0; l < ls.size; ++l)
    if (!ls.positive_set.count(l)) complement.insert(l);
  return complement;
}

LabelSpace synth_label_space(int num_labels) {
  return num_labels == 2 ? LabelSpace::binary() : LabelSpace::numeric(num_labels);
}

Dataset generate_split(const SynthConfig& config, const std::string& id_prefix,
                       int n, bool train_split, Rng& rng) {
  const LabelSpace label_space = synth_label_space(config.num_labels);
  const std::set<int> majority = majority_side(config, label_space);

  Dataset ds;
  ds.label_space = label_space;
  ds.concept_vocabulary = {config.concept_name};

  // exactly balanced label counts, shuffled order
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = i % config.num_labels;
  std::shuffle(labels.begin(), labels.end(), rng);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_filler(
      0, config.lexicons.filler_tokens.size() - 1);

  for (int i = 0; i < n; ++i) {
    const int label = labels[i];
    const double p_concept =
        train_split ? (majority.count(label) ? config.rho : 1.0 - config.rho) : 0.5;
    const bool present = unit(rng) < p_concept;

    std::vector<std::string> tokens;
    for (int s = 0; s < config.sentiment_tokens_per_example; ++s) {
      int source_label = label;
      if (config.num_labels > 1 && unit(rng) < config.sentiment_noise) {
        std::uniform_int_distribution<int> pick_other(0, config.num_labels - 2);
        int other = pick_other(rng);
        source_label = other >= label ? other + 1 : other;
      }
      const auto& lexicon = config.lexicons.sentiment_tokens[source_label];
      std::uniform_int_distribution<std::size_t> pick(0, lexicon.size() - 1);
      tokens.push_back(lexicon[pick(rng)]);
    }
    if (present) {
      std::vector<std::string> pool = config.lexicons.concept_tokens;
      std::shuffle(pool.begin(), pool.end(), rng);
      tokens.insert(tokens.end(), pool.begin(),
                    pool.begin() + config.concept_tokens_per_example);
    }
    while (static_cast<int>(tokens.size()) < config.text_length)
      tokens.push_back(config.lexicons.filler_tokens[pick_filler(rng)]);
    std::shuffle(tokens.begin(), tokens.end(), rng);

    Example e;
    e.id = id_prefix + padded("", i, 6);
    std::string text;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      if (t) text += ' ';
      text += tokens[t];
    }
    e.text = std::move(text);
    e.label = label;
    if (present) e.concepts.insert(config.concept_name);
    ds.examples.push_back(std::move(e));
  }
  return ds;
}

}  // namespace

SynthLexicons SynthLexicons::defaults(int num_labels) {
  SynthLexicons lex;
  for (int i = 0; i < 20; ++i) lex.concept_tokens.push_back(padded("topic", i, 2));
  lex.sentiment_tokens.resize(num_labels);
  for (int l = 0; l < num_labels; ++l)
    for (int i = 0; i < 20; ++i)
      lex.sentiment_tokens[l].push_back("sent" + std::to_string(l) +
                                        padded("w", i, 2));
  for (int i = 0; i < 100; ++i) lex.filler_tokens.push_back(padded("fill", i, 3));
  return lex;
}

void SynthConfig::validate() const {
  if (rho < 0.5 || rho > 1.0) throw ValidationError("rho must be in [0.5, 1.0]");
  if (n_train < 1 || n_test < 1) throw ValidationError("split sizes must be positive");
  if (num_labels < 2) throw ValidationError("need at least 2 labels");
  if (static_cast<int>(lexicons.sentiment_tokens.size()) != num_labels)
    throw ValidationError("need one sentiment lexicon per label");
  if (lexicons.concept_tokens.empty() || lexicons.filler_tokens.empty())
    throw ValidationError("lexicons must be nonempty");
  for (const auto& lexicon : lexicons.sentiment_tokens)
    if (lexicon.empty()) throw ValidationError("lexicons must be nonempty");
  if (concept_tokens_per_example < 1 ||
      concept_tokens_per_example > static_cast<int>(lexicons.concept_tokens.size()))
    throw ValidationError("concept_tokens_per_example out of range");
  if (text_length < sentiment_tokens_per_example + concept_tokens_per_example)
    throw ValidationError("text_length too small for the configured token mix");

  std::unordered_set<std::string> seen;
  auto check_disjoint = [&seen](const std::vector<std::string>& lexicon) {
    for (const auto& token : lexicon)
      if (!seen.insert(token).second)
        throw ValidationError("lexicon overlap on token \"" + token + "\"");
  };
  check_disjoint(lexicons.concept_tokens);
  for (const auto& lexicon : lexicons.sentiment_tokens) check_disjoint(lexicon);
  check_disjoint(lexicons.filler_tokens);
}

std::pair<Dataset, Dataset> generate(const SynthConfig& config) {
  config.validate();
  Rng train_rng = make_rng(config.seed, derive_seed(10, "train"));
  Rng test_rng = make_rng(config.seed, derive_seed(10, "test"));
  Dataset train = generate_split(config, "train-", config.n_train, true, train_rng);
  Dataset test = generate_split(config, "test-", config.n_test, false, test_rng);
  return {std::move(train), std::move(test)};
}

std::vector<int> LinearModel::featurize(const std::string& text) const {
  std::vector<int> active;
  std::unordered_set<int> seen;
  for (const auto& token : tokenize(text)) {
    auto it = index.find(token);
    if (it != index.end() && seen.insert(it->second).second)
      active.push_back(it->second);
  }
  std::sort(active.begin(), active.end());
  return active;
}

int LinearModel::predict_label(const std::string& text) const {
  const auto active = featurize(text);
  int best = 0;
  double best_score = bias[0];
  for (int f : active) best_score += weights[0][f];
  for (std::size_t l = 1; l < weights.size(); ++l) {
    double score = bias[l];
    for (int f : active) score += weights[l][f];
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(l);
    }
  }
  return best;
}

double loss_and_gradient(const LinearModel& model,
                         const std::vector<std::vector<int>>& features,
                         const std::vector<int>& labels,
                         std::vector<std::vector<double>>* grad_weights,
                         std::vector<double>* grad_bias) {
  const int num_labels = static_cast<int>(model.weights.size());
  const double n = static_cast<double>(features.size());
  if (grad_weights) {
    grad_weights->assign(num_labels,
                         std::vector<double>(model.vocabulary.size(), 0.0));
  }
  if (grad_bias) grad_bias->assign(num_labels, 0.0);

  double loss = 0.0;
  std::vector<double> scores(num_labels);
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (int l = 0; l < num_labels; ++l) {
      scores[l] = model.bias[l];
      for (int f : features[i]) scores[l] += model.weights[l][f];
    }
    const double max_score = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (int l = 0; l < num_labels; ++l) z += std::exp(scores[l] - max_score);
    loss += -(scores[labels[i]] - max_score - std::log(z)) / n;
    if (!grad_weights && !grad_bias) continue;
    for (int l = 0; l < num_labels; ++l) {
      const double p = std::exp(scores[l] - max_score) / z;
      const double g = (p - (l == labels[i] ? 1.0 : 0.0)) / n;
      if (grad_bias) (*grad_bias)[l] += g;
      if (grad_weights)
        for (int f : features[i]) (*grad_weights)[l][f] += g;
    }
  }
  return loss;
}

LinearModel train_classifier(const Dataset& train, const TrainConfig& config) {
  if (train.size() == 0) throw ValidationError("empty training set");

  LinearModel model;
  {
    std::set<std::string> vocab;
    for (const auto& e : train.examples)
      for (const auto& token : tokenize(e.text)) vocab.insert(token);
    if (vocab.empty()) throw ValidationError("empty vocabulary");
    model.vocabulary.assign(vocab.begin(), vocab.end());
    for (std::size_t i = 0; i < model.vocabulary.size(); ++i)
      model.index[model.vocabulary[i]] = static_cast<int>(i);
  }
  const int num_labels = train.label_space.size;
  model.weights.assign(num_labels, std::vector<double>(model.vocabulary.size(), 0.0));
  model.bias.assign(num_labels, 0.0);
  model.learning_rate = config.learning_rate;
  model.epochs = config.epochs;
  model.seed = config.seed;

  std::vector<std::vector<int>> features;
  std::vector<int> labels;
  features.reserve(train.size());
  for (const auto& e : train.examples) {
    features.push_back(model.featurize(e.text));
    labels.push_back(e.label);
  }

  Rng rng = make_rng(config.seed, derive_seed(11, "sgd"));
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<std::vector<int>> batch_features;
  std::vector<int> batch_labels;
  std::vector<std::vector<double>> grad_w;
  std::vector<double> grad_b;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      batch_features.clear();
      batch_labels.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch_features.push_back(features[order[i]]);
        batch_labels.push_back(labels[order[i]]);
      }
      loss_and_gradient(model, batch_features, batch_labels, &grad_w, &grad_b);
      for (int l = 0; l < num_labels; ++l) {
        model.bias[l] -= config.learning_rate * grad_b[l];
        auto& w = model.weights[l];
        const auto& g = grad_w[l];
        for (std::size_t f = 0; f < w.size(); ++f)
          w[f] -= config.learning_rate * g[f];
      }
    }
  }
  return model;
}

std::vector<PredictionRecord> predict(const LinearModel& model,
                                      const Dataset& dataset) {
  std::vector<PredictionRecord> predictions;
  predictions.reserve(dataset.size());
  for (const auto& e : dataset.examples)
    predictions.push_back({e.id, model.predict_label(e.text)});
  return predictions;
}

Mitigation mitigation_from_string(const std::string& s) {
  if (s == "none") return Mitigation::None;
  if (s == "down") return Mitigation::Down;
  if (s == "up") return Mitigation::Up;
  if (s == "mask") return Mitigation::Mask;
  throw ValidationError("unknown mitigation \"" + s + "\"");
}

std::string to_string(Mitigation m) {
  switch (m) {
    case Mitigation::None: return "none";
    case Mitigation::Down: return "down";
    case Mitigation::Up: return "up";
    case Mitigation::Mask: return "mask";
  }
  return "none";
}

namespace {

// Injector double for the sweep: appends concept-lexicon tokens drawn
// deterministically per donor statement, so per-token frequencies stay
// comparable to organically generated with-concept texts.
std::unique_ptr<LlmClient> lexicon_injector(const std::vector<std::string>& tokens,
                                            int tokens_per_injection,
                                            std::uint64_t seed) {
  return make_function_client([tokens, tokens_per_injection, seed](
                                  const std::string& prompt, const DecodingConfig&) {
    const std::string marker = "The statement is:\n";
    auto begin = prompt.find(marker);
    if (begin == std::string::npos)
      throw ValidationError("lexicon_injector: prompt missing statement slot");
    begin += marker.size();
    auto end = prompt.find("\nThe output statement", begin);
    std::string statement = prompt.substr(begin, end - begin);

    Rng rng = make_rng(seed, derive_seed(12, statement));
    std::vector<std::string> pool = tokens;
    std::shuffle(pool.begin(), pool.end(), rng);
    for (int i = 0; i < tokens_per_injection; ++i) statement += " " + pool[i];
    return statement;
  });
}

Dataset mitigate_train(const Dataset& train, const SynthConfig& config,
                       Mitigation mitigation, std::uint64_t seed) {
  const std::string& concept_name = config.concept_name;
  switch (mitigation) {
    case Mitigation::None:
      return train;
    case Mitigation::Down: {
      auto counts = concept_label_distribution(train, concept_name);
      if (std::all_of(counts.begin(), counts.end(), [](long c) { return c > 0; }))
        return downsample_balance(train, concept_name, seed);
      // a fully one-sided group balances only at zero: drop it entirely
      Dataset stripped;
      stripped.label_space = train.label_space;
      stripped.concept_vocabulary = train.concept_vocabulary;
      for (const auto& e : train.examples)
        if (!e.has_concept(concept_name)) stripped.examples.push_back(e);
      return stripped;
    }
    case Mitigation::Up: {
      InjectionPrompt prompt;
      prompt.concept_name = concept_name;
      for (const auto& e : train.examples) {
        if (e.has_concept(concept_name) && prompt.with_concept_exemplars.size() < 5)
          prompt.with_concept_exemplars.push_back(e.text);
        if (!e.has_concept(concept_name) && prompt.without_concept_exemplars.size() < 5)
          prompt.without_concept_exemplars.push_back(e.text);
      }
      auto injector = lexicon_injector(config.lexicons.concept_tokens,
                                       config.concept_tokens_per_example, seed);
      const std::set<std::string> lexicon(config.lexicons.concept_tokens.begin(),
                                          config.lexicons.concept_tokens.end());
      ConceptChecker verifier = [&lexicon](const std::string& text,
                                           const std::string&) {
        for (const auto& token : tokenize(text))
          if (lexicon.count(token)) return true;
        return false;
      };
      return upsample_balance(train, concept_name, *injector, prompt, seed, verifier);
    }
    case Mitigation::Mask: {
      PmiTable table = pmi_table(train, concept_name, /*min_doc_freq=*/3);
      return mask_dataset(train, concept_name, table, /*k=*/10, "[MASK]");
    }
  }
  return train;
}

}  // namespace

std::vector<SweepRow> bias_sweep(const SynthConfig& base,
                                 const std::vector<double>& rhos,
                                 const std::vector<std::uint64_t>& seeds,
                                 Mitigation mitigation) {
  std::vector<SweepRow> rows;
  for (double rho : rhos) {
    for (std::uint64_t seed : seeds) {
      SynthConfig config = base;
      config.rho = rho;
      config.seed = seed;
      auto [train, test] = generate(config);
      Dataset mitigated = mitigate_train(train, config, mitigation, seed);

      TrainConfig train_config;
      train_config.seed = seed;
      LinearModel model = train_classifier(mitigated, train_config);
      auto predictions = predict(model, test);
      BiasReport report =
          measure(test, predictions, {config.concept_name}, seed).front();

      SweepRow row;
      row.rho = rho;
      row.seed = seed;
      row.bias_at_c = report.bias_at_c;
      row.acc_at_c = report.acc_at_c;
      row.acc_at_noc = report.acc_at_noc;
      row.test_accuracy = 100.0 * overall_accuracy(test, predictions);
      row.mitigation = to_string(mitigation);
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace caudit
