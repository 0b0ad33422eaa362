// Shared test fixtures and independent oracles.
#pragma once

#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "caudit/assoc.hpp"
#include "caudit/corpus.hpp"
#include "caudit/metrics.hpp"

namespace testutil {

using namespace caudit;

inline Example ex(std::string id, std::string text, int label,
                  std::set<std::string> concepts = {}) {
  Example e;
  e.id = std::move(id);
  e.text = std::move(text);
  e.label = label;
  e.concepts = std::move(concepts);
  return e;
}

inline Dataset make_dataset(int num_labels, std::vector<Example> examples,
                            std::set<std::string> vocabulary) {
  Dataset ds;
  ds.label_space =
      num_labels == 2 ? LabelSpace::binary() : LabelSpace::numeric(num_labels);
  ds.concept_vocabulary = std::move(vocabulary);
  ds.examples = std::move(examples);
  ds.validate();
  return ds;
}

struct RandomInstance {
  Dataset dataset;
  std::vector<PredictionRecord> predictions;
};

// Random dataset where every (concept-presence, label) cell is nonempty, so
// every bias-related quantity is defined.
inline RandomInstance random_instance(std::mt19937_64& rng, int num_labels,
                                      int max_extra,
                                      const std::string& concept_name = "c") {
  RandomInstance inst;
  std::vector<Example> examples;
  std::uniform_int_distribution<int> label_dist(0, num_labels - 1);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> extra_dist(0, max_extra);

  int next_id = 0;
  auto add = [&](int label, bool with) {
    std::set<std::string> concepts;
    if (with) concepts.insert(concept_name);
    examples.push_back(ex("e" + std::to_string(next_id++),
                          "text " + std::to_string(next_id), label, concepts));
  };
  for (int l = 0; l < num_labels; ++l) {
    add(l, true);
    add(l, false);
  }
  const int extra = extra_dist(rng);
  for (int i = 0; i < extra; ++i) add(label_dist(rng), coin(rng) == 1);

  inst.dataset = make_dataset(num_labels, std::move(examples), {concept_name});
  for (const auto& e : inst.dataset.examples)
    inst.predictions.push_back({e.id, label_dist(rng)});
  return inst;
}

// Brute-force Bias@C: nested loops, no shared code with the library metric.
inline double oracle_bias(const Dataset& ds,
                          const std::vector<PredictionRecord>& predictions,
                          const std::string& concept_name) {
  std::map<std::string, int> predicted;
  for (const auto& p : predictions) predicted[p.id] = p.predicted;

  const int L = ds.label_space.size;
  std::vector<double> delta(L, 0.0);
  for (int l = 0; l < L; ++l) {
    long with_total = 0, with_correct = 0, without_total = 0, without_correct = 0;
    for (const auto& e : ds.examples) {
      if (e.label != l) continue;
      bool correct = predicted.at(e.id) == l;
      if (e.concepts.count(concept_name)) {
        ++with_total;
        if (correct) ++with_correct;
      } else {
        ++without_total;
        if (correct) ++without_correct;
      }
    }
    delta[l] = static_cast<double>(with_correct) / static_cast<double>(with_total) -
               static_cast<double>(without_correct) / static_cast<double>(without_total);
  }
  double sum = 0.0;
  long pairs = 0;
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < i; ++j) {
      sum += delta[i] - delta[j];
      ++pairs;
    }
  return sum / static_cast<double>(pairs);
}

// Plain accuracy recounted independently over an explicit example list.
inline double oracle_accuracy(const std::vector<Example>& examples,
                              const std::vector<PredictionRecord>& predictions) {
  std::map<std::string, int> predicted;
  for (const auto& p : predictions) predicted[p.id] = p.predicted;
  long correct = 0;
  for (const auto& e : examples)
    if (predicted.at(e.id) == e.label) ++correct;
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

// Brute-force document-level PMI counts for one token.
struct OraclePmi {
  long doc_freq = 0;
  long joint = 0;
  double pmi = 0.0;
};

inline std::map<std::string, OraclePmi> oracle_pmi(
    const Dataset& ds, const std::string& concept_name, long min_doc_freq) {
  long n = static_cast<long>(ds.size());
  long concept_docs = 0;
  std::map<std::string, OraclePmi> table;
  for (const auto& e : ds.examples) {
    bool has = e.concepts.count(concept_name) > 0;
    if (has) ++concept_docs;
    std::set<std::string> seen;
    for (const auto& t : tokenize(e.text)) seen.insert(t);
    for (const auto& t : seen) {
      ++table[t].doc_freq;
      if (has) ++table[t].joint;
    }
  }
  for (auto it = table.begin(); it != table.end();) {
    if (it->second.joint == 0 || it->second.doc_freq < min_doc_freq) {
      it = table.erase(it);
      continue;
    }
    double pt = static_cast<double>(it->second.doc_freq) / static_cast<double>(n);
    double pc = static_cast<double>(concept_docs) / static_cast<double>(n);
    double ptc = static_cast<double>(it->second.joint) / static_cast<double>(n);
    it->second.pmi = std::log(ptc / (pt * pc));
    ++it;
  }
  return table;
}

// 3 planted clusters x 5 tokens in R^9: each cluster sits near its own
// orthogonal axis triple, so inter-cluster cosine distance is ~1 and
// intra-cluster distance stays tiny.
inline std::vector<TokenEmbedding> planted_embeddings(std::mt19937_64& rng,
                                                      int clusters = 3,
                                                      int per_cluster = 5) {
  const int dims_per_cluster = 3;
  const int dim = clusters * dims_per_cluster;
  std::uniform_real_distribution<double> noise(-0.05, 0.05);
  std::vector<TokenEmbedding> out;
  for (int c = 0; c < clusters; ++c) {
    for (int m = 0; m < per_cluster; ++m) {
      TokenEmbedding e;
      e.token = "tok" + std::to_string(c) + "_" + std::to_string(m);
      e.vector.assign(dim, 0.0);
      for (int d = 0; d < dims_per_cluster; ++d)
        e.vector[c * dims_per_cluster + d] = 1.0 + noise(rng);
      out.push_back(std::move(e));
    }
  }
  return out;
}

}  // namespace testutil
