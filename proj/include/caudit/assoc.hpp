#pragma once

#include <string>
#include <vector>

#include "caudit/corpus.hpp"

namespace caudit {

// Lowercases and splits on whitespace/punctuation. Hyphenated and slashed
// forms ("all-time", "c/d") stay intact.
std::vector<std::string> tokenize(const std::string& text);

struct PmiEntry {
  std::string token;
  double pmi = 0.0;
  long doc_freq_token = 0;
  long doc_freq_joint = 0;
};

// Entries sorted by PMI descending, ties by token ascending. Only tokens
// co-occurring with the concept at least once are listed.
struct PmiTable {
  std::string concept_name;
  std::vector<PmiEntry> entries;
};

// Natural-log PMI over document-level probabilities: a document "contains"
// a token if it appears at least once, and "contains" the concept if the
// concept is in its annotation set.
PmiTable pmi_table(const Dataset& dataset, const std::string& concept_name,
                   long min_doc_freq);

// First k tokens of the table; with exclude_special, tokens containing
// characters outside [a-z0-9-] are skipped first.
std::vector<std::string> top_associated_tokens(const PmiTable& table, int k,
                                               bool exclude_special);

struct TokenEmbedding {
  std::string token;
  std::vector<double> vector;
};

// Arithmetic mean of sub-word piece vectors.
std::vector<double> subword_average(const std::vector<std::vector<double>>& pieces);

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b);

// Agglomerative merge history. Cluster ids follow the usual convention:
// leaves are 0..n-1, the i-th merge creates id n+i.
struct Dendrogram {
  struct Merge {
    int cluster_a = 0;
    int cluster_b = 0;
    double distance = 0.0;
  };
  std::vector<std::string> tokens;  // leaf i = tokens[i]
  std::vector<Merge> merges;
  std::vector<int> leaf_order;  // left-to-right traversal of the final tree
};

// Average-linkage clustering over cosine distance. Ties are broken by the
// lexicographically smallest member token of the candidate pair.
Dendrogram hierarchical_cluster(const std::vector<TokenEmbedding>& embeddings);

// Undoes the last k-1 merges; returns k clusters of leaf indices, each
// sorted, clusters ordered by smallest leaf.
std::vector<std::vector<int>> cut_dendrogram(const Dendrogram& dendrogram, int k);

// One line per token: token, tab, space-separated decimal floats.
std::vector<TokenEmbedding> load_embeddings(const std::string& path);

}  // namespace caudit
