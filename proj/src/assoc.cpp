#include "caudit/assoc.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace caudit {

namespace {

bool is_token_char(unsigned char c) {
  return std::isalnum(c) || c == '-' || c == '/';
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    // strip joiners that ended up at the edges ("steak-" -> "steak")
    std::size_t begin = current.find_first_not_of("-/");
    std::size_t end = current.find_last_not_of("-/");
    if (begin != std::string::npos)
      tokens.push_back(current.substr(begin, end - begin + 1));
    current.clear();
  };
  for (unsigned char c : text) {
    if (is_token_char(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      flush();
    }
  }
  if (!current.empty()) flush();
  return tokens;
}

PmiTable pmi_table(const Dataset& dataset, const std::string& concept_name,
                   long min_doc_freq) {
  if (!dataset.concept_vocabulary.count(concept_name))
    throw ValidationError("unknown concept \"" + concept_name + "\"");
  if (min_doc_freq < 1) throw ValidationError("min_doc_freq must be >= 1");

  const long n_docs = static_cast<long>(dataset.size());
  long concept_docs = 0;
  std::unordered_map<std::string, long> doc_freq;
  std::unordered_map<std::string, long> joint_freq;
  for (const auto& e : dataset.examples) {
    const bool has = e.has_concept(concept_name);
    if (has) ++concept_docs;
    std::unordered_set<std::string> seen;
    for (const auto& t : tokenize(e.text)) seen.insert(t);
    for (const auto& t : seen) {
      ++doc_freq[t];
      if (has) ++joint_freq[t];
    }
  }
  if (concept_docs == 0)
    throw ValidationError("concept \"" + concept_name + "\" absent from every example");

  PmiTable table;
  table.concept_name = concept_name;
  for (const auto& [token, joint] : joint_freq) {
    long df = doc_freq.at(token);
    if (df < min_doc_freq) continue;
    PmiEntry entry;
    entry.token = token;
    entry.doc_freq_token = df;
    entry.doc_freq_joint = joint;
    // ln( p(t,c) / (p(t) p(c)) ) with document-level probabilities
    entry.pmi = std::log(static_cast<double>(joint) * static_cast<double>(n_docs) /
                         (static_cast<double>(df) * static_cast<double>(concept_docs)));
    table.entries.push_back(std::move(entry));
  }
  std::sort(table.entries.begin(), table.entries.end(),
            [](const PmiEntry& a, const PmiEntry& b) {
              if (a.pmi != b.pmi) return a.pmi > b.pmi;
              return a.token < b.token;
            });
  return table;
}

std::vector<std::string> top_associated_tokens(const PmiTable& table, int k,
                                               bool exclude_special) {
  if (k < 1) throw ValidationError("k must be >= 1");
  auto is_plain = [](const std::string& token) {
    return std::all_of(token.begin(), token.end(), [](unsigned char c) {
      return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
    });
  };
  std::vector<std::string> result;
  for (const auto& entry : table.entries) {
    if (exclude_special && !is_plain(entry.token)) continue;
    result.push_back(entry.token);
    if (static_cast<int>(result.size()) == k) break;
  }
  return result;
}

std::vector<double> subword_average(const std::vector<std::vector<double>>& pieces) {
  if (pieces.empty()) throw ValidationError("subword_average: empty piece list");
  const std::size_t dim = pieces.front().size();
  std::vector<double> mean(dim, 0.0);
  for (const auto& piece : pieces) {
    if (piece.size() != dim)
      throw ValidationError("subword_average: dimension mismatch");
    for (std::size_t d = 0; d < dim; ++d) mean[d] += piece[d];
  }
  for (auto& v : mean) v /= static_cast<double>(pieces.size());
  return mean;
}

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw ValidationError("cosine_distance: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0)
    throw ValidationError("cosine_distance: zero-norm vector");
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

Dendrogram hierarchical_cluster(const std::vector<TokenEmbedding>& embeddings) {
  const int n = static_cast<int>(embeddings.size());
  if (n < 2) throw ValidationError("hierarchical_cluster: need at least 2 embeddings");
  const std::size_t dim = embeddings.front().vector.size();
  for (const auto& e : embeddings)
    if (e.vector.size() != dim)
      throw ValidationError("hierarchical_cluster: dimension mismatch for token \"" +
                            e.token + "\"");

  Dendrogram result;
  for (const auto& e : embeddings) result.tokens.push_back(e.token);

  struct Active {
    int id;            // dendrogram cluster id
    long size;
    std::string min_token;
  };
  std::vector<Active> active;
  for (int i = 0; i < n; ++i) active.push_back({i, 1, embeddings[i].token});

  // dist[i][j] between active slots; average linkage updated Lance-Williams style
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      dist[i][j] = dist[j][i] =
          cosine_distance(embeddings[i].vector, embeddings[j].vector);

  int next_id = n;
  while (active.size() > 1) {
    int best_i = -1, best_j = -1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < active.size(); ++i) {
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        double d = dist[i][j];
        const auto& lo = std::min(active[i].min_token, active[j].min_token);
        const auto& hi = std::max(active[i].min_token, active[j].min_token);
        if (best_i < 0 || d < best) {
          best = d;
          best_i = static_cast<int>(i);
          best_j = static_cast<int>(j);
        } else if (d == best) {
          const auto& cur_lo =
              std::min(active[best_i].min_token, active[best_j].min_token);
          const auto& cur_hi =
              std::max(active[best_i].min_token, active[best_j].min_token);
          if (std::tie(lo, hi) < std::tie(cur_lo, cur_hi)) {
            best_i = static_cast<int>(i);
            best_j = static_cast<int>(j);
          }
        }
      }
    }

    Active& a = active[best_i];
    Active& b = active[best_j];
    result.merges.push_back({a.id, b.id, best});

    // merge b into a's slot
    long na = a.size, nb = b.size;
    for (std::size_t k = 0; k < active.size(); ++k) {
      if (static_cast<int>(k) == best_i || static_cast<int>(k) == best_j) continue;
      double d = (static_cast<double>(na) * dist[best_i][k] +
                  static_cast<double>(nb) * dist[best_j][k]) /
                 static_cast<double>(na + nb);
      dist[best_i][k] = dist[k][best_i] = d;
    }
    a.id = next_id++;
    a.size = na + nb;
    a.min_token = std::min(a.min_token, b.min_token);
    // swap-remove slot best_j
    std::size_t last = active.size() - 1;
    if (static_cast<std::size_t>(best_j) != last) {
      active[best_j] = active[last];
      for (std::size_t k = 0; k < active.size(); ++k) {
        dist[best_j][k] = dist[last][k];
        dist[k][best_j] = dist[k][last];
      }
      dist[best_j][best_j] = 0.0;
    }
    active.pop_back();
  }

  // leaf order: left-to-right traversal, child with the smaller min token first
  std::vector<std::string> min_token(n + result.merges.size());
  for (int i = 0; i < n; ++i) min_token[i] = embeddings[i].token;
  for (std::size_t m = 0; m < result.merges.size(); ++m)
    min_token[n + m] = std::min(min_token[result.merges[m].cluster_a],
                                min_token[result.merges[m].cluster_b]);
  std::function<void(int)> emit = [&](int id) {
    if (id < n) {
      result.leaf_order.push_back(id);
      return;
    }
    const auto& merge = result.merges[id - n];
    int first = merge.cluster_a, second = merge.cluster_b;
    if (min_token[second] < min_token[first]) std::swap(first, second);
    emit(first);
    emit(second);
  };
  emit(n + static_cast<int>(result.merges.size()) - 1);
  return result;
}

std::vector<std::vector<int>> cut_dendrogram(const Dendrogram& dendrogram, int k) {
  const int n = static_cast<int>(dendrogram.tokens.size());
  if (k < 1 || k > n) throw ValidationError("cut_dendrogram: invalid cluster count");
  std::vector<int> parent(n + dendrogram.merges.size());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int>(i);
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  const int merges_to_apply = n - k;
  for (int m = 0; m < merges_to_apply; ++m) {
    const auto& merge = dendrogram.merges[m];
    int target = n + m;
    parent[find(merge.cluster_a)] = target;
    parent[find(merge.cluster_b)] = target;
  }
  std::unordered_map<int, std::vector<int>> groups;
  for (int i = 0; i < n; ++i) groups[find(i)].push_back(i);
  std::vector<std::vector<int>> clusters;
  for (auto& [root, members] : groups) {
    std::sort(members.begin(), members.end());
    clusters.push_back(std::move(members));
  }
  std::sort(clusters.begin(), clusters.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return clusters;
}

std::vector<TokenEmbedding> load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open embeddings file: " + path);
  std::vector<TokenEmbedding> embeddings;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ValidationError("line " + std::to_string(line_no) +
                            ": expected token<TAB>floats");
    TokenEmbedding e;
    e.token = line.substr(0, tab);
    std::istringstream values(line.substr(tab + 1));
    double v;
    while (values >> v) e.vector.push_back(v);
    if (e.vector.empty())
      throw ValidationError("line " + std::to_string(line_no) + ": no vector values");
    embeddings.push_back(std::move(e));
  }
  return embeddings;
}

}  // namespace caudit
