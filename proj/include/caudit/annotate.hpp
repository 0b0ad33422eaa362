#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "caudit/corpus.hpp"
#include "caudit/llm.hpp"

namespace caudit {

// Concept-annotation prompt: instruction template, exactly five
// demonstration (text, concept set) pairs, and the ordered candidate list.
struct AnnotationPrompt {
  std::string dataset_name = "review";
  std::vector<std::pair<std::string, std::set<std::string>>> demonstrations;
  std::vector<std::string> candidate_concepts;

  void validate() const;
};

// Renders the full annotation prompt for a batch of at most five texts.
std::string render_annotation_prompt(const AnnotationPrompt& prompt,
                                     const std::vector<std::string>& batch);

// Parses an indexed response ("1. food, price\n2. none"). Returns one
// concept set per batch entry; the literal answer "none" maps to the empty
// set. Unknown concept names are dropped and appended to *dropped when given.
std::vector<std::set<std::string>> parse_annotation_response(
    const std::string& raw, const std::set<std::string>& candidate_concepts,
    int batch_size, std::vector<std::string>* dropped = nullptr);

struct AnnotationResult {
  std::string example_id;
  std::set<std::string> run_a;
  std::set<std::string> run_b;
  std::set<std::string> consistent;  // intersection of the two runs
  bool kept = false;                 // true iff run_a == run_b
};

struct AnnotateOptions {
  int batch_size = 5;
  int max_parallel = 1;
  double temperature = 0.7;  // both runs sample at this temperature
  // Off by default: keep examples whose runs disagree, with the agreed
  // (intersection) concepts only, instead of dropping them.
  bool keep_agreed_concepts = false;
};

// Annotates every example twice and keeps only those whose two runs agree
// exactly; kept examples get the agreed concept set.
std::pair<Dataset, std::vector<AnnotationResult>> annotate_dataset(
    const Dataset& dataset, const AnnotationPrompt& prompt, LlmClient& client,
    const AnnotateOptions& options = {});

// Deterministic annotator double: answers with every concept whose lexicon
// intersects the text's token set. Lexicons must be pairwise disjoint.
std::unique_ptr<LlmClient> mock_annotator(
    const std::map<std::string, std::set<std::string>>& lexicons);

}  // namespace caudit
