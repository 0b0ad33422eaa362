#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "caudit/assoc.hpp"
#include "caudit/corpus.hpp"
#include "caudit/llm.hpp"

namespace caudit {

// Per-label targets and deficits for balancing the with-concept group.
struct RebalancePlan {
  std::string concept_name;
  std::vector<long> current;     // with-concept count per label
  std::vector<long> target;      // equal counts after balancing up
  std::vector<long> deficit;     // counterfactuals needed per label
  std::vector<long> donor_pool;  // without-concept count per label
};

RebalancePlan plan_rebalance(const Dataset& dataset, const std::string& concept_name);

// Counterfactual injection prompt: five exemplars with the concept, five
// without, and a statement slot.
struct InjectionPrompt {
  std::string concept_name;
  std::vector<std::string> with_concept_exemplars;
  std::vector<std::string> without_concept_exemplars;

  void validate() const;
};

std::string render_injection_prompt(const InjectionPrompt& prompt,
                                    const std::string& statement);

// Majority label set among with-concept examples: the positive class if it
// outnumbers the rest, else its complement. Exact ties are an error.
std::set<int> majority_keep_labels(const Dataset& dataset,
                                   const std::string& concept_name);

// Keeps with-concept examples only when their label is in keep_labels;
// without-concept examples pass through untouched. Order preserved.
Dataset construct_biased(const Dataset& dataset, const std::string& concept_name,
                         const std::set<int>& keep_labels);

// Downsamples the with-concept group to equal per-label counts (min rule,
// seeded uniform sampling without replacement). Without-concept examples
// are untouched.
Dataset downsample_balance(const Dataset& dataset, const std::string& concept_name,
                           std::uint64_t seed);

// Returns true when the text contains the concept.
using ConceptChecker = std::function<bool(const std::string& text,
                                          const std::string& concept_name)>;

// Balances the with-concept group up to its per-label maximum by generating
// counterfactuals from seeded without-concept donors. Donors stay in the
// dataset; each generated copy is appended with id "<donor>#cf-<n>",
// provenance "counterfactual", the donor's label, and the donor's concepts
// plus the injected one. When a verifier is given, each counterfactual must
// pass concept re-verification (regenerated up to 3 times, then an error).
Dataset upsample_balance(const Dataset& dataset, const std::string& concept_name,
                         LlmClient& injector, const InjectionPrompt& prompt,
                         std::uint64_t seed,
                         const ConceptChecker& verifier = nullptr);

// Injector double: returns donor text + " " + the concept's fixed sentence.
std::unique_ptr<LlmClient> mock_injector(
    const std::map<std::string, std::string>& concept_sentences);

// Replaces every whole-token, case-insensitive occurrence of the table's
// top-k tokens with mask_token. Labels, ids and concepts are preserved;
// provenance becomes "masked".
Dataset mask_dataset(const Dataset& dataset, const std::string& concept_name,
                     const PmiTable& table, int k, const std::string& mask_token);

}  // namespace caudit
