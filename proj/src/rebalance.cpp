#include "caudit/rebalance.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <unordered_set>

#include "caudit/rng.hpp"

namespace caudit {

namespace {

void require_concept(const Dataset& dataset, const std::string& concept_name) {
  if (!dataset.concept_vocabulary.count(concept_name))
    throw ValidationError("unknown concept \"" + concept_name + "\"");
}

}  // namespace

RebalancePlan plan_rebalance(const Dataset& dataset, const std::string& concept_name) {
  require_concept(dataset, concept_name);
  const int num_labels = dataset.label_space.size;
  RebalancePlan plan;
  plan.concept_name = concept_name;
  plan.current.assign(num_labels, 0);
  plan.donor_pool.assign(num_labels, 0);
  for (const auto& e : dataset.examples) {
    if (e.has_concept(concept_name))
      ++plan.current[e.label];
    else
      ++plan.donor_pool[e.label];
  }
  const long target = *std::max_element(plan.current.begin(), plan.current.end());
  plan.target.assign(num_labels, target);
  plan.deficit.resize(num_labels);
  for (int l = 0; l < num_labels; ++l)
    plan.deficit[l] = std::max(0L, target - plan.current[l]);
  return plan;
}

void InjectionPrompt::validate() const {
  if (concept_name.empty()) throw ValidationError("injection prompt has no concept");
  if (with_concept_exemplars.size() != 5 || without_concept_exemplars.size() != 5)
    throw ValidationError(
        "injection prompt requires exactly 5 exemplars per side, got " +
        std::to_string(with_concept_exemplars.size()) + " with / " +
        std::to_string(without_concept_exemplars.size()) + " without");
}

std::string render_injection_prompt(const InjectionPrompt& prompt,
                                    const std::string& statement) {
  prompt.validate();
  std::ostringstream out;
  out << "Here are 5 exemplars with the " << prompt.concept_name << " concept:\n";
  for (const auto& text : prompt.with_concept_exemplars) out << text << "\n";
  out << "Here are another 5 exemplars without the " << prompt.concept_name
      << " concept:\n";
  for (const auto& text : prompt.without_concept_exemplars) out << text << "\n";
  out << "Please inject the \"" << prompt.concept_name
      << "\" concept into a statement and maintain the sentiment level of this "
         "statement.\n";
  out << "The statement is:\n" << statement << "\n";
  out << "The output statement with the \"" << prompt.concept_name
      << "\" concept is:\n";
  return out.str();
}

std::set<int> majority_keep_labels(const Dataset& dataset,
                                   const std::string& concept_name) {
  require_concept(dataset, concept_name);
  long positive = 0, negative = 0;
  for (const auto& e : dataset.examples) {
    if (!e.has_concept(concept_name)) continue;
    if (dataset.label_space.positive_set.count(e.label))
      ++positive;
    else
      ++negative;
  }
  if (positive + negative == 0)
    throw ValidationError("concept \"" + concept_name + "\" absent from every example");
  if (positive == negative)
    throw ValidationError("majority tie for concept \"" + concept_name + "\" (" +
                          std::to_string(positive) + " positive vs " +
                          std::to_string(negative) + " negative)");
  if (positive > negative) return dataset.label_space.positive_set;
  std::set<int> complement;
  for (int l = 0; l < dataset.label_space.size; ++l)
    if (!dataset.label_space.positive_set.count(l)) complement.insert(l);
  return complement;
}

Dataset construct_biased(const Dataset& dataset, const std::string& concept_name,
                         const std::set<int>& keep_labels) {
  require_concept(dataset, concept_name);
  if (keep_labels.empty()) throw ValidationError("keep_labels is empty");

  Dataset biased;
  biased.label_space = dataset.label_space;
  biased.concept_vocabulary = dataset.concept_vocabulary;
  bool any_with = false;
  for (const auto& e : dataset.examples) {
    if (e.has_concept(concept_name)) {
      if (!keep_labels.count(e.label)) continue;
      any_with = true;
    }
    biased.examples.push_back(e);
  }
  if (!any_with)
    throw ValidationError("biased dataset has an empty with-concept group for \"" +
                          concept_name + "\"");
  return biased;
}

Dataset downsample_balance(const Dataset& dataset, const std::string& concept_name,
                           std::uint64_t seed) {
  require_concept(dataset, concept_name);
  const int num_labels = dataset.label_space.size;

  std::vector<std::vector<std::size_t>> with_by_label(num_labels);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Example& e = dataset.examples[i];
    if (e.has_concept(concept_name)) with_by_label[e.label].push_back(i);
  }
  std::size_t min_count = dataset.size();
  for (int l = 0; l < num_labels; ++l) {
    if (with_by_label[l].empty())
      throw ValidationError("label " + std::to_string(l) +
                            " empty in with-concept group for concept \"" +
                            concept_name + "\"");
    min_count = std::min(min_count, with_by_label[l].size());
  }

  Rng rng = make_rng(seed, derive_seed(3, concept_name));
  std::unordered_set<std::size_t> kept_with;
  for (int l = 0; l < num_labels; ++l) {
    auto& pool = with_by_label[l];
    std::shuffle(pool.begin(), pool.end(), rng);
    kept_with.insert(pool.begin(), pool.begin() + min_count);
  }

  Dataset balanced;
  balanced.label_space = dataset.label_space;
  balanced.concept_vocabulary = dataset.concept_vocabulary;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Example& e = dataset.examples[i];
    if (e.has_concept(concept_name) && !kept_with.count(i)) continue;
    balanced.examples.push_back(e);
  }
  return balanced;
}

Dataset upsample_balance(const Dataset& dataset, const std::string& concept_name,
                         LlmClient& injector, const InjectionPrompt& prompt,
                         std::uint64_t seed, const ConceptChecker& verifier) {
  require_concept(dataset, concept_name);
  prompt.validate();
  RebalancePlan plan = plan_rebalance(dataset, concept_name);
  const int num_labels = dataset.label_space.size;

  std::vector<std::vector<std::size_t>> donors_by_label(num_labels);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Example& e = dataset.examples[i];
    if (!e.has_concept(concept_name)) donors_by_label[e.label].push_back(i);
  }
  std::string shortfalls;
  for (int l = 0; l < num_labels; ++l) {
    long missing = plan.deficit[l] - static_cast<long>(donors_by_label[l].size());
    if (missing > 0) {
      if (!shortfalls.empty()) shortfalls += ", ";
      shortfalls += "label " + std::to_string(l) + " short by " +
                    std::to_string(missing);
    }
  }
  if (!shortfalls.empty())
    throw ValidationError("donor pool too small for concept \"" + concept_name +
                          "\": " + shortfalls);

  Dataset upsampled = dataset;
  DecodingConfig greedy;
  Rng rng = make_rng(seed, derive_seed(4, concept_name));
  long counter = 0;
  for (int l = 0; l < num_labels; ++l) {
    auto& pool = donors_by_label[l];
    std::shuffle(pool.begin(), pool.end(), rng);
    for (long d = 0; d < plan.deficit[l]; ++d) {
      const Example& donor = dataset.examples[pool[d]];
      const std::string rendered = render_injection_prompt(prompt, donor.text);
      std::string generated;
      bool verified = false;
      for (int attempt = 0; attempt < 3 && !verified; ++attempt) {
        generated = injector.complete(rendered, greedy);
        verified = !verifier || verifier(generated, concept_name);
      }
      if (!verified)
        throw ValidationError("counterfactual for donor " + donor.id +
                              " failed concept re-verification 3 times");
      Example counterfactual;
      counterfactual.id = donor.id + "#cf-" + std::to_string(++counter);
      counterfactual.text = generated;
      counterfactual.label = donor.label;
      counterfactual.concepts = donor.concepts;
      counterfactual.concepts.insert(concept_name);
      counterfactual.provenance = Provenance::Counterfactual;
      upsampled.examples.push_back(std::move(counterfactual));
    }
  }
  upsampled.validate();
  return upsampled;
}

std::unique_ptr<LlmClient> mock_injector(
    const std::map<std::string, std::string>& concept_sentences) {
  if (concept_sentences.empty())
    throw ValidationError("mock_injector: empty sentence map");
  return make_function_client(
      [concept_sentences](const std::string& prompt, const DecodingConfig&) {
        // recover concept and statement from the rendered injection prompt
        const std::string marker = "Please inject the \"";
        auto pos = prompt.find(marker);
        if (pos == std::string::npos)
          throw ValidationError("mock_injector: prompt missing inject marker");
        pos += marker.size();
        auto quote = prompt.find('"', pos);
        const std::string concept_name = prompt.substr(pos, quote - pos);

        const std::string stmt_marker = "The statement is:\n";
        auto begin = prompt.find(stmt_marker);
        if (begin == std::string::npos)
          throw ValidationError("mock_injector: prompt missing statement slot");
        begin += stmt_marker.size();
        auto end = prompt.find("\nThe output statement", begin);
        const std::string statement = prompt.substr(begin, end - begin);

        auto it = concept_sentences.find(concept_name);
        if (it == concept_sentences.end())
          throw ValidationError("mock_injector: unknown concept \"" + concept_name + "\"");
        if (statement.empty()) return it->second;
        return statement + " " + it->second;
      });
}

Dataset mask_dataset(const Dataset& dataset, const std::string& concept_name,
                     const PmiTable& table, int k, const std::string& mask_token) {
  require_concept(dataset, concept_name);
  if (k < 1) throw ValidationError("k must be >= 1");

  auto top = top_associated_tokens(table, k, /*exclude_special=*/false);
  std::unordered_set<std::string> mask_set(top.begin(), top.end());
  // never mask the mask token's own token content, so masking is idempotent
  for (const auto& t : tokenize(mask_token)) mask_set.erase(t);

  auto mask_text = [&](const std::string& text) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    auto is_token_char = [](unsigned char c) {
      return std::isalnum(c) || c == '-' || c == '/';
    };
    while (i < text.size()) {
      if (!is_token_char(static_cast<unsigned char>(text[i]))) {
        out.push_back(text[i++]);
        continue;
      }
      std::size_t j = i;
      while (j < text.size() && is_token_char(static_cast<unsigned char>(text[j])))
        ++j;
      std::string run = text.substr(i, j - i);
      // the tokenizer trims edge joiners; mirror that for the match
      std::size_t core_begin = run.find_first_not_of("-/");
      std::size_t core_end = run.find_last_not_of("-/");
      if (core_begin == std::string::npos) {
        out += run;
      } else {
        std::string core = run.substr(core_begin, core_end - core_begin + 1);
        std::string lowered = core;
        std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        out += run.substr(0, core_begin);
        out += mask_set.count(lowered) ? mask_token : core;
        out += run.substr(core_end + 1);
      }
      i = j;
    }
    return out;
  };

  Dataset masked;
  masked.label_space = dataset.label_space;
  masked.concept_vocabulary = dataset.concept_vocabulary;
  for (const auto& e : dataset.examples) {
    Example m = e;
    m.text = mask_text(e.text);
    m.provenance = Provenance::Masked;
    masked.examples.push_back(std::move(m));
  }
  return masked;
}

}  // namespace caudit
