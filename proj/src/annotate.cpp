#include "caudit/annotate.hpp"

#include <algorithm>
#include <mutex>
#include <sstream>

#include "caudit/assoc.hpp"

namespace caudit {

namespace {

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string concept_set_to_answer(const std::set<std::string>& concepts) {
  if (concepts.empty()) return "none";
  return join({concepts.begin(), concepts.end()}, ", ");
}

std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

void AnnotationPrompt::validate() const {
  if (demonstrations.size() != 5)
    throw ValidationError("annotation prompt requires exactly 5 demonstrations, got " +
                          std::to_string(demonstrations.size()));
  if (candidate_concepts.empty())
    throw ValidationError("annotation prompt has no candidate concepts");
  std::set<std::string> candidates(candidate_concepts.begin(),
                                   candidate_concepts.end());
  for (const auto& [text, concepts] : demonstrations)
    for (const auto& c : concepts)
      if (!candidates.count(c))
        throw ValidationError("demonstration concept \"" + c +
                              "\" not in the candidate set");
}

std::string render_annotation_prompt(const AnnotationPrompt& prompt,
                                     const std::vector<std::string>& batch) {
  prompt.validate();
  if (batch.empty()) throw ValidationError("annotation batch is empty");
  if (batch.size() > 5)
    throw ValidationError("annotation batch larger than 5 texts");

  std::ostringstream out;
  out << "I will provide you " << batch.size() << " reviews in "
      << prompt.dataset_name << " dataset. "
      << "Please find the concepts explicitly mentioned in this review only "
         "from the set with "
      << prompt.candidate_concepts.size()
      << " concepts: " << join(prompt.candidate_concepts, ", ") << ". "
      << "Do not include other concepts. If you can not find any of these "
         "concepts in the concept set, please annotate this review with "
         "\"none\". Wrap your answer for a review in a word sequence "
         "separated by the comma and for each answer, start with a new line "
         "with an index.\n";
  out << "Here are a few examples:\n";
  for (std::size_t i = 0; i < prompt.demonstrations.size(); ++i)
    out << (i + 1) << ". " << prompt.demonstrations[i].first << "\n";
  out << "The output is:\n";
  for (std::size_t i = 0; i < prompt.demonstrations.size(); ++i)
    out << (i + 1) << ". " << concept_set_to_answer(prompt.demonstrations[i].second)
        << "\n";
  out << "Here is the review list of " << batch.size() << " reviews:\n";
  for (std::size_t i = 0; i < batch.size(); ++i)
    out << (i + 1) << ". " << batch[i] << "\n";
  out << "The output is:\n";
  return out.str();
}

std::vector<std::set<std::string>> parse_annotation_response(
    const std::string& raw, const std::set<std::string>& candidate_concepts,
    int batch_size, std::vector<std::string>* dropped) {
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");

  std::vector<std::pair<int, std::string>> indexed;
  std::istringstream lines(raw);
  std::string line;
  while (std::getline(lines, line)) {
    std::string t = trim(line);
    std::size_t pos = 0;
    while (pos < t.size() && std::isdigit(static_cast<unsigned char>(t[pos]))) ++pos;
    if (pos == 0 || pos >= t.size() || (t[pos] != '.' && t[pos] != ')')) continue;
    int index = std::stoi(t.substr(0, pos));
    indexed.emplace_back(index, trim(t.substr(pos + 1)));
  }
  if (static_cast<int>(indexed.size()) != batch_size)
    throw ValidationError("annotation response has " +
                          std::to_string(indexed.size()) + " indexed lines, expected " +
                          std::to_string(batch_size) + "; raw response: " + raw);

  std::vector<std::set<std::string>> result(batch_size);
  for (int i = 0; i < batch_size; ++i) {
    const auto& [index, answer] = indexed[i];
    if (index != i + 1)
      throw ValidationError("annotation response index " + std::to_string(index) +
                            " out of order; raw response: " + raw);
    if (answer.empty() || answer == "none") continue;
    std::istringstream parts(answer);
    std::string name;
    while (std::getline(parts, name, ',')) {
      name = trim(name);
      if (name.empty() || name == "none") continue;
      if (candidate_concepts.count(name)) {
        result[i].insert(name);
      } else if (dropped) {
        dropped->push_back(name);
      }
    }
  }
  return result;
}

std::pair<Dataset, std::vector<AnnotationResult>> annotate_dataset(
    const Dataset& dataset, const AnnotationPrompt& prompt, LlmClient& client,
    const AnnotateOptions& options) {
  prompt.validate();
  if (options.batch_size < 1 || options.batch_size > 5)
    throw ValidationError("batch_size must be in 1..5");

  const std::set<std::string> candidates(prompt.candidate_concepts.begin(),
                                         prompt.candidate_concepts.end());
  DecodingConfig decoding;
  decoding.greedy = false;
  decoding.temperature = options.temperature;

  const std::size_t n = dataset.size();
  const std::size_t n_batches =
      (n + options.batch_size - 1) / options.batch_size;

  std::vector<AnnotationResult> results(n);
  std::vector<bool> done(n_batches, false);

  auto run_batch = [&](std::size_t b) {
    const std::size_t begin = b * options.batch_size;
    const std::size_t end = std::min(n, begin + options.batch_size);
    std::vector<std::string> texts;
    for (std::size_t i = begin; i < end; ++i)
      texts.push_back(dataset.examples[i].text);
    const std::string rendered = render_annotation_prompt(prompt, texts);
    const int batch_size = static_cast<int>(texts.size());
    auto run_a = parse_annotation_response(client.complete(rendered, decoding),
                                           candidates, batch_size);
    auto run_b = parse_annotation_response(client.complete(rendered, decoding),
                                           candidates, batch_size);
    for (std::size_t i = begin; i < end; ++i) {
      AnnotationResult& r = results[i];
      r.example_id = dataset.examples[i].id;
      r.run_a = run_a[i - begin];
      r.run_b = run_b[i - begin];
      std::set_intersection(r.run_a.begin(), r.run_a.end(), r.run_b.begin(),
                            r.run_b.end(),
                            std::inserter(r.consistent, r.consistent.begin()));
      r.kept = (r.run_a == r.run_b);
    }
    done[b] = true;
  };

  try {
    parallel_for_indexed(n_batches, options.max_parallel, run_batch);
  } catch (const ExternalServiceError& ex) {
    // persist whatever finished so a rerun can resume from it
    const std::string partial_path = "annotate.partial.jsonl";
    Dataset partial;
    partial.label_space = dataset.label_space;
    partial.concept_vocabulary = dataset.concept_vocabulary;
    for (std::size_t b = 0; b < n_batches; ++b) {
      if (!done[b]) continue;
      const std::size_t begin = b * options.batch_size;
      const std::size_t end = std::min(n, begin + options.batch_size);
      for (std::size_t i = begin; i < end; ++i) {
        if (!results[i].kept) continue;
        Example e = dataset.examples[i];
        e.concepts = results[i].consistent;
        partial.examples.push_back(std::move(e));
      }
    }
    save_dataset(partial_path, partial);
    throw ExternalServiceError(std::string(ex.what()) +
                               "; partial results written to " + partial_path);
  }

  Dataset annotated;
  annotated.label_space = dataset.label_space;
  annotated.concept_vocabulary = dataset.concept_vocabulary;
  for (std::size_t i = 0; i < n; ++i) {
    const AnnotationResult& r = results[i];
    if (!r.kept && !options.keep_agreed_concepts) continue;
    Example e = dataset.examples[i];
    e.concepts = r.consistent;
    annotated.examples.push_back(std::move(e));
  }
  return {std::move(annotated), std::move(results)};
}

std::unique_ptr<LlmClient> mock_annotator(
    const std::map<std::string, std::set<std::string>>& lexicons) {
  if (lexicons.empty()) throw ValidationError("mock_annotator: empty lexicon map");
  for (auto it = lexicons.begin(); it != lexicons.end(); ++it) {
    if (it->second.empty())
      throw ValidationError("mock_annotator: empty lexicon for concept \"" +
                            it->first + "\"");
    for (auto jt = std::next(it); jt != lexicons.end(); ++jt) {
      std::vector<std::string> overlap;
      std::set_intersection(it->second.begin(), it->second.end(),
                            jt->second.begin(), jt->second.end(),
                            std::back_inserter(overlap));
      if (!overlap.empty())
        throw ValidationError("mock_annotator: lexicons for \"" + it->first +
                              "\" and \"" + jt->first + "\" overlap on \"" +
                              overlap.front() + "\"");
    }
  }

  return make_function_client(
      [lexicons](const std::string& prompt, const DecodingConfig&) {
        // pull the indexed review list out of the rendered prompt
        auto list_pos = prompt.rfind("Here is the review list");
        if (list_pos == std::string::npos)
          throw ValidationError("mock_annotator: prompt missing review list section");
        std::istringstream lines(prompt.substr(list_pos));
        std::string line;
        std::getline(lines, line);  // header
        std::ostringstream out;
        while (std::getline(lines, line)) {
          std::string t = trim(line);
          std::size_t pos = 0;
          while (pos < t.size() && std::isdigit(static_cast<unsigned char>(t[pos])))
            ++pos;
          if (pos == 0 || pos >= t.size() || t[pos] != '.') break;
          const std::string text = trim(t.substr(pos + 1));
          auto tokens = tokenize(text);
          std::set<std::string> token_set(tokens.begin(), tokens.end());
          std::set<std::string> found;
          for (const auto& [concept_name, lexicon] : lexicons)
            for (const auto& lex_token : lexicon)
              if (token_set.count(lex_token)) {
                found.insert(concept_name);
                break;
              }
          out << t.substr(0, pos) << ". " << concept_set_to_answer(found) << "\n";
        }
        return out.str();
      });
}

}  // namespace caudit
