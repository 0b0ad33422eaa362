#include "caudit/icl.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <sstream>

#include "caudit/rebalance.hpp"
#include "caudit/rng.hpp"

namespace caudit {

namespace {

std::string lowercase(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string default_instruction(const LabelSpace& label_space) {
  if (label_space.size == 2)
    return "Given a review, you need to predict whether the sentiment of the "
           "review is positive or negative.";
  std::ostringstream out;
  out << "Given a review, you need to predict the sentiment label of the review "
         "from 0 to "
      << label_space.size - 1 << ", total " << label_space.size
      << " classes. Label 0 represents the most negative review and Label "
      << label_space.size - 1 << " represents the most positive review.";
  return out.str();
}

}  // namespace

PromptMode prompt_mode_from_string(const std::string& s) {
  if (s == "balanced") return PromptMode::Balanced;
  if (s == "biased") return PromptMode::Biased;
  throw ValidationError("unknown prompt mode \"" + s + "\"");
}

PromptSpec build_prompt(const Dataset& pool, const std::string& concept_name,
                        PromptMode mode, int h, const std::set<int>& majority_labels,
                        std::uint64_t seed) {
  if (!pool.concept_vocabulary.count(concept_name))
    throw ValidationError("unknown concept \"" + concept_name + "\"");
  if (h < 2 || h % 2 != 0) throw ValidationError("h must be even and >= 2");
  const int num_labels = pool.label_space.size;
  const int per_side = h / 2;

  // (concept presence x label) -> candidate example indices
  std::vector<std::vector<std::size_t>> with_cell(num_labels), without_cell(num_labels);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const Example& e = pool.examples[i];
    (e.has_concept(concept_name) ? with_cell : without_cell)[e.label].push_back(i);
  }

  // quota per (side, label)
  std::vector<int> with_quota(num_labels, 0), without_quota(num_labels, 0);
  Rng rng = make_rng(seed, derive_seed(5, concept_name));
  if (mode == PromptMode::Biased) {
    if (majority_labels.empty())
      throw ValidationError("biased prompt requires a majority label set");
    std::vector<int> majority(majority_labels.begin(), majority_labels.end());
    std::vector<int> complement;
    for (int l = 0; l < num_labels; ++l)
      if (!majority_labels.count(l)) complement.push_back(l);
    if (complement.empty())
      throw ValidationError("majority set covers every label");
    std::uniform_int_distribution<std::size_t> pick_major(0, majority.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_comp(0, complement.size() - 1);
    for (int i = 0; i < per_side; ++i) ++with_quota[majority[pick_major(rng)]];
    for (int i = 0; i < per_side; ++i) ++without_quota[complement[pick_comp(rng)]];
  } else {
    // as label-balanced as per_side allows; the +1 labels are seeded
    std::vector<int> labels(num_labels);
    for (int l = 0; l < num_labels; ++l) labels[l] = l;
    for (auto* quota : {&with_quota, &without_quota}) {
      for (int l = 0; l < num_labels; ++l) (*quota)[l] = per_side / num_labels;
      std::shuffle(labels.begin(), labels.end(), rng);
      for (int i = 0; i < per_side % num_labels; ++i) ++(*quota)[labels[i]];
    }
  }

  PromptSpec spec;
  spec.instruction = default_instruction(pool.label_space);
  auto draw = [&](std::vector<std::size_t>& cell, int quota, bool with,
                  int label) {
    if (static_cast<int>(cell.size()) < quota)
      throw ValidationError(
          "insufficient exemplar pool in cell (" +
          std::string(with ? "with-concept" : "without-concept") + ", label " +
          std::to_string(label) + "): need " + std::to_string(quota) + ", have " +
          std::to_string(cell.size()));
    std::shuffle(cell.begin(), cell.end(), rng);
    for (int i = 0; i < quota; ++i) {
      const Example& e = pool.examples[cell[i]];
      spec.exemplars.push_back({e.text, e.label, with});
    }
  };
  for (int l = 0; l < num_labels; ++l) draw(with_cell[l], with_quota[l], true, l);
  for (int l = 0; l < num_labels; ++l)
    draw(without_cell[l], without_quota[l], false, l);
  std::shuffle(spec.exemplars.begin(), spec.exemplars.end(), rng);
  return spec;
}

std::string render_prompt(const PromptSpec& spec, const LabelSpace& label_space) {
  std::ostringstream out;
  out << spec.instruction << "\n";
  out << "Here are the examples:\n";
  for (const auto& exemplar : spec.exemplars) {
    out << "Review: " << exemplar.text
        << " Sentiment label: " << label_space.verbalizer.at(exemplar.label)
        << "\n";
  }
  out << "Here is the review to predict sentiment:\n";
  out << "Review: " << spec.test_input << " Sentiment label:";
  return out.str();
}

int parse_icl_response(const std::string& raw, const LabelSpace& label_space) {
  const std::string lowered = lowercase(raw);
  std::size_t best_pos = std::string::npos;
  int best_label = -1;

  for (const auto& [label, word] : label_space.verbalizer) {
    auto pos = lowered.find(lowercase(word));
    if (pos != std::string::npos && pos < best_pos) {
      best_pos = pos;
      best_label = label;
    }
  }
  // bare in-range integer anywhere in the response
  for (std::size_t i = 0; i < lowered.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(lowered[i]))) continue;
    std::size_t j = i;
    while (j < lowered.size() && std::isdigit(static_cast<unsigned char>(lowered[j])))
      ++j;
    try {
      int value = std::stoi(lowered.substr(i, j - i));
      if (label_space.contains(value) && i < best_pos) {
        best_pos = i;
        best_label = value;
      }
    } catch (const std::out_of_range&) {
    }
    i = j;
  }
  if (best_label < 0)
    throw ValidationError("unparsable response: " + raw);
  return best_label;
}

std::unique_ptr<LlmClient> exemplar_majority_client(
    const std::set<std::string>& concept_lexicon,
    const std::map<int, std::set<std::string>>& label_lexicons,
    const LabelSpace& label_space) {
  return make_function_client([concept_lexicon, label_lexicons, label_space](
                                  const std::string& prompt, const DecodingConfig&) {
    auto has_concept_token = [&concept_lexicon](const std::string& text) {
      for (const auto& token : tokenize(text))
        if (concept_lexicon.count(token)) return true;
      return false;
    };

    // exemplar lines: "Review: <text> Sentiment label: <v(y)>"
    std::vector<std::pair<std::string, int>> exemplars;
    std::string test_text;
    std::istringstream lines(prompt);
    std::string line;
    while (std::getline(lines, line)) {
      const std::string review_marker = "Review: ";
      const std::string label_marker = " Sentiment label:";
      if (line.rfind(review_marker, 0) != 0) continue;
      auto label_pos = line.rfind(label_marker);
      if (label_pos == std::string::npos) continue;
      std::string text = line.substr(review_marker.size(),
                                     label_pos - review_marker.size());
      std::string value = line.substr(label_pos + label_marker.size());
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      if (value.empty()) {
        test_text = text;  // the trailing stub
        continue;
      }
      for (const auto& [label, word] : label_space.verbalizer)
        if (word == value) exemplars.emplace_back(text, label);
    }
    if (test_text.empty() && exemplars.empty())
      throw ValidationError("exemplar_majority_client: unrecognized prompt layout");

    const bool test_has_concept = has_concept_token(test_text);
    std::vector<int> votes(label_space.size, 0);
    for (const auto& [text, label] : exemplars)
      if (has_concept_token(text) == test_has_concept) ++votes[label];

    int best = -1;
    bool tie = true;
    for (int l = 0; l < label_space.size; ++l) {
      if (best < 0 || votes[l] > votes[best]) {
        best = l;
        tie = false;
      } else if (votes[l] == votes[best]) {
        tie = true;
      }
    }
    if (tie || votes[best] == 0) {
      // no prompt signal: read the test input's own sentiment tokens
      std::set<std::string> tokens;
      for (const auto& token : tokenize(test_text)) tokens.insert(token);
      for (const auto& [label, lexicon] : label_lexicons)
        for (const auto& token : lexicon)
          if (tokens.count(token)) return label_space.verbalizer.at(label);
    }
    return label_space.verbalizer.at(best < 0 ? 0 : best);
  });
}

IclRunResult icl_evaluate(const Dataset& pool, const Dataset& test,
                          const std::string& concept_name, PromptMode mode,
                          LlmClient& client, int repeats, std::uint64_t seed,
                          int h, int max_parallel) {
  if (repeats < 1) throw ValidationError("repeats must be >= 1");
  std::set<int> majority;
  if (mode == PromptMode::Biased) majority = majority_keep_labels(pool, concept_name);

  IclRunResult result;
  DecodingConfig greedy;
  std::atomic<long> unparsable{0};
  for (int r = 0; r < repeats; ++r) {
    const std::uint64_t repeat_seed = seed + static_cast<std::uint64_t>(r);
    result.seeds.push_back(repeat_seed);
    PromptSpec spec = build_prompt(pool, concept_name, mode, h, majority, repeat_seed);

    std::vector<PredictionRecord> predictions(test.size());
    parallel_for_indexed(test.size(), max_parallel, [&](std::size_t i) {
      const Example& e = test.examples[i];
      PromptSpec query = spec;
      query.test_input = e.text;
      const std::string raw = client.complete(render_prompt(query, test.label_space),
                                              greedy);
      int predicted;
      try {
        predicted = parse_icl_response(raw, test.label_space);
      } catch (const ValidationError&) {
        // scored as incorrect, tallied separately
        ++unparsable;
        predicted = (e.label + 1) % test.label_space.size;
      }
      predictions[i] = {e.id, predicted};
    });
    result.per_repeat.push_back(
        measure(test, predictions, {concept_name}, repeat_seed).front());
  }
  result.unparsable = unparsable.load();

  result.averaged = result.per_repeat.front();
  result.averaged.seed = seed;
  if (repeats > 1) {
    double bias = 0.0, acc_c = 0.0, acc_noc = 0.0;
    for (const auto& report : result.per_repeat) {
      bias += report.bias_at_c;
      acc_c += report.acc_at_c;
      acc_noc += report.acc_at_noc;
    }
    result.averaged.bias_at_c = bias / repeats;
    result.averaged.acc_at_c = acc_c / repeats;
    result.averaged.acc_at_noc = acc_noc / repeats;
  }
  return result;
}

}  // namespace caudit
