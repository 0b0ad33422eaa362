#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "caudit/corpus.hpp"
#include "caudit/llm.hpp"
#include "caudit/metrics.hpp"

namespace caudit {

struct IclExemplar {
  std::string text;
  int label = 0;
  bool has_concept = false;
};

struct PromptSpec {
  std::string instruction;
  std::vector<IclExemplar> exemplars;  // even count, seeded-shuffled order
  std::string test_input;
  bool verbalized = true;
};

enum class PromptMode { Balanced, Biased };

PromptMode prompt_mode_from_string(const std::string& s);

// Biased: h/2 with-concept exemplars from majority labels only, h/2
// without-concept exemplars from the complement labels. Balanced: h/2 per
// side, each side label-balanced (counts differ by at most one when L does
// not divide h/2). The test-input slot is left empty.
PromptSpec build_prompt(const Dataset& pool, const std::string& concept_name,
                        PromptMode mode, int h, const std::set<int>& majority_labels,
                        std::uint64_t seed);

// Instruction, one "Review: <text> Sentiment label: <v(y)>" line per
// exemplar, then the test stub ending in "Sentiment label:".
std::string render_prompt(const PromptSpec& spec, const LabelSpace& label_space);

// First verbalizer value or in-range integer found in the response,
// case-insensitive. Throws when nothing parses.
int parse_icl_response(const std::string& raw, const LabelSpace& label_space);

struct IclRunResult {
  std::vector<BiasReport> per_repeat;
  BiasReport averaged;
  std::vector<std::uint64_t> seeds;  // exemplar-selection seed per repeat
  long unparsable = 0;               // responses scored as incorrect
};

// For each repeat r: builds a fresh prompt with seed + r, queries every test
// example through the (greedy) client, and scores with metrics::measure.
IclRunResult icl_evaluate(const Dataset& pool, const Dataset& test,
                          const std::string& concept_name, PromptMode mode,
                          LlmClient& client, int repeats, std::uint64_t seed,
                          int h = 8, int max_parallel = 1);

// Rule-based classifier double that exhibits exemplar shortcut-copying:
// it splits the prompt's exemplars by concept presence (detected via the
// lexicon), then answers with the majority label of the test input's own
// side. On a majority tie it falls back to the label whose sentiment
// lexicon intersects the test input.
std::unique_ptr<LlmClient> exemplar_majority_client(
    const std::set<std::string>& concept_lexicon,
    const std::map<int, std::set<std::string>>& label_lexicons,
    const LabelSpace& label_space);

}  // namespace caudit
