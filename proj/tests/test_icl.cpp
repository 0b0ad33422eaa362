#include <doctest.h>

#include <map>

#include "caudit/icl.hpp"
#include "caudit/rebalance.hpp"
#include "helpers.hpp"

using namespace caudit;
using testutil::ex;
using testutil::make_dataset;

namespace {

// binary pool where the concept token is "zork" and sentiment words are
// "bad"/"good"; with-concept group is positive-majority (10 vs 4)
Dataset sample_pool() {
  std::vector<Example> examples;
  int next = 0;
  auto add = [&](int label, bool with, int count) {
    for (int i = 0; i < count; ++i) {
      std::string text = std::string(with ? "zork " : "") +
                         (label == 1 ? "good" : "bad") + " visit " +
                         std::to_string(next);
      std::set<std::string> concepts;
      if (with) concepts.insert("c");
      examples.push_back(ex("p" + std::to_string(next++), text, label, concepts));
    }
  };
  add(1, true, 10);
  add(0, true, 4);
  add(1, false, 10);
  add(0, false, 10);
  return make_dataset(2, std::move(examples), {"c"});
}

Dataset sample_test(int per_cell) {
  std::vector<Example> examples;
  int next = 0;
  for (int label : {0, 1}) {
    for (bool with : {true, false}) {
      for (int i = 0; i < per_cell; ++i) {
        std::string text = std::string(with ? "zork " : "") +
                           (label == 1 ? "good" : "bad") + " time " +
                           std::to_string(next);
        std::set<std::string> concepts;
        if (with) concepts.insert("c");
        examples.push_back(ex("t" + std::to_string(next++), text, label, concepts));
      }
    }
  }
  return make_dataset(2, std::move(examples), {"c"});
}

std::map<int, int> cell_counts(const PromptSpec& spec, bool with) {
  std::map<int, int> counts;
  for (const auto& e : spec.exemplars)
    if (e.has_concept == with) ++counts[e.label];
  return counts;
}

}  // namespace

TEST_CASE("build_prompt cell counts") {
  Dataset pool = sample_pool();

  SUBCASE("balanced, L=2, h=8: two exemplars per cell") {
    PromptSpec spec = build_prompt(pool, "c", PromptMode::Balanced, 8, {}, 0);
    CHECK(spec.exemplars.size() == 8);
    for (bool with : {true, false}) {
      auto counts = cell_counts(spec, with);
      CHECK(counts[0] == 2);
      CHECK(counts[1] == 2);
    }
  }

  SUBCASE("biased, majority {1}, h=8: 4 with-concept label 1, 4 without label 0") {
    PromptSpec spec = build_prompt(pool, "c", PromptMode::Biased, 8, {1}, 0);
    auto with = cell_counts(spec, true);
    auto without = cell_counts(spec, false);
    CHECK(with[1] == 4);
    CHECK(with[0] == 0);
    CHECK(without[0] == 4);
    CHECK(without[1] == 0);
  }

  SUBCASE("balanced halves stay within one of each other when L does not divide h/2") {
    // L=2, h=6: per side 3 -> one label gets 2, the other 1
    PromptSpec spec = build_prompt(pool, "c", PromptMode::Balanced, 6, {}, 3);
    for (bool with : {true, false}) {
      auto counts = cell_counts(spec, with);
      CHECK(counts[0] + counts[1] == 3);
      CHECK(std::abs(counts[0] - counts[1]) == 1);
    }
  }

  SUBCASE("odd or tiny h rejected") {
    CHECK_THROWS_AS(build_prompt(pool, "c", PromptMode::Balanced, 7, {}, 0),
                    ValidationError);
    CHECK_THROWS_AS(build_prompt(pool, "c", PromptMode::Balanced, 0, {}, 0),
                    ValidationError);
  }

  SUBCASE("insufficient cell is reported") {
    // with-concept label 0 has only 4 examples; ask for 10 per cell
    CHECK_THROWS_WITH_AS(build_prompt(pool, "c", PromptMode::Balanced, 40, {}, 0),
                         doctest::Contains("with-concept, label 0"),
                         ValidationError);
  }

  SUBCASE("deterministic per seed") {
    auto texts = [](const PromptSpec& s) {
      std::vector<std::string> out;
      for (const auto& e : s.exemplars) out.push_back(e.text);
      return out;
    };
    CHECK(texts(build_prompt(pool, "c", PromptMode::Balanced, 8, {}, 4)) ==
          texts(build_prompt(pool, "c", PromptMode::Balanced, 8, {}, 4)));
  }
}

TEST_CASE("render_prompt") {
  PromptSpec spec;
  spec.instruction = "Classify the review.";
  spec.exemplars = {{"loved it", 1, false}, {"hated it", 0, true}};
  spec.test_input = "what a day";

  SUBCASE("binary labels are verbalized") {
    std::string rendered = render_prompt(spec, LabelSpace::binary());
    CHECK(rendered.find("Review: loved it Sentiment label: positive\n") !=
          std::string::npos);
    CHECK(rendered.find("Review: hated it Sentiment label: negative\n") !=
          std::string::npos);
    CHECK(rendered.rfind("Review: what a day Sentiment label:") ==
          rendered.size() - std::string("Review: what a day Sentiment label:").size());
  }

  SUBCASE("numeric label spaces keep digits") {
    spec.exemplars = {{"ok stay", 3, false}};
    std::string rendered = render_prompt(spec, LabelSpace::numeric(5));
    CHECK(rendered.find("Review: ok stay Sentiment label: 3\n") != std::string::npos);
  }

  SUBCASE("verbalizer round trip recovers every exemplar label") {
    Dataset pool = sample_pool();
    PromptSpec built = build_prompt(pool, "c", PromptMode::Balanced, 8, {}, 1);
    for (const auto& exemplar : built.exemplars) {
      std::string line = "Sentiment label: " +
                         pool.label_space.verbalizer.at(exemplar.label);
      CHECK(parse_icl_response(line, pool.label_space) == exemplar.label);
    }
  }
}

TEST_CASE("parse_icl_response") {
  LabelSpace binary = LabelSpace::binary();
  LabelSpace five = LabelSpace::numeric(5);

  CHECK(parse_icl_response("positive", binary) == 1);
  CHECK(parse_icl_response("  Negative.", binary) == 0);
  CHECK(parse_icl_response("Sentiment label: 4", five) == 4);
  CHECK(parse_icl_response("label 2 fits best", five) == 2);
  CHECK_THROWS_WITH_AS(parse_icl_response("I think it is good", binary),
                       doctest::Contains("unparsable response"), ValidationError);
  // out-of-range integers are not labels
  CHECK_THROWS_AS(parse_icl_response("7", five), ValidationError);
}

TEST_CASE("icl_evaluate with the exemplar-majority mock") {
  Dataset pool = sample_pool();
  Dataset test = sample_test(10);  // 40 examples, balanced cells
  std::map<int, std::set<std::string>> label_lexicons{{0, {"bad"}}, {1, {"good"}}};
  auto client = exemplar_majority_client({"zork"}, label_lexicons, pool.label_space);

  SUBCASE("repeats=1 averaged equals the single run") {
    auto result = icl_evaluate(pool, test, "c", PromptMode::Balanced, *client, 1, 0);
    REQUIRE(result.per_repeat.size() == 1);
    CHECK(result.averaged.bias_at_c == result.per_repeat[0].bias_at_c);
    CHECK(result.averaged.acc_at_c == result.per_repeat[0].acc_at_c);
  }

  SUBCASE("biased prompts produce strictly larger |Bias@C| than balanced") {
    auto balanced =
        icl_evaluate(pool, test, "c", PromptMode::Balanced, *client, 3, 0);
    auto biased = icl_evaluate(pool, test, "c", PromptMode::Biased, *client, 3, 0);
    CHECK(std::abs(biased.averaged.bias_at_c) >
          std::abs(balanced.averaged.bias_at_c));
    // the shortcut-copying mock turns a biased prompt into a pure concept rule
    CHECK(biased.averaged.bias_at_c == doctest::Approx(200.0));
    CHECK(balanced.averaged.bias_at_c == doctest::Approx(0.0));
  }

  SUBCASE("deterministic given seed and mock client") {
    auto a = icl_evaluate(pool, test, "c", PromptMode::Biased, *client, 2, 11);
    auto b = icl_evaluate(pool, test, "c", PromptMode::Biased, *client, 2, 11);
    CHECK(a.averaged.bias_at_c == b.averaged.bias_at_c);
    CHECK(a.averaged.acc_at_c == b.averaged.acc_at_c);
    CHECK(a.seeds == b.seeds);
  }

  SUBCASE("unparsable responses are tallied and scored incorrect") {
    auto gibberish = make_function_client(
        [](const std::string&, const DecodingConfig&) { return "hmm"; });
    auto result =
        icl_evaluate(pool, test, "c", PromptMode::Balanced, *gibberish, 2, 0);
    CHECK(result.unparsable == 2 * static_cast<long>(test.size()));
    CHECK(result.averaged.acc_at_c == 0.0);
    CHECK(result.averaged.acc_at_noc == 0.0);
  }

  SUBCASE("repeats must be positive") {
    CHECK_THROWS_AS(icl_evaluate(pool, test, "c", PromptMode::Balanced, *client, 0, 0),
                    ValidationError);
  }
}
