#include <doctest.h>

#include <random>

#include "caudit/metrics.hpp"
#include "helpers.hpp"

using namespace caudit;
using testutil::ex;
using testutil::make_dataset;

namespace {

std::vector<PredictionRecord> perfect_predictions(const Dataset& ds) {
  std::vector<PredictionRecord> preds;
  for (const auto& e : ds.examples) preds.push_back({e.id, e.label});
  return preds;
}

DeltaVector deltas_of(std::vector<double> values) {
  DeltaVector d;
  d.concept_name = "c";
  for (double v : values) d.deltas.emplace_back(v);
  return d;
}

}  // namespace

TEST_CASE("group_accuracies") {
  Dataset ds = make_dataset(2,
                            {ex("a", "x", 1, {"c"}), ex("b", "x", 1, {"c"}),
                             ex("d", "x", 1, {"c"}), ex("e", "x", 1, {"c"}),
                             ex("f", "x", 0), ex("g", "x", 1)},
                            {"c"});

  SUBCASE("all-correct predictions give 1.0 in every defined cell") {
    auto g = group_accuracies(ds, perfect_predictions(ds), "c");
    CHECK(g.with_concept[1].value() == 1.0);
    CHECK(g.without_concept[0].value() == 1.0);
    CHECK(g.without_concept[1].value() == 1.0);
    CHECK_FALSE(g.with_concept[0].defined());
  }

  SUBCASE("3 of 4 correct gives 0.75") {
    auto preds = perfect_predictions(ds);
    preds[0].predicted = 0;  // one with-concept label-1 example goes wrong
    auto g = group_accuracies(ds, preds, "c");
    CHECK(g.with_concept[1].value() == doctest::Approx(0.75).epsilon(1e-15));
  }

  SUBCASE("concept absent everywhere leaves all with-concept cells undefined") {
    Dataset plain = make_dataset(2, {ex("a", "x", 0), ex("b", "x", 1)}, {"c"});
    auto g = group_accuracies(plain, perfect_predictions(plain), "c");
    CHECK_FALSE(g.with_concept[0].defined());
    CHECK_FALSE(g.with_concept[1].defined());
  }
}

TEST_CASE("bias_at_c arithmetic") {
  CHECK(bias_at_c(deltas_of({0.0, 0.0})) == 0.0);
  CHECK(bias_at_c(deltas_of({-0.5, 0.25})) == doctest::Approx(0.75).epsilon(1e-15));
  // ((d1-d0)+(d2-d0)+(d2-d1))/3 = (-0.2 - 0.3 - 0.1)/3
  CHECK(bias_at_c(deltas_of({0.2, 0.0, -0.1})) ==
        doctest::Approx(-0.2).epsilon(1e-12));

  SUBCASE("undefined deltas are an error naming the empty cells") {
    DeltaVector d;
    d.concept_name = "c";
    d.deltas = {std::optional<double>{0.1}, std::nullopt};
    CHECK_THROWS_WITH_AS(bias_at_c(d), doctest::Contains("(c, 1)"),
                         ValidationError);
  }
}

TEST_CASE("balanced_test_subset") {
  std::vector<Example> examples;
  for (int i = 0; i < 10; ++i)
    examples.push_back(ex("p" + std::to_string(i), "x", 1, {"c"}));
  for (int i = 0; i < 4; ++i)
    examples.push_back(ex("n" + std::to_string(i), "x", 0, {"c"}));
  examples.push_back(ex("w0", "x", 0));
  examples.push_back(ex("w1", "x", 1));
  Dataset ds = make_dataset(2, examples, {"c"});

  SUBCASE("min-count rule: [10, 4] becomes 4 + 4") {
    Dataset subset = balanced_test_subset(ds, "c", true, 0);
    CHECK(subset.size() == 8);
    long label0 = 0, label1 = 0;
    for (const auto& e : subset.examples) {
      CHECK(e.has_concept("c"));
      (e.label == 0 ? label0 : label1)++;
    }
    CHECK(label0 == 4);
    CHECK(label1 == 4);
  }

  SUBCASE("already-balanced group is fully retained in original order") {
    Dataset subset = balanced_test_subset(ds, "c", false, 17);
    REQUIRE(subset.size() == 2);
    CHECK(subset.examples[0].id == "w0");
    CHECK(subset.examples[1].id == "w1");
  }

  SUBCASE("deterministic under a fixed seed, different across seeds") {
    auto ids = [](const Dataset& d) {
      std::vector<std::string> out;
      for (const auto& e : d.examples) out.push_back(e.id);
      return out;
    };
    CHECK(ids(balanced_test_subset(ds, "c", true, 42)) ==
          ids(balanced_test_subset(ds, "c", true, 42)));
    bool differs = false;
    for (std::uint64_t seed = 0; seed < 20 && !differs; ++seed)
      differs = ids(balanced_test_subset(ds, "c", true, seed)) !=
                ids(balanced_test_subset(ds, "c", true, 42));
    CHECK(differs);
  }

  SUBCASE("empty label class is an error naming the label") {
    Dataset missing =
        make_dataset(2, {ex("a", "x", 1, {"c"}), ex("b", "x", 0)}, {"c"});
    CHECK_THROWS_WITH_AS(balanced_test_subset(missing, "c", true, 0),
                         doctest::Contains("label 0"), ValidationError);
  }
}

TEST_CASE("robust_accuracy") {
  std::vector<Example> examples;
  for (int i = 0; i < 4; ++i)
    examples.push_back(ex("p" + std::to_string(i), "x", 1, {"c"}));
  for (int i = 0; i < 4; ++i)
    examples.push_back(ex("n" + std::to_string(i), "x", 0, {"c"}));
  examples.push_back(ex("w0", "x", 0));
  examples.push_back(ex("w1", "x", 1));
  Dataset ds = make_dataset(2, examples, {"c"});

  SUBCASE("perfect predictions give (1, 1)") {
    auto [acc_c, acc_noc] = robust_accuracy(ds, perfect_predictions(ds), "c", 0);
    CHECK(acc_c == 1.0);
    CHECK(acc_noc == 1.0);
  }

  SUBCASE("6 of 8 correct on the balanced with-group gives 0.75") {
    auto preds = perfect_predictions(ds);
    preds[0].predicted = 0;  // p0 wrong
    preds[4].predicted = 1;  // n0 wrong
    auto [acc_c, acc_noc] = robust_accuracy(ds, preds, "c", 0);
    CHECK(acc_c == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(acc_noc == 1.0);
  }
}

TEST_CASE("measure") {
  std::mt19937_64 rng(11);

  SUBCASE("unbiased predictions give bias 0") {
    auto inst = testutil::random_instance(rng, 2, 40);
    auto reports = measure(inst.dataset, perfect_predictions(inst.dataset), {"c"}, 0);
    REQUIRE(reports.size() == 1);
    CHECK(reports[0].bias_at_c == 0.0);
    CHECK(reports[0].acc_at_c == 100.0);
    CHECK(reports[0].acc_at_noc == 100.0);
  }

  SUBCASE("report order matches input order and runs are bit-identical") {
    Dataset ds = make_dataset(2,
                              {ex("a", "x", 0, {"c", "d"}), ex("b", "x", 1, {"c"}),
                               ex("e", "x", 0, {"d"}), ex("f", "x", 1, {"d"}),
                               ex("g", "x", 0), ex("h", "x", 1),
                               ex("i", "x", 0, {"c"}), ex("j", "x", 1, {"d"})},
                              {"c", "d"});
    auto preds = perfect_predictions(ds);
    preds[1].predicted = 0;
    auto r1 = measure(ds, preds, {"d", "c"}, 5);
    auto r2 = measure(ds, preds, {"d", "c"}, 5);
    REQUIRE(r1.size() == 2);
    CHECK(r1[0].concept_name == "d");
    CHECK(r1[1].concept_name == "c");
    CHECK(r1[0].bias_at_c == r2[0].bias_at_c);
    CHECK(r1[1].acc_at_c == r2[1].acc_at_c);
  }
}

TEST_CASE("bias matches the brute-force oracle on random instances") {
  std::mt19937_64 rng(2024);
  for (int num_labels : {2, 3, 5}) {
    for (int trial = 0; trial < 50; ++trial) {
      auto inst = testutil::random_instance(rng, num_labels, 150);
      auto g = group_accuracies(inst.dataset, inst.predictions, "c");
      double lib = bias_at_c(delta_vector(g));
      double oracle = testutil::oracle_bias(inst.dataset, inst.predictions, "c");
      CHECK(lib == doctest::Approx(oracle).epsilon(1e-12));
    }
  }
}

TEST_CASE("label reversal negates bias exactly") {
  std::mt19937_64 rng(99);
  for (int num_labels : {2, 3, 5}) {
    for (int trial = 0; trial < 30; ++trial) {
      auto inst = testutil::random_instance(rng, num_labels, 100);
      double forward =
          bias_at_c(delta_vector(group_accuracies(inst.dataset, inst.predictions, "c")));

      Dataset flipped = inst.dataset;
      for (auto& e : flipped.examples) e.label = num_labels - 1 - e.label;
      auto preds = inst.predictions;
      for (auto& p : preds) p.predicted = num_labels - 1 - p.predicted;
      double reversed =
          bias_at_c(delta_vector(group_accuracies(flipped, preds, "c")));
      CHECK(forward == doctest::Approx(-reversed).epsilon(1e-15));
    }
  }
}

TEST_CASE("overall_accuracy") {
  Dataset ds = make_dataset(2, {ex("a", "x", 0), ex("b", "x", 1)}, {});
  std::vector<PredictionRecord> preds{{"a", 0}, {"b", 0}};
  CHECK(overall_accuracy(ds, preds) == doctest::Approx(0.5).epsilon(1e-15));
}
