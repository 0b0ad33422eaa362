#include <doctest.h>

#include <cmath>
#include <random>

#include "caudit/synth.hpp"
#include "helpers.hpp"

using namespace caudit;
using testutil::ex;
using testutil::make_dataset;

namespace {

SynthConfig small_config() {
  SynthConfig config;
  config.lexicons = SynthLexicons::defaults(config.num_labels);
  config.n_train = 600;
  config.n_test = 400;
  return config;
}

// phi coefficient between concept presence and positive label
double phi(const Dataset& ds) {
  double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
  for (const auto& e : ds.examples) {
    bool with = e.has_concept("theme");
    bool pos = ds.label_space.positive_set.count(e.label) > 0;
    (with ? (pos ? n11 : n10) : (pos ? n01 : n00))++;
  }
  double denom = std::sqrt((n11 + n10) * (n01 + n00) * (n11 + n01) * (n10 + n00));
  return (n11 * n00 - n10 * n01) / denom;
}

}  // namespace

TEST_CASE("synth config validation") {
  SynthConfig config = small_config();
  CHECK_NOTHROW(config.validate());

  SUBCASE("rho bounds") {
    config.rho = 0.4;
    CHECK_THROWS_AS(config.validate(), ValidationError);
    config.rho = 1.1;
    CHECK_THROWS_AS(config.validate(), ValidationError);
  }
  SUBCASE("lexicons must be disjoint") {
    config.lexicons.filler_tokens.push_back(config.lexicons.concept_tokens[0]);
    CHECK_THROWS_WITH_AS(config.validate(), doctest::Contains("overlap"),
                         ValidationError);
  }
  SUBCASE("token mix must fit the text length") {
    config.text_length = 5;
    CHECK_THROWS_AS(config.validate(), ValidationError);
  }
}

TEST_CASE("generate") {
  SynthConfig config = small_config();

  SUBCASE("pure function of the config") {
    auto [train1, test1] = generate(config);
    auto [train2, test2] = generate(config);
    REQUIRE(train1.size() == train2.size());
    for (std::size_t i = 0; i < train1.size(); ++i) {
      CHECK(train1.examples[i].id == train2.examples[i].id);
      CHECK(train1.examples[i].text == train2.examples[i].text);
      CHECK(train1.examples[i].label == train2.examples[i].label);
      CHECK(train1.examples[i].concepts == train2.examples[i].concepts);
    }
    CHECK(test1.examples.back().text == test2.examples.back().text);
  }

  SUBCASE("label counts are exactly balanced") {
    auto [train, test] = generate(config);
    long zeros = 0;
    for (const auto& e : train.examples)
      if (e.label == 0) ++zeros;
    CHECK(zeros == config.n_train / 2);
  }

  SUBCASE("concept annotations are truthful about the text") {
    auto [train, test] = generate(config);
    std::set<std::string> lexicon(config.lexicons.concept_tokens.begin(),
                                  config.lexicons.concept_tokens.end());
    for (const Dataset* split : {&train, &test}) {
      for (const auto& e : split->examples) {
        bool has_token = false;
        for (const auto& t : tokenize(e.text))
          if (lexicon.count(t)) has_token = true;
        CHECK(has_token == e.has_concept("theme"));
      }
    }
  }

  SUBCASE("rho=1.0 puts the concept only on majority-side train labels") {
    config.rho = 1.0;
    config.n_train = 2000;
    auto [train, test] = generate(config);
    for (const auto& e : train.examples)
      if (e.has_concept("theme")) CHECK(e.label == 1);
    // every positive example carries it, too (probability one)
    for (const auto& e : train.examples)
      if (e.label == 1) CHECK(e.has_concept("theme"));
  }

  SUBCASE("rho=0.5 leaves train concept and label nearly uncorrelated") {
    config.rho = 0.5;
    config.n_train = 5000;
    auto [train, test] = generate(config);
    CHECK(std::abs(phi(train)) < 0.05);
  }

  SUBCASE("test concept presence is about half per label, independent of rho") {
    config.rho = 1.0;
    config.n_test = 2000;
    auto [train, test] = generate(config);
    for (int label : {0, 1}) {
      long with = 0, total = 0;
      for (const auto& e : test.examples) {
        if (e.label != label) continue;
        ++total;
        if (e.has_concept("theme")) ++with;
      }
      double fraction = static_cast<double>(with) / static_cast<double>(total);
      CHECK(fraction > 0.4);
      CHECK(fraction < 0.6);
    }
  }
}

TEST_CASE("train_classifier") {
  SUBCASE("separable toy problem reaches training accuracy 1.0") {
    std::vector<Example> examples;
    for (int i = 0; i < 40; ++i) {
      int label = i % 2;
      examples.push_back(ex("t" + std::to_string(i),
                            label ? "upbeat cheerful lovely" : "dreary bleak awful",
                            label));
    }
    Dataset train = make_dataset(2, std::move(examples), {});
    LinearModel model = train_classifier(train, {});
    auto preds = predict(model, train);
    CHECK(testutil::oracle_accuracy(train.examples, preds) == 1.0);
  }

  SUBCASE("degenerate single-label training set predicts that label") {
    std::vector<Example> examples;
    for (int i = 0; i < 10; ++i)
      examples.push_back(ex("t" + std::to_string(i), "word" + std::to_string(i), 1));
    Dataset train = make_dataset(2, std::move(examples), {});
    LinearModel model = train_classifier(train, {});
    CHECK(model.predict_label("word3") == 1);
    CHECK(model.predict_label("unseen tokens") == 1);
  }

  SUBCASE("deterministic given the seed") {
    SynthConfig config = small_config();
    auto [train, test] = generate(config);
    LinearModel m1 = train_classifier(train, {});
    LinearModel m2 = train_classifier(train, {});
    CHECK(m1.weights == m2.weights);
    CHECK(m1.bias == m2.bias);
  }

  SUBCASE("empty training set rejected") {
    Dataset empty = make_dataset(2, {}, {});
    CHECK_THROWS_AS(train_classifier(empty, {}), ValidationError);
  }
}

TEST_CASE("predict") {
  Dataset ds = make_dataset(2, {ex("a", "alpha beta", 0), ex("b", "beta", 1)}, {});

  SUBCASE("zero weights predict label 0 everywhere (tie rule)") {
    LinearModel model;
    model.vocabulary = {"alpha", "beta"};
    model.index = {{"alpha", 0}, {"beta", 1}};
    model.weights.assign(2, std::vector<double>(2, 0.0));
    model.bias.assign(2, 0.0);
    auto preds = predict(model, ds);
    REQUIRE(preds.size() == 2);
    CHECK(preds[0].id == "a");
    for (const auto& p : preds) CHECK(p.predicted == 0);
  }

  SUBCASE("one-example dataset yields one matching record") {
    Dataset one = make_dataset(2, {ex("only", "beta", 1)}, {});
    LinearModel model = train_classifier(ds, {});
    auto preds = predict(model, one);
    REQUIRE(preds.size() == 1);
    CHECK(preds[0].id == "only");
  }
}

TEST_CASE("gradient matches central finite differences") {
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> weight(-1.0, 1.0);
  std::uniform_int_distribution<int> label_dist(0, 2);
  std::uniform_int_distribution<int> feature_on(0, 1);

  for (int trial = 0; trial < 5; ++trial) {
    const int num_labels = 3, num_features = 6, num_examples = 10;
    LinearModel model;
    for (int f = 0; f < num_features; ++f)
      model.vocabulary.push_back("f" + std::to_string(f));
    model.weights.assign(num_labels, std::vector<double>(num_features));
    model.bias.assign(num_labels, 0.0);
    for (auto& row : model.weights)
      for (auto& w : row) w = weight(rng);
    for (auto& b : model.bias) b = weight(rng);

    std::vector<std::vector<int>> features(num_examples);
    std::vector<int> labels(num_examples);
    for (int i = 0; i < num_examples; ++i) {
      for (int f = 0; f < num_features; ++f)
        if (feature_on(rng)) features[i].push_back(f);
      labels[i] = label_dist(rng);
    }

    std::vector<std::vector<double>> grad_w;
    std::vector<double> grad_b;
    loss_and_gradient(model, features, labels, &grad_w, &grad_b);

    const double eps = 1e-5;
    auto check = [&](double analytic, double& param) {
      const double saved = param;
      param = saved + eps;
      double up = loss_and_gradient(model, features, labels, nullptr, nullptr);
      param = saved - eps;
      double down = loss_and_gradient(model, features, labels, nullptr, nullptr);
      param = saved;
      double fd = (up - down) / (2 * eps);
      double scale = std::max({1e-6, std::abs(fd), std::abs(analytic)});
      CHECK(std::abs(analytic - fd) / scale < 1e-4);
    };
    for (int l = 0; l < num_labels; ++l) {
      check(grad_b[l], model.bias[l]);
      for (int f = 0; f < num_features; ++f)
        check(grad_w[l][f], model.weights[l][f]);
    }
  }
}

TEST_CASE("bias_sweep") {
  SynthConfig base = small_config();
  std::vector<std::uint64_t> seeds{0, 1};

  SUBCASE("stronger train correlation yields larger measured bias") {
    auto rows = bias_sweep(base, {0.5, 1.0}, seeds, Mitigation::None);
    REQUIRE(rows.size() == 4);
    auto median_at = [&](double rho) {
      std::vector<double> vals;
      for (const auto& r : rows)
        if (r.rho == rho) vals.push_back(r.bias_at_c);
      std::sort(vals.begin(), vals.end());
      return 0.5 * (vals[0] + vals[1]);
    };
    CHECK(median_at(1.0) > median_at(0.5));
    CHECK(median_at(1.0) > 10.0);
    for (const auto& r : rows) CHECK(r.mitigation == "none");
  }

  SUBCASE("flipping the majority side flips the bias sign") {
    SynthConfig flipped = base;
    flipped.majority_positive = false;
    auto pos = bias_sweep(base, {0.9}, seeds, Mitigation::None);
    auto neg = bias_sweep(flipped, {0.9}, seeds, Mitigation::None);
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      CHECK(pos[i].bias_at_c > 0.0);
      CHECK(neg[i].bias_at_c < 0.0);
    }
  }

  SUBCASE("every mitigation runs end to end and reduces rho=1.0 bias") {
    auto none = bias_sweep(base, {1.0}, {0}, Mitigation::None);
    for (Mitigation m : {Mitigation::Down, Mitigation::Up, Mitigation::Mask}) {
      auto rows = bias_sweep(base, {1.0}, {0}, m);
      REQUIRE(rows.size() == 1);
      CHECK(std::abs(rows[0].bias_at_c) < std::abs(none[0].bias_at_c));
      CHECK(rows[0].mitigation == to_string(m));
    }
  }
}
