// concept-audit: command-line entry point wiring the caudit modules together.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "caudit/annotate.hpp"
#include "caudit/assoc.hpp"
#include "caudit/corpus.hpp"
#include "caudit/error.hpp"
#include "caudit/icl.hpp"
#include "caudit/llm.hpp"
#include "caudit/metrics.hpp"
#include "caudit/rebalance.hpp"
#include "caudit/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace caudit;

namespace {

constexpr const char* kVersion = "0.1.0";

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

LabelSpace make_label_space(int num_labels, const std::string& positive_csv) {
  LabelSpace ls = num_labels == 2 ? LabelSpace::binary() : LabelSpace::numeric(num_labels);
  if (!positive_csv.empty()) {
    ls.positive_set.clear();
    for (const auto& s : split_csv(positive_csv)) ls.positive_set.insert(std::stoi(s));
    ls.validate();
  }
  return ls;
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const json& config, const std::vector<std::uint64_t>& seeds) {
  json manifest;
  manifest["tool"] = "concept-audit";
  manifest["version"] = kVersion;
  manifest["command"] = command;
  manifest["config"] = config;
  manifest["seeds"] = seeds;
  std::ofstream out(out_dir / "manifest.json");
  if (!out) throw ValidationError("cannot write manifest in " + out_dir.string());
  out << manifest.dump(2) << '\n';
}

fs::path prepare_out_dir(const std::string& out) {
  if (out.empty()) throw ValidationError("--out is required");
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory " + out + ": " + ec.message());
  return dir;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& ex) {
    throw ValidationError(path + ": malformed JSON: " + ex.what());
  }
}

std::map<std::string, std::set<std::string>> load_lexicons(const std::string& path) {
  json j = load_json_file(path);
  if (!j.is_object()) throw ValidationError(path + ": expected an object of concept -> token list");
  std::map<std::string, std::set<std::string>> lexicons;
  for (const auto& [name, tokens] : j.items())
    for (const auto& t : tokens) lexicons[name].insert(t.get<std::string>());
  return lexicons;
}

struct BackendOpts {
  std::string backend = "mock";
  std::string lexicons_path;    // mock annotator / verifier lexicons
  std::string llm_config_path;  // http endpoint + model
  std::string log_llm_path;
};

void add_backend_flags(CLI::App* cmd, BackendOpts& opts) {
  cmd->add_option("--backend", opts.backend, "LLM backend: mock or http")
      ->check(CLI::IsMember({"mock", "http"}));
  cmd->add_option("--lexicons", opts.lexicons_path,
                  "JSON file mapping concept -> token list (mock backend)");
  cmd->add_option("--llm-config", opts.llm_config_path,
                  "JSON file with endpoint and model (http backend)");
  cmd->add_option("--log-llm", opts.log_llm_path,
                  "append request/response bodies to this audit log");
}

std::unique_ptr<LlmClient> make_http_backend(const BackendOpts& opts) {
  if (opts.llm_config_path.empty())
    throw ValidationError("http backend requires --llm-config");
  json j = load_json_file(opts.llm_config_path);
  HttpLlmConfig config;
  config.endpoint = j.at("endpoint").get<std::string>();
  config.model = j.at("model").get<std::string>();
  if (const char* key = std::getenv("CONCEPT_AUDIT_API_KEY")) config.api_key = key;
  config.audit_log_path = opts.log_llm_path;
  return make_http_client(config);
}

double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of empty list");
  std::sort(values.begin(), values.end());
  std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

json report_to_json(const BiasReport& r) {
  return json{{"concept", r.concept_name},
              {"bias_at_c", r.bias_at_c},
              {"acc_at_c", r.acc_at_c},
              {"acc_at_noc", r.acc_at_noc},
              {"with_subset_per_label", r.with_subset_per_label},
              {"without_subset_per_label", r.without_subset_per_label},
              {"with_group_size", r.with_group_size},
              {"without_group_size", r.without_group_size},
              {"seed", r.seed}};
}

// ---------------------------------------------------------------------------
// subcommand option bundles

struct DatasetOpts {
  std::string dataset_path;
  std::string concepts_csv;
  int num_labels = 2;
  std::string positive_csv;
  std::string out;

  Dataset load() const {
    std::set<std::string> vocabulary;
    for (const auto& c : split_csv(concepts_csv)) vocabulary.insert(c);
    return load_dataset(dataset_path, make_label_space(num_labels, positive_csv),
                        vocabulary);
  }
};

void add_dataset_flags(CLI::App* cmd, DatasetOpts& opts, bool need_dataset = true) {
  auto* ds = cmd->add_option("--dataset", opts.dataset_path, "input dataset (JSONL)");
  if (need_dataset) ds->required();
  cmd->add_option("--concepts", opts.concepts_csv,
                  "comma-separated concept vocabulary");
  cmd->add_option("--num-labels", opts.num_labels, "label space size")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--positive", opts.positive_csv,
                  "comma-separated positive label set (default: upper half)");
  cmd->add_option("--out", opts.out, "output directory")->required();
}

json dataset_config_json(const DatasetOpts& opts) {
  return json{{"dataset", opts.dataset_path},
              {"concepts", split_csv(opts.concepts_csv)},
              {"num_labels", opts.num_labels},
              {"positive", opts.positive_csv}};
}

// ---------------------------------------------------------------------------

void run_stats(const DatasetOpts& opts) {
  Dataset ds = opts.load();
  fs::path out_dir = prepare_out_dir(opts.out);

  json stats;
  stats["n_examples"] = ds.size();
  std::vector<long> label_counts(ds.label_space.size, 0);
  for (const auto& e : ds.examples) ++label_counts[e.label];
  stats["label_counts"] = label_counts;
  json per_concept = json::object();
  for (const auto& c : ds.concept_vocabulary)
    per_concept[c] = concept_label_distribution(ds, c);
  stats["concept_label_counts"] = per_concept;

  std::ofstream out(out_dir / "stats.json");
  out << stats.dump(2) << '\n';
  write_manifest(out_dir, "stats", dataset_config_json(opts), {});
  std::cout << "stats: " << ds.size() << " examples -> "
            << (out_dir / "stats.json").string() << "\n";
}

struct AnnotateOpts {
  DatasetOpts data;
  BackendOpts backend;
  std::string demos_path;
  std::string dataset_name = "review";
  int batch_size = 5;
  int max_parallel = 1;
  double temperature = 0.7;
  bool keep_agreed = false;
};

void run_annotate(const AnnotateOpts& opts) {
  Dataset ds = opts.data.load();
  fs::path out_dir = prepare_out_dir(opts.data.out);

  if (opts.demos_path.empty())
    throw ValidationError("annotate requires --demos (five demonstration pairs)");
  AnnotationPrompt prompt;
  prompt.dataset_name = opts.dataset_name;
  prompt.candidate_concepts = split_csv(opts.data.concepts_csv);
  for (const auto& d : load_json_file(opts.demos_path)) {
    std::set<std::string> concepts;
    for (const auto& c : d.at("concepts")) concepts.insert(c.get<std::string>());
    prompt.demonstrations.emplace_back(d.at("text").get<std::string>(), concepts);
  }
  prompt.validate();

  std::unique_ptr<LlmClient> client;
  if (opts.backend.backend == "mock") {
    if (opts.backend.lexicons_path.empty())
      throw ValidationError("mock backend requires --lexicons");
    client = mock_annotator(load_lexicons(opts.backend.lexicons_path));
  } else {
    client = make_http_backend(opts.backend);
  }

  AnnotateOptions options;
  options.batch_size = opts.batch_size;
  options.max_parallel = opts.max_parallel;
  options.temperature = opts.temperature;
  options.keep_agreed_concepts = opts.keep_agreed;

  auto [annotated, results] = annotate_dataset(ds, prompt, *client, options);
  save_dataset((out_dir / "annotated.jsonl").string(), annotated);
  std::ofstream res(out_dir / "annotation_results.jsonl");
  for (const auto& r : results)
    res << json{{"example_id", r.example_id},
                {"run_a", r.run_a},
                {"run_b", r.run_b},
                {"consistent", r.consistent},
                {"kept", r.kept}}
               .dump()
        << '\n';

  json config = dataset_config_json(opts.data);
  config["backend"] = opts.backend.backend;
  config["demos"] = opts.demos_path;
  config["dataset_name"] = opts.dataset_name;
  config["batch_size"] = opts.batch_size;
  config["max_parallel"] = opts.max_parallel;
  config["temperature"] = opts.temperature;
  config["keep_agreed_concepts"] = opts.keep_agreed;
  write_manifest(out_dir, "annotate", config, {});
  std::cout << "annotate: kept " << annotated.size() << " of " << ds.size()
            << " examples\n";
}

struct MeasureOpts {
  DatasetOpts data;
  std::string predictions_path;
  std::string measure_concepts_csv;
  std::uint64_t seed = 0;
};

void run_measure(const MeasureOpts& opts) {
  Dataset ds = opts.data.load();
  fs::path out_dir = prepare_out_dir(opts.data.out);
  auto predictions = load_predictions(opts.predictions_path, ds);
  std::vector<std::string> concepts = split_csv(
      opts.measure_concepts_csv.empty() ? opts.data.concepts_csv
                                        : opts.measure_concepts_csv);
  if (concepts.empty()) throw ValidationError("no concepts to measure");

  auto reports = measure(ds, predictions, concepts, opts.seed);
  std::ofstream out(out_dir / "report.jsonl");
  std::ofstream table(out_dir / "report.txt");
  table << std::fixed << std::setprecision(2);
  table << "concept            Bias@C   Acc@C   Acc@NoC\n";
  for (const auto& r : reports) {
    out << report_to_json(r).dump() << '\n';
    table << std::left << std::setw(18) << r.concept_name << std::right
          << std::setw(8) << r.bias_at_c << std::setw(8) << r.acc_at_c
          << std::setw(10) << r.acc_at_noc << '\n';
  }
  table << "overall accuracy: " << 100.0 * overall_accuracy(ds, predictions) << "\n";

  json config = dataset_config_json(opts.data);
  config["predictions"] = opts.predictions_path;
  config["measure_concepts"] = concepts;
  config["seed"] = opts.seed;
  write_manifest(out_dir, "measure", config, {opts.seed});
  for (const auto& r : reports)
    std::cout << "measure: " << r.concept_name << " Bias@C=" << std::fixed
              << std::setprecision(2) << r.bias_at_c << "\n";
}

struct BiasedOpts {
  DatasetOpts data;
  std::string concept_name;
  std::string keep = "majority";
};

void run_construct_biased(const BiasedOpts& opts) {
  Dataset ds = opts.data.load();
  fs::path out_dir = prepare_out_dir(opts.data.out);

  std::set<int> keep_labels;
  if (opts.keep == "majority") {
    keep_labels = majority_keep_labels(ds, opts.concept_name);
  } else if (opts.keep == "pos") {
    keep_labels = ds.label_space.positive_set;
  } else if (opts.keep == "neg") {
    for (int l = 0; l < ds.label_space.size; ++l)
      if (!ds.label_space.positive_set.count(l)) keep_labels.insert(l);
  } else {
    for (const auto& s : split_csv(opts.keep)) keep_labels.insert(std::stoi(s));
  }

  Dataset biased = construct_biased(ds, opts.concept_name, keep_labels);
  save_dataset((out_dir / "biased.jsonl").string(), biased);

  json config = dataset_config_json(opts.data);
  config["concept"] = opts.concept_name;
  config["keep"] = opts.keep;
  config["keep_labels"] = keep_labels;
  write_manifest(out_dir, "construct-biased", config, {});
  std::cout << "construct-biased: " << biased.size() << " of " << ds.size()
            << " examples kept\n";
}

struct RebalanceOpts {
  DatasetOpts data;
  BackendOpts backend;
  std::string mode;  // down | up | mask
  std::string concept_name;
  std::uint64_t seed = 0;
  int k = 10;
  long min_doc_freq = 3;
  std::string mask_token = "[MASK]";
  std::string injection_prompt_path;
  std::string concept_sentences_path;
};

void run_rebalance(const RebalanceOpts& opts) {
  Dataset ds = opts.data.load();
  fs::path out_dir = prepare_out_dir(opts.data.out);

  Dataset result;
  if (opts.mode == "down") {
    result = downsample_balance(ds, opts.concept_name, opts.seed);
  } else if (opts.mode == "up") {
    if (opts.injection_prompt_path.empty())
      throw ValidationError("rebalance up requires --injection-prompt");
    json j = load_json_file(opts.injection_prompt_path);
    InjectionPrompt prompt;
    prompt.concept_name = opts.concept_name;
    for (const auto& t : j.at("with_concept"))
      prompt.with_concept_exemplars.push_back(t.get<std::string>());
    for (const auto& t : j.at("without_concept"))
      prompt.without_concept_exemplars.push_back(t.get<std::string>());
    prompt.validate();

    std::unique_ptr<LlmClient> injector;
    if (opts.backend.backend == "mock") {
      if (opts.concept_sentences_path.empty())
        throw ValidationError("mock backend requires --concept-sentences");
      std::map<std::string, std::string> sentences;
      const json sentences_json = load_json_file(opts.concept_sentences_path);
      for (const auto& [name, sentence] : sentences_json.items())
        sentences[name] = sentence.get<std::string>();
      injector = mock_injector(sentences);
    } else {
      injector = make_http_backend(opts.backend);
    }

    ConceptChecker verifier = nullptr;
    if (!opts.backend.lexicons_path.empty()) {
      auto lexicons = load_lexicons(opts.backend.lexicons_path);
      verifier = [lexicons](const std::string& text, const std::string& name) {
        auto it = lexicons.find(name);
        if (it == lexicons.end()) return false;
        for (const auto& token : tokenize(text))
          if (it->second.count(token)) return true;
        return false;
      };
    }
    result = upsample_balance(ds, opts.concept_name, *injector, prompt, opts.seed,
                              verifier);
  } else if (opts.mode == "mask") {
    PmiTable table = pmi_table(ds, opts.concept_name, opts.min_doc_freq);
    result = mask_dataset(ds, opts.concept_name, table, opts.k, opts.mask_token);
  } else {
    throw ValidationError("unknown rebalance mode \"" + opts.mode + "\"");
  }
  save_dataset((out_dir / "rebalanced.jsonl").string(), result);

  json config = dataset_config_json(opts.data);
  config["mode"] = opts.mode;
  config["concept"] = opts.concept_name;
  config["seed"] = opts.seed;
  config["k"] = opts.k;
  config["min_doc_freq"] = opts.min_doc_freq;
  config["mask_token"] = opts.mask_token;
  write_manifest(out_dir, "rebalance", config, {opts.seed});
  std::cout << "rebalance " << opts.mode << ": " << result.size() << " examples -> "
            << (out_dir / "rebalanced.jsonl").string() << "\n";
}

struct PmiOpts {
  DatasetOpts data;
  std::string concept_name;
  int top_k = 10;
  long min_doc_freq = 3;
  bool exclude_special = false;
};

void run_pmi(const PmiOpts& opts) {
  Dataset ds = opts.data.load();
  fs::path out_dir = prepare_out_dir(opts.data.out);
  PmiTable table = pmi_table(ds, opts.concept_name, opts.min_doc_freq);
  std::ofstream out(out_dir / "pmi.jsonl");
  for (const auto& e : table.entries)
    out << json{{"token", e.token},
                {"pmi", e.pmi},
                {"doc_freq", e.doc_freq_token},
                {"joint_doc_freq", e.doc_freq_joint}}
               .dump()
        << '\n';
  auto top = top_associated_tokens(table, opts.top_k, opts.exclude_special);
  std::ofstream top_out(out_dir / "top_tokens.json");
  top_out << json(top).dump(2) << '\n';

  json config = dataset_config_json(opts.data);
  config["concept"] = opts.concept_name;
  config["top_k"] = opts.top_k;
  config["min_doc_freq"] = opts.min_doc_freq;
  config["exclude_special"] = opts.exclude_special;
  write_manifest(out_dir, "pmi", config, {});
  std::cout << "pmi: " << table.entries.size() << " tokens, top " << top.size()
            << " written\n";
}

struct ClusterOpts {
  std::string embeddings_path;
  int k = 0;
  std::string out;
};

void run_cluster(const ClusterOpts& opts) {
  auto embeddings = load_embeddings(opts.embeddings_path);
  fs::path out_dir = prepare_out_dir(opts.out);
  Dendrogram d = hierarchical_cluster(embeddings);

  json merges = json::array();
  for (const auto& m : d.merges)
    merges.push_back({{"cluster_a", m.cluster_a},
                      {"cluster_b", m.cluster_b},
                      {"distance", m.distance}});
  std::ofstream out(out_dir / "dendrogram.json");
  out << json{{"tokens", d.tokens}, {"merges", merges}, {"leaf_order", d.leaf_order}}
             .dump(2)
      << '\n';

  if (opts.k > 0) {
    auto clusters = cut_dendrogram(d, opts.k);
    json named = json::array();
    for (const auto& cluster : clusters) {
      json members = json::array();
      for (int i : cluster) members.push_back(d.tokens[i]);
      named.push_back(members);
    }
    std::ofstream cut(out_dir / "clusters.json");
    cut << named.dump(2) << '\n';
  }
  write_manifest(out_dir, "cluster",
                 json{{"embeddings", opts.embeddings_path}, {"k", opts.k}}, {});
  std::cout << "cluster: " << d.tokens.size() << " tokens, "
            << d.merges.size() << " merges\n";
}

struct IclOpts {
  DatasetOpts data;  // --dataset is the exemplar pool
  BackendOpts backend;
  std::string test_path;
  std::string concept_name;
  std::string mode = "balanced";
  int h = 8;
  int repeats = 3;
  std::uint64_t seed = 0;
  int max_parallel = 1;
  std::string label_lexicons_path;
};

void run_icl_eval(const IclOpts& opts) {
  Dataset pool = opts.data.load();
  std::set<std::string> vocabulary;
  for (const auto& c : split_csv(opts.data.concepts_csv)) vocabulary.insert(c);
  Dataset test = load_dataset(
      opts.test_path, make_label_space(opts.data.num_labels, opts.data.positive_csv),
      vocabulary);
  fs::path out_dir = prepare_out_dir(opts.data.out);

  std::unique_ptr<LlmClient> client;
  if (opts.backend.backend == "mock") {
    if (opts.backend.lexicons_path.empty() || opts.label_lexicons_path.empty())
      throw ValidationError("mock backend requires --lexicons and --label-lexicons");
    auto concept_lexicons = load_lexicons(opts.backend.lexicons_path);
    auto it = concept_lexicons.find(opts.concept_name);
    if (it == concept_lexicons.end())
      throw ValidationError("no lexicon for concept \"" + opts.concept_name + "\"");
    std::map<int, std::set<std::string>> label_lexicons;
    const json label_lexicons_json = load_json_file(opts.label_lexicons_path);
    for (const auto& [label, tokens] : label_lexicons_json.items()) {
      for (const auto& t : tokens)
        label_lexicons[std::stoi(label)].insert(t.get<std::string>());
    }
    client = exemplar_majority_client(it->second, label_lexicons, pool.label_space);
  } else {
    client = make_http_backend(opts.backend);
  }

  IclRunResult result =
      icl_evaluate(pool, test, opts.concept_name, prompt_mode_from_string(opts.mode),
                   *client, opts.repeats, opts.seed, opts.h, opts.max_parallel);

  std::ofstream out(out_dir / "icl.jsonl");
  for (std::size_t r = 0; r < result.per_repeat.size(); ++r) {
    json row = report_to_json(result.per_repeat[r]);
    row["repeat"] = r;
    out << row.dump() << '\n';
  }
  json averaged = report_to_json(result.averaged);
  averaged["repeat"] = "averaged";
  averaged["unparsable"] = result.unparsable;
  out << averaged.dump() << '\n';

  json config = dataset_config_json(opts.data);
  config["test"] = opts.test_path;
  config["concept"] = opts.concept_name;
  config["mode"] = opts.mode;
  config["h"] = opts.h;
  config["repeats"] = opts.repeats;
  config["seed"] = opts.seed;
  write_manifest(out_dir, "icl-eval", config, result.seeds);
  std::cout << "icl-eval: averaged Bias@C=" << std::fixed << std::setprecision(2)
            << result.averaged.bias_at_c << " over " << opts.repeats
            << " repeats\n";
}

struct SynthOpts {
  std::string rhos_csv = "0.5,0.7,0.9,1.0";
  int num_seeds = 5;
  std::string mitigation = "none";
  int n_train = 5000;
  int n_test = 2000;
  int num_labels = 2;
  double sentiment_noise = 0.3;
  bool minority_positive = false;
  std::string out;
};

void run_synth_e2e(const SynthOpts& opts) {
  fs::path out_dir = prepare_out_dir(opts.out);
  std::vector<double> rhos;
  for (const auto& s : split_csv(opts.rhos_csv)) rhos.push_back(std::stod(s));
  if (rhos.empty()) throw ValidationError("--rhos must list at least one value");
  if (opts.num_seeds < 1) throw ValidationError("--seeds must be >= 1");
  std::vector<std::uint64_t> seeds;
  for (int s = 0; s < opts.num_seeds; ++s) seeds.push_back(s);

  SynthConfig base;
  base.n_train = opts.n_train;
  base.n_test = opts.n_test;
  base.num_labels = opts.num_labels;
  base.sentiment_noise = opts.sentiment_noise;
  base.majority_positive = !opts.minority_positive;
  base.lexicons = SynthLexicons::defaults(opts.num_labels);
  base.validate();

  auto rows = bias_sweep(base, rhos, seeds, mitigation_from_string(opts.mitigation));
  std::ofstream out(out_dir / "sweep.jsonl");
  for (const auto& r : rows)
    out << json{{"rho", r.rho},
                {"seed", r.seed},
                {"bias_at_c", r.bias_at_c},
                {"acc_at_c", r.acc_at_c},
                {"acc_at_noc", r.acc_at_noc},
                {"test_accuracy", r.test_accuracy},
                {"mitigation", r.mitigation}}
               .dump()
        << '\n';

  std::ofstream summary(out_dir / "summary.txt");
  summary << std::fixed << std::setprecision(2);
  summary << "mitigation: " << opts.mitigation << ", seeds per rho: "
          << opts.num_seeds << "\n";
  summary << "rho     median Bias@C   median Acc@C   median Acc@NoC\n";
  for (double rho : rhos) {
    std::vector<double> bias, acc_c, acc_noc;
    for (const auto& r : rows) {
      if (r.rho != rho) continue;
      bias.push_back(r.bias_at_c);
      acc_c.push_back(r.acc_at_c);
      acc_noc.push_back(r.acc_at_noc);
    }
    summary << std::left << std::setw(8) << rho << std::right << std::setw(14)
            << median(bias) << std::setw(15) << median(acc_c) << std::setw(17)
            << median(acc_noc) << '\n';
  }

  json config{{"rhos", rhos},
              {"num_seeds", opts.num_seeds},
              {"mitigation", opts.mitigation},
              {"n_train", opts.n_train},
              {"n_test", opts.n_test},
              {"num_labels", opts.num_labels},
              {"sentiment_noise", opts.sentiment_noise},
              {"majority_positive", !opts.minority_positive}};
  write_manifest(out_dir, "synth-e2e", config, seeds);
  std::cout << "synth-e2e: " << rows.size() << " sweep rows -> "
            << (out_dir / "sweep.jsonl").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"concept-audit: measure and mitigate concept-level spurious "
               "correlations in text classifiers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("concept-audit ") + kVersion);

  auto stats = std::make_shared<DatasetOpts>();
  auto* stats_cmd = app.add_subcommand("stats", "dataset summary statistics");
  add_dataset_flags(stats_cmd, *stats);
  stats_cmd->callback([stats] { run_stats(*stats); });

  auto annotate = std::make_shared<AnnotateOpts>();
  auto* annotate_cmd =
      app.add_subcommand("annotate", "concept-annotate a dataset via an LLM");
  add_dataset_flags(annotate_cmd, annotate->data);
  add_backend_flags(annotate_cmd, annotate->backend);
  annotate_cmd->add_option("--demos", annotate->demos_path,
                           "JSON file with five demonstration {text, concepts} pairs");
  annotate_cmd->add_option("--dataset-name", annotate->dataset_name,
                           "dataset name used in the prompt");
  annotate_cmd->add_option("--batch-size", annotate->batch_size, "reviews per prompt");
  annotate_cmd->add_option("--max-parallel", annotate->max_parallel,
                           "concurrent LLM requests");
  annotate_cmd->add_option("--temperature", annotate->temperature,
                           "sampling temperature for both runs");
  annotate_cmd->add_flag("--keep-agreed", annotate->keep_agreed,
                         "keep disagreeing examples with intersected concepts");
  annotate_cmd->callback([annotate] { run_annotate(*annotate); });

  auto measure_opts = std::make_shared<MeasureOpts>();
  auto* measure_cmd =
      app.add_subcommand("measure", "compute Bias@C / Acc@C / Acc@NoC per concept");
  add_dataset_flags(measure_cmd, measure_opts->data);
  measure_cmd->add_option("--predictions", measure_opts->predictions_path,
                          "predictions JSONL")->required();
  measure_cmd->add_option("--measure-concepts", measure_opts->measure_concepts_csv,
                          "concepts to report (default: the whole vocabulary)");
  measure_cmd->add_option("--seed", measure_opts->seed, "balanced-subset seed");
  measure_cmd->callback([measure_opts] { run_measure(*measure_opts); });

  auto biased = std::make_shared<BiasedOpts>();
  auto* biased_cmd =
      app.add_subcommand("construct-biased", "build a concept-biased training split");
  add_dataset_flags(biased_cmd, biased->data);
  biased_cmd->add_option("--concept", biased->concept_name, "target concept")
      ->required();
  biased_cmd->add_option("--keep", biased->keep,
                         "labels to keep in the with-concept group: majority, pos, "
                         "neg, or a comma list");
  biased_cmd->callback([biased] { run_construct_biased(*biased); });

  auto rebalance = std::make_shared<RebalanceOpts>();
  auto* rebalance_cmd =
      app.add_subcommand("rebalance", "mitigate a concept-label imbalance");
  rebalance_cmd->add_option("mode", rebalance->mode, "down, up, or mask")->required();
  add_dataset_flags(rebalance_cmd, rebalance->data);
  add_backend_flags(rebalance_cmd, rebalance->backend);
  rebalance_cmd->add_option("--concept", rebalance->concept_name, "target concept")
      ->required();
  rebalance_cmd->add_option("--seed", rebalance->seed, "sampling seed");
  rebalance_cmd->add_option("--k", rebalance->k, "tokens to mask (mask mode)");
  rebalance_cmd->add_option("--min-doc-freq", rebalance->min_doc_freq,
                            "PMI frequency floor (mask mode)");
  rebalance_cmd->add_option("--mask-token", rebalance->mask_token, "mask placeholder");
  rebalance_cmd->add_option("--injection-prompt", rebalance->injection_prompt_path,
                            "JSON file with with_concept/without_concept exemplars "
                            "(up mode)");
  rebalance_cmd->add_option("--concept-sentences", rebalance->concept_sentences_path,
                            "JSON map concept -> sentence for the mock injector");
  rebalance_cmd->callback([rebalance] { run_rebalance(*rebalance); });

  auto pmi = std::make_shared<PmiOpts>();
  auto* pmi_cmd = app.add_subcommand("pmi", "concept-token PMI association table");
  add_dataset_flags(pmi_cmd, pmi->data);
  pmi_cmd->add_option("--concept", pmi->concept_name, "target concept")->required();
  pmi_cmd->add_option("--top-k", pmi->top_k, "top tokens to export");
  pmi_cmd->add_option("--min-doc-freq", pmi->min_doc_freq, "token frequency floor");
  pmi_cmd->add_flag("--exclude-special", pmi->exclude_special,
                    "drop tokens outside [a-z0-9-]");
  pmi_cmd->callback([pmi] { run_pmi(*pmi); });

  auto cluster = std::make_shared<ClusterOpts>();
  auto* cluster_cmd =
      app.add_subcommand("cluster", "average-linkage clustering of token embeddings");
  cluster_cmd->add_option("--embeddings", cluster->embeddings_path,
                          "token<TAB>floats file")->required();
  cluster_cmd->add_option("--k", cluster->k, "also emit a k-cluster cut");
  cluster_cmd->add_option("--out", cluster->out, "output directory")->required();
  cluster_cmd->callback([cluster] { run_cluster(*cluster); });

  auto icl = std::make_shared<IclOpts>();
  auto* icl_cmd =
      app.add_subcommand("icl-eval", "in-context-learning bias evaluation");
  icl_cmd->set_help_flag("--help", "print this help message and exit");
  add_dataset_flags(icl_cmd, icl->data);
  add_backend_flags(icl_cmd, icl->backend);
  icl_cmd->add_option("--test", icl->test_path, "test split (JSONL)")->required();
  icl_cmd->add_option("--concept", icl->concept_name, "target concept")->required();
  icl_cmd->add_option("--mode", icl->mode, "balanced or biased")
      ->check(CLI::IsMember({"balanced", "biased"}));
  icl_cmd->add_option("--h", icl->h, "exemplars per prompt");
  icl_cmd->add_option("--repeats", icl->repeats, "independent exemplar draws");
  icl_cmd->add_option("--seed", icl->seed, "exemplar-selection seed");
  icl_cmd->add_option("--max-parallel", icl->max_parallel, "concurrent LLM requests");
  icl_cmd->add_option("--label-lexicons", icl->label_lexicons_path,
                      "JSON map label -> token list (mock backend)");
  icl_cmd->callback([icl] { run_icl_eval(*icl); });

  auto synth = std::make_shared<SynthOpts>();
  auto* synth_cmd =
      app.add_subcommand("synth-e2e", "offline synthetic bias sweep");
  synth_cmd->add_option("--rhos", synth->rhos_csv, "comma-separated rho values");
  synth_cmd->add_option("--seeds", synth->num_seeds, "seeds per rho (0..n-1)");
  synth_cmd->add_option("--mitigation", synth->mitigation,
                        "none, down, up, or mask")
      ->check(CLI::IsMember({"none", "down", "up", "mask"}));
  synth_cmd->add_option("--n-train", synth->n_train, "training examples");
  synth_cmd->add_option("--n-test", synth->n_test, "test examples");
  synth_cmd->add_option("--num-labels", synth->num_labels, "label space size");
  synth_cmd->add_option("--sentiment-noise", synth->sentiment_noise,
                        "label-lexicon noise rate");
  synth_cmd->add_flag("--minority-positive", synth->minority_positive,
                      "make the negative side the concept-majority side");
  synth_cmd->add_option("--out", synth->out, "output directory")->required();
  synth_cmd->callback([synth] { run_synth_e2e(*synth); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ExternalServiceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
