#include "caudit/corpus.hpp"

#include <fstream>
#include <unordered_set>

#include <json.hpp>

namespace caudit {

using nlohmann::json;

LabelSpace LabelSpace::binary() {
  LabelSpace ls;
  ls.size = 2;
  ls.verbalizer = {{0, "negative"}, {1, "positive"}};
  ls.positive_set = {1};
  return ls;
}

LabelSpace LabelSpace::numeric(int num_labels) {
  LabelSpace ls;
  ls.size = num_labels;
  for (int l = 0; l < num_labels; ++l) ls.verbalizer[l] = std::to_string(l);
  for (int l = (num_labels + 1) / 2; l < num_labels; ++l) ls.positive_set.insert(l);
  ls.validate();
  return ls;
}

void LabelSpace::validate() const {
  if (size < 2) throw ValidationError("label space must have at least 2 labels");
  std::unordered_set<std::string> seen;
  for (int l = 0; l < size; ++l) {
    auto it = verbalizer.find(l);
    if (it == verbalizer.end())
      throw ValidationError("verbalizer missing label " + std::to_string(l));
    if (!seen.insert(it->second).second)
      throw ValidationError("verbalizer not injective: duplicate \"" + it->second + "\"");
  }
  if (static_cast<int>(verbalizer.size()) != size)
    throw ValidationError("verbalizer maps labels outside 0..L-1");
  if (positive_set.empty() || static_cast<int>(positive_set.size()) >= size)
    throw ValidationError("positive set must be a nonempty proper subset of the labels");
  for (int l : positive_set)
    if (!contains(l))
      throw ValidationError("positive set label " + std::to_string(l) + " out of range");
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Original: return "original";
    case Provenance::Counterfactual: return "counterfactual";
    case Provenance::Masked: return "masked";
  }
  return "original";
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "original") return Provenance::Original;
  if (s == "counterfactual") return Provenance::Counterfactual;
  if (s == "masked") return Provenance::Masked;
  throw ValidationError("unknown provenance \"" + s + "\"");
}

void Dataset::validate() const {
  label_space.validate();
  std::unordered_set<std::string> ids;
  for (const auto& e : examples) {
    if (e.id.empty()) throw ValidationError("example with empty id");
    if (!ids.insert(e.id).second)
      throw ValidationError("duplicate id \"" + e.id + "\"");
    if (e.text.empty())
      throw ValidationError("example \"" + e.id + "\" has empty text");
    if (!label_space.contains(e.label))
      throw ValidationError("example \"" + e.id + "\": label out of range: " +
                            std::to_string(e.label));
    for (const auto& c : e.concepts)
      if (!concept_vocabulary.count(c))
        throw ValidationError("example \"" + e.id + "\": unknown concept name \"" + c + "\"");
  }
}

namespace {

Example parse_example_line(const json& j, const LabelSpace& label_space,
                           const std::set<std::string>& vocabulary,
                           std::size_t line_no) {
  auto fail = [line_no](const std::string& msg) -> ValidationError {
    return ValidationError("line " + std::to_string(line_no) + ": " + msg);
  };
  if (!j.is_object()) throw fail("record is not a JSON object");
  Example e;
  try {
    e.id = j.at("id").get<std::string>();
    e.text = j.at("text").get<std::string>();
    e.label = j.at("label").get<int>();
  } catch (const json::exception& ex) {
    throw fail(std::string("malformed record: ") + ex.what());
  }
  if (!label_space.contains(e.label))
    throw fail("label out of range: " + std::to_string(e.label));
  if (j.contains("concepts")) {
    for (const auto& c : j.at("concepts")) {
      std::string name = c.get<std::string>();
      if (!vocabulary.count(name)) throw fail("unknown concept name \"" + name + "\"");
      e.concepts.insert(name);
    }
  }
  if (j.contains("provenance"))
    e.provenance = provenance_from_string(j.at("provenance").get<std::string>());
  return e;
}

}  // namespace

Dataset load_dataset(const std::string& path, const LabelSpace& label_space,
                     const std::set<std::string>& vocabulary) {
  label_space.validate();
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset file: " + path);

  Dataset ds;
  ds.label_space = label_space;
  ds.concept_vocabulary = vocabulary;

  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& ex) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": malformed JSON: " + ex.what());
    }
    Example e = parse_example_line(j, label_space, vocabulary, line_no);
    if (!ids.insert(e.id).second)
      throw ValidationError("line " + std::to_string(line_no) +
                            ": duplicate id \"" + e.id + "\"");
    ds.examples.push_back(std::move(e));
  }
  ds.validate();
  return ds;
}

void save_dataset(const std::string& path, const Dataset& dataset) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open output file: " + path);
  for (const auto& e : dataset.examples) {
    json j;
    j["id"] = e.id;
    j["text"] = e.text;
    j["label"] = e.label;
    j["concepts"] = e.concepts;
    j["provenance"] = to_string(e.provenance);
    out << j.dump() << '\n';
  }
}

std::vector<PredictionRecord> load_predictions(const std::string& path,
                                               const Dataset& dataset) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open predictions file: " + path);

  std::unordered_set<std::string> known;
  for (const auto& e : dataset.examples) known.insert(e.id);

  std::vector<PredictionRecord> records;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& ex) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": malformed JSON: " + ex.what());
    }
    PredictionRecord r;
    try {
      r.id = j.at("id").get<std::string>();
      r.predicted = j.at("predicted").get<int>();
    } catch (const json::exception& ex) {
      throw ValidationError("line " + std::to_string(line_no) +
                            ": malformed record: " + ex.what());
    }
    if (!known.count(r.id))
      throw ValidationError("line " + std::to_string(line_no) + ": unknown id " + r.id);
    if (!seen.insert(r.id).second)
      throw ValidationError("line " + std::to_string(line_no) +
                            ": duplicate prediction for id " + r.id);
    if (!dataset.label_space.contains(r.predicted))
      throw ValidationError("line " + std::to_string(line_no) +
                            ": predicted label out of range: " +
                            std::to_string(r.predicted));
    records.push_back(std::move(r));
  }
  for (const auto& e : dataset.examples)
    if (!seen.count(e.id))
      throw ValidationError("prediction missing for id " + e.id);
  return records;
}

void save_predictions(const std::string& path,
                      const std::vector<PredictionRecord>& predictions) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open output file: " + path);
  for (const auto& p : predictions)
    out << json{{"id", p.id}, {"predicted", p.predicted}}.dump() << '\n';
}

std::vector<long> concept_label_distribution(const Dataset& dataset,
                                             const std::string& concept_name) {
  if (!dataset.concept_vocabulary.count(concept_name))
    throw ValidationError("unknown concept \"" + concept_name + "\"");
  std::vector<long> counts(dataset.label_space.size, 0);
  for (const auto& e : dataset.examples)
    if (e.has_concept(concept_name)) ++counts[e.label];
  return counts;
}

}  // namespace caudit
