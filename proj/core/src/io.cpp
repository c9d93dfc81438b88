#include "mmsurrogate/io.hpp"

#include <fstream>
#include <sstream>

namespace mmsurrogate {

using nlohmann::json;

namespace {

// Wraps nlohmann type errors so callers see a ParseError naming the document.
template <typename F>
auto parsing(const char* what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

void check_version(const json& j, const char* what) {
  if (!j.is_object()) throw ParseError(std::string(what) + ": expected a JSON object");
  if (!j.contains("format_version")) {
    throw ParseError(std::string(what) + ": missing \"format_version\"");
  }
  if (!j.at("format_version").is_number_integer() ||
      j.at("format_version").get<int>() != kFormatVersion) {
    throw ParseError(std::string(what) + ": unsupported format_version (expected " +
                     std::to_string(kFormatVersion) + ")");
  }
}

json box_to_json(const Box& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

Box box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw ParseError("box must be an array [x1, y1, x2, y2]");
  return Box{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

std::vector<Box> boxes_from_json(const json& j) {
  if (!j.is_array()) throw ParseError("boxes must be an array");
  std::vector<Box> out;
  out.reserve(j.size());
  for (const auto& b : j) out.push_back(box_from_json(b));
  return out;
}

json parse_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << contents;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

// --- Instance ---------------------------------------------------------------

json to_json(const Instance& inst) {
  json emb = json::array();
  for (std::size_t r = 0; r < inst.embeddings().rows(); ++r) {
    const auto row = inst.embeddings().row(r);
    emb.push_back(json(std::vector<double>(row.begin(), row.end())));
  }
  json boxes = json::array();
  for (const auto& b : inst.boxes()) boxes.push_back(box_to_json(b));
  return json{{"format_version", kFormatVersion},
              {"id", inst.id()},
              {"words", inst.words()},
              {"image", {{"width", inst.image_width()}, {"height", inst.image_height()}}},
              {"boxes", boxes},
              {"embeddings", emb},
              {"gold_findings", inst.gold_findings()}};
}

Instance instance_from_json(const json& j) {
  check_version(j, "instance");
  return parsing("instance", [&] {
    auto boxes = boxes_from_json(j.at("boxes"));
    const auto& emb = j.at("embeddings");
    if (!emb.is_array()) throw ParseError("instance: embeddings must be an array of rows");
    const std::size_t rows = emb.size();
    const std::size_t cols = rows > 0 ? emb[0].size() : 0;
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      if (!emb[r].is_array() || emb[r].size() != cols) {
        throw DimensionError("instance: embedding row " + std::to_string(r) + " has length " +
                             std::to_string(emb[r].size()) + ", expected " +
                             std::to_string(cols));
      }
      for (std::size_t c = 0; c < cols; ++c) m(r, c) = emb[r][c].get<double>();
    }
    std::vector<std::string> gold;
    if (j.contains("gold_findings")) gold = j.at("gold_findings").get<std::vector<std::string>>();
    return Instance::create(j.at("id").get<std::string>(),
                            j.at("words").get<std::vector<std::string>>(),
                            j.at("image").at("width").get<double>(),
                            j.at("image").at("height").get<double>(), std::move(boxes),
                            std::move(m), std::move(gold));
  });
}

Instance load_instance(const std::filesystem::path& path) {
  const json j = parse_json_file(path);
  try {
    return instance_from_json(j);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_instance(const std::filesystem::path& path, const Instance& instance) {
  write_text_file(path, dump_json(to_json(instance)));
}

// --- ExpertAnnotation -------------------------------------------------------

namespace {

json annotation_body(const ExpertAnnotation& a) {
  json boxes = json::array();
  for (const auto& b : a.boxes) boxes.push_back(box_to_json(b));
  return json{{"annotator_id", a.annotator_id},
              {"instance_id", a.instance_id},
              {"finding_context", a.finding_context},
              {"words", a.words},
              {"boxes", boxes}};
}

ExpertAnnotation annotation_body_from_json(const json& j) {
  return parsing("annotation", [&] {
    std::set<std::string> context;
    if (j.contains("finding_context")) {
      context = j.at("finding_context").get<std::set<std::string>>();
    }
    std::vector<std::string> words;
    if (j.contains("words")) words = j.at("words").get<std::vector<std::string>>();
    std::vector<Box> boxes;
    if (j.contains("boxes")) boxes = boxes_from_json(j.at("boxes"));
    return ExpertAnnotation::create(j.at("annotator_id").get<std::string>(),
                                    j.at("instance_id").get<std::string>(), std::move(context),
                                    std::move(words), std::move(boxes));
  });
}

}  // namespace

json to_json(const ExpertAnnotation& a) {
  json j = annotation_body(a);
  j["format_version"] = kFormatVersion;
  return j;
}

ExpertAnnotation annotation_from_json(const json& j) {
  check_version(j, "annotation");
  return annotation_body_from_json(j);
}

std::vector<ExpertAnnotation> load_annotations(const std::filesystem::path& path) {
  const json j = parse_json_file(path);
  std::vector<ExpertAnnotation> out;
  try {
    if (j.is_array()) {
      for (const auto& a : j) out.push_back(annotation_from_json(a));
    } else if (j.is_object() && j.contains("annotations")) {
      check_version(j, "annotation list");
      if (!j.at("annotations").is_array()) throw ParseError("\"annotations\" must be an array");
      for (const auto& a : j.at("annotations")) out.push_back(annotation_body_from_json(a));
    } else {
      out.push_back(annotation_from_json(j));
    }
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return out;
}

void save_annotations(const std::filesystem::path& path,
                      const std::vector<ExpertAnnotation>& annotations) {
  json list = json::array();
  for (const auto& a : annotations) list.push_back(annotation_body(a));
  write_text_file(path, dump_json(json{{"format_version", kFormatVersion}, {"annotations", list}}));
}

// --- Explanation ------------------------------------------------------------

json to_json(const Explanation& e) {
  json words = json::array();
  for (const auto& w : e.word_items) words.push_back({{"word", w.word}, {"score", w.score}});
  json boxes = json::array();
  for (const auto& b : e.box_items) {
    boxes.push_back({{"index", b.index}, {"box", box_to_json(b.box)}, {"score", b.score}});
  }
  const auto& p = e.provenance;
  json prov{{"seed", p.seed},
            {"text_seed", p.text_seed},
            {"visual_seed", p.visual_seed},
            {"samples", p.samples},
            {"p_text", p.p_text},
            {"p_visual", p.p_visual},
            {"kernel_width", p.kernel_width},
            {"ridge_lambda", p.ridge_lambda},
            {"inactivation_strategy", std::string(to_string(p.strategy))},
            {"mean_std_k", p.mean_std_k},
            {"target", std::string(to_string(p.target))},
            {"predictor", p.predictor}};
  json j{{"format_version", kFormatVersion},
         {"instance_id", e.instance_id},
         {"finding", e.finding},
         {"mode", std::string(to_string(e.mode))},
         {"word_items", words},
         {"box_items", boxes},
         {"provenance", prov}};
  j["original_probability"] =
      e.original_probability ? json(*e.original_probability) : json(nullptr);
  return j;
}

Explanation explanation_from_json(const json& j) {
  check_version(j, "explanation");
  Explanation e = parsing("explanation", [&] {
    Explanation e;
    e.instance_id = j.at("instance_id").get<std::string>();
    e.finding = j.at("finding").get<std::string>();
    e.mode = parse_explanation_mode(j.at("mode").get<std::string>());
    for (const auto& w : j.at("word_items")) {
      e.word_items.push_back({w.at("word").get<std::string>(), w.at("score").get<double>()});
    }
    for (const auto& b : j.at("box_items")) {
      e.box_items.push_back({b.at("index").get<std::size_t>(), box_from_json(b.at("box")),
                             b.at("score").get<double>()});
    }
    const auto& p = j.at("provenance");
    e.provenance.seed = p.at("seed").get<std::uint64_t>();
    e.provenance.text_seed = p.value("text_seed", std::uint64_t{0});
    e.provenance.visual_seed = p.value("visual_seed", std::uint64_t{0});
    e.provenance.samples = p.at("samples").get<std::size_t>();
    e.provenance.p_text = p.at("p_text").get<double>();
    e.provenance.p_visual = p.at("p_visual").get<double>();
    e.provenance.kernel_width = p.at("kernel_width").get<double>();
    e.provenance.ridge_lambda = p.at("ridge_lambda").get<double>();
    e.provenance.strategy =
        parse_inactivation_kind(p.at("inactivation_strategy").get<std::string>());
    e.provenance.mean_std_k = p.value("mean_std_k", 2.0);
    e.provenance.target = parse_regression_target(p.value("target", std::string("probability")));
    e.provenance.predictor = p.at("predictor").get<std::string>();
    if (j.contains("original_probability") && !j.at("original_probability").is_null()) {
      e.original_probability = j.at("original_probability").get<double>();
    }
    return e;
  });
  validate_explanation(e);
  return e;
}

Explanation load_explanation(const std::filesystem::path& path) {
  const json j = parse_json_file(path);
  try {
    return explanation_from_json(j);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void save_explanation(const std::filesystem::path& path, const Explanation& explanation) {
  write_text_file(path, dump_json(to_json(explanation)));
}

// --- ExplainerConfig --------------------------------------------------------

json to_json(const ExplainerConfig& c) {
  json j{{"format_version", kFormatVersion},
         {"samples", c.samples},
         {"p_text", c.p_text},
         {"p_visual", c.p_visual},
         {"kernel_width", c.kernel_width},
         {"ridge_lambda", c.ridge_lambda},
         {"k_words", c.k_words},
         {"k_boxes", c.k_boxes},
         {"inactivation_strategy", std::string(to_string(c.inactivation))},
         {"mean_std_k", c.mean_std_k},
         {"seed", c.seed},
         {"target", std::string(to_string(c.target))},
         {"batch_size", c.batch_size},
         {"findings", c.findings}};
  j["score_threshold"] = c.score_threshold ? json(*c.score_threshold) : json(nullptr);
  return j;
}

ExplainerConfig config_from_json(const json& j, ExplainerConfig c) {
  if (!j.is_object()) throw ConfigError({"config must be a JSON object"});
  std::vector<std::string> problems;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "format_version") {
        if (value != kFormatVersion) problems.push_back("unsupported format_version");
      } else if (key == "samples") {
        c.samples = value.get<std::size_t>();
      } else if (key == "p_text") {
        c.p_text = value.get<double>();
      } else if (key == "p_visual") {
        c.p_visual = value.get<double>();
      } else if (key == "kernel_width" || key == "sigma") {
        c.kernel_width = value.get<double>();
      } else if (key == "ridge_lambda" || key == "lambda") {
        c.ridge_lambda = value.get<double>();
      } else if (key == "k_words") {
        c.k_words = value.get<std::size_t>();
      } else if (key == "k_boxes") {
        c.k_boxes = value.get<std::size_t>();
      } else if (key == "inactivation_strategy" || key == "strategy") {
        c.inactivation = parse_inactivation_kind(value.get<std::string>());
      } else if (key == "mean_std_k") {
        c.mean_std_k = value.get<double>();
      } else if (key == "seed") {
        c.seed = value.get<std::uint64_t>();
      } else if (key == "target") {
        c.target = parse_regression_target(value.get<std::string>());
      } else if (key == "batch_size") {
        c.batch_size = value.get<std::size_t>();
      } else if (key == "score_threshold") {
        c.score_threshold =
            value.is_null() ? std::nullopt : std::optional<double>(value.get<double>());
      } else if (key == "findings") {
        c.findings = value.get<std::vector<std::string>>();
      } else {
        problems.push_back("unknown config key '" + key + "'");
      }
    } catch (const json::exception&) {
      problems.push_back("config key '" + key + "' has the wrong type");
    } catch (const ParseError& e) {
      problems.emplace_back(e.what());
    }
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return c;
}

// --- SyntheticLogisticModel -------------------------------------------------

json to_json(const SyntheticLogisticModel& model) {
  json findings = json::object();
  for (const auto& [label, fw] : model.findings) {
    json boxes = json::object();
    for (const auto& [idx, w] : fw.box_weights) boxes[std::to_string(idx)] = w;
    findings[label] = {{"bias", fw.bias}, {"word_weights", fw.word_weights}, {"box_weights", boxes}};
  }
  return json{{"format_version", kFormatVersion}, {"findings", findings}};
}

SyntheticLogisticModel model_from_json(const json& j) {
  check_version(j, "model");
  SyntheticLogisticModel model = parsing("model", [&] {
    SyntheticLogisticModel m;
    for (const auto& [label, fj] : j.at("findings").items()) {
      FindingWeights fw;
      fw.bias = fj.value("bias", 0.0);
      if (fj.contains("word_weights")) {
        for (const auto& [word, w] : fj.at("word_weights").items()) {
          fw.word_weights[normalize_word(word)] = w.get<double>();
        }
      }
      if (fj.contains("box_weights")) {
        for (const auto& [idx, w] : fj.at("box_weights").items()) {
          std::size_t pos = 0;
          unsigned long long parsed = 0;
          try {
            parsed = std::stoull(idx, &pos);
          } catch (const std::exception&) {
            pos = 0;
          }
          if (pos == 0 || pos != idx.size()) {
            throw ParseError("model: box_weights key '" + idx + "' is not an index");
          }
          fw.box_weights[static_cast<std::size_t>(parsed)] = w.get<double>();
        }
      }
      m.findings[label] = std::move(fw);
    }
    return m;
  });
  validate_model(model);
  return model;
}

SyntheticLogisticModel load_model(const std::filesystem::path& path) {
  const json j = parse_json_file(path);
  try {
    return model_from_json(j);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void save_model(const std::filesystem::path& path, const SyntheticLogisticModel& model) {
  write_text_file(path, dump_json(to_json(model)));
}

// --- Reports ----------------------------------------------------------------

json to_json(const SimilarityReport& r) {
  return json{{"instance_id", r.instance_id}, {"finding", r.finding},
              {"text_iou", r.text_iou},       {"image_iou", r.image_iou},
              {"left_source", r.left_source}, {"right_source", r.right_source},
              {"tags", r.tags}};
}

SimilarityReport similarity_report_from_json(const json& j) {
  return parsing("similarity report", [&] {
    SimilarityReport r;
    r.instance_id = j.value("instance_id", std::string());
    r.finding = j.value("finding", std::string());
    r.text_iou = j.at("text_iou").get<double>();
    r.image_iou = j.at("image_iou").get<double>();
    r.left_source = j.value("left_source", std::string());
    r.right_source = j.value("right_source", std::string());
    if (j.contains("tags")) r.tags = j.at("tags").get<std::map<std::string, std::string>>();
    if (!(r.text_iou >= 0.0 && r.text_iou <= 1.0) || !(r.image_iou >= 0.0 && r.image_iou <= 1.0)) {
      throw ValidationError("similarity report: IoU values must lie in [0, 1]");
    }
    return r;
  });
}

json to_json(const AggregateReport& r) {
  return json{{"keys", r.keys},
              {"mean_text_iou", r.mean_text_iou},
              {"mean_image_iou", r.mean_image_iou},
              {"count", r.count}};
}

}  // namespace mmsurrogate
