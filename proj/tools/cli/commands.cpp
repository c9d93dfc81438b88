#include "cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <thread>

#include "CLI11.hpp"
#include "mmsurrogate/eval.hpp"
#include "mmsurrogate/explain.hpp"
#include "mmsurrogate/io.hpp"
#include "mmsurrogate/remote.hpp"
#include "mmsurrogate/render.hpp"
#include "mmsurrogate/rng.hpp"

namespace mmsurrogate::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Thrown inside a command to leave with a specific exit code.
struct Exit {
  int code;
  std::string message;
};

class Logger {
 public:
  Logger(std::ostream& err, int verbosity) : err_(err), verbosity_(verbosity) {}

  void warn(const std::string& m) const { err_ << "warning: " << m << "\n"; }
  void info(const std::string& m) const {
    if (verbosity_ >= 1) err_ << "info: " << m << "\n";
  }
  void debug(const std::string& m) const {
    if (verbosity_ >= 2) err_ << "debug: " << m << "\n";
  }

 private:
  std::ostream& err_;
  int verbosity_;
};

std::size_t default_jobs() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

// Runs f(i) for i in [0, n) on up to `jobs` threads. Callers write into
// index-addressed slots so the merge order is fixed.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& f) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) f(i);
    });
  }
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Expands directories to the files whose names end in one of `suffixes`
// (sorted); plain file arguments pass through.
std::vector<fs::path> expand_inputs(const std::vector<std::string>& args,
                                    std::initializer_list<std::string_view> suffixes) {
  std::vector<fs::path> out;
  for (const auto& a : args) {
    const fs::path p(a);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(p)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (std::any_of(suffixes.begin(), suffixes.end(),
                        [&](std::string_view s) { return ends_with(name, s); })) {
          found.push_back(entry.path());
        }
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else if (fs::exists(p)) {
      out.push_back(p);
    } else {
      throw Exit{kExitInput, "input '" + a + "' does not exist"};
    }
  }
  return out;
}

template <typename F>
auto load_input(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ParseError& e) {
    throw Exit{kExitInput, e.what()};
  } catch (const ValidationError& e) {
    throw Exit{kExitInput, e.what()};
  } catch (const DimensionError& e) {
    throw Exit{kExitInput, e.what()};
  }
}

std::vector<ExpertAnnotation> load_annotation_inputs(const std::vector<std::string>& args) {
  std::vector<ExpertAnnotation> out;
  for (const auto& p : expand_inputs(args, {".annotation.json", ".annotations.json"})) {
    auto list = load_input([&] { return load_annotations(p); });
    out.insert(out.end(), list.begin(), list.end());
  }
  return out;
}

std::vector<Instance> load_instance_inputs(const std::vector<std::string>& args) {
  std::vector<Instance> out;
  for (const auto& p : expand_inputs(args, {".instance.json"})) {
    out.push_back(load_input([&] { return load_instance(p); }));
  }
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string iso_time(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path manifest_path(const fs::path& output) {
  fs::path p = output;
  return p.replace_extension(".manifest.json");
}

struct Manifest {
  std::string command;
  std::vector<std::string> args;
  json config = json::object();
  json inputs = json::object();
  std::vector<std::string> outputs;
  std::optional<std::uint64_t> seed;
  std::chrono::system_clock::time_point started = std::chrono::system_clock::now();
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  void write(const fs::path& path) const {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json j{{"format_version", kFormatVersion},
           {"command", command},
           {"args", args},
           {"config", config},
           {"inputs", inputs},
           {"outputs", outputs},
           {"started_at", iso_time(started)},
           {"wall_clock_seconds", secs},
           {"engine_version", MMSURROGATE_VERSION}};
    j["seed"] = seed ? json(*seed) : json(nullptr);
    write_text_file(path, dump_json(j));
  }
};

void emit(const std::string& text, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << text;
  } else {
    write_text_file(out_path, text);
  }
}

json reports_json(const std::vector<AggregateReport>& reports) {
  json a = json::array();
  for (const auto& r : reports) a.push_back(to_json(r));
  return a;
}

json reports_json(const std::vector<SimilarityReport>& reports) {
  json a = json::array();
  for (const auto& r : reports) a.push_back(to_json(r));
  return a;
}

void check_format(const std::string& format) {
  if (format != "json" && format != "table") {
    throw Exit{kExitConfig, "--format must be json or table"};
  }
}

// --- explain ----------------------------------------------------------------

struct ExplainArgs {
  std::string instance;
  std::string finding;
  std::string mode = "separate";
  std::string predictor;
  std::string config;
  std::string out;
  std::size_t samples = 0;
  double p_text = 0, p_visual = 0, sigma = 0, lambda = 0, mean_std_k = 0, threshold = 0;
  double timeout = 60.0;
  std::size_t k_words = 0, k_boxes = 0, batch_size = 0;
  std::string strategy, target;
  std::uint64_t seed = 0;
  std::string findings;
};

struct ExplainOptions {
  CLI::Option* samples;
  CLI::Option* p_text;
  CLI::Option* p_visual;
  CLI::Option* sigma;
  CLI::Option* lambda;
  CLI::Option* k_words;
  CLI::Option* k_boxes;
  CLI::Option* strategy;
  CLI::Option* mean_std_k;
  CLI::Option* seed;
  CLI::Option* target;
  CLI::Option* batch_size;
  CLI::Option* threshold;
  CLI::Option* findings;
};

int cmd_explain(const ExplainArgs& a, const ExplainOptions& o, const std::vector<std::string>& argv,
                const Logger& log, std::ostream& out) {
  Manifest manifest;
  manifest.command = "explain";
  manifest.args = argv;

  // defaults < --config file < flags
  ExplainerConfig config;
  try {
    if (!a.config.empty()) {
      const std::string text = load_input([&] { return read_text_file(a.config); });
      json j;
      try {
        j = json::parse(text);
      } catch (const json::parse_error& e) {
        throw Exit{kExitConfig, a.config + ": " + e.what()};
      }
      config = config_from_json(j, config);
    }
    if (o.samples->count()) config.samples = a.samples;
    if (o.p_text->count()) config.p_text = a.p_text;
    if (o.p_visual->count()) config.p_visual = a.p_visual;
    if (o.sigma->count()) config.kernel_width = a.sigma;
    if (o.lambda->count()) config.ridge_lambda = a.lambda;
    if (o.k_words->count()) config.k_words = a.k_words;
    if (o.k_boxes->count()) config.k_boxes = a.k_boxes;
    if (o.strategy->count()) config.inactivation = parse_inactivation_kind(a.strategy);
    if (o.mean_std_k->count()) config.mean_std_k = a.mean_std_k;
    if (o.seed->count()) config.seed = a.seed;
    if (o.target->count()) config.target = parse_regression_target(a.target);
    if (o.batch_size->count()) config.batch_size = a.batch_size;
    if (o.threshold->count()) config.score_threshold = a.threshold;
    if (o.findings->count()) config.findings = split_list(a.findings);
    config = validate_config(config);
  } catch (const ConfigError& e) {
    throw Exit{kExitConfig, e.what()};
  } catch (const ParseError& e) {
    throw Exit{kExitConfig, e.what()};
  }
  if (std::find(config.findings.begin(), config.findings.end(), a.finding) == config.findings.end()) {
    std::string labels;
    for (const auto& l : config.findings) labels += (labels.empty() ? "" : ", ") + l;
    throw Exit{kExitConfig, "unknown finding '" + a.finding + "'; known findings: " + labels};
  }
  if (a.mode != "separate" && a.mode != "simultaneous") {
    throw Exit{kExitConfig, "--mode must be separate or simultaneous"};
  }
  std::string predictor_spec = a.predictor;
  if (predictor_spec.empty()) {
    if (const char* env = std::getenv(kPredictorEnv)) predictor_spec = env;
  }
  if (predictor_spec.empty()) {
    throw Exit{kExitConfig, std::string("no predictor: pass --predictor or set ") + kPredictorEnv};
  }
  if (!(a.timeout > 0.0)) throw Exit{kExitConfig, "--timeout must be > 0"};

  const Instance instance = load_input([&] { return load_instance(a.instance); });
  log.info("loaded instance '" + instance.id() + "' (" + std::to_string(instance.unique_words().size()) +
           " unique words, " + std::to_string(instance.box_count()) + " boxes)");

  RemoteOptions remote;
  remote.batch_size = config.batch_size;
  remote.timeout = std::chrono::milliseconds(static_cast<long long>(a.timeout * 1000.0));

  Explanation explanation;
  try {
    std::unique_ptr<Predictor> predictor;
    try {
      predictor = open_predictor(predictor_spec, remote);
    } catch (const ConfigError& e) {
      throw Exit{kExitConfig, e.what()};
    } catch (const Error& e) {
      throw Exit{kExitPredictor, std::string("cannot open predictor: ") + e.what()};
    }
    log.info("predictor " + predictor->identifier() + ", mode " + a.mode);
    explanation = a.mode == "separate" ? explain_separate(instance, a.finding, *predictor, config)
                                       : explain_simultaneous(instance, a.finding, *predictor, config);
  } catch (const PredictorError& e) {
    throw Exit{kExitPredictor, e.what()};
  } catch (const DimensionError& e) {
    throw Exit{kExitPredictor, e.what()};
  } catch (const SingularSystemError& e) {
    throw Exit{kExitConfig, e.what()};
  }

  const fs::path out_path =
      a.out.empty() ? fs::path(instance.id() + "." + a.finding + "." + a.mode + ".explanation.json")
                    : fs::path(a.out);
  save_explanation(out_path, explanation);
  manifest.config = to_json(config);
  manifest.inputs = {{"instance", a.instance}, {"predictor", predictor_spec}};
  if (!a.config.empty()) manifest.inputs["config"] = a.config;
  manifest.outputs = {out_path.string()};
  manifest.seed = config.seed;
  manifest.write(manifest_path(out_path));
  out << out_path.string() << "\n";
  return kExitOk;
}

// --- evaluate ---------------------------------------------------------------

struct EvaluateArgs {
  std::vector<std::string> explanations;
  std::vector<std::string> annotations;
  std::string reports;
  std::string group_by = "predictor,mode,annotator";
  std::string format = "table";
  std::string out;
  std::size_t jobs = default_jobs();
};

int cmd_evaluate(const EvaluateArgs& a, const std::vector<std::string>& argv, const Logger& log,
                 std::ostream& out) {
  check_format(a.format);
  Manifest manifest;
  manifest.command = "evaluate";
  manifest.args = argv;
  const auto group_by = split_list(a.group_by);

  std::vector<SimilarityReport> pairs;
  if (!a.reports.empty()) {
    // Pre-computed similarity reports go straight to aggregation.
    const json j = load_input([&] { return json::parse(read_text_file(a.reports)); });
    const json& list = j.is_object() && j.contains("reports") ? j.at("reports") : j;
    if (!list.is_array()) throw Exit{kExitInput, a.reports + ": expected an array of reports"};
    for (const auto& r : list) {
      pairs.push_back(load_input([&] { return similarity_report_from_json(r); }));
    }
    manifest.inputs["reports"] = a.reports;
  } else {
    if (a.explanations.empty() || a.annotations.empty()) {
      throw Exit{kExitConfig, "evaluate needs --explanations and --annotations (or --reports)"};
    }
    std::vector<Explanation> explanations;
    for (const auto& p : expand_inputs(a.explanations, {".explanation.json"})) {
      explanations.push_back(load_input([&] { return load_explanation(p); }));
    }
    const auto annotations = load_annotation_inputs(a.annotations);
    log.info(std::to_string(explanations.size()) + " explanations, " +
             std::to_string(annotations.size()) + " annotations");

    // Join on (instance_id, finding in the annotation's finding context).
    std::vector<std::pair<const Explanation*, const ExpertAnnotation*>> joined;
    for (const auto& e : explanations) {
      for (const auto& an : annotations) {
        if (an.instance_id == e.instance_id && an.finding_context.contains(e.finding)) {
          joined.emplace_back(&e, &an);
        }
      }
    }
    std::vector<SimilarityReport> slots(joined.size());
    parallel_for(joined.size(), a.jobs, [&](std::size_t i) {
      const auto& [e, an] = joined[i];
      slots[i] = evaluate_pair(ExplanationLike::from(*e), ExplanationLike::from(*an, e->finding));
    });
    pairs = std::move(slots);
    manifest.inputs = {{"explanations", a.explanations}, {"annotations", a.annotations}};
  }
  if (pairs.empty()) throw Exit{kExitInput, "no joinable (instance_id, finding) pairs"};

  const auto groups = aggregate(pairs, group_by);
  const auto overall = aggregate(pairs, {});
  std::string text;
  if (a.format == "json") {
    text = dump_json(json{{"format_version", kFormatVersion},
                          {"group_by", group_by},
                          {"pairs", reports_json(pairs)},
                          {"aggregates", reports_json(groups)},
                          {"overall", to_json(overall.front())}});
  } else {
    text = format_table(groups, "Similarity between explanations and annotations") + "\n" +
           format_table(overall, "Overall");
  }
  emit(text, a.out, out);
  if (!a.out.empty()) {
    manifest.outputs = {a.out};
    manifest.write(manifest_path(a.out));
  }
  return kExitOk;
}

// --- agreement --------------------------------------------------------------

struct AgreementArgs {
  std::vector<std::string> annotations;
  std::string format = "table";
  std::string out;
};

int cmd_agreement(const AgreementArgs& a, const std::vector<std::string>& argv, const Logger& log,
                  std::ostream& out) {
  check_format(a.format);
  const auto annotations = load_annotation_inputs(a.annotations);
  const auto result = inter_annotator_agreement(annotations);
  for (const auto& w : result.warnings) log.warn(w);

  std::string text;
  if (a.format == "json") {
    text = dump_json(json{{"format_version", kFormatVersion},
                          {"pairs", reports_json(result.pairs)},
                          {"details", reports_json(result.details)},
                          {"warnings", result.warnings}});
  } else {
    text = format_table(result.pairs, "Similarity between domain experts");
  }
  emit(text, a.out, out);
  if (!a.out.empty()) {
    Manifest manifest;
    manifest.command = "agreement";
    manifest.args = argv;
    manifest.inputs = {{"annotations", a.annotations}};
    manifest.outputs = {a.out};
    manifest.write(manifest_path(a.out));
  }
  return kExitOk;
}

// --- baseline ---------------------------------------------------------------

struct BaselineArgs {
  std::vector<std::string> instances;
  std::vector<std::string> annotations;
  std::size_t k_words = 5;
  std::size_t k_boxes = 3;
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  std::string format = "table";
  std::string out;
  std::size_t jobs = default_jobs();
};

int cmd_baseline(const BaselineArgs& a, const std::vector<std::string>& argv, const Logger& log,
                 std::ostream& out) {
  check_format(a.format);
  if (a.trials < 1) throw Exit{kExitConfig, "--trials must be >= 1"};
  const auto instances = load_instance_inputs(a.instances);
  const auto annotations = load_annotation_inputs(a.annotations);
  const auto result =
      baseline_run(instances, annotations, a.k_words, a.k_boxes, a.trials, a.seed, a.jobs);
  for (const auto& s : result.skipped) log.warn("skipped: " + s);
  if (result.pair_means.empty()) throw Exit{kExitInput, "no annotation could be paired with an instance"};

  std::string text;
  if (a.format == "json") {
    text = dump_json(json{{"format_version", kFormatVersion},
                          {"pairs", reports_json(result.pair_means)},
                          {"per_annotator", reports_json(result.per_annotator)},
                          {"overall", to_json(*result.overall)},
                          {"skipped", result.skipped}});
  } else {
    std::vector<AggregateReport> rows = result.per_annotator;
    AggregateReport avg = *result.overall;
    avg.keys = {{"annotator", "Average"}};
    rows.push_back(avg);
    text = format_table(rows, "Random baseline vs domain experts");
  }
  emit(text, a.out, out);
  if (!a.out.empty()) {
    Manifest manifest;
    manifest.command = "baseline";
    manifest.args = argv;
    manifest.inputs = {{"instances", a.instances}, {"annotations", a.annotations}};
    manifest.config = {{"k_words", a.k_words}, {"k_boxes", a.k_boxes}, {"trials", a.trials}};
    manifest.seed = a.seed;
    manifest.outputs = {a.out};
    manifest.write(manifest_path(a.out));
  }
  return kExitOk;
}

// --- render -----------------------------------------------------------------

struct RenderArgs {
  std::string explanation;
  std::string instance;
  std::string annotation;
  std::string annotator;
  std::string image;
  std::string out_dir = ".";
};

int cmd_render(const RenderArgs& a, const std::vector<std::string>& argv, const Logger& log,
               std::ostream& out) {
  const Explanation explanation = load_input([&] { return load_explanation(a.explanation); });
  const Instance instance = load_input([&] { return load_instance(a.instance); });

  std::optional<ExpertAnnotation> annotation;
  if (!a.annotation.empty()) {
    const auto list = load_input([&] { return load_annotations(a.annotation); });
    for (const auto& an : list) {
      if (an.instance_id != explanation.instance_id) continue;
      if (!a.annotator.empty() && an.annotator_id != a.annotator) continue;
      if (!an.finding_context.empty() && !an.finding_context.contains(explanation.finding)) continue;
      annotation = an;
      break;
    }
    if (!annotation) {
      throw Exit{kExitInput, "no annotation in '" + a.annotation + "' matches instance '" +
                                 explanation.instance_id + "' and finding '" + explanation.finding + "'"};
    }
  }
  const ExpertAnnotation* ann = annotation ? &*annotation : nullptr;
  std::string svg, html;
  load_input([&] {
    svg = to_svg(render_image_overlay(instance, explanation, ann,
                                      a.image.empty() ? std::nullopt : std::optional<std::string>(a.image)));
    html = render_text_listing(instance, explanation, ann);
    return 0;
  });
  const std::string stem = explanation.instance_id + "." + explanation.finding + "." +
                           std::string(to_string(explanation.mode));
  const fs::path svg_path = fs::path(a.out_dir) / (stem + ".overlay.svg");
  const fs::path html_path = fs::path(a.out_dir) / (stem + ".words.html");
  write_text_file(svg_path, svg);
  write_text_file(html_path, html);
  log.info("wrote " + svg_path.string() + " and " + html_path.string());

  Manifest manifest;
  manifest.command = "render";
  manifest.args = argv;
  manifest.inputs = {{"explanation", a.explanation}, {"instance", a.instance}};
  if (!a.annotation.empty()) manifest.inputs["annotation"] = a.annotation;
  if (!a.image.empty()) manifest.inputs["image"] = a.image;
  manifest.outputs = {svg_path.string(), html_path.string()};
  manifest.write(fs::path(a.out_dir) / (stem + ".render.manifest.json"));
  out << svg_path.string() << "\n" << html_path.string() << "\n";
  return kExitOk;
}

// --- fixture ----------------------------------------------------------------

struct FixtureArgs {
  std::size_t words = 20;
  std::size_t boxes = 36;
  std::size_t dim = 8;
  std::size_t hot_words = 3;
  std::size_t hot_boxes = 3;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::string finding = "nodule";
  std::string id;
  std::string annotator = "oracle";
  double weight = 2.0;
  double bias = -2.0;
  double width = 512.0;
  double height = 512.0;
};

const std::vector<std::string>& fixture_vocabulary() {
  static const std::vector<std::string> v{
      "heart",     "size",       "normal",      "lungs",        "clear",     "no",
      "acute",     "cardiopulmonary", "findings", "nodule",     "opacity",   "left",
      "right",     "lower",      "lobe",        "atelectasis",  "effusion",  "pleural",
      "pneumothorax", "calcified", "granuloma", "mediastinal",  "contour",   "stable",
      "bibasilar", "subsegmental", "cardiomegaly", "enlarged",  "silhouette", "mild",
      "interstitial", "markings", "bilateral",  "infiltrate",   "process",   "dense",
      "scarring",  "retrocardiac", "costophrenic", "blunting"};
  return v;
}

int cmd_fixture(const FixtureArgs& a, const std::vector<std::string>& argv, const Logger& log,
                std::ostream& out) {
  std::vector<std::string> problems;
  if (a.words < 1) problems.emplace_back("--words must be >= 1");
  if (a.boxes < 1) problems.emplace_back("--boxes must be >= 1");
  if (a.dim < 1) problems.emplace_back("--dim must be >= 1");
  if (a.hot_words > a.words) problems.emplace_back("--hot-words exceeds --words");
  if (a.hot_boxes > a.boxes) problems.emplace_back("--hot-boxes exceeds --boxes");
  if (!(a.width >= 8.0) || !(a.height >= 8.0)) problems.emplace_back("--width/--height must be >= 8");
  if (a.finding.empty()) problems.emplace_back("--finding must be non-empty");
  if (!problems.empty()) throw Exit{kExitConfig, ConfigError(problems).what()};

  Rng rng(derive_seed(a.seed, "fixture"));
  std::vector<std::string> vocab;
  const auto& base = fixture_vocabulary();
  for (std::size_t i = 0; i < a.words; ++i) {
    vocab.push_back(i < base.size() ? base[i] : "term" + std::to_string(i));
  }
  for (std::size_t i = vocab.size(); i > 1; --i) std::swap(vocab[i - 1], vocab[rng.below(i)]);

  std::vector<Box> boxes;
  for (std::size_t i = 0; i < a.boxes; ++i) {
    const double w = std::round(rng.uniform(a.width / 16.0, a.width / 3.0));
    const double h = std::round(rng.uniform(a.height / 16.0, a.height / 3.0));
    const double x = std::floor(rng.uniform(0.0, a.width - w));
    const double y = std::floor(rng.uniform(0.0, a.height - h));
    boxes.push_back({x, y, x + w, y + h});
  }
  Matrix emb(a.boxes, a.dim);
  for (std::size_t r = 0; r < a.boxes; ++r) {
    for (std::size_t c = 0; c < a.dim; ++c) emb(r, c) = std::round(rng.uniform() * 1e4) / 1e4;
  }
  // Uniform hot subsets by partial shuffle.
  auto pick = [&](std::size_t n, std::size_t k) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
  };
  const auto hot_words = pick(a.words, a.hot_words);
  const auto hot_boxes = pick(a.boxes, a.hot_boxes);

  const std::string id = a.id.empty() ? "synthetic-" + std::to_string(a.seed) : a.id;
  const Instance instance = load_input([&] {
    return Instance::create(id, vocab, a.width, a.height, boxes, emb, {a.finding});
  });

  SyntheticLogisticModel model;
  FindingWeights fw;
  fw.bias = a.bias;
  std::vector<std::string> expert_words;
  std::vector<Box> expert_boxes;
  for (auto i : hot_words) {
    fw.word_weights[vocab[i]] = a.weight;
    expert_words.push_back(vocab[i]);
  }
  for (auto i : hot_boxes) {
    fw.box_weights[i] = a.weight;
    expert_boxes.push_back(boxes[i]);
  }
  model.findings[a.finding] = fw;
  const auto annotation =
      ExpertAnnotation::create(a.annotator, id, {a.finding}, expert_words, expert_boxes);

  const fs::path dir(a.out_dir);
  const fs::path ip = dir / (id + ".instance.json");
  const fs::path mp = dir / (id + ".model.json");
  const fs::path ap = dir / (id + ".annotation.json");
  save_instance(ip, instance);
  save_model(mp, model);
  write_text_file(ap, dump_json(to_json(annotation)));
  log.info("fixture '" + id + "' written to " + dir.string());

  Manifest manifest;
  manifest.command = "fixture";
  manifest.args = argv;
  manifest.config = {{"words", a.words},         {"boxes", a.boxes},   {"dim", a.dim},
                     {"hot_words", a.hot_words}, {"hot_boxes", a.hot_boxes},
                     {"finding", a.finding},     {"weight", a.weight}, {"bias", a.bias}};
  manifest.seed = a.seed;
  manifest.outputs = {ip.string(), mp.string(), ap.string()};
  manifest.write(dir / (id + ".fixture.manifest.json"));
  out << ip.string() << "\n" << mp.string() << "\n" << ap.string() << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-modal local-surrogate explainer and evaluation harness", "mmsurrogate"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(MMSURROGATE_VERSION));
  int verbosity = 0;
  app.add_flag("-v,--verbose", verbosity, "Increase log verbosity (repeatable)");

  ExplainArgs ea;
  ExplainOptions eo{};
  auto* explain = app.add_subcommand("explain", "Explain one finding for one instance");
  explain->add_option("--instance", ea.instance, "Instance JSON file")->required();
  explain->add_option("--finding", ea.finding, "Finding label to explain")->required();
  explain->add_option("--mode", ea.mode, "separate | simultaneous")->capture_default_str();
  explain->add_option("--predictor", ea.predictor,
                      "synthetic:<model-path> | cmd:<argv> | url:<endpoint> (default: $MMSURROGATE_PREDICTOR)");
  explain->add_option("--config", ea.config, "ExplainerConfig JSON file");
  eo.samples = explain->add_option("--samples", ea.samples, "Perturbation samples per modality");
  eo.p_text = explain->add_option("--p-text", ea.p_text, "Word inactivation probability");
  eo.p_visual = explain->add_option("--p-visual", ea.p_visual, "Box inactivation probability");
  eo.sigma = explain->add_option("--sigma", ea.sigma, "Kernel width");
  eo.lambda = explain->add_option("--lambda", ea.lambda, "Ridge penalty");
  eo.k_words = explain->add_option("--k-words", ea.k_words, "Words to output");
  eo.k_boxes = explain->add_option("--k-boxes", ea.k_boxes, "Boxes to output");
  eo.strategy = explain->add_option("--strategy", ea.strategy, "zero | mean-std | randomize");
  eo.mean_std_k = explain->add_option("--mean-std-k", ea.mean_std_k, "Spread multiplier for mean-std");
  eo.seed = explain->add_option("--seed", ea.seed, "Random seed");
  eo.target = explain->add_option("--target", ea.target, "probability | loss");
  eo.batch_size = explain->add_option("--batch-size", ea.batch_size, "Requests per predictor message");
  eo.threshold = explain->add_option("--score-threshold", ea.threshold, "Drop items with |score| below this");
  eo.findings = explain->add_option("--findings", ea.findings, "Comma-separated finding label set");
  explain->add_option("--timeout", ea.timeout, "Seconds per predictor batch")->capture_default_str();
  explain->add_option("--out", ea.out, "Output explanation file");

  EvaluateArgs va;
  auto* evaluate = app.add_subcommand("evaluate", "Score explanations against expert annotations");
  evaluate->add_option("--explanations", va.explanations, "Explanation files or directories");
  evaluate->add_option("--annotations", va.annotations, "Annotation files or directories");
  evaluate->add_option("--reports", va.reports, "Aggregate pre-computed similarity reports instead");
  evaluate->add_option("--group-by", va.group_by, "Comma-separated grouping keys")->capture_default_str();
  evaluate->add_option("--format", va.format, "json | table")->capture_default_str();
  evaluate->add_option("--out", va.out, "Output file (default: stdout)");
  evaluate->add_option("--jobs", va.jobs, "Worker threads");

  AgreementArgs aa;
  auto* agreement = app.add_subcommand("agreement", "Pairwise agreement between annotators");
  agreement->add_option("--annotations", aa.annotations, "Annotation files or directories")->required();
  agreement->add_option("--format", aa.format, "json | table")->capture_default_str();
  agreement->add_option("--out", aa.out, "Output file (default: stdout)");

  BaselineArgs ba;
  auto* baseline = app.add_subcommand("baseline", "Random-explanation baseline against annotations");
  baseline->add_option("--instances", ba.instances, "Instance files or directories")->required();
  baseline->add_option("--annotations", ba.annotations, "Annotation files or directories")->required();
  baseline->add_option("--k-words", ba.k_words, "Random words per explanation")->capture_default_str();
  baseline->add_option("--k-boxes", ba.k_boxes, "Random boxes per explanation")->capture_default_str();
  baseline->add_option("--trials", ba.trials, "Random explanations per annotation")->capture_default_str();
  baseline->add_option("--seed", ba.seed, "Random seed")->capture_default_str();
  baseline->add_option("--format", ba.format, "json | table")->capture_default_str();
  baseline->add_option("--out", ba.out, "Output file (default: stdout)");
  baseline->add_option("--jobs", ba.jobs, "Worker threads");

  RenderArgs ra;
  auto* render = app.add_subcommand("render", "Write SVG overlay and HTML word listing");
  render->add_option("--explanation", ra.explanation, "Explanation file")->required();
  render->add_option("--instance", ra.instance, "Instance file")->required();
  render->add_option("--annotation", ra.annotation, "Annotation file");
  render->add_option("--annotator", ra.annotator, "Pick this annotator from the annotation file");
  render->add_option("--image", ra.image, "Background image path (referenced, not embedded)");
  render->add_option("--out-dir", ra.out_dir, "Output directory")->capture_default_str();

  FixtureArgs fa;
  auto* fixture = app.add_subcommand("fixture", "Generate a synthetic instance, model and oracle annotation");
  fixture->add_option("--words", fa.words)->capture_default_str();
  fixture->add_option("--boxes", fa.boxes)->capture_default_str();
  fixture->add_option("--dim", fa.dim)->capture_default_str();
  fixture->add_option("--hot-words", fa.hot_words)->capture_default_str();
  fixture->add_option("--hot-boxes", fa.hot_boxes)->capture_default_str();
  fixture->add_option("--seed", fa.seed)->capture_default_str();
  fixture->add_option("--out-dir", fa.out_dir)->capture_default_str();
  fixture->add_option("--finding", fa.finding)->capture_default_str();
  fixture->add_option("--id", fa.id, "Instance id (default synthetic-<seed>)");
  fixture->add_option("--annotator", fa.annotator)->capture_default_str();
  fixture->add_option("--weight", fa.weight, "Logit weight of each hot feature")->capture_default_str();
  fixture->add_option("--bias", fa.bias)->capture_default_str();
  fixture->add_option("--width", fa.width)->capture_default_str();
  fixture->add_option("--height", fa.height)->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << MMSURROGATE_VERSION << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  const Logger log(err, verbosity);
  try {
    if (*explain) return cmd_explain(ea, eo, args, log, out);
    if (*evaluate) return cmd_evaluate(va, args, log, out);
    if (*agreement) return cmd_agreement(aa, args, log, out);
    if (*baseline) return cmd_baseline(ba, args, log, out);
    if (*render) return cmd_render(ra, args, log, out);
    if (*fixture) return cmd_fixture(fa, args, log, out);
  } catch (const Exit& e) {
    err << "error: " << e.message << "\n";
    return e.code;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const PredictorError& e) {
    err << "error: " << e.what() << "\n";
    return kExitPredictor;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitConfig;
}

}  // namespace mmsurrogate::cli
