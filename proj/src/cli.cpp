#include "faceret/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "faceret/binary_io.hpp"
#include "faceret/descriptor.hpp"
#include "faceret/error.hpp"
#include "faceret/evaluation.hpp"
#include "faceret/network.hpp"
#include "faceret/parallel.hpp"
#include "faceret/selftest.hpp"

namespace faceret::cli {

namespace fs = std::filesystem;
using nlohmann::json;

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, path.string() + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::Config, path.string() + ": config must be a JSON object");

  static const std::vector<std::string> known{"model",  "manifest", "descriptors", "variants", "distances",
                                              "cutoffs", "anmrr_window", "output", "format", "threads",
                                              "pivot",  "skip_errors"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorKind::Config, path.string() + ": unknown config key \"" + key + "\"");
    }
  }

  ExperimentConfig cfg;
  try {
    cfg.model = j.value("model", cfg.model);
    cfg.manifest = j.value("manifest", cfg.manifest);
    cfg.descriptors = j.value("descriptors", cfg.descriptors);
    cfg.variants = j.value("variants", cfg.variants);
    cfg.distances = j.value("distances", cfg.distances);
    cfg.cutoffs = j.value("cutoffs", cfg.cutoffs);
    if (j.contains("anmrr_window")) {
      cfg.anmrr_window = j["anmrr_window"].is_number() ? std::to_string(j["anmrr_window"].get<std::size_t>())
                                                       : j["anmrr_window"].get<std::string>();
    }
    cfg.output = j.value("output", cfg.output);
    cfg.format = j.value("format", cfg.format);
    cfg.threads = j.value("threads", cfg.threads);
    cfg.pivot = j.value("pivot", cfg.pivot);
    cfg.skip_errors = j.value("skip_errors", cfg.skip_errors);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, path.string() + ": " + e.what());
  }
  // Relative paths in a config file are relative to the file.
  const fs::path base = path.parent_path();
  for (std::string* p : {&cfg.model, &cfg.manifest, &cfg.descriptors, &cfg.output}) {
    if (!p->empty() && fs::path(*p).is_relative() && !base.empty()) *p = (base / *p).string();
  }
  return cfg;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string volume_label(const Shape& s) {
  std::ostringstream os;
  if (s[0] == s[1]) {
    os << s[0] << ',' << s[2];
  } else {
    os << s[0] << 'x' << s[1] << ',' << s[2];
  }
  return os.str();
}

std::string filter_label(const LayerSpec& layer) {
  std::ostringstream os;
  switch (layer.type()) {
    case LayerType::Conv: {
      const auto& p = layer.conv();
      os << "f:" << p.filter << ',' << p.in_channels << ',' << p.out_channels << ", s:" << p.stride << ", p:" << p.pad;
      break;
    }
    case LayerType::Pool: {
      const auto& p = layer.pool();
      os << "f:" << p.window << ", s:" << p.stride << ", p:" << p.pad;
      break;
    }
    default:
      os << "n/a";
  }
  return os.str();
}

std::string type_label(const LayerSpec& layer) {
  switch (layer.type()) {
    case LayerType::Input: return "Image";
    case LayerType::Conv: return "Conv";
    case LayerType::Pool: return "Pool";
    case LayerType::Activation:
      return layer.activation().is_ab_relu() ? "ABRelu(" + format_scalar(layer.activation().alpha()) + ")" : "Relu";
  }
  return "?";
}

void print_layer_table(const NetworkSpec& spec, std::ostream& out) {
  const auto shapes = spec.infer_shapes();
  out << std::left << std::setw(5) << "No." << std::setw(12) << "Layer Name" << std::setw(12) << "Layer Type"
      << std::setw(26) << "Filter"
      << "Volume Size\n";
  for (const LayerSpec& layer : spec.layers) {
    out << std::left << std::setw(5) << layer.index << std::setw(12) << layer.name << std::setw(12)
        << type_label(layer) << std::setw(26) << filter_label(layer) << volume_label(shapes[layer.index]) << '\n';
  }
}

std::vector<DescriptorVariant> parse_variants(const std::vector<std::string>& names) {
  std::vector<DescriptorVariant> out;
  for (const auto& n : names) out.push_back(parse_variant(n));
  return out;
}

std::vector<DistanceKind> parse_distances(const std::vector<std::string>& names) {
  std::vector<DistanceKind> out;
  for (const auto& n : names) out.push_back(parse_distance(n));
  if (out.empty()) out.push_back(DistanceKind::ChiSquare);
  return out;
}

std::size_t thread_count(const ExperimentConfig& cfg) {
  return cfg.threads == 0 ? default_thread_count() : cfg.threads;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorKind::Usage, message);
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::vector<std::uint8_t> bytes(text.begin(), text.end());
  io::write_file(path, bytes);
}

int cmd_describe_model(const ExperimentConfig& cfg, std::ostream& out) {
  require(!cfg.model.empty(), "describe-model needs --model");
  const Model model = load_weights(cfg.model);
  print_layer_table(model.spec, out);
  return 0;
}

struct Extracted {
  std::vector<FeatureMatrix> matrices;  // per variant
  std::vector<std::size_t> kept;        // manifest indices that succeeded
};

Extracted extract_manifest(const ExperimentConfig& cfg, const DatasetManifest& manifest,
                           const std::vector<DescriptorVariant>& variants, std::ostream& err) {
  require(!cfg.model.empty(), "extraction needs --model");
  require(!manifest.uses_descriptor_rows(), "extraction needs a manifest of image paths");
  const auto start = Clock::now();
  const Model model = load_weights(cfg.model);
  for (const auto& v : variants) (void)descriptor_length(model.spec, v);

  const auto paths = manifest.paths();
  const std::size_t threads = thread_count(cfg);
  ExtractionResult result = extract_images(model.spec, model.weights, variants, paths, threads, cfg.skip_errors);
  for (const auto& [index, message] : result.failures) err << "extract: skipped " << message << '\n';

  Extracted ex;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (variants.empty() || result.per_variant[0][i]) ex.kept.push_back(i);
  }
  if (ex.kept.empty()) throw Error(ErrorKind::Validation, "no image could be described");
  for (std::size_t v = 0; v < variants.size(); ++v) {
    std::vector<Descriptor> rows;
    rows.reserve(ex.kept.size());
    for (std::size_t i : ex.kept) rows.push_back(std::move(*result.per_variant[v][i]));
    ex.matrices.push_back(FeatureMatrix::from_descriptors(rows));
  }
  err << "extract: " << ex.kept.size() << " images x " << variants.size() << " variants in " << std::fixed
      << std::setprecision(2) << seconds_since(start) << "s on " << threads << " threads\n";
  err.unsetf(std::ios::floatfield);
  return ex;
}

int cmd_extract(const ExperimentConfig& cfg, std::ostream& err) {
  require(!cfg.manifest.empty(), "extract needs --manifest");
  require(!cfg.output.empty(), "extract needs --output <directory>");
  require(!cfg.variants.empty(), "extract needs at least one --variant");
  const auto variants = parse_variants(cfg.variants);
  const DatasetManifest manifest = DatasetManifest::load(cfg.manifest);
  const Extracted ex = extract_manifest(cfg, manifest, variants, err);

  const fs::path dir = cfg.output;
  fs::create_directories(dir);
  json rows = json::array();
  json descriptor_manifest = json::array();
  for (std::size_t r = 0; r < ex.kept.size(); ++r) {
    const FaceRecord& rec = manifest.records[ex.kept[r]];
    rows.push_back({{"row", r}, {"source", rec.path}, {"subject", rec.subject}});
    descriptor_manifest.push_back({{"descriptor", r}, {"subject", rec.subject}});
  }
  for (std::size_t v = 0; v < variants.size(); ++v) {
    const std::string stem = variants[v].name;
    write_vgt(dir / (stem + ".vgt"), ex.matrices[v].to_tensor());
    json overrides = json::object();
    for (const auto& [layer, kind] : variants[v].overrides) overrides[std::to_string(layer)] = kind.to_string();
    const json sidecar{{"variant", variants[v].name}, {"tap_layer", variants[v].tap_layer},
                       {"overrides", overrides},      {"dim", ex.matrices[v].cols()},
                       {"matrix", stem + ".vgt"},     {"rows", rows}};
    const std::string text = sidecar.dump(2) + "\n";
    io::write_file(dir / (stem + ".json"), std::vector<std::uint8_t>(text.begin(), text.end()));
  }
  const std::string text = descriptor_manifest.dump(2) + "\n";
  io::write_file(dir / "manifest.json", std::vector<std::uint8_t>(text.begin(), text.end()));
  return 0;
}

// Matrix file for one variant under --descriptors (a directory holding
// <variant>.vgt files, or a single .vgt file).
FeatureMatrix load_matrix(const fs::path& source, const std::string& variant) {
  const fs::path file = fs::is_directory(source) ? source / (variant + ".vgt") : source;
  if (!fs::exists(file)) throw Error(ErrorKind::Format, "descriptor matrix " + file.string() + " not found");
  return FeatureMatrix::from_tensor(read_vgt(file));
}

std::string variant_of_matrix_file(const fs::path& file) {
  fs::path sidecar = file;
  sidecar.replace_extension(".json");
  if (fs::exists(sidecar)) {
    std::ifstream in(sidecar);
    try {
      const json j = json::parse(in);
      if (j.contains("variant") && j["variant"].is_string()) return j["variant"].get<std::string>();
    } catch (const json::exception&) {
      throw Error(ErrorKind::Format, sidecar.string() + ": invalid sidecar JSON");
    }
  }
  return file.stem().string();
}

int cmd_evaluate(ExperimentConfig cfg, std::ostream& out, std::ostream& err) {
  require(!cfg.manifest.empty(), "evaluate needs --manifest");
  require(cfg.format == "csv" || cfg.format == "json", "--format must be csv or json");
  const auto distances = parse_distances(cfg.distances);
  const AnmrrWindow window = AnmrrWindow::parse(cfg.anmrr_window);
  if (cfg.cutoffs.empty()) cfg.cutoffs = {1, 5, 10};
  for (std::size_t m : cfg.cutoffs) require(m >= 1, "cutoffs must be >= 1");

  const DatasetManifest manifest = DatasetManifest::load(cfg.manifest);
  const std::size_t threads = thread_count(cfg);
  const auto start = Clock::now();

  std::vector<std::string> variant_names = cfg.variants;
  std::vector<FeatureMatrix> matrices;
  DatasetManifest effective = manifest;

  if (manifest.uses_descriptor_rows()) {
    const fs::path source = cfg.descriptors.empty() ? fs::path(cfg.manifest).parent_path() : fs::path(cfg.descriptors);
    if (variant_names.empty()) {
      require(!fs::is_directory(source), "evaluate needs --variant when --descriptors is a directory");
      variant_names.push_back(variant_of_matrix_file(source));
    } else {
      (void)parse_variants(variant_names);
    }
    require(fs::is_directory(source) || variant_names.size() == 1,
            "a single descriptor file holds one variant; pass a directory for several");
    for (const auto& v : variant_names) matrices.push_back(load_matrix(source, v));
  } else {
    require(!variant_names.empty(), "evaluate needs at least one --variant");
    const auto variants = parse_variants(variant_names);
    Extracted ex = extract_manifest(cfg, manifest, variants, err);
    matrices = std::move(ex.matrices);
    effective.records.clear();
    for (std::size_t i : ex.kept) effective.records.push_back(manifest.records[i]);
  }

  std::vector<MetricsReport> reports;
  for (std::size_t v = 0; v < variant_names.size(); ++v) {
    for (DistanceKind d : distances) {
      ExperimentOptions opt;
      opt.variant = variant_names[v];
      opt.distance = d;
      opt.cutoffs = cfg.cutoffs;
      opt.window = window;
      opt.threads = threads;
      MetricsReport report = run_experiment(effective, matrices[v], opt);
      if (report.skipped_queries > 0) {
        err << "evaluate: " << report.variant << "/" << to_string(d) << ": skipped " << report.skipped_queries
            << " probes whose subject has a single image\n";
      }
      if (report.degenerate_probes > 0) {
        err << "evaluate: " << report.variant << "/" << to_string(d) << ": " << report.degenerate_probes
            << " probes saw identical distances to the whole gallery (ranking decided by tie-break)\n";
      }
      reports.push_back(std::move(report));
    }
  }

  const std::string text = cfg.format == "json" ? report_json(reports) : report_csv(reports, cfg.pivot);
  write_text(cfg.output, text, out);
  err << "evaluate: " << reports.size() << " runs over " << effective.records.size() << " records in " << std::fixed
      << std::setprecision(2) << seconds_since(start) << "s on " << threads << " threads\n";
  err.unsetf(std::ios::floatfield);
  return 0;
}

int cmd_selftest(const std::string& fault, std::ostream& out) {
  SelfTestOptions options;
  if (fault == "alpha0") {
    // A bias that survives alpha = 0.
    options.ab_relu_impl = [](const Tensor& x, float alpha) {
      const double beta = alpha * static_cast<double>(mean_volume(x)) + 1e-3;
      return map_values(x, [beta](float v) {
        const double s = v - beta;
        return s > 0.0 ? static_cast<float>(s) : 0.0f;
      });
    };
  } else if (!fault.empty()) {
    throw Error(ErrorKind::Usage, "unknown fault \"" + fault + "\"");
  }
  const auto results = run_selftest(options);
  std::size_t failed = 0;
  for (const auto& r : results) {
    if (r.passed) {
      out << "PASS " << r.name << '\n';
    } else {
      ++failed;
      out << "FAIL " << r.name << ": " << r.detail << '\n';
    }
  }
  out << "selftest: " << results.size() - failed << " passed, " << failed << " failed\n";
  return failed == 0 ? 0 : 3;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural face descriptors with average-biased rectifiers, and leave-one-out retrieval evaluation",
               "faceret"};
  app.require_subcommand(1);

  ExperimentConfig flags;
  std::string config_path;
  std::string fault;
  std::map<std::string, CLI::Option*> given;

  auto add_common = [&](CLI::App* sub, bool experiment) {
    given["model"] = sub->add_option("--model", flags.model, "Weight container (.vgfm)");
    sub->add_option("--config", config_path, "JSON config; flags override its values");
    if (!experiment) return;
    given["manifest"] = sub->add_option("--manifest", flags.manifest, "Dataset manifest (JSON)");
    given["variants"] = sub->add_option("--variant", flags.variants, "Descriptor variant, e.g. 35AR2 (repeatable)");
    given["threads"] = sub->add_option("--threads", flags.threads, "Worker threads (default: all cores)");
    given["output"] = sub->add_option("--output", flags.output, "Output directory (extract) or file (evaluate)");
    given["skip_errors"] = sub->add_flag("--skip-errors", flags.skip_errors, "Skip images that fail to load");
  };

  auto* describe = app.add_subcommand("describe-model", "Print the layer table of a weight container");
  add_common(describe, false);
  auto* extract = app.add_subcommand("extract", "Write descriptor matrices for every variant");
  add_common(extract, true);
  auto* evaluate = app.add_subcommand("evaluate", "Leave-one-out retrieval metrics");
  add_common(evaluate, true);
  given["distances"] = evaluate->add_option("--distance", flags.distances, "euclidean|cosine|l1|d1|chisq (repeatable)");
  given["cutoffs"] = evaluate->add_option("--cutoff", flags.cutoffs, "Retrieved-list cutoffs (default 1,5,10)");
  given["anmrr_window"] =
      evaluate->add_option("--anmrr-window", flags.anmrr_window, "none | cutoff (default) | N");
  given["format"] = evaluate->add_option("--format", flags.format, "csv (default) or json");
  given["pivot"] = evaluate->add_flag("--pivot", flags.pivot, "Variants as CSV columns");
  given["descriptors"] =
      evaluate->add_option("--descriptors", flags.descriptors, "Descriptor matrix file or directory");
  auto* selftest = app.add_subcommand("selftest", "Run the bundled invariant suite");
  selftest->add_option("--inject-fault", fault)->group("");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (selftest->parsed()) return cmd_selftest(fault, out);

    ExperimentConfig cfg = flags;
    if (!config_path.empty()) {
      const ExperimentConfig file = load_config(config_path);
      auto pick = [&](const char* key, auto ExperimentConfig::*field) {
        auto it = given.find(key);
        const bool from_flag = it != given.end() && it->second && it->second->count() > 0;
        if (!from_flag) cfg.*field = file.*field;
      };
      pick("model", &ExperimentConfig::model);
      pick("manifest", &ExperimentConfig::manifest);
      pick("descriptors", &ExperimentConfig::descriptors);
      pick("variants", &ExperimentConfig::variants);
      pick("distances", &ExperimentConfig::distances);
      pick("cutoffs", &ExperimentConfig::cutoffs);
      pick("anmrr_window", &ExperimentConfig::anmrr_window);
      pick("output", &ExperimentConfig::output);
      pick("format", &ExperimentConfig::format);
      pick("threads", &ExperimentConfig::threads);
      pick("pivot", &ExperimentConfig::pivot);
      pick("skip_errors", &ExperimentConfig::skip_errors);
    }

    if (describe->parsed()) return cmd_describe_model(cfg, out);
    if (extract->parsed()) return cmd_extract(cfg, err);
    if (evaluate->parsed()) return cmd_evaluate(cfg, out, err);
    return 1;
  } catch (const Error& e) {
    err << "faceret: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "faceret: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "faceret: internal error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace faceret::cli
