#include "faceret/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "faceret/error.hpp"
#include "faceret/parallel.hpp"

namespace faceret {

using nlohmann::json;

// ---------------------------------------------------------------- manifest

bool DatasetManifest::uses_descriptor_rows() const {
  return !records.empty() && records.front().descriptor_row.has_value();
}

std::vector<std::filesystem::path> DatasetManifest::paths() const {
  std::vector<std::filesystem::path> out;
  out.reserve(records.size());
  for (const auto& r : records) out.emplace_back(r.path);
  return out;
}

DatasetManifest DatasetManifest::from_json(std::string_view text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorKind::Format, "manifest must be a JSON array of records");
  if (doc.empty()) throw Error(ErrorKind::Usage, "manifest is empty");

  DatasetManifest manifest;
  std::optional<bool> by_row;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& r = doc[i];
    const std::string where = "manifest record " + std::to_string(i);
    if (!r.is_object()) throw Error(ErrorKind::Format, where + ": not an object");
    FaceRecord rec;
    if (!r.contains("subject")) throw Error(ErrorKind::Format, where + ": missing \"subject\"");
    const json& subject = r["subject"];
    if (subject.is_string()) {
      rec.subject = subject.get<std::string>();
    } else if (subject.is_number_integer()) {
      rec.subject = std::to_string(subject.get<std::int64_t>());
    } else {
      throw Error(ErrorKind::Format, where + ": \"subject\" must be a string or integer");
    }
    const bool has_path = r.contains("path");
    const bool has_row = r.contains("descriptor");
    if (has_path == has_row) {
      throw Error(ErrorKind::Format, where + ": needs exactly one of \"path\" or \"descriptor\"");
    }
    if (has_path) {
      if (!r["path"].is_string()) throw Error(ErrorKind::Format, where + ": \"path\" must be a string");
      std::filesystem::path p = r["path"].get<std::string>();
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      rec.path = p.string();
    } else {
      if (!r["descriptor"].is_number_integer() || r["descriptor"].get<std::int64_t>() < 0) {
        throw Error(ErrorKind::Format, where + ": \"descriptor\" must be a non-negative row index");
      }
      rec.descriptor_row = r["descriptor"].get<std::size_t>();
    }
    if (by_row && *by_row != has_row) {
      throw Error(ErrorKind::Format, where + ": records mix \"path\" and \"descriptor\" entries");
    }
    by_row = has_row;
    manifest.records.push_back(std::move(rec));
  }
  if (manifest.records.size() < 2) throw Error(ErrorKind::Validation, "manifest needs at least 2 records");
  return manifest;
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Format, "cannot open manifest " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return from_json(buf.str(), path.parent_path());
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- metrics

std::optional<PrecisionRecall> precision_recall(std::span<const std::size_t> retrieved,
                                                std::span<const std::size_t> relevant, std::size_t m) {
  if (m == 0) throw Error(ErrorKind::InvalidArgument, "precision_recall: cutoff must be >= 1");
  if (relevant.empty()) return std::nullopt;
  const std::set<std::size_t> truth(relevant.begin(), relevant.end());
  const std::size_t depth = std::min(m, retrieved.size());
  std::size_t hits = 0;
  for (std::size_t k = 0; k < depth; ++k) hits += truth.count(retrieved[k]);
  PrecisionRecall pr;
  pr.precision = depth == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(depth);
  pr.recall = static_cast<double>(hits) / static_cast<double>(truth.size());
  return pr;
}

Aggregate aggregate(std::span<const SubjectQueries> subjects) {
  Aggregate out;
  std::size_t counted = 0;
  for (const SubjectQueries& s : subjects) {
    if (s.queries.empty()) continue;
    SubjectAverage avg{s.subject, s.queries.size(), 0.0, 0.0};
    for (const auto& q : s.queries) {
      avg.mean_precision += q.precision;
      avg.mean_recall += q.recall;
    }
    avg.mean_precision /= static_cast<double>(s.queries.size());
    avg.mean_recall /= static_cast<double>(s.queries.size());
    out.arp += avg.mean_precision;
    out.arr += avg.mean_recall;
    out.subjects.push_back(std::move(avg));
    ++counted;
  }
  if (counted > 0) {
    out.arp /= static_cast<double>(counted);
    out.arr /= static_cast<double>(counted);
  }
  return out;
}

double f_score(double arp, double arr) {
  if (arp + arr == 0.0) return 0.0;
  return 2.0 * arp * arr / (arp + arr);
}

std::size_t anmrr_k(std::size_t ng, std::size_t gtm) { return std::max<std::size_t>(1, std::min(4 * ng, 2 * gtm)); }

double nmrr(const AnmrrQuery& query, std::size_t gtm, std::optional<std::size_t> window) {
  const std::size_t ng = query.ng;
  if (ng == 0) throw Error(ErrorKind::InvalidArgument, "ANMRR query without ground truth");
  if (query.relevant_ranks.size() > ng) {
    throw Error(ErrorKind::InvalidArgument, "ANMRR query lists more relevant ranks than NG");
  }
  const std::size_t k = anmrr_k(ng, gtm);
  const std::size_t limit = window ? std::min(k, *window) : k;
  const double penalty = 1.25 * static_cast<double>(k);

  double rank_sum = 0.0;
  std::size_t found = 0;
  for (std::size_t r : query.relevant_ranks) {
    if (r >= 1 && r <= limit) {
      rank_sum += static_cast<double>(r);
      ++found;
    }
  }
  rank_sum += static_cast<double>(ng - found) * penalty;

  const double avr = rank_sum / static_cast<double>(ng);
  const double mrr = avr - 0.5 - 0.5 * static_cast<double>(ng);
  const double denom = penalty - 0.5 - 0.5 * static_cast<double>(ng);
  if (denom <= 0.0) throw Error(ErrorKind::Internal, "ANMRR normalizer is not positive");
  return mrr / denom;
}

double anmrr(std::span<const AnmrrQuery> queries, const AnmrrParams& params) {
  if (queries.empty()) return 0.0;
  std::size_t gtm = 0;
  for (const auto& q : queries) gtm = std::max(gtm, q.ng);
  if (params.gtm) gtm = *params.gtm;
  double sum = 0.0;
  for (const auto& q : queries) sum += nmrr(q, gtm, params.window);
  return sum / static_cast<double>(queries.size());
}

AnmrrQuery anmrr_query(std::span<const std::size_t> ranking, std::span<const std::size_t> relevant) {
  const std::set<std::size_t> truth(relevant.begin(), relevant.end());
  AnmrrQuery q;
  q.ng = truth.size();
  for (std::size_t k = 0; k < ranking.size(); ++k) {
    if (truth.count(ranking[k])) q.relevant_ranks.push_back(k + 1);
  }
  return q;
}

std::optional<std::size_t> AnmrrWindow::window_for(std::size_t cutoff) const {
  switch (mode) {
    case Mode::None: return std::nullopt;
    case Mode::Cutoff: return cutoff;
    case Mode::Fixed: return size;
  }
  return std::nullopt;
}

std::string AnmrrWindow::to_string() const {
  switch (mode) {
    case Mode::None: return "none";
    case Mode::Cutoff: return "cutoff";
    case Mode::Fixed: return std::to_string(size);
  }
  return "?";
}

AnmrrWindow AnmrrWindow::parse(std::string_view text) {
  if (text == "none") return {Mode::None, 0};
  if (text == "cutoff") return {Mode::Cutoff, 0};
  std::size_t n = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), n);
  if (res.ec == std::errc() && res.ptr == text.data() + text.size() && n > 0) return {Mode::Fixed, n};
  throw Error(ErrorKind::Parse, "ANMRR window must be none, cutoff, or a positive integer, got \"" +
                                    std::string(text) + "\"");
}

// ---------------------------------------------------------------- protocol

namespace {

struct ProbeOutcome {
  std::vector<std::size_t> relevant_ranks;  // 1-based, within the ranked depth
  bool degenerate = false;
};

}  // namespace

MetricsReport run_experiment(std::span<const std::string> subjects, const FeatureMatrix& descriptors,
                             const ExperimentOptions& options) {
  const std::size_t n = subjects.size();
  if (descriptors.rows() != n) {
    throw Error(ErrorKind::Validation, "descriptor matrix has " + std::to_string(descriptors.rows()) +
                                           " rows, manifest has " + std::to_string(n) + " records");
  }
  if (n < 2) throw Error(ErrorKind::InvalidArgument, "retrieval needs at least 2 records");
  if (options.cutoffs.empty()) throw Error(ErrorKind::InvalidArgument, "no cutoffs requested");
  for (std::size_t m : options.cutoffs) {
    if (m == 0) throw Error(ErrorKind::InvalidArgument, "cutoffs must be >= 1");
  }

  // Subjects are numbered in sorted-name order so the report does not depend
  // on manifest order.
  std::map<std::string, std::size_t> subject_ids;
  for (const auto& s : subjects) subject_ids.emplace(s, 0);
  std::vector<std::string> subject_names;
  for (auto& [name, id] : subject_ids) {
    id = subject_names.size();
    subject_names.push_back(name);
  }
  std::vector<std::size_t> label(n);
  std::vector<std::size_t> class_size(subject_names.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    label[i] = subject_ids.at(subjects[i]);
    ++class_size[label[i]];
  }

  std::size_t gtm = 0;
  for (std::size_t i = 0; i < n; ++i) gtm = std::max(gtm, class_size[label[i]] - 1);
  const std::size_t max_cutoff = *std::max_element(options.cutoffs.begin(), options.cutoffs.end());
  // Relevant items past max(K, cutoff) only ever contribute the penalty rank,
  // so ranking deeper than that is wasted work.
  const std::size_t depth = std::min(n - 1, std::max(max_cutoff, anmrr_k(gtm, gtm)));

  std::vector<ProbeOutcome> outcomes(n);
  parallel_for(n, options.threads, [&](std::size_t probe) {
    if (class_size[label[probe]] < 2) return;
    const auto query = descriptors.row(probe);
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == probe) continue;
      scored.emplace_back(distance(options.distance, query, descriptors.row(j)), j);
    }
    ProbeOutcome& out = outcomes[probe];
    const auto [lo, hi] = std::minmax_element(scored.begin(), scored.end());
    out.degenerate = lo->first == hi->first;
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(depth), scored.end());
    for (std::size_t r = 0; r < depth; ++r) {
      if (label[scored[r].second] == label[probe]) out.relevant_ranks.push_back(r + 1);
    }
  });

  MetricsReport report;
  report.variant = options.variant;
  report.distance = options.distance;
  report.window = options.window;
  report.records = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (class_size[label[i]] < 2) {
      ++report.skipped_queries;
    } else {
      ++report.queries;
      if (outcomes[i].degenerate) ++report.degenerate_probes;
    }
  }

  for (std::size_t m : options.cutoffs) {
    std::vector<SubjectQueries> grouped(subject_names.size());
    for (std::size_t s = 0; s < subject_names.size(); ++s) grouped[s].subject = subject_names[s];
    std::vector<AnmrrQuery> anmrr_queries;
    const std::size_t retrieved = std::min(m, n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t ng = class_size[label[i]] - 1;
      if (ng == 0) continue;
      const auto& ranks = outcomes[i].relevant_ranks;
      const auto hits = static_cast<std::size_t>(
          std::count_if(ranks.begin(), ranks.end(), [&](std::size_t r) { return r <= retrieved; }));
      grouped[label[i]].queries.push_back(
          {static_cast<double>(hits) / static_cast<double>(retrieved), static_cast<double>(hits) / static_cast<double>(ng)});
      anmrr_queries.push_back({ranks, ng});
    }
    Aggregate agg = aggregate(grouped);
    CutoffMetrics row;
    row.cutoff = m;
    row.arp = agg.arp;
    row.arr = agg.arr;
    row.f_score = f_score(agg.arp, agg.arr);
    row.anmrr_window = options.window.window_for(m);
    row.anmrr = anmrr(anmrr_queries, AnmrrParams{row.anmrr_window, gtm});
    row.subjects = std::move(agg.subjects);
    report.rows.push_back(std::move(row));
  }
  return report;
}

MetricsReport run_experiment(const DatasetManifest& manifest, const FeatureMatrix& descriptors,
                             const ExperimentOptions& options) {
  std::vector<std::string> subjects;
  subjects.reserve(manifest.records.size());
  for (const auto& r : manifest.records) subjects.push_back(r.subject);
  if (!manifest.uses_descriptor_rows()) return run_experiment(subjects, descriptors, options);

  // Gather the referenced rows into manifest order.
  FeatureMatrix gathered(manifest.records.size(), descriptors.cols());
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const std::size_t row = manifest.records[i].descriptor_row.value();
    if (row >= descriptors.rows()) {
      throw Error(ErrorKind::Validation, "manifest record " + std::to_string(i) + " references descriptor row " +
                                             std::to_string(row) + ", matrix has " +
                                             std::to_string(descriptors.rows()) + " rows");
    }
    const auto src = descriptors.row(row);
    std::copy(src.begin(), src.end(), gathered.row(i).begin());
  }
  return run_experiment(subjects, gathered, options);
}

// ---------------------------------------------------------------- output

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string report_csv(std::span<const MetricsReport> reports, bool pivot) {
  std::ostringstream os;
  if (!pivot) {
    os << "variant,distance,cutoff,ARP%,ARR%,F%,ANMRR%\n";
    for (const auto& r : reports) {
      for (const auto& row : r.rows) {
        os << csv_field(r.variant) << ',' << to_string(r.distance) << ',' << row.cutoff << ',' << pct(row.arp) << ','
           << pct(row.arr) << ',' << pct(row.f_score) << ',' << pct(row.anmrr) << '\n';
      }
    }
    return os.str();
  }

  // Variants as columns, one row per (distance, cutoff, metric), the way the
  // comparison tables are laid out.
  std::vector<std::string> variants;
  for (const auto& r : reports) {
    if (std::find(variants.begin(), variants.end(), r.variant) == variants.end()) variants.push_back(r.variant);
  }
  std::vector<std::pair<DistanceKind, std::size_t>> keys;
  for (const auto& r : reports) {
    for (const auto& row : r.rows) {
      const std::pair key{r.distance, row.cutoff};
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    }
  }
  os << "distance,cutoff,metric";
  for (const auto& v : variants) os << ',' << csv_field(v);
  os << '\n';
  constexpr const char* metrics[] = {"ARP%", "ARR%", "F%", "ANMRR%"};
  for (const auto& [dist, cutoff] : keys) {
    for (int m = 0; m < 4; ++m) {
      os << to_string(dist) << ',' << cutoff << ',' << metrics[m];
      for (const auto& v : variants) {
        os << ',';
        for (const auto& r : reports) {
          if (r.variant != v || r.distance != dist) continue;
          for (const auto& row : r.rows) {
            if (row.cutoff != cutoff) continue;
            const double values[] = {row.arp, row.arr, row.f_score, row.anmrr};
            os << pct(values[m]);
          }
        }
      }
      os << '\n';
    }
  }
  return os.str();
}

std::string report_json(std::span<const MetricsReport> reports) {
  json out = json::array();
  for (const auto& r : reports) {
    json rows = json::array();
    for (const auto& row : r.rows) {
      json subjects = json::array();
      for (const auto& s : row.subjects) {
        subjects.push_back({{"subject", s.subject},
                            {"queries", s.queries},
                            {"mean_precision", s.mean_precision},
                            {"mean_recall", s.mean_recall}});
      }
      rows.push_back({{"cutoff", row.cutoff},
                      {"arp", row.arp},
                      {"arr", row.arr},
                      {"f_score", row.f_score},
                      {"anmrr", row.anmrr},
                      {"anmrr_window", row.anmrr_window ? json(*row.anmrr_window) : json(nullptr)},
                      {"arp_pct", pct(row.arp)},
                      {"arr_pct", pct(row.arr)},
                      {"f_score_pct", pct(row.f_score)},
                      {"anmrr_pct", pct(row.anmrr)},
                      {"subjects", std::move(subjects)}});
    }
    out.push_back({{"variant", r.variant},
                   {"distance", to_string(r.distance)},
                   {"anmrr_window", r.window.to_string()},
                   {"records", r.records},
                   {"queries", r.queries},
                   {"skipped_queries", r.skipped_queries},
                   {"degenerate_probes", r.degenerate_probes},
                   {"metrics", std::move(rows)}});
  }
  return out.dump(2) + "\n";
}

}  // namespace faceret
