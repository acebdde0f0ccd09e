#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "faceret/similarity.hpp"

namespace faceret {

// One face image: either an image path or a row of a descriptor matrix,
// plus its subject label.
struct FaceRecord {
  std::string path;
  std::optional<std::size_t> descriptor_row;
  std::string subject;
};

struct DatasetManifest {
  std::vector<FaceRecord> records;

  bool uses_descriptor_rows() const;
  std::vector<std::filesystem::path> paths() const;

  // JSON array of {"path": str, "subject": str} or
  // {"descriptor": row, "subject": str}. Relative paths resolve against
  // `base_dir`.
  static DatasetManifest from_json(std::string_view text, const std::filesystem::path& base_dir = {});
  static DatasetManifest load(const std::filesystem::path& path);
};

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

// Pr = |top-m & relevant| / m', Re = |top-m & relevant| / |relevant|, with
// m' = min(m, retrieved.size()). nullopt when `relevant` is empty (the
// query carries no ground truth and is skipped).
std::optional<PrecisionRecall> precision_recall(std::span<const std::size_t> retrieved,
                                                std::span<const std::size_t> relevant, std::size_t m);

struct SubjectAverage {
  std::string subject;
  std::size_t queries = 0;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
};

struct Aggregate {
  double arp = 0.0;
  double arr = 0.0;
  std::vector<SubjectAverage> subjects;
};

struct SubjectQueries {
  std::string subject;
  std::vector<PrecisionRecall> queries;
};

// Mean per subject first, then the unweighted mean over subjects.
Aggregate aggregate(std::span<const SubjectQueries> subjects);

// Harmonic mean 2pr/(p+r); 0 when both are 0.
double f_score(double arp, double arr);

// Ground truth of one query for ANMRR: ng relevant items, of which those
// retrieved sit at the listed 1-based ranks.
struct AnmrrQuery {
  std::vector<std::size_t> relevant_ranks;
  std::size_t ng = 0;
};

struct AnmrrParams {
  // Retrieved-list cutoff; relevant items ranked beyond min(K(q), window)
  // take the penalty rank 1.25 K(q).
  std::optional<std::size_t> window;
  // Largest NG over all queries; computed from the queries when unset.
  std::optional<std::size_t> gtm;
};

// K(q) = min(4 NG(q), 2 GTM), at least 1.
std::size_t anmrr_k(std::size_t ng, std::size_t gtm);

// Normalized modified retrieval rank of a single query.
double nmrr(const AnmrrQuery& query, std::size_t gtm, std::optional<std::size_t> window);

// Mean NMRR over queries; 0 is perfect, 1 is worst.
double anmrr(std::span<const AnmrrQuery> queries, const AnmrrParams& params = {});

// Builds the ANMRR ground truth for a ranking and relevant set.
AnmrrQuery anmrr_query(std::span<const std::size_t> ranking, std::span<const std::size_t> relevant);

// How the ANMRR reported at cutoff m is windowed.
struct AnmrrWindow {
  enum class Mode { None, Cutoff, Fixed };
  Mode mode = Mode::Cutoff;
  std::size_t size = 0;

  std::optional<std::size_t> window_for(std::size_t cutoff) const;
  std::string to_string() const;
  // "none", "cutoff", or a positive integer.
  static AnmrrWindow parse(std::string_view text);
};

struct CutoffMetrics {
  std::size_t cutoff = 0;
  double arp = 0.0;
  double arr = 0.0;
  double f_score = 0.0;
  double anmrr = 0.0;
  std::optional<std::size_t> anmrr_window;
  std::vector<SubjectAverage> subjects;
};

struct MetricsReport {
  std::string variant;
  DistanceKind distance = DistanceKind::ChiSquare;
  AnmrrWindow window;
  std::vector<CutoffMetrics> rows;
  std::size_t records = 0;
  std::size_t queries = 0;
  std::size_t skipped_queries = 0;     // probes whose subject has no other image
  std::size_t degenerate_probes = 0;   // probes whose gallery distances are all equal
};

struct ExperimentOptions {
  std::string variant;
  DistanceKind distance = DistanceKind::ChiSquare;
  std::vector<std::size_t> cutoffs{1, 5, 10};
  AnmrrWindow window;
  std::size_t threads = 1;
};

// Leave-one-out retrieval: every record is the probe once against all
// others. `descriptors` row i belongs to manifest record i.
MetricsReport run_experiment(const DatasetManifest& manifest, const FeatureMatrix& descriptors,
                             const ExperimentOptions& options);

// Subject labels only; same protocol.
MetricsReport run_experiment(std::span<const std::string> subjects, const FeatureMatrix& descriptors,
                             const ExperimentOptions& options);

// Percentages with two decimals, one row per report x cutoff:
// variant,distance,cutoff,ARP%,ARR%,F%,ANMRR%
// With pivot=true: distance,cutoff,metric,<variant>... (variants as columns).
std::string report_csv(std::span<const MetricsReport> reports, bool pivot = false);
std::string report_json(std::span<const MetricsReport> reports);

}  // namespace faceret
