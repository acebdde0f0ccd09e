#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "faceret/error.hpp"
#include "faceret/evaluation.hpp"
#include "faceret/synthetic.hpp"

using namespace faceret;

namespace {

std::vector<std::size_t> iota_vec(std::size_t from, std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = from + i;
  return v;
}

// MPEG-7 NMRR written directly from the definition.
double nmrr_oracle(const std::vector<std::size_t>& ranks_of_relevant, std::size_t ng, std::size_t gtm,
                   std::size_t window) {
  const double K = std::min(4 * ng, 2 * gtm);
  const double limit = std::min<double>(K, double(window));
  double sum = 0;
  for (std::size_t k = 0; k < ng; ++k) {
    const double r = k < ranks_of_relevant.size() ? double(ranks_of_relevant[k]) : 1e300;
    sum += r <= limit ? r : 1.25 * K;
  }
  const double avr = sum / double(ng);
  return (avr - 0.5 - 0.5 * double(ng)) / (1.25 * K - 0.5 - 0.5 * double(ng));
}

}  // namespace

TEST_CASE("precision and recall examples") {
  std::vector<std::size_t> retrieved = iota_vec(0, 10);
  std::vector<std::size_t> relevant = {0, 1, 2, 3, 4, 5, 6};
  for (std::size_t i = 100; i < 113; ++i) relevant.push_back(i);
  auto pr = precision_recall(retrieved, relevant, 10);
  REQUIRE(pr);
  CHECK(pr->precision == doctest::Approx(0.7));
  CHECK(pr->recall == doctest::Approx(0.35));

  pr = precision_recall(retrieved, iota_vec(0, 20), 5);
  CHECK(pr->precision == 1.0);
  pr = precision_recall(retrieved, iota_vec(50, 3), 10);
  CHECK(pr->precision == 0.0);
  CHECK(pr->recall == 0.0);
  CHECK_FALSE(precision_recall(retrieved, {}, 3).has_value());
  // Fewer retrieved items than the cutoff: the denominator is what was retrieved.
  pr = precision_recall(iota_vec(0, 2), iota_vec(0, 2), 10);
  CHECK(pr->precision == 1.0);
  CHECK(pr->recall == 1.0);
}

TEST_CASE("aggregate averages per subject first") {
  std::vector<SubjectQueries> subjects{
      {"a", {{1.0, 1.0}}},
      {"b", {{0.5, 0.2}, {0.5, 0.2}, {0.5, 0.2}, {0.5, 0.2}}},
  };
  const Aggregate agg = aggregate(subjects);
  CHECK(agg.arp == doctest::Approx(0.75));
  CHECK(agg.arr == doctest::Approx(0.6));
  CHECK(agg.subjects[1].queries == 4);
  // A flat mean would give 0.6 here.
  CHECK(agg.arp != doctest::Approx(0.6));

  const std::vector<SubjectQueries> single{{"only", {{0.4, 0.1}, {0.6, 0.3}}}};
  CHECK(aggregate(single).arp == doctest::Approx(0.5));
}

TEST_CASE("f score") {
  CHECK(f_score(0.6, 0.6) == doctest::Approx(0.6));
  CHECK(f_score(0.8, 0.2) == doctest::Approx(0.32));
  CHECK(f_score(0.0, 0.0) == 0.0);
}

TEST_CASE("anmrr anchors") {
  std::vector<AnmrrQuery> perfect{{{1, 2, 3}, 3}, {{1}, 1}};
  CHECK(anmrr(perfect) == 0.0);
  std::vector<AnmrrQuery> miss{{{}, 3}, {{}, 1}};
  CHECK(anmrr(miss) == 1.0);
  std::vector<AnmrrQuery> mixed{{{1, 3}, 2}};
  CHECK(anmrr(mixed) == doctest::Approx(0.5 / 3.5).epsilon(1e-9));
  CHECK(std::abs(nmrr({{1, 3}, 2}, 2, std::nullopt) - 0.142857) <= 1e-6);
  CHECK(anmrr_k(2, 2) == 4);
  CHECK(anmrr_k(1, 10) == 4);
  CHECK(anmrr_k(63, 63) == 126);
}

TEST_CASE("anmrr window and ranks agree with the oracle") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t ng = 1 + rng() % 8;
    const std::size_t gtm = ng + rng() % 5;
    const std::size_t window = 1 + rng() % 40;
    std::vector<std::size_t> ranks;
    std::size_t r = 0;
    for (std::size_t k = 0; k < ng; ++k) {
      r += 1 + rng() % 6;
      ranks.push_back(r);
    }
    const double got = nmrr({ranks, ng}, gtm, window);
    CHECK(got == doctest::Approx(nmrr_oracle(ranks, ng, gtm, window)).epsilon(1e-12));
    CHECK(got >= 0.0);
    CHECK(got <= 1.0);
  }
}

TEST_CASE("anmrr_query reads ranks from a ranking") {
  const std::vector<std::size_t> ranking{7, 3, 9, 1};
  const std::vector<std::size_t> relevant{1, 7, 42};
  const AnmrrQuery q = anmrr_query(ranking, relevant);
  CHECK(q.ng == 3);
  CHECK(q.relevant_ranks == std::vector<std::size_t>{1, 4});
}

TEST_CASE("anmrr window text form") {
  CHECK(AnmrrWindow::parse("none").window_for(5) == std::nullopt);
  CHECK(AnmrrWindow::parse("cutoff").window_for(5) == 5u);
  CHECK(AnmrrWindow::parse("10").window_for(5) == 10u);
  CHECK(AnmrrWindow::parse("10").to_string() == "10");
  CHECK_THROWS_AS(AnmrrWindow::parse("0"), Error);
  CHECK_THROWS_AS(AnmrrWindow::parse("ten"), Error);
}

TEST_CASE("two tight clusters retrieve perfectly") {
  const std::vector<std::string> subjects{"a", "a", "a", "b", "b", "b"};
  const FeatureMatrix m(6, 2, {1.0f, 0.0f, 1.1f, 0.0f, 0.9f, 0.05f, 0.0f, 1.0f, 0.02f, 1.1f, 0.0f, 0.95f});
  ExperimentOptions opt;
  opt.cutoffs = {1, 2};
  const MetricsReport r = run_experiment(subjects, m, opt);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].arp == 1.0);
  CHECK(r.rows[1].arp == 1.0);
  CHECK(r.rows[1].arr == 1.0);
  CHECK(r.rows[1].anmrr == 0.0);
  CHECK(r.queries == 6);
  CHECK(r.degenerate_probes == 0);
}

TEST_CASE("one subject with two images") {
  const std::vector<std::string> subjects{"x", "x"};
  const MetricsReport r = run_experiment(subjects, FeatureMatrix(2, 1, {1, 5}), {});
  CHECK(r.rows[0].arp == 1.0);
}

TEST_CASE("identical descriptors are flagged degenerate") {
  const std::vector<std::string> subjects{"a", "b", "a", "b"};
  const MetricsReport r = run_experiment(subjects, FeatureMatrix(4, 2, std::vector<float>(8, 1.0f)), {});
  CHECK(r.degenerate_probes == 4);
  // Tie-break by index: the top match is row 1 for probe 0 and row 0 for the
  // others, so only probe 2 hits. MP(a) = 0.5, MP(b) = 0.
  CHECK(r.rows[0].arp == doctest::Approx(0.25));
}

TEST_CASE("single-image subjects are skipped") {
  const std::vector<std::string> subjects{"a", "a", "lonely"};
  const MetricsReport r = run_experiment(subjects, FeatureMatrix(3, 1, {1, 1.1f, 9}), {});
  CHECK(r.skipped_queries == 1);
  CHECK(r.queries == 2);
  CHECK(r.rows[0].subjects.size() == 1);
}

TEST_CASE("metrics do not depend on record order or thread count") {
  const ClusterFixture fx = gaussian_clusters(5, 6, 12, 1.5, 0.6, 99);
  ExperimentOptions opt;
  opt.cutoffs = {1, 3, 5, 10};
  const MetricsReport base = run_experiment(fx.subjects, fx.descriptors, opt);

  std::vector<std::size_t> perm(fx.subjects.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(4));
  std::vector<std::string> subjects;
  FeatureMatrix m(perm.size(), fx.descriptors.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    subjects.push_back(fx.subjects[perm[i]]);
    std::copy(fx.descriptors.row(perm[i]).begin(), fx.descriptors.row(perm[i]).end(), m.row(i).begin());
  }
  opt.threads = 7;
  const MetricsReport shuffled = run_experiment(subjects, m, opt);
  for (std::size_t k = 0; k < base.rows.size(); ++k) {
    CHECK(shuffled.rows[k].arp == doctest::Approx(base.rows[k].arp).epsilon(1e-12));
    CHECK(shuffled.rows[k].arr == doctest::Approx(base.rows[k].arr).epsilon(1e-12));
    CHECK(shuffled.rows[k].anmrr == doctest::Approx(base.rows[k].anmrr).epsilon(1e-12));
  }
  std::vector<MetricsReport> a{base};
  opt.threads = 1;
  std::vector<MetricsReport> b{run_experiment(fx.subjects, fx.descriptors, opt)};
  CHECK(report_csv(a) == report_csv(b));
}

TEST_CASE("recall reaches one at the class size under perfect retrieval") {
  const ClusterFixture fx = gaussian_clusters(3, 5, 4, 20.0, 0.05, 1);
  ExperimentOptions opt;
  opt.cutoffs = {1, 4};
  const MetricsReport r = run_experiment(fx.subjects, fx.descriptors, opt);
  CHECK(r.rows[0].arp == 1.0);
  CHECK(r.rows[1].arp == 1.0);
  CHECK(r.rows[1].arr == 1.0);
  CHECK(r.rows[0].arp >= r.rows[1].arp);
}

TEST_CASE("report csv layout") {
  const std::vector<std::string> subjects{"a", "a", "b", "b"};
  ExperimentOptions opt;
  opt.variant = "35R";
  opt.cutoffs = {1};
  std::vector<MetricsReport> reports{run_experiment(subjects, FeatureMatrix(4, 1, {1, 1.1f, 5, 5.2f}), opt)};
  CHECK(report_csv(reports) == "variant,distance,cutoff,ARP%,ARR%,F%,ANMRR%\n35R,chisq,1,100.00,100.00,100.00,0.00\n");
  opt.variant = "35AR";
  reports.push_back(run_experiment(subjects, FeatureMatrix(4, 1, {1, 5, 1.1f, 5.2f}), opt));
  const std::string pivot = report_csv(reports, true);
  CHECK(pivot.rfind("distance,cutoff,metric,35R,35AR\n", 0) == 0);
  CHECK(pivot.find("chisq,1,ARP%,100.00,0.00\n") != std::string::npos);
  const std::string json = report_json(reports);
  CHECK(json.find("\"variant\": \"35AR\"") != std::string::npos);
}

TEST_CASE("manifest parsing") {
  const auto m = DatasetManifest::from_json(R"([{"path":"a.png","subject":"s1"},{"path":"/abs/b.png","subject":7}])",
                                            "/data");
  CHECK(m.records[0].path == "/data/a.png");
  CHECK(m.records[1].path == "/abs/b.png");
  CHECK(m.records[1].subject == "7");
  CHECK_FALSE(m.uses_descriptor_rows());

  const auto d = DatasetManifest::from_json(R"([{"descriptor":0,"subject":"a"},{"descriptor":1,"subject":"a"}])");
  CHECK(d.uses_descriptor_rows());

  auto kind = [](const char* text) {
    try {
      DatasetManifest::from_json(text);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Internal;
  };
  CHECK(kind("[]") == ErrorKind::Usage);
  CHECK(kind(R"([{"path":"a","subject":"s"}])") == ErrorKind::Validation);
  CHECK(kind(R"([{"path":"a","subject":"s"},{"descriptor":1,"subject":"s"}])") == ErrorKind::Format);
  CHECK(kind(R"([{"path":"a","descriptor":0,"subject":"s"},{"path":"b","subject":"s"}])") != ErrorKind::Internal);
  CHECK(kind(R"([{"path":"a"},{"path":"b","subject":"s"}])") != ErrorKind::Internal);
  CHECK(kind("{nope") != ErrorKind::Internal);

  ExperimentOptions opt;
  CHECK_THROWS_AS(run_experiment(d, FeatureMatrix(1, 2), opt), Error);
  CHECK_NOTHROW(run_experiment(d, FeatureMatrix(2, 2, {1, 2, 3, 4}), opt));
}
