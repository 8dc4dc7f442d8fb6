#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "helpers.hpp"
#include "panelgls/emit.hpp"
#include "panelgls/harness.hpp"

using namespace panelgls;

TEST_CASE("standardized absolute bias metric") {
  Eigen::VectorXd est(2), truth(2);
  est << 0.1, -0.3;
  truth << 0.0, 0.0;
  CHECK(metric_standardized_abs_bias(est, truth, 1.0) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(metric_standardized_abs_bias(truth, truth, 2.0) == 0.0);
  CHECK_THROWS_AS(metric_standardized_abs_bias(est, truth, 0.0), ValidationError);
}

TEST_CASE("teacher variance fraction metric") {
  // 2 teachers, 1 grade, 1 subject
  Eigen::VectorXd est(2);
  est << -1.0, 1.0;
  CHECK(metric_teacher_variance_fraction(est, 0, 2, 1, 2.0) == doctest::Approx(1.0).epsilon(1e-12));
  const Eigen::VectorXd equal = Eigen::VectorXd::Constant(2, 0.7);
  CHECK(metric_teacher_variance_fraction(equal, 0, 2, 1, 2.0) == 0.0);
  CHECK(metric_teacher_variance_fraction(Eigen::VectorXd::Zero(2), 0, 2, 1, 2.0) == 0.0);
  CHECK_THROWS_AS(metric_teacher_variance_fraction(est, 0, 1, 1, 2.0), ValidationError);
}

TEST_CASE("config parsing: defaults, overrides, unknown keys, round trip") {
  SUBCASE("minimal example2 file fills the paper defaults") {
    const ExperimentConfig cfg = parse_config_text("experiment = example2\n");
    CHECK(cfg.experiment == ExperimentKind::Example2);
    CHECK(cfg.Tgrid.size() == 19);  // 2..20
    CHECK(cfg.Tgrid.front() == 2);
    CHECK(cfg.Tgrid.back() == 20);
    CHECK(cfg.reps == 100);
    CHECK(cfg.n == 1000);
    CHECK(cfg.scenarios == std::vector<int>{1, 2, 3});
    CHECK(cfg.estimators ==
          std::vector<std::string>{"OLS", "GLS-known", "GLS-feasible"});
  }

  SUBCASE("reps = 0 is rejected") {
    CHECK_THROWS_WITH_AS(parse_config_text("experiment = example2\nreps = 0\n"),
                         doctest::Contains("reps"), ValidationError);
  }

  SUBCASE("unknown keys are listed") {
    CHECK_THROWS_WITH_AS(parse_config_text("experiment = example1\nfoo = 1\nbar = 2\n"),
                         doctest::Contains("foo"), ValidationError);
  }

  SUBCASE("inapplicable estimator is a validation error") {
    CHECK_THROWS_WITH_AS(parse_config_text("experiment = example1\nestimators = class_means\n"),
                         doctest::Contains("class-means"), ValidationError);
    CHECK_THROWS_AS(parse_config_text("experiment = example2\nestimators = re_quasi\n"),
                    ValidationError);
  }

  SUBCASE("serialized config parses back to an equal value") {
    ExperimentConfig cfg = default_config(ExperimentKind::Example3);
    cfg.reps = 7;
    cfg.baseSeed = 987654321;
    cfg.alphas = {0.0, 0.25, 1.0};
    cfg.outputDir = "somewhere/else";
    const ExperimentConfig back = parse_config_text(serialize_config(cfg));
    CHECK(back == cfg);
  }

  SUBCASE("comments and T ranges are accepted") {
    const ExperimentConfig cfg = parse_config_text(
        "# comment line\nexperiment = example1\nT = 3..5,10  # trailing comment\n");
    CHECK(cfg.Tgrid == std::vector<int>{3, 4, 5, 10});
  }
}

TEST_CASE("run_experiment: determinism, coverage, thread independence") {
  ExperimentConfig cfg = default_config(ExperimentKind::Example1);
  cfg.scenarios = {1, 2};
  cfg.Tgrid = {3, 4};
  cfg.reps = 4;
  cfg.n = 120;
  cfg.baseSeed = 555;

  const McSummary a = run_experiment(cfg, 1);
  const McSummary b = run_experiment(cfg, 2);
  CHECK(summary_to_csv(a) == summary_to_csv(b));

  SUBCASE("every grid point appears exactly once per estimator") {
    std::set<std::string> seen;
    for (const McCell& c : a.cells) {
      const std::string key = c.scenario + "/" + std::to_string(c.tOrGrade) + "/" + c.estimator;
      CHECK(seen.insert(key).second);
    }
    CHECK(a.cells.size() == 2 * 2 * cfg.estimators.size());
  }

  SUBCASE("rerun is bit-identical") {
    const McSummary c = run_experiment(cfg, 2);
    CHECK(summary_to_csv(b) == summary_to_csv(c));
  }
}

TEST_CASE("run_experiment: standard errors shrink like 1/sqrt(reps)") {
  ExperimentConfig cfg = default_config(ExperimentKind::Example2);
  cfg.scenarios = {1};
  cfg.Tgrid = {5};
  cfg.n = 1000;
  cfg.baseSeed = 31337;
  cfg.estimators = {"OLS", "GLS-known"};

  double se25 = 0, se100 = 0, se400 = 0;
  for (int reps : {25, 100, 400}) {
    cfg.reps = reps;
    const McSummary s = run_experiment(cfg, 2);
    for (const McCell& c : s.cells)
      if (c.estimator == "GLS-known") {
        if (reps == 25) se25 = c.stderr_;
        if (reps == 100) se100 = c.stderr_;
        if (reps == 400) se400 = c.stderr_;
      }
  }
  CHECK(se25 / se100 == doctest::Approx(2.0).epsilon(0.30));
  CHECK(se100 / se400 == doctest::Approx(2.0).epsilon(0.30));
}

TEST_CASE("replication seeds are independent of worker scheduling by construction") {
  CHECK(replication_seed(1, 0, 0) != replication_seed(1, 0, 1));
  CHECK(replication_seed(1, 0, 0) != replication_seed(1, 1, 0));
  CHECK(replication_seed(1, 2, 3) == replication_seed(1, 2, 3));
  CHECK(replication_seed(2, 2, 3) != replication_seed(1, 2, 3));
}

TEST_CASE("csv emission: empty summary, round trip, files on disk") {
  SUBCASE("empty grid gives a header-only CSV") {
    McSummary empty;
    empty.experiment = "example1";
    CHECK(summary_to_csv(empty) == "experiment,scenario,T,estimator,metric,value,stderr,reps\n");
  }

  SUBCASE("re-parsed CSV equals the summary to full precision") {
    McSummary s;
    s.experiment = "example2";
    s.cells.push_back({"1", 5, "OLS", "std_abs_bias", 0.123456789012345678, 0.001, 100});
    s.cells.push_back({"2", 10, "GLS-known", "std_abs_bias", 1.0 / 3.0, 2.0 / 7.0, 100});
    const McSummary back = parse_summary_csv(summary_to_csv(s));
    REQUIRE(back.cells.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(back.cells[i].value == s.cells[i].value);
      CHECK(back.cells[i].stderr_ == s.cells[i].stderr_);
      CHECK(back.cells[i].scenario == s.cells[i].scenario);
      CHECK(back.cells[i].tOrGrade == s.cells[i].tOrGrade);
      CHECK(back.cells[i].estimator == s.cells[i].estimator);
      CHECK(back.cells[i].metric == s.cells[i].metric);
      CHECK(back.cells[i].reps == s.cells[i].reps);
    }
  }

  SUBCASE("emit_outputs writes csv and svg") {
    namespace fs = std::filesystem;
    McSummary s;
    s.experiment = "example1";
    for (int T : {3, 5, 10})
      for (const char* est : {"OLS", "GLS-known"})
        s.cells.push_back({"2", T, est, "std_abs_bias", 0.01 * T, 0.001, 4});
    const fs::path dir = fs::temp_directory_path() / "panelgls_test_emit";
    fs::remove_all(dir);
    const std::vector<std::string> written = emit_outputs(s, dir.string());
    REQUIRE(written.size() == 2);
    std::ifstream svg(written[1]);
    std::string all((std::istreambuf_iterator<char>(svg)), std::istreambuf_iterator<char>());
    CHECK(all.find("<svg") != std::string::npos);
    CHECK(all.find("polyline") != std::string::npos);
    fs::remove_all(dir);
  }
}

TEST_CASE("run_diagnostics: families, rowsum metrics, determinism") {
  ExperimentConfig cfg = default_config(ExperimentKind::Diagnostics);
  cfg.Tgrid = {3, 5, 10};
  const McSummary s = run_diagnostics(cfg);
  bool sawStandard = false, sawRamp = false, sawGrowth = false, sawDirichlet = false, sawLemma = false;
  for (const McCell& c : s.cells) {
    sawStandard = sawStandard || c.scenario == "standard";
    sawRamp = sawRamp || c.scenario == "ramp";
    sawGrowth = sawGrowth || c.scenario == "linear-growth";
    sawDirichlet = sawDirichlet || c.scenario == "dirichlet";
    sawLemma = sawLemma || c.scenario == "lemma1";
    if (c.scenario == "lemma1") CHECK(c.value == 1.0);
  }
  CHECK(sawStandard);
  CHECK(sawRamp);
  CHECK(sawGrowth);
  CHECK(sawDirichlet);
  CHECK(sawLemma);

  ExperimentConfig e1 = default_config(ExperimentKind::Example1);
  e1.scenarios = {1, 2};
  e1.Tgrid = {3, 5};
  e1.n = 150;
  const McSummary d1 = run_diagnostics(e1);
  int rowsumCells = 0;
  for (const McCell& c : d1.cells)
    if (c.metric == "rowsum_max_treatment") ++rowsumCells;
  CHECK(rowsumCells == 4);
  CHECK(summary_to_csv(run_diagnostics(e1)) == summary_to_csv(d1));
}
