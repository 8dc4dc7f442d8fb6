#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "panelgls/diagnostics.hpp"
#include "panelgls/emit.hpp"
#include "panelgls/estimators.hpp"
#include "panelgls/harness.hpp"
#include "panelgls/linalg.hpp"
#include "panelgls/simgen.hpp"

namespace py = pybind11;
using namespace panelgls;

namespace {

PanelDesign make_design(int n, int T, const Eigen::MatrixXd& Z, const std::vector<int>& studentOf,
                        const std::vector<int>& timeOf) {
  PanelDesign d;
  d.n = n;
  d.T = T;
  d.Z = Z;
  d.studentOf = studentOf;
  d.timeOf = timeOf;
  d.validate();
  return d;
}

HeterogeneityModel make_model(const Eigen::MatrixXd& A1, const Eigen::MatrixXd& S1,
                              const Eigen::MatrixXd& Psi1) {
  HeterogeneityModel h;
  h.d = static_cast<int>(A1.cols());
  h.A1 = A1;
  h.S1 = S1;
  h.Psi1 = Psi1;
  h.validate();
  return h;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Panel estimators (OLS / FE / GLS), structured covariance inversion, "
            "bias-compression diagnostics and the Monte Carlo experiment harness.";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<PanelDesign>(m, "PanelDesign")
      .def(py::init(&make_design), py::arg("n"), py::arg("T"), py::arg("Z"), py::arg("student_of"),
           py::arg("time_of"))
      .def_readonly("n", &PanelDesign::n)
      .def_readonly("T", &PanelDesign::T)
      .def_readonly("Z", &PanelDesign::Z)
      .def_readonly("student_of", &PanelDesign::studentOf)
      .def_readonly("time_of", &PanelDesign::timeOf)
      .def_property_readonly("k", &PanelDesign::k)
      .def("balanced", &PanelDesign::balanced);

  py::class_<HeterogeneityModel>(m, "HeterogeneityModel")
      .def(py::init(&make_model), py::arg("A1"), py::arg("S1"), py::arg("Psi1"))
      .def_readonly("d", &HeterogeneityModel::d)
      .def_readonly("A1", &HeterogeneityModel::A1)
      .def_readonly("S1", &HeterogeneityModel::S1)
      .def_readonly("Psi1", &HeterogeneityModel::Psi1);

  py::class_<BlockCovariance>(m, "BlockCovariance")
      .def_readonly("R1", &BlockCovariance::R1)
      .def_readonly("R1inv", &BlockCovariance::R1inv)
      .def_readonly("source", &BlockCovariance::source);

  py::class_<ObservationMask>(m, "ObservationMask")
      .def_static("all_present", &ObservationMask::all_present, py::arg("n"), py::arg("T"))
      .def_readonly("n", &ObservationMask::n)
      .def_readonly("T", &ObservationMask::T)
      .def("at", &ObservationMask::at)
      .def("observed_indices", &ObservationMask::observed_indices);

  py::class_<ScalarVarianceComponents>(m, "ScalarVarianceComponents")
      .def(py::init([](double nu2, double sigma2) {
             ScalarVarianceComponents vc{nu2, sigma2};
             vc.validate();
             return vc;
           }),
           py::arg("nu2"), py::arg("sigma2"))
      .def_readonly("nu2", &ScalarVarianceComponents::nu2)
      .def_readonly("sigma2", &ScalarVarianceComponents::sigma2)
      .def_property_readonly("rho", &ScalarVarianceComponents::rho);

  m.def("assemble_block_covariance", &assemble_block_covariance, py::arg("model"));
  m.def("within_projection",
        py::overload_cast<const Eigen::MatrixXd&, const std::vector<int>&>(&within_projection),
        py::arg("values"), py::arg("student_of"));
  m.def(
      "subset_block",
      [](const BlockCovariance& cov, const std::vector<bool>& present) {
        const SubsetCovariance sub = subset_block(cov, present);
        return py::make_tuple(sub.indices, sub.R, sub.Rinv);
      },
      py::arg("cov"), py::arg("present"));
  m.def(
      "validate_design",
      [](const PanelDesign& d, bool withStudentIndicators) {
        const RankReport r = validate_design(d, withStudentIndicators);
        py::dict out;
        out["rank"] = r.rank;
        out["cols"] = r.cols;
        out["full_rank"] = r.fullRank;
        out["dependent_columns"] = r.dependentColumns;
        out["singular_values"] = r.singularValues;
        return out;
      },
      py::arg("design"), py::arg("with_student_indicators"));

  py::class_<EstimateResult>(m, "EstimateResult")
      .def_readonly("theta", &EstimateResult::theta)
      .def_readonly("param_cov", &EstimateResult::paramCov)
      .def_property_readonly("tag", [](const EstimateResult& r) { return to_string(r.tag); })
      .def_readonly("r_hat", &EstimateResult::rHat);

  m.def("ols", &ols, py::arg("design"), py::arg("y"));
  m.def("fixed_effects", &fixed_effects, py::arg("design"), py::arg("y"));
  m.def(
      "gamma",
      [](double rho, int T) {
        // convenience: gamma from rho directly
        ScalarVarianceComponents vc{rho, 1.0 - rho};
        const GammaResult g = gamma(vc, T);
        return py::make_tuple(g.gamma, g.gammaT);
      },
      py::arg("rho"), py::arg("T"));
  m.def(
      "gamma_from_components",
      [](const ScalarVarianceComponents& vc, int T) {
        const GammaResult g = gamma(vc, T);
        return py::make_tuple(g.gamma, g.gammaT);
      },
      py::arg("vc"), py::arg("T"));
  m.def("re_quasi_demeaned", &re_quasi_demeaned, py::arg("design"), py::arg("y"), py::arg("vc"));
  m.def(
      "gls_known_R",
      [](const PanelDesign& d, const Eigen::VectorXd& y, const BlockCovariance& cov,
         const ObservationMask* mask) { return gls_known_R(d, y, cov, mask); },
      py::arg("design"), py::arg("y"), py::arg("cov"), py::arg("mask") = nullptr);
  m.def("estimate_R_mom", &estimate_R_mom, py::arg("design"), py::arg("y"),
        py::arg("max_iter") = 50, py::arg("tol") = 1e-8);
  m.def("feasible_gls", &feasible_gls, py::arg("design"), py::arg("y"), py::arg("max_iter") = 50,
        py::arg("tol") = 1e-8);
  m.def("block_covariance_from_dense", &block_covariance_from_dense, py::arg("R"));
  m.def("class_means", &class_means, py::arg("y"), py::arg("student_of"), py::arg("grade_of"),
        py::arg("subject_of"), py::arg("class_of"), py::arg("S"));

  m.def(
      "bias_compression_matrix",
      [](const HeterogeneityModel& h) {
        const CompressionResult r = bias_compression_matrix(h);
        return py::make_tuple(r.matrix, r.maxAbs);
      },
      py::arg("model"));
  m.def(
      "theorem_condition_profile",
      [](const std::function<HeterogeneityModel(int)>& family, const std::vector<int>& Tgrid) {
        const TheoremProfile p = theorem_condition_profile(family, Tgrid);
        py::dict out;
        out["T"] = p.Tgrid;
        out["lambda_min"] = p.lambdaMin;
        out["rowsum_max"] = p.rowSumMax;
        out["compression_max"] = p.compressionMax;
        return out;
      },
      py::arg("family"), py::arg("T_grid"));
  m.def(
      "dirichlet_limit_check",
      [](const Eigen::VectorXd& omega, int T, double sigma2, std::uint64_t seed, int nMC) {
        const DirichletCheck c = dirichlet_limit_check(omega, T, sigma2, seed, nMC);
        py::dict out;
        out["sample_moment"] = c.sampleMoment;
        out["mc_moment"] = c.mcMoment;
        out["stated_limit"] = c.statedLimit;
        out["dev_from_mc"] = c.devFromMc;
        out["dev_from_stated"] = c.devFromStated;
        out["lambda_min_sample"] = c.lambdaMinSample;
        return out;
      },
      py::arg("omega"), py::arg("T"), py::arg("sigma2"), py::arg("seed"), py::arg("n_mc"));
  m.def(
      "expected_gls_bias",
      [](const PanelDesign& d, const HeterogeneityModel& h, const Eigen::VectorXd& condMean) {
        return expected_gls_bias(d, h, SelectionSpec{condMean});
      },
      py::arg("design"), py::arg("model"), py::arg("cond_mean"));
  m.def(
      "expected_gls_bias_standard",
      [](const PanelDesign& d, const ScalarVarianceComponents& vc, const Eigen::VectorXd& condMean) {
        return expected_gls_bias(d, vc, SelectionSpec{condMean});
      },
      py::arg("design"), py::arg("vc"), py::arg("cond_mean"));
  m.def("rowsum_condition", &rowsum_condition, py::arg("design"), py::arg("cov"));
  m.def(
      "lemma1_check",
      [](const Eigen::MatrixXd& B, const Eigen::MatrixXd& M, double tol) {
        const Lemma1Result r = lemma1_check(B, M, tol);
        py::dict out;
        out["lambda_min"] = r.lambdaMin;
        out["omega_min"] = r.omegaMin;
        out["psi_min"] = r.psiMin;
        out["psi_max"] = r.psiMax;
        out["lower_holds"] = r.lowerHolds;
        out["upper_holds"] = r.upperHolds;
        return out;
      },
      py::arg("B"), py::arg("M"), py::arg("tol") = 1e-9);

  py::class_<GeneratedDataset>(m, "GeneratedDataset")
      .def_readonly("y", &GeneratedDataset::y)
      .def_readonly("design", &GeneratedDataset::design)
      .def_readonly("true_theta", &GeneratedDataset::trueTheta)
      .def_readonly("delta", &GeneratedDataset::delta)
      .def_readonly("truth", &GeneratedDataset::truth)
      .def_readonly("treatment", &GeneratedDataset::treatment)
      .def_readonly("class_of", &GeneratedDataset::classOf)
      .def_readonly("grade_of", &GeneratedDataset::gradeOf)
      .def_readonly("subject_of", &GeneratedDataset::subjectOf)
      .def_readonly("G", &GeneratedDataset::G)
      .def_readonly("S", &GeneratedDataset::S);

  m.def(
      "gen_example1",
      [](int scenario, int T, int n, std::uint64_t seed) {
        Example1Config cfg;
        cfg.scenario = scenario;
        cfg.T = T;
        cfg.n = n;
        cfg.seed = seed;
        return gen_example1(cfg);
      },
      py::arg("scenario"), py::arg("T"), py::arg("n") = 1000, py::arg("seed") = 0);
  m.def(
      "gen_example2",
      [](int scenario, int T, int n, std::uint64_t seed) {
        Example2Config cfg;
        cfg.scenario = scenario;
        cfg.T = T;
        cfg.n = n;
        cfg.seed = seed;
        return gen_example2(cfg);
      },
      py::arg("scenario"), py::arg("T"), py::arg("n") = 1000, py::arg("seed") = 0);
  m.def(
      "gen_teacher_scores",
      [](int S, double alpha, int n, std::uint64_t seed) {
        TeacherSimConfig cfg;
        cfg.S = S;
        cfg.alpha = alpha;
        cfg.n = n;
        cfg.seed = seed;
        return gen_teacher_scores(cfg);
      },
      py::arg("S"), py::arg("alpha"), py::arg("n") = 1000, py::arg("seed") = 0);
  m.def("build_persistence_design", &build_persistence_design, py::arg("class_of"),
        py::arg("alpha"), py::arg("G"), py::arg("S"));
  m.def("apply_mar_mask", &apply_mar_mask, py::arg("dataset"), py::arg("rate"), py::arg("seed"));
  m.def("write_scores_csv", &write_scores_csv, py::arg("dataset"), py::arg("path"));
  m.def("write_design_csv", &write_design_csv, py::arg("dataset"), py::arg("path"));

  m.def("parse_config", &parse_config, py::arg("path"));
  m.def("parse_config_text", &parse_config_text, py::arg("text"));
  m.def(
      "run_experiment",
      [](const std::string& configText, int threads) {
        const ExperimentConfig cfg = parse_config_text(configText);
        const McSummary s = run_experiment(cfg, threads);
        return summary_to_csv(s);
      },
      py::arg("config_text"), py::arg("threads") = 1,
      "Runs the configured experiment and returns the summary CSV text.");
  m.def(
      "run_diagnostics",
      [](const std::string& configText) {
        const McSummary s = run_diagnostics(parse_config_text(configText));
        return summary_to_csv(s);
      },
      py::arg("config_text"));
  m.def("metric_standardized_abs_bias", &metric_standardized_abs_bias, py::arg("estimates"),
        py::arg("true_theta"), py::arg("standardizer"));
  m.def("metric_teacher_variance_fraction", &metric_teacher_variance_fraction,
        py::arg("estimates"), py::arg("grade"), py::arg("n_classes"), py::arg("S"),
        py::arg("marginal_var"));
}
