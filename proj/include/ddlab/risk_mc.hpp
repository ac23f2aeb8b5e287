#ifndef DDLAB_RISK_MC_HPP
#define DDLAB_RISK_MC_HPP

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ddlab/gauss_model.hpp"
#include "ddlab/least_squares.hpp"
#include "ddlab/risk_theory.hpp"

namespace ddlab {

/// Nested Monte Carlo: `trials` training-set draws (outer expectation over X),
/// each evaluated on `test_points` fresh draws (inner expectation).
struct McConfig {
    Eigen::Index trials = 500;
    Eigen::Index test_points = 2000;
    std::uint64_t base_seed = 0;
    /// Worker threads; 0 reads DDLAB_THREADS, and 0 there means hardware concurrency.
    unsigned threads = 0;

    void validate() const;
};

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    Eigen::Index trials = 0;
};

/// Mean and standard error (sample sd / sqrt(k)) of per-trial values,
/// summed in index order.
McEstimate summarize(const std::vector<double>& values);

/// sqrt(a.se^2 + b.se^2).
double combined_se(const McEstimate& a, const McEstimate& b);

/// Number of workers actually used for `requested` (see McConfig::threads).
unsigned resolve_threads(unsigned requested);

McEstimate mc_expected_risk(const TeacherModel& teacher, Eigen::Index n,
                            const FeatureSubset& subset, const McConfig& cfg);

McEstimate mc_ood_risk(const TeacherModel& teacher, Eigen::Index n, const FeatureSubset& subset,
                       const OodInputConfig& ood_cfg, const McConfig& cfg);

/// OOD risk of a fixed weight vector, with no training step.
McEstimate mc_ood_risk_fixed(const TeacherModel& teacher,
                             const Eigen::Ref<const Eigen::VectorXd>& w_hat,
                             const OodInputConfig& ood_cfg, const McConfig& cfg);

/// E_X ||w_hat - w*||^2.
McEstimate mc_weight_error(const TeacherModel& teacher, Eigen::Index n,
                           const FeatureSubset& subset, const McConfig& cfg);

struct RiskRecord {
    TheoryRecord theory;
    McEstimate mc_risk;
    McEstimate mc_ood;
    McEstimate mc_weight_err;

    Eigen::Index p() const { return theory.p; }
};

struct RiskCurve {
    std::vector<RiskRecord> records;
    SpectrumBounds id_spectrum;
    SpectrumBounds ood_spectrum;

    const RiskRecord& at_p(Eigen::Index p) const;
    /// p of the largest MC risk (lowest p on ties).
    Eigen::Index peak_p_risk() const;
    Eigen::Index peak_p_ood() const;
};

/// Exact spectra (1, s^2) for Identity; Monte Carlo estimates otherwise.
std::pair<SpectrumBounds, SpectrumBounds> default_spectra(const TeacherModel& teacher,
                                                          const OodInputConfig& ood_cfg,
                                                          std::uint64_t seed);

/// Theory and all three Monte Carlo estimates per subset. Trial k uses the
/// same training and test draws at every p, so the curve for a given
/// subset matches the single-subset estimators bit for bit.
RiskCurve dd_sweep(const TeacherModel& teacher, Eigen::Index n,
                   const std::vector<FeatureSubset>& schedule, const OodInputConfig& ood_cfg,
                   const McConfig& cfg,
                   std::optional<std::pair<SpectrumBounds, SpectrumBounds>> spectra = std::nullopt,
                   UnderparamForm form = UnderparamForm::AsPrinted);

}  // namespace ddlab

#endif  // DDLAB_RISK_MC_HPP
