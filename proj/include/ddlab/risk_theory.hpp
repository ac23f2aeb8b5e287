#ifndef DDLAB_RISK_THEORY_HPP
#define DDLAB_RISK_THEORY_HPP

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ddlab/bounds.hpp"
#include "ddlab/gauss_model.hpp"
#include "ddlab/least_squares.hpp"

namespace ddlab {

/// Squared norms of the teacher weights on a subset T and on its complement.
struct SubsetNorms {
    double w_t_norm2 = 0.0;
    double w_tc_norm2 = 0.0;
};

SubsetNorms subset_norms(const Eigen::Ref<const Eigen::VectorXd>& w, const FeatureSubset& subset);

/// Coefficient of the underparameterized (p <= n-2) variance term of c.
///   AsPrinted:      n / (n - p - 1)
///   InverseWishart: p / (n - p - 1)  (trace of E[(X_T^T X_T)^-1] for Gaussian X_T)
/// The overparameterized case is n / (p - n - 1) in both forms.
enum class UnderparamForm { AsPrinted, InverseWishart };

/// Additive-term convention for the OOD sandwich.
///   ProofConsistent: (4 (l + l_ood) c + 2 s'^2) on both ends.
///   PaperLiteral:    lower (l_min + l_min_ood) c + 2 s'^2, upper (l_max + l_max_ood) c + s'^2.
enum class BoundConvention { ProofConsistent, PaperLiteral };

const char* to_string(BoundConvention c) noexcept;
const char* to_string(UnderparamForm f) noexcept;

/// Risk factor c(n, p, sigma):
///   p <= n-2       : k(n,p) (|w_Tc|^2 + sigma^2) + |w_Tc|^2, k from `form`
///   n-1 <= p <= n+1: +inf
///   p >= n+2       : (1 - n/p) |w_T|^2 + n/(p-n-1) (|w_Tc|^2 + sigma^2) + |w_Tc|^2
ExtReal c_factor(Eigen::Index n, Eigen::Index p, double sigma, const SubsetNorms& norms,
                 UnderparamForm form = UnderparamForm::AsPrinted);

/// [l_min c + sigma^2, l_max c + sigma^2].
BoundInterval risk_bounds(ExtReal c, const SpectrumBounds& spectrum, double sigma);

/// OOD-risk sandwich under `convention`. Throws InvertedBounds when the
/// selected form yields lo > hi (PaperLiteral with small c).
BoundInterval ood_risk_bounds(ExtReal c, const SpectrumBounds& id_spec,
                              const SpectrumBounds& ood_spec, double sigma_prime,
                              BoundConvention convention);

struct TheoryRecord {
    Eigen::Index p = 0;
    SubsetNorms norms;
    ExtReal c;              // c(n, p, sigma), training noise
    ExtReal c_sigma_prime;  // c(n, p, sigma'), as the OOD statement prints it
    BoundInterval risk;
    BoundInterval ood_proof;  // ProofConsistent, built on c
    ExtReal ood_paper_lo;     // PaperLiteral, built on c_sigma_prime
    ExtReal ood_paper_hi;
    bool paper_inverted() const { return ood_paper_hi < ood_paper_lo; }
};

using TheoryCurve = std::vector<TheoryRecord>;

/// One record per subset, in schedule order. The schedule must be strictly
/// increasing in p.
TheoryCurve theory_sweep(const TeacherModel& teacher, const std::vector<FeatureSubset>& schedule,
                         Eigen::Index n,
                         const std::pair<SpectrumBounds, SpectrumBounds>& spectra,
                         double sigma_prime, UnderparamForm form = UnderparamForm::AsPrinted);

/// Nested prefixes {0..p-1} for p = p_min..p_max.
std::vector<FeatureSubset> prefix_schedule(Eigen::Index p_min, Eigen::Index p_max, Eigen::Index d);

}  // namespace ddlab

#endif  // DDLAB_RISK_THEORY_HPP
