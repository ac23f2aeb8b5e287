#include "ddlab/risk_theory.hpp"

#include <charconv>
#include <stdexcept>

namespace ddlab {

std::string format_ext(ExtReal x) {
    if (x.is_infinite()) return "inf";
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x.value());
    return std::string(buf, end);
}

const char* to_string(BoundConvention c) noexcept {
    return c == BoundConvention::ProofConsistent ? "proof" : "paper";
}

const char* to_string(UnderparamForm f) noexcept {
    return f == UnderparamForm::AsPrinted ? "printed" : "wishart";
}

SubsetNorms subset_norms(const Eigen::Ref<const Eigen::VectorXd>& w, const FeatureSubset& subset) {
    if (w.size() != subset.dim())
        throw std::invalid_argument("subset_norms: weight length differs from subset dimension");
    SubsetNorms out;
    for (Eigen::Index j = 0; j < w.size(); ++j) {
        if (subset.contains(j))
            out.w_t_norm2 += w(j) * w(j);
        else
            out.w_tc_norm2 += w(j) * w(j);
    }
    return out;
}

ExtReal c_factor(Eigen::Index n, Eigen::Index p, double sigma, const SubsetNorms& norms,
                 UnderparamForm form) {
    if (n < 1 || p < 1) throw std::invalid_argument("c_factor: need n >= 1 and p >= 1");
    if (!(sigma >= 0.0)) throw std::invalid_argument("c_factor: sigma must be >= 0");
    if (!(norms.w_t_norm2 >= 0.0) || !(norms.w_tc_norm2 >= 0.0))
        throw std::invalid_argument("c_factor: norms must be >= 0");

    const double nd = static_cast<double>(n);
    const double pd = static_cast<double>(p);
    const double noise = norms.w_tc_norm2 + sigma * sigma;
    if (p <= n - 2) {
        const double numer = (form == UnderparamForm::AsPrinted) ? nd : pd;
        return numer / (nd - pd - 1.0) * noise + norms.w_tc_norm2;
    }
    if (p <= n + 1) return ExtReal::infinity();
    return (1.0 - nd / pd) * norms.w_t_norm2 + nd / (pd - nd - 1.0) * noise + norms.w_tc_norm2;
}

BoundInterval risk_bounds(ExtReal c, const SpectrumBounds& spectrum, double sigma) {
    spectrum.validate();
    const double floor = sigma * sigma;
    return BoundInterval::make(spectrum.lambda_min * c + floor, spectrum.lambda_max * c + floor);
}

namespace {

std::pair<ExtReal, ExtReal> ood_ends(ExtReal c, const SpectrumBounds& id_spec,
                                     const SpectrumBounds& ood_spec, double sigma_prime,
                                     BoundConvention convention) {
    id_spec.validate();
    ood_spec.validate();
    const double s2 = sigma_prime * sigma_prime;
    const double lo_lambda = id_spec.lambda_min + ood_spec.lambda_min;
    const double hi_lambda = id_spec.lambda_max + ood_spec.lambda_max;
    if (convention == BoundConvention::ProofConsistent)
        return {4.0 * lo_lambda * c + 2.0 * s2, 4.0 * hi_lambda * c + 2.0 * s2};
    return {lo_lambda * c + 2.0 * s2, hi_lambda * c + s2};
}

}  // namespace

BoundInterval ood_risk_bounds(ExtReal c, const SpectrumBounds& id_spec,
                              const SpectrumBounds& ood_spec, double sigma_prime,
                              BoundConvention convention) {
    auto [lo, hi] = ood_ends(c, id_spec, ood_spec, sigma_prime, convention);
    return BoundInterval::make(lo, hi);
}

TheoryCurve theory_sweep(const TeacherModel& teacher, const std::vector<FeatureSubset>& schedule,
                         Eigen::Index n,
                         const std::pair<SpectrumBounds, SpectrumBounds>& spectra,
                         double sigma_prime, UnderparamForm form) {
    teacher.validate();
    TheoryCurve curve;
    curve.reserve(schedule.size());
    for (const auto& subset : schedule) {
        if (subset.dim() != teacher.dim())
            throw std::invalid_argument("theory_sweep: subset dimension differs from teacher");
        if (!curve.empty() && subset.size() <= curve.back().p)
            throw std::invalid_argument("theory_sweep: schedule must be strictly increasing in p");

        TheoryRecord rec;
        rec.p = subset.size();
        rec.norms = subset_norms(teacher.w_star, subset);
        rec.c = c_factor(n, rec.p, teacher.sigma, rec.norms, form);
        rec.c_sigma_prime = c_factor(n, rec.p, sigma_prime, rec.norms, form);
        rec.risk = risk_bounds(rec.c, spectra.first, teacher.sigma);
        rec.ood_proof = ood_risk_bounds(rec.c, spectra.first, spectra.second, sigma_prime,
                                        BoundConvention::ProofConsistent);
        std::tie(rec.ood_paper_lo, rec.ood_paper_hi) =
            ood_ends(rec.c_sigma_prime, spectra.first, spectra.second, sigma_prime,
                     BoundConvention::PaperLiteral);
        curve.push_back(rec);
    }
    return curve;
}

std::vector<FeatureSubset> prefix_schedule(Eigen::Index p_min, Eigen::Index p_max, Eigen::Index d) {
    if (p_min < 1 || p_max < p_min || p_max > d)
        throw std::invalid_argument("prefix_schedule: need 1 <= p_min <= p_max <= d");
    std::vector<FeatureSubset> out;
    out.reserve(static_cast<std::size_t>(p_max - p_min + 1));
    for (Eigen::Index p = p_min; p <= p_max; ++p) out.push_back(FeatureSubset::prefix(p, d));
    return out;
}

}  // namespace ddlab
