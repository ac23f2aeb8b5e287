#include "ddlab/gauss_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ddlab {

const char* to_string(Activation a) noexcept {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Sigmoid: return "sigmoid";
    }
    return "unknown";
}

Activation parse_activation(const std::string& name) {
    if (name == "identity") return Activation::Identity;
    if (name == "sigmoid") return Activation::Sigmoid;
    throw std::invalid_argument("unknown activation '" + name + "' (expected identity|sigmoid)");
}

double activate(Activation a, double t) noexcept {
    if (a == Activation::Identity) return t;
    // Split on sign so exp never overflows.
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

double activate_derivative(Activation a, double t) noexcept {
    if (a == Activation::Identity) return 1.0;
    const double s = activate(a, t);
    return s * (1.0 - s);
}

void TeacherModel::validate() const {
    if (w_star.size() < 1) throw std::invalid_argument("TeacherModel: d must be >= 1");
    if (w_star_ood.size() != w_star.size())
        throw std::invalid_argument("TeacherModel: w_star_ood length differs from w_star");
    if (!w_star.allFinite() || !w_star_ood.allFinite())
        throw std::invalid_argument("TeacherModel: non-finite weights");
    if (!(sigma >= 0.0) || !std::isfinite(sigma))
        throw std::invalid_argument("TeacherModel: sigma must be finite and >= 0");
    if (!(sigma_prime >= 0.0) || !std::isfinite(sigma_prime))
        throw std::invalid_argument("TeacherModel: sigma_prime must be finite and >= 0");
}

TeacherModel TeacherModel::with_shared_weights(Eigen::VectorXd w, double sigma,
                                               double sigma_prime, Activation activation) {
    TeacherModel t;
    t.w_star_ood = w;
    t.w_star = std::move(w);
    t.sigma = sigma;
    t.sigma_prime = sigma_prime;
    t.activation = activation;
    t.validate();
    return t;
}

SampleSet sample_train(const TeacherModel& teacher, Eigen::Index n, Rng& rng) {
    teacher.validate();
    if (n < 1) throw std::invalid_argument("sample_train: n must be >= 1");
    SampleSet s;
    s.X.resize(n, teacher.dim());
    rng.fill_normal(s.X);
    Eigen::VectorXd noise(n);
    rng.fill_normal(noise, teacher.sigma);
    s.y = activate(teacher.activation, s.X * teacher.w_star) + noise;
    return s;
}

SampleSet sample_train(const TeacherModel& teacher, Eigen::Index n, std::uint64_t seed) {
    Rng rng(seed);
    return sample_train(teacher, n, rng);
}

Eigen::MatrixXd sample_ood_inputs(Eigen::Index d, Eigen::Index n, const OodInputConfig& cfg,
                                  Rng& rng) {
    if (n < 1 || d < 1) throw std::invalid_argument("sample_ood_inputs: n and d must be >= 1");
    if (!(cfg.scale > 0.0) || !std::isfinite(cfg.scale))
        throw std::invalid_argument("sample_ood_inputs: scale must be finite and > 0");
    Eigen::MatrixXd X(n, d);
    rng.fill_normal(X, cfg.scale);
    return X;
}

Eigen::MatrixXd sample_ood_inputs(Eigen::Index d, Eigen::Index n, const OodInputConfig& cfg,
                                  std::uint64_t seed) {
    Rng rng(seed);
    return sample_ood_inputs(d, n, cfg, rng);
}

double response_z(const Eigen::Ref<const Eigen::VectorXd>& x, const TeacherModel& teacher,
                  double noise) {
    if (x.size() != teacher.w_star_ood.size())
        throw std::invalid_argument("response_z: input length differs from teacher dimension");
    return 2.0 * activate(teacher.activation, x.dot(teacher.w_star_ood)) - 1.0 + noise;
}

SpectrumBounds estimate_sigma_spectrum(const TeacherModel& teacher, double input_scale,
                                       Eigen::Index samples, std::uint64_t seed) {
    teacher.validate();
    const Eigen::Index d = teacher.dim();
    if (samples < d) throw std::invalid_argument("estimate_sigma_spectrum: samples must be >= d");
    if (!(input_scale > 0.0)) throw std::invalid_argument("estimate_sigma_spectrum: scale must be > 0");

    constexpr Eigen::Index kBlock = 4096;
    Rng rng(seed);
    Eigen::MatrixXd moment = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd block;
    for (Eigen::Index start = 0; start < samples; start += kBlock) {
        const Eigen::Index rows = std::min(kBlock, samples - start);
        block.resize(rows, d);
        rng.fill_normal(block, input_scale);
        const Eigen::VectorXd weights = (block * teacher.w_star).unaryExpr([&](double t) {
            const double g = activate_derivative(teacher.activation, t);
            return g * g;
        });
        moment.selfadjointView<Eigen::Lower>().rankUpdate(
            (block.array().colwise() * weights.array().sqrt()).matrix().transpose());
    }
    moment = moment.selfadjointView<Eigen::Lower>();
    moment /= static_cast<double>(samples);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(moment, Eigen::EigenvaluesOnly);
    return {solver.eigenvalues().minCoeff(), solver.eigenvalues().maxCoeff()};
}

}  // namespace ddlab
