#ifndef DDLAB_GAUSS_MODEL_HPP
#define DDLAB_GAUSS_MODEL_HPP

#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "ddlab/bounds.hpp"
#include "ddlab/rng.hpp"

namespace ddlab {

enum class Activation { Identity, Sigmoid };

const char* to_string(Activation a) noexcept;
/// Parses "identity" / "sigmoid"; throws std::invalid_argument otherwise.
Activation parse_activation(const std::string& name);

/// phi(t): t for Identity, 1 / (1 + exp(-t)) for Sigmoid.
double activate(Activation a, double t) noexcept;
/// phi'(t): 1 for Identity, phi(t)(1 - phi(t)) for Sigmoid.
double activate_derivative(Activation a, double t) noexcept;

template <typename Derived>
Eigen::VectorXd activate(Activation a, const Eigen::MatrixBase<Derived>& t) {
    if (a == Activation::Identity) return t;
    return t.unaryExpr([](double v) { return activate(Activation::Sigmoid, v); });
}

/// Ground truth of the Gaussian covariate model: y = phi(x^T w*) + eps,
/// eps ~ N(0, sigma^2), and the OOD confidence target
/// z = 2 phi(x^T w*_ood) - 1 + eps', eps' ~ N(0, sigma_prime^2).
struct TeacherModel {
    Eigen::VectorXd w_star;
    Eigen::VectorXd w_star_ood;
    double sigma = 1.0;
    double sigma_prime = 1.0;
    Activation activation = Activation::Identity;

    Eigen::Index dim() const noexcept { return w_star.size(); }

    /// Throws std::invalid_argument on empty or mismatched weights, negative
    /// or non-finite noise levels. A zero noise level is accepted.
    void validate() const;

    /// Teacher whose OOD weights equal the training weights.
    static TeacherModel with_shared_weights(Eigen::VectorXd w, double sigma,
                                            double sigma_prime,
                                            Activation activation);
};

/// OOD inputs are drawn as scale * N(0, I_d); scale = 1 is the ID input law.
struct OodInputConfig {
    double scale = 1.0;
};

struct SampleSet {
    Eigen::MatrixXd X;  // row per sample
    Eigen::VectorXd y;

    Eigen::Index size() const noexcept { return X.rows(); }
};

SampleSet sample_train(const TeacherModel& teacher, Eigen::Index n, std::uint64_t seed);
/// Draws X row by row, then the n noise values, from `rng`.
SampleSet sample_train(const TeacherModel& teacher, Eigen::Index n, Rng& rng);

Eigen::MatrixXd sample_ood_inputs(Eigen::Index d, Eigen::Index n, const OodInputConfig& cfg,
                                  std::uint64_t seed);
Eigen::MatrixXd sample_ood_inputs(Eigen::Index d, Eigen::Index n, const OodInputConfig& cfg,
                                  Rng& rng);

/// z = 2 phi(x^T w*_ood) - 1 + noise, with `noise` a pre-drawn eps' sample.
double response_z(const Eigen::Ref<const Eigen::VectorXd>& x, const TeacherModel& teacher,
                  double noise);

/// Extreme eigenvalues of the Monte Carlo estimate of
/// E[x x^T phi'(x^T w*)^2] with x ~ input_scale * N(0, I_d).
SpectrumBounds estimate_sigma_spectrum(const TeacherModel& teacher, double input_scale,
                                       Eigen::Index samples, std::uint64_t seed);

}  // namespace ddlab

#endif  // DDLAB_GAUSS_MODEL_HPP
