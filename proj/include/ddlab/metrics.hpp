#ifndef DDLAB_METRICS_HPP
#define DDLAB_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ddlab/least_squares.hpp"

namespace ddlab {

struct AucResult {
    double auc = 0.5;
    std::int64_t n_id = 0;
    std::int64_t n_ood = 0;
};

namespace detail {

template <typename Scalar>
void check_scores(const std::vector<Scalar>& v, const char* which) {
    if (v.empty()) throw std::invalid_argument(std::string("auc: empty ") + which + " scores");
    for (const Scalar& s : v)
        if (!std::isfinite(static_cast<double>(s)))
            throw std::invalid_argument(std::string("auc: non-finite ") + which + " score");
}

/// 2 * #wins + #ties over all (id, ood) pairs, by sorting.
template <typename Scalar>
std::int64_t auc_numerator(const std::vector<Scalar>& id, const std::vector<Scalar>& ood) {
    std::vector<std::pair<Scalar, bool>> all;
    all.reserve(id.size() + ood.size());
    for (const Scalar& s : id) all.emplace_back(s, true);
    for (const Scalar& s : ood) all.emplace_back(s, false);
    std::sort(all.begin(), all.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    std::int64_t numerator = 0;
    std::int64_t ood_below = 0;
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        std::int64_t id_here = 0, ood_here = 0;
        while (j < all.size() && all[j].first == all[i].first) {
            (all[j].second ? id_here : ood_here) += 1;
            ++j;
        }
        numerator += 2 * id_here * ood_below + id_here * ood_here;
        ood_below += ood_here;
        i = j;
    }
    return numerator;
}

}  // namespace detail

/// Mann-Whitney AUC: P(id score > ood score) with ties counted half.
/// O((n_id + n_ood) log(n_id + n_ood)).
template <typename Scalar>
AucResult auc(const std::vector<Scalar>& id_scores, const std::vector<Scalar>& ood_scores) {
    detail::check_scores(id_scores, "id");
    detail::check_scores(ood_scores, "ood");
    AucResult r;
    r.n_id = static_cast<std::int64_t>(id_scores.size());
    r.n_ood = static_cast<std::int64_t>(ood_scores.size());
    r.auc = static_cast<double>(detail::auc_numerator(id_scores, ood_scores)) /
            static_cast<double>(2 * r.n_id * r.n_ood);
    return r;
}

template <typename Derived>
AucResult auc(const Eigen::MatrixBase<Derived>& id_scores, const Eigen::MatrixBase<Derived>& ood_scores) {
    using Scalar = typename Derived::Scalar;
    const auto a = id_scores.eval();
    const auto b = ood_scores.eval();
    return auc(std::vector<Scalar>(a.data(), a.data() + a.size()),
               std::vector<Scalar>(b.data(), b.data() + b.size()));
}

struct Nc1Report {
    double nc1 = 0.0;
    std::vector<std::int64_t> per_class_counts;
};

/// Tr(Sigma_W pinv(Sigma_B)) / C with
///   Sigma_W = (1/n) sum_i (f_i - mu_{c_i})(f_i - mu_{c_i})^T
///   Sigma_B = (1/C) sum_c (mu_c - mu_G)(mu_c - mu_G)^T, mu_G the sample mean.
/// C = max label + 1; every class needs at least one sample.
template <typename Derived>
Nc1Report nc1(const Eigen::MatrixBase<Derived>& features, const Eigen::Ref<const Eigen::VectorXi>& labels) {
    using Scalar = typename Derived::Scalar;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    const Eigen::Index n = features.rows();
    const Eigen::Index q = features.cols();
    if (labels.size() != n) throw std::invalid_argument("nc1: label count differs from feature rows");
    if (n == 0 || q == 0) throw std::invalid_argument("nc1: empty feature matrix");
    if (labels.minCoeff() < 0) throw std::invalid_argument("nc1: negative label");
    const Eigen::Index C = labels.maxCoeff() + 1;
    if (C < 2) throw std::invalid_argument("nc1: need at least 2 classes");
    if (n < C) throw std::invalid_argument("nc1: need n >= C");

    Matrix means = Matrix::Zero(C, q);
    Nc1Report report;
    report.per_class_counts.assign(static_cast<std::size_t>(C), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        means.row(labels(i)) += features.row(i);
        ++report.per_class_counts[static_cast<std::size_t>(labels(i))];
    }
    for (Eigen::Index c = 0; c < C; ++c) {
        const auto count = report.per_class_counts[static_cast<std::size_t>(c)];
        if (count == 0) throw std::invalid_argument("nc1: class " + std::to_string(c) + " has no samples");
        means.row(c) /= static_cast<Scalar>(count);
    }
    const Matrix within = features - means(labels, Eigen::all);
    const Matrix sigma_w = within.transpose() * within / static_cast<Scalar>(n);

    // Sigma_B = B^T B with B = (means - mu_G) / sqrt(C), so pinv(Sigma_B) =
    // pinv(B) pinv(B)^T; working on B keeps the conditioning of the means.
    const auto global = features.colwise().mean().eval();
    const Matrix between = (means.rowwise() - global) / std::sqrt(static_cast<Scalar>(C));
    const Matrix between_pinv = pinv(between, Scalar(1e-10));  // q x C
    const Scalar trace = (between_pinv.transpose() * sigma_w * between_pinv).trace();
    report.nc1 = static_cast<double>(trace) / static_cast<double>(C);
    return report;
}

/// NC1 at the underparameterized minimum over NC1 at the widest model; > 1
/// means overparameterization tightened the class clusters.
double nc1_ratio(double nc1_under, double nc1_over);

struct SpectrumReport {
    std::vector<double> eigenvalues;          // descending
    std::vector<double> explained_fraction;   // sums to 1
    std::int64_t marker_index = 0;            // = number of classes
};

/// Eigenvalues of the centred feature covariance (1/(n-1) normalisation),
/// descending, with their share of the total. Round-off negatives are
/// clamped to 0.
template <typename Derived>
SpectrumReport explained_variance_spectrum(const Eigen::MatrixBase<Derived>& features,
                                           std::int64_t num_classes) {
    using Scalar = typename Derived::Scalar;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    const Eigen::Index n = features.rows();
    const Eigen::Index q = features.cols();
    if (q == 0) throw std::invalid_argument("explained_variance_spectrum: q must be >= 1");
    if (n < 2) throw std::invalid_argument("explained_variance_spectrum: need n >= 2");
    if (num_classes < 0) throw std::invalid_argument("explained_variance_spectrum: negative class count");

    const Matrix centred = features.rowwise() - features.colwise().mean();
    const Matrix cov = centred.transpose() * centred / static_cast<Scalar>(n - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> solver(cov, Eigen::EigenvaluesOnly);

    SpectrumReport r;
    r.marker_index = num_classes;
    const auto& ev = solver.eigenvalues();
    for (Eigen::Index i = ev.size() - 1; i >= 0; --i)
        r.eigenvalues.push_back(std::max(0.0, static_cast<double>(ev(i))));
    const double total = std::accumulate(r.eigenvalues.begin(), r.eigenvalues.end(), 0.0);
    if (!(total > 0.0)) throw std::invalid_argument("explained_variance_spectrum: features have zero variance");
    for (double v : r.eigenvalues) r.explained_fraction.push_back(v / total);
    return r;
}

}  // namespace ddlab

#endif  // DDLAB_METRICS_HPP
