#ifndef DDLAB_LEAST_SQUARES_HPP
#define DDLAB_LEAST_SQUARES_HPP

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "ddlab/gauss_model.hpp"

namespace ddlab {

/// Moore-Penrose pseudoinverse by SVD. Singular values at or below
/// rtol * sigma_max are treated as zero; rtol = 0 selects
/// machine-epsilon * max(rows, cols).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
pinv(const Eigen::MatrixBase<Derived>& a, typename Derived::Scalar rtol = 0) {
    using Scalar = typename Derived::Scalar;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    if (rtol < Scalar(0)) throw std::invalid_argument("pinv: rtol must be >= 0");
    if (!a.allFinite()) throw std::invalid_argument("pinv: non-finite entries");

    const Eigen::Index m = a.rows();
    const Eigen::Index k = a.cols();
    if (m == 0 || k == 0) return Matrix::Zero(k, m);
    if (rtol == Scalar(0))
        rtol = std::numeric_limits<Scalar>::epsilon() * static_cast<Scalar>(std::max(m, k));

    Eigen::JacobiSVD<Matrix> svd(a.derived(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    const Scalar cutoff = rtol * (s.size() > 0 ? s(0) : Scalar(0));
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        inv(i) = (s(i) > cutoff) ? Scalar(1) / s(i) : Scalar(0);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

/// Strictly increasing feature indices in [0, d); the complement is implied.
class FeatureSubset {
public:
    /// Throws std::invalid_argument unless the indices are non-empty,
    /// strictly increasing and below d.
    FeatureSubset(std::vector<Eigen::Index> indices, Eigen::Index d);

    /// {0, ..., p-1} of a d-dimensional space.
    static FeatureSubset prefix(Eigen::Index p, Eigen::Index d);

    const std::vector<Eigen::Index>& indices() const noexcept { return indices_; }
    Eigen::Index dim() const noexcept { return d_; }
    Eigen::Index size() const noexcept { return static_cast<Eigen::Index>(indices_.size()); }
    bool contains(Eigen::Index j) const;
    /// True when the subset is {0, ..., size()-1}.
    bool is_prefix() const noexcept;

private:
    std::vector<Eigen::Index> indices_;
    Eigen::Index d_;
};

/// Linear least-squares fit on a feature subset; w_hat is exactly zero off
/// the subset.
struct SubsetClassifier {
    Eigen::VectorXd w_hat;
    FeatureSubset subset;
    Activation activation = Activation::Identity;
};

/// w_hat_T = pinv(X_T) y, w_hat_{T^c} = 0.
SubsetClassifier fit_subset(const Eigen::Ref<const Eigen::MatrixXd>& X,
                            const Eigen::Ref<const Eigen::VectorXd>& y,
                            const FeatureSubset& subset, Activation activation);

/// phi(x^T w_hat).
double predict(const SubsetClassifier& clf, const Eigen::Ref<const Eigen::VectorXd>& x);
/// Row-wise predict over a design matrix.
Eigen::VectorXd predict_rows(const SubsetClassifier& clf, const Eigen::Ref<const Eigen::MatrixXd>& X);

/// (1/n) ||phi(X w_hat) - y||^2.
double empirical_risk(const SubsetClassifier& clf, const SampleSet& data);

}  // namespace ddlab

#endif  // DDLAB_LEAST_SQUARES_HPP
