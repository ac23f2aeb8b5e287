#include "ddlab/least_squares.hpp"

#include <numeric>
#include <string>

namespace ddlab {

FeatureSubset::FeatureSubset(std::vector<Eigen::Index> indices, Eigen::Index d)
    : indices_(std::move(indices)), d_(d) {
    if (indices_.empty()) throw std::invalid_argument("FeatureSubset: empty subset");
    for (std::size_t i = 0; i < indices_.size(); ++i) {
        if (indices_[i] < 0 || indices_[i] >= d_)
            throw std::invalid_argument("FeatureSubset: index " + std::to_string(indices_[i]) +
                                        " outside [0, " + std::to_string(d_) + ")");
        if (i > 0 && indices_[i] <= indices_[i - 1])
            throw std::invalid_argument("FeatureSubset: indices must be strictly increasing");
    }
}

FeatureSubset FeatureSubset::prefix(Eigen::Index p, Eigen::Index d) {
    if (p < 1 || p > d) throw std::invalid_argument("FeatureSubset::prefix: need 1 <= p <= d");
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(p));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    return FeatureSubset(std::move(idx), d);
}

bool FeatureSubset::contains(Eigen::Index j) const {
    return std::binary_search(indices_.begin(), indices_.end(), j);
}

bool FeatureSubset::is_prefix() const noexcept {
    return indices_.back() == size() - 1;
}

SubsetClassifier fit_subset(const Eigen::Ref<const Eigen::MatrixXd>& X,
                            const Eigen::Ref<const Eigen::VectorXd>& y,
                            const FeatureSubset& subset, Activation activation) {
    if (X.rows() != y.size())
        throw std::invalid_argument("fit_subset: X has " + std::to_string(X.rows()) +
                                    " rows but y has " + std::to_string(y.size()) + " entries");
    if (X.cols() != subset.dim())
        throw std::invalid_argument("fit_subset: X width differs from subset dimension");

    SubsetClassifier clf{Eigen::VectorXd::Zero(subset.dim()), subset, activation};
    Eigen::VectorXd coef;
    if (subset.is_prefix())
        coef = pinv(X.leftCols(subset.size())) * y;
    else
        coef = pinv(X(Eigen::all, subset.indices())) * y;
    clf.w_hat(subset.indices()) = coef;
    return clf;
}

double predict(const SubsetClassifier& clf, const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() != clf.w_hat.size())
        throw std::invalid_argument("predict: input length differs from classifier dimension");
    return activate(clf.activation, x.dot(clf.w_hat));
}

Eigen::VectorXd predict_rows(const SubsetClassifier& clf, const Eigen::Ref<const Eigen::MatrixXd>& X) {
    if (X.cols() != clf.w_hat.size())
        throw std::invalid_argument("predict_rows: input width differs from classifier dimension");
    return activate(clf.activation, X * clf.w_hat);
}

double empirical_risk(const SubsetClassifier& clf, const SampleSet& data) {
    if (data.size() == 0) throw std::invalid_argument("empirical_risk: empty data");
    if (data.y.size() != data.X.rows())
        throw std::invalid_argument("empirical_risk: X and y row counts differ");
    return (predict_rows(clf, data.X) - data.y).squaredNorm() / static_cast<double>(data.size());
}

}  // namespace ddlab
