#ifndef DDLAB_OOD_SCORES_HPP
#define DDLAB_OOD_SCORES_HPP

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ddlab {

/// Row-wise log-sum-exp with max shift.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>
logsumexp_rows(const Eigen::MatrixBase<Derived>& x) {
    using Scalar = typename Derived::Scalar;
    const auto m = x.rowwise().maxCoeff().eval();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out =
        (x.colwise() - m).array().exp().rowwise().sum().log().matrix();
    return out + m;
}

/// Row-wise softmax.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
softmax_rows(const Eigen::MatrixBase<Derived>& x) {
    const auto m = x.rowwise().maxCoeff().eval();
    auto e = (x.colwise() - m).array().exp().eval();
    return (e.colwise() / e.rowwise().sum()).matrix();
}

/// Percentile with linear interpolation between order statistics:
/// position (N-1) * pct / 100 in the sorted sample.
double percentile(std::vector<double> values, double pct);

/// Penultimate-layer features with optional logits and labels.
struct ModelOutputs {
    Eigen::MatrixXd features;               // n x q
    std::optional<Eigen::MatrixXd> logits;  // n x C
    std::optional<Eigen::VectorXi> labels;  // n, values in [0, C)

    Eigen::Index rows() const noexcept { return features.rows(); }
    /// Throws DataError on row-count disagreement, C < 2, label range or
    /// non-finite entries.
    void validate() const;
};

/// Final linear layer: logits = W f + b.
struct ClassifierHead {
    Eigen::MatrixXd W;  // C x q
    Eigen::VectorXd b;  // C

    Eigen::Index classes() const noexcept { return W.rows(); }
    /// n x C logits of the rows of `features`.
    Eigen::MatrixXd logits(const Eigen::Ref<const Eigen::MatrixXd>& features) const;
    /// Throws DataError when shapes disagree with `outputs` or, if logits are
    /// present, when W f + b differs from them by more than 1e-4.
    void check_against(const ModelOutputs& outputs) const;
};

/// Statistics of the in-distribution training set used by the scorers.
struct IdStats {
    Eigen::MatrixXd class_means;          // C x q, rows of absent classes are zero
    std::vector<bool> class_present;      // C
    Eigen::MatrixXd shared_precision;     // q x q
    Eigen::MatrixXd principal_basis;      // q x D, D = floor(q/2)
    Eigen::MatrixXd null_basis;           // q x (q - D)
    double vim_alpha = 0.0;
    double react_threshold = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd class_mean_softmax;   // C x C, by predicted class
    std::vector<bool> softmax_present;    // C
    Eigen::MatrixXd etf_basis;            // q x min(C, q)
    Eigen::VectorXd feature_offset;       // q
    bool has_logit_stats = false;
};

/// Fits every scorer's statistics in one pass over the training outputs.
/// Logits come from `train.logits` or, if absent, from `head`.
IdStats fit_id_stats(const ModelOutputs& train, const std::optional<ClassifierHead>& head);

enum class Method { Msp, MaxLogit, Energy, React, KlMatching, Mahalanobis, Residual, Vim, AshP, Neco };

const std::vector<Method>& all_methods();
const char* to_string(Method m) noexcept;
/// Accepts the names printed by to_string plus a few aliases
/// ("klmatching", "ash_p", "ashp", "react_energy"). Throws std::invalid_argument.
Method parse_method(const std::string& name);

struct ScoreVector {
    Eigen::VectorXd scores;
    Method method;
};

struct ScoreOptions {
    double temperature = 1.0;
    double ash_percentile = 90.0;
};

// Every score is oriented so that higher means more in-distribution.

/// Maximum softmax probability.
ScoreVector score_msp(const Eigen::Ref<const Eigen::MatrixXd>& logits);
ScoreVector score_maxlogit(const Eigen::Ref<const Eigen::MatrixXd>& logits);
/// Negative energy T * log sum_j exp(l_j / T).
ScoreVector score_energy(const Eigen::Ref<const Eigen::MatrixXd>& logits, double temperature = 1.0);

/// Energy of W min(f, threshold) + b.
ScoreVector score_react_energy(const Eigen::Ref<const Eigen::MatrixXd>& features,
                               const ClassifierHead& head, double threshold,
                               double temperature = 1.0);
ScoreVector score_react_energy(const Eigen::Ref<const Eigen::MatrixXd>& features,
                               const ClassifierHead& head, const IdStats& stats,
                               double temperature = 1.0);

/// -min_c KL(softmax(l) || class template c) over templates that exist.
ScoreVector score_klmatching(const Eigen::Ref<const Eigen::MatrixXd>& logits, const IdStats& stats);

/// -min_c (f - mu_c)^T P (f - mu_c).
ScoreVector score_mahalanobis(const Eigen::Ref<const Eigen::MatrixXd>& features, const IdStats& stats);

/// -|| null_basis^T (f - offset) ||.
ScoreVector score_residual(const Eigen::Ref<const Eigen::MatrixXd>& features, const IdStats& stats);

/// logsumexp(l) - alpha * || null_basis^T (f - offset) ||; a strictly
/// increasing transform of the negated virtual-logit probability.
ScoreVector score_vim(const Eigen::Ref<const Eigen::MatrixXd>& features,
                      const Eigen::Ref<const Eigen::MatrixXd>& logits, const IdStats& stats);

/// Per sample, zeroes entries strictly below that sample's percentile, then
/// takes the energy of the recomputed logits.
ScoreVector score_ash_p(const Eigen::Ref<const Eigen::MatrixXd>& features,
                        const ClassifierHead& head, double pct = 90.0, double temperature = 1.0);

/// (|| etf_basis^T f || / || f ||) * max logit; zero feature rows score 0.
ScoreVector score_neco(const Eigen::Ref<const Eigen::MatrixXd>& features,
                       const Eigen::Ref<const Eigen::MatrixXd>& logits, const IdStats& stats);

/// Methods whose inputs are available for `eval` (+ optional head) given `stats`.
std::vector<Method> applicable_methods(const ModelOutputs& eval,
                                       const std::optional<ClassifierHead>& head,
                                       const IdStats& stats);

/// Dispatches to the scorer for `method`. Throws MissingBlock naming the
/// absent block when the method cannot run on these inputs.
ScoreVector score(Method method, const ModelOutputs& eval, const std::optional<ClassifierHead>& head,
                  const IdStats& stats, const ScoreOptions& options = {});

}  // namespace ddlab

#endif  // DDLAB_OOD_SCORES_HPP
