#include "ddlab/ood_scores.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ddlab/errors.hpp"
#include "ddlab/least_squares.hpp"

namespace ddlab {

double percentile(std::vector<double> values, double pct) {
    if (values.empty()) throw std::invalid_argument("percentile: empty sample");
    if (!(pct >= 0.0 && pct <= 100.0)) throw std::invalid_argument("percentile: pct outside [0, 100]");
    std::sort(values.begin(), values.end());
    const double pos = static_cast<double>(values.size() - 1) * pct / 100.0;
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

namespace {

std::string cell(Eigen::Index r, Eigen::Index c) {
    return "(row " + std::to_string(r) + ", col " + std::to_string(c) + ")";
}

void require_finite(const Eigen::Ref<const Eigen::MatrixXd>& m, const std::string& what) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            if (!std::isfinite(m(i, j)))
                throw DataError(what + ": non-finite value at " + cell(i, j));
}

void check_logits(const Eigen::Ref<const Eigen::MatrixXd>& logits, const char* who) {
    if (logits.cols() < 1) throw std::invalid_argument(std::string(who) + ": logits need >= 1 column");
    if (!logits.allFinite()) throw std::invalid_argument(std::string(who) + ": non-finite logits");
}

/// Lowest index among maxima.
Eigen::Index argmax(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < row.size(); ++j)
        if (row(j) > row(best)) best = j;
    return best;
}

/// Eigenvectors of a symmetric matrix ordered by descending eigenvalue.
Eigen::MatrixXd descending_eigenvectors(const Eigen::MatrixXd& sym) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
    return solver.eigenvectors().rowwise().reverse();
}

Eigen::VectorXd null_residual_norms(const Eigen::Ref<const Eigen::MatrixXd>& features,
                                    const IdStats& stats) {
    if (features.cols() != stats.feature_offset.size())
        throw std::invalid_argument("feature width differs from fitted statistics");
    return ((features.rowwise() - stats.feature_offset.transpose()) * stats.null_basis)
        .rowwise()
        .norm();
}

}  // namespace

void ModelOutputs::validate() const {
    const Eigen::Index n = features.rows();
    require_finite(features, "features");
    if (logits) {
        if (logits->rows() != n)
            throw DataError("logits have " + std::to_string(logits->rows()) + " rows, features " +
                            std::to_string(n));
        if (logits->cols() < 2) throw DataError("logits need C >= 2 classes");
        require_finite(*logits, "logits");
    }
    if (labels) {
        if (labels->size() != n)
            throw DataError("labels have " + std::to_string(labels->size()) + " entries, features " +
                            std::to_string(n) + " rows");
        for (Eigen::Index i = 0; i < labels->size(); ++i) {
            const int l = (*labels)(i);
            if (l < 0 || (logits && l >= logits->cols()))
                throw DataError("label " + std::to_string(l) + " out of range at row " +
                                std::to_string(i));
        }
    }
}

Eigen::MatrixXd ClassifierHead::logits(const Eigen::Ref<const Eigen::MatrixXd>& features) const {
    if (features.cols() != W.cols())
        throw DataError("head expects " + std::to_string(W.cols()) + " features, got " +
                        std::to_string(features.cols()));
    return (features * W.transpose()).rowwise() + b.transpose();
}

void ClassifierHead::check_against(const ModelOutputs& outputs) const {
    if (b.size() != W.rows()) throw DataError("head bias length differs from W rows");
    if (W.cols() != outputs.features.cols())
        throw DataError("head W has " + std::to_string(W.cols()) + " columns, features have " +
                        std::to_string(outputs.features.cols()));
    require_finite(W, "head W");
    require_finite(b, "head b");
    if (outputs.logits) {
        if (outputs.logits->cols() != W.rows())
            throw DataError("head has " + std::to_string(W.rows()) + " classes, logits have " +
                            std::to_string(outputs.logits->cols()));
        const double err = (logits(outputs.features) - *outputs.logits).cwiseAbs().maxCoeff();
        if (err > 1e-4)
            throw DataError("head reconstruction W f + b differs from logits by " +
                            std::to_string(err));
    }
}

IdStats fit_id_stats(const ModelOutputs& train, const std::optional<ClassifierHead>& head) {
    if (!train.labels) throw std::invalid_argument("fit_id_stats: training labels are required");
    train.validate();
    if (head) head->check_against(train);
    const Eigen::MatrixXd& F = train.features;
    const Eigen::Index n = F.rows();
    const Eigen::Index q = F.cols();
    if (n < 1 || q < 1) throw std::invalid_argument("fit_id_stats: empty feature table");
    const Eigen::VectorXi& labels = *train.labels;

    std::optional<Eigen::MatrixXd> logits = train.logits;
    if (!logits && head) logits = head->logits(F);

    Eigen::Index C = labels.maxCoeff() + 1;
    if (logits) C = logits->cols();
    if (labels.maxCoeff() >= C)
        throw DataError("label " + std::to_string(labels.maxCoeff()) + " exceeds class count");

    IdStats s;

    // Class means and the sample-weighted pooled within-class covariance.
    s.class_means = Eigen::MatrixXd::Zero(C, q);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(C);
    for (Eigen::Index i = 0; i < n; ++i) {
        s.class_means.row(labels(i)) += F.row(i);
        counts(labels(i)) += 1.0;
    }
    s.class_present.assign(static_cast<std::size_t>(C), false);
    for (Eigen::Index c = 0; c < C; ++c) {
        if (counts(c) > 0) {
            s.class_means.row(c) /= counts(c);
            s.class_present[static_cast<std::size_t>(c)] = true;
        }
    }
    const Eigen::MatrixXd within = F - s.class_means(labels, Eigen::all);
    Eigen::MatrixXd cov = within.transpose() * within / static_cast<double>(n);
    double ridge = 1e-6 * cov.trace() / static_cast<double>(q);
    if (!(ridge > 0.0)) ridge = 1e-6;
    cov.diagonal().array() += ridge;
    s.shared_precision = pinv(cov);

    // Principal / null split of the offset-centred second moment.
    if (head)
        s.feature_offset = -(pinv(head->W) * head->b);
    else
        s.feature_offset = F.colwise().mean().transpose();
    const Eigen::MatrixXd centred = F.rowwise() - s.feature_offset.transpose();
    const Eigen::MatrixXd basis =
        descending_eigenvectors(centred.transpose() * centred / static_cast<double>(n));
    const Eigen::Index D = q / 2;
    s.principal_basis = basis.leftCols(D);
    s.null_basis = basis.rightCols(q - D);

    s.react_threshold = percentile(std::vector<double>(F.data(), F.data() + F.size()), 90.0);

    const Eigen::MatrixXd second_moment = F.transpose() * F / static_cast<double>(n);
    s.etf_basis = descending_eigenvectors(second_moment).leftCols(std::min(C, q));

    s.class_mean_softmax = Eigen::MatrixXd::Zero(C, C);
    s.softmax_present.assign(static_cast<std::size_t>(C), false);
    if (logits) {
        s.has_logit_stats = true;
        const Eigen::VectorXd residual_sum_terms = null_residual_norms(F, s);
        const double residual_sum = residual_sum_terms.sum();
        const double max_logit_sum = logits->rowwise().maxCoeff().sum();
        s.vim_alpha = residual_sum > 0.0 ? max_logit_sum / residual_sum : 0.0;

        const Eigen::MatrixXd probs = softmax_rows(*logits);
        Eigen::VectorXd pred_counts = Eigen::VectorXd::Zero(C);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Index c = argmax(logits->row(i));
            s.class_mean_softmax.row(c) += probs.row(i);
            pred_counts(c) += 1.0;
        }
        for (Eigen::Index c = 0; c < C; ++c) {
            if (pred_counts(c) > 0) {
                s.class_mean_softmax.row(c) /= pred_counts(c);
                s.softmax_present[static_cast<std::size_t>(c)] = true;
            }
        }
    }
    return s;
}

const std::vector<Method>& all_methods() {
    static const std::vector<Method> methods{Method::Msp,         Method::MaxLogit,
                                             Method::Energy,      Method::React,
                                             Method::KlMatching,  Method::Mahalanobis,
                                             Method::Residual,    Method::Vim,
                                             Method::AshP,        Method::Neco};
    return methods;
}

const char* to_string(Method m) noexcept {
    switch (m) {
        case Method::Msp: return "msp";
        case Method::MaxLogit: return "maxlogit";
        case Method::Energy: return "energy";
        case Method::React: return "react";
        case Method::KlMatching: return "klm";
        case Method::Mahalanobis: return "mahalanobis";
        case Method::Residual: return "residual";
        case Method::Vim: return "vim";
        case Method::AshP: return "ash";
        case Method::Neco: return "neco";
    }
    return "unknown";
}

Method parse_method(const std::string& name) {
    for (Method m : all_methods())
        if (name == to_string(m)) return m;
    if (name == "klmatching") return Method::KlMatching;
    if (name == "ash_p" || name == "ashp") return Method::AshP;
    if (name == "react_energy") return Method::React;
    throw std::invalid_argument("unknown scoring method '" + name + "'");
}

ScoreVector score_msp(const Eigen::Ref<const Eigen::MatrixXd>& logits) {
    check_logits(logits, "score_msp");
    if (logits.cols() < 2) throw std::invalid_argument("score_msp: need C >= 2");
    return {softmax_rows(logits).rowwise().maxCoeff(), Method::Msp};
}

ScoreVector score_maxlogit(const Eigen::Ref<const Eigen::MatrixXd>& logits) {
    check_logits(logits, "score_maxlogit");
    return {logits.rowwise().maxCoeff(), Method::MaxLogit};
}

ScoreVector score_energy(const Eigen::Ref<const Eigen::MatrixXd>& logits, double temperature) {
    check_logits(logits, "score_energy");
    if (!(temperature > 0.0)) throw std::invalid_argument("score_energy: temperature must be > 0");
    return {temperature * logsumexp_rows(logits / temperature), Method::Energy};
}

ScoreVector score_react_energy(const Eigen::Ref<const Eigen::MatrixXd>& features,
                               const ClassifierHead& head, double threshold, double temperature) {
    const Eigen::MatrixXd clipped = features.cwiseMin(threshold);
    ScoreVector out = score_energy(head.logits(clipped), temperature);
    out.method = Method::React;
    return out;
}

ScoreVector score_react_energy(const Eigen::Ref<const Eigen::MatrixXd>& features,
                               const ClassifierHead& head, const IdStats& stats,
                               double temperature) {
    return score_react_energy(features, head, stats.react_threshold, temperature);
}

ScoreVector score_klmatching(const Eigen::Ref<const Eigen::MatrixXd>& logits, const IdStats& stats) {
    check_logits(logits, "score_klmatching");
    const Eigen::Index C = stats.class_mean_softmax.rows();
    if (!stats.has_logit_stats) throw MissingBlock("logits", "klm statistics");
    if (logits.cols() != C) throw std::invalid_argument("score_klmatching: class count mismatch");
    constexpr double kFloor = 1e-12;
    const Eigen::MatrixXd probs = softmax_rows(logits);
    const Eigen::MatrixXd log_ref = stats.class_mean_softmax.cwiseMax(kFloor).array().log().matrix();

    Eigen::VectorXd scores(logits.rows());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < C; ++c) {
            if (!stats.softmax_present[static_cast<std::size_t>(c)]) continue;
            double kl = 0.0;
            for (Eigen::Index j = 0; j < C; ++j) {
                const double p = probs(i, j);
                if (p > 0.0) kl += p * (std::log(p) - log_ref(c, j));
            }
            best = std::min(best, kl);
        }
        scores(i) = std::isfinite(best) ? -best : 0.0;
    }
    return {scores, Method::KlMatching};
}

ScoreVector score_mahalanobis(const Eigen::Ref<const Eigen::MatrixXd>& features, const IdStats& stats) {
    if (features.cols() != stats.class_means.cols())
        throw std::invalid_argument("score_mahalanobis: feature width differs from fitted statistics");
    Eigen::VectorXd best = Eigen::VectorXd::Constant(features.rows(),
                                                     std::numeric_limits<double>::infinity());
    for (Eigen::Index c = 0; c < stats.class_means.rows(); ++c) {
        if (!stats.class_present[static_cast<std::size_t>(c)]) continue;
        const Eigen::MatrixXd diff = features.rowwise() - stats.class_means.row(c);
        const Eigen::VectorXd dist = ((diff * stats.shared_precision).array() * diff.array()).rowwise().sum();
        best = best.cwiseMin(dist);
    }
    return {-best, Method::Mahalanobis};
}

ScoreVector score_residual(const Eigen::Ref<const Eigen::MatrixXd>& features, const IdStats& stats) {
    return {-null_residual_norms(features, stats), Method::Residual};
}

ScoreVector score_vim(const Eigen::Ref<const Eigen::MatrixXd>& features,
                      const Eigen::Ref<const Eigen::MatrixXd>& logits, const IdStats& stats) {
    check_logits(logits, "score_vim");
    if (logits.rows() != features.rows()) throw std::invalid_argument("score_vim: row count mismatch");
    return {logsumexp_rows(logits) - stats.vim_alpha * null_residual_norms(features, stats),
            Method::Vim};
}

ScoreVector score_ash_p(const Eigen::Ref<const Eigen::MatrixXd>& features,
                        const ClassifierHead& head, double pct, double temperature) {
    Eigen::MatrixXd pruned = features;
    std::vector<double> row(static_cast<std::size_t>(features.cols()));
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        for (Eigen::Index j = 0; j < features.cols(); ++j) row[static_cast<std::size_t>(j)] = features(i, j);
        const double threshold = percentile(row, pct);
        for (Eigen::Index j = 0; j < features.cols(); ++j)
            if (pruned(i, j) < threshold) pruned(i, j) = 0.0;
    }
    ScoreVector out = score_energy(head.logits(pruned), temperature);
    out.method = Method::AshP;
    return out;
}

ScoreVector score_neco(const Eigen::Ref<const Eigen::MatrixXd>& features,
                       const Eigen::Ref<const Eigen::MatrixXd>& logits, const IdStats& stats) {
    check_logits(logits, "score_neco");
    if (logits.rows() != features.rows()) throw std::invalid_argument("score_neco: row count mismatch");
    if (features.cols() != stats.etf_basis.rows())
        throw std::invalid_argument("score_neco: feature width differs from fitted statistics");
    const Eigen::VectorXd full = features.rowwise().norm();
    const Eigen::VectorXd inside = (features * stats.etf_basis).rowwise().norm();
    const Eigen::VectorXd max_logit = logits.rowwise().maxCoeff();
    Eigen::VectorXd scores(features.rows());
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        const double ratio = full(i) > 0.0 ? std::min(1.0, inside(i) / full(i)) : 0.0;
        scores(i) = ratio * max_logit(i);
    }
    return {scores, Method::Neco};
}

namespace {

/// Logits of `eval`, taken from the table or recomputed from the head.
std::optional<Eigen::MatrixXd> eval_logits(const ModelOutputs& eval,
                                           const std::optional<ClassifierHead>& head) {
    if (eval.logits) return eval.logits;
    if (head) return head->logits(eval.features);
    return std::nullopt;
}

/// Name of the first block `method` lacks, or empty when it can run.
std::string missing_block(Method method, bool has_logits, bool has_head, const IdStats& stats) {
    switch (method) {
        case Method::Msp:
        case Method::MaxLogit:
        case Method::Energy:
            return has_logits ? "" : "logits";
        case Method::React:
        case Method::AshP:
            return has_head ? "" : "head";
        case Method::KlMatching:
            if (!has_logits) return "logits";
            return stats.has_logit_stats ? "" : "train logits";
        case Method::Vim:
            if (!has_logits) return "logits";
            return stats.has_logit_stats ? "" : "train logits";
        case Method::Neco:
            return has_logits ? "" : "logits";
        case Method::Mahalanobis:
        case Method::Residual:
            return "";
    }
    return "";
}

}  // namespace

std::vector<Method> applicable_methods(const ModelOutputs& eval,
                                       const std::optional<ClassifierHead>& head,
                                       const IdStats& stats) {
    const bool has_logits = eval.logits.has_value() || head.has_value();
    std::vector<Method> out;
    for (Method m : all_methods())
        if (missing_block(m, has_logits, head.has_value(), stats).empty()) out.push_back(m);
    return out;
}

ScoreVector score(Method method, const ModelOutputs& eval, const std::optional<ClassifierHead>& head,
                  const IdStats& stats, const ScoreOptions& options) {
    const auto logits = eval_logits(eval, head);
    const std::string missing = missing_block(method, logits.has_value(), head.has_value(), stats);
    if (!missing.empty()) throw MissingBlock(missing, std::string("method '") + to_string(method) + "'");

    switch (method) {
        case Method::Msp: return score_msp(*logits);
        case Method::MaxLogit: return score_maxlogit(*logits);
        case Method::Energy: return score_energy(*logits, options.temperature);
        case Method::React: return score_react_energy(eval.features, *head, stats, options.temperature);
        case Method::KlMatching: return score_klmatching(*logits, stats);
        case Method::Mahalanobis: return score_mahalanobis(eval.features, stats);
        case Method::Residual: return score_residual(eval.features, stats);
        case Method::Vim: return score_vim(eval.features, *logits, stats);
        case Method::AshP: return score_ash_p(eval.features, *head, options.ash_percentile, options.temperature);
        case Method::Neco: return score_neco(eval.features, *logits, stats);
    }
    throw std::logic_error("score: unhandled method");
}

}  // namespace ddlab
