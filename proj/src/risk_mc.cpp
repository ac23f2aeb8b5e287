#include "ddlab/risk_mc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

namespace ddlab {

void McConfig::validate() const {
    if (trials < 1) throw std::invalid_argument("McConfig: trials must be >= 1");
    if (test_points < 1) throw std::invalid_argument("McConfig: test_points must be >= 1");
}

McEstimate summarize(const std::vector<double>& values) {
    McEstimate est;
    est.trials = static_cast<Eigen::Index>(values.size());
    if (values.empty()) return est;
    double sum = 0.0;
    for (double v : values) sum += v;
    est.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - est.mean) * (v - est.mean);
        const double k = static_cast<double>(values.size());
        est.std_error = std::sqrt(ss / (k - 1.0) / k);
    }
    return est;
}

double combined_se(const McEstimate& a, const McEstimate& b) {
    return std::hypot(a.std_error, b.std_error);
}

unsigned resolve_threads(unsigned requested) {
    if (requested == 0) {
        if (const char* env = std::getenv("DDLAB_THREADS")) {
            try {
                requested = static_cast<unsigned>(std::stoul(env));
            } catch (const std::exception&) {
                throw std::invalid_argument(std::string("DDLAB_THREADS is not a count: ") + env);
            }
        }
    }
    if (requested == 0) requested = std::max(1u, std::thread::hardware_concurrency());
    return requested;
}

namespace {

enum Stream : std::uint64_t { kTrainStream = 0, kIdTestStream = 1, kOodTestStream = 2 };

std::uint64_t substream(const McConfig& cfg, Eigen::Index trial, Stream s) {
    return stream_seed(stream_seed(cfg.base_seed, static_cast<std::uint64_t>(trial)), s);
}

/// Held-out evaluation points with both targets: y for the risk and z for
/// the OOD risk.
struct TestDraws {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    Eigen::VectorXd z;
};

TestDraws draw_id_test(const TeacherModel& t, Eigen::Index m, std::uint64_t seed) {
    Rng rng(seed);
    TestDraws out;
    out.X.resize(m, t.dim());
    rng.fill_normal(out.X);
    Eigen::VectorXd eps(m), eps_prime(m);
    rng.fill_normal(eps, t.sigma);
    rng.fill_normal(eps_prime, t.sigma_prime);
    out.y = activate(t.activation, out.X * t.w_star) + eps;
    out.z = (2.0 * activate(t.activation, out.X * t.w_star_ood)).array() - 1.0 + eps_prime.array();
    return out;
}

TestDraws draw_ood_test(const TeacherModel& t, Eigen::Index m, const OodInputConfig& ood_cfg,
                        std::uint64_t seed) {
    Rng rng(seed);
    TestDraws out;
    out.X = sample_ood_inputs(t.dim(), m, ood_cfg, rng);
    Eigen::VectorXd eps_prime(m);
    rng.fill_normal(eps_prime, t.sigma_prime);
    out.z = (2.0 * activate(t.activation, out.X * t.w_star_ood)).array() - 1.0 + eps_prime.array();
    return out;
}

double squared_risk(const TestDraws& test, const Eigen::VectorXd& w, Activation a) {
    return (activate(a, test.X * w) - test.y).squaredNorm() / static_cast<double>(test.X.rows());
}

double confidence_risk(const TestDraws& test, const Eigen::VectorXd& w, Activation a) {
    const Eigen::VectorXd pred = activate(a, test.X * w);
    return ((2.0 * pred).array() - 1.0 - test.z.array()).square().mean();
}

/// Runs body(k, row) for k in [0, trials) on `threads` workers. Each body
/// writes only its own row of `out`, so results are schedule independent.
void run_trials(Eigen::Index trials, unsigned threads,
                const std::function<void(Eigen::Index)>& body) {
    const unsigned workers =
        static_cast<unsigned>(std::min<Eigen::Index>(resolve_threads(threads), trials));
    if (workers <= 1) {
        for (Eigen::Index k = 0; k < trials; ++k) body(k);
        return;
    }
    std::atomic<Eigen::Index> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (Eigen::Index k = next++; k < trials; k = next++) {
                try {
                    body(k);
                } catch (...) {
                    std::lock_guard lock(failure_mu);
                    if (!failure) failure = std::current_exception();
                    next = trials;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

void check_dims(const TeacherModel& teacher, Eigen::Index n, const FeatureSubset& subset) {
    teacher.validate();
    if (n < 1) throw std::invalid_argument("risk_mc: n must be >= 1");
    if (subset.dim() != teacher.dim())
        throw std::invalid_argument("risk_mc: subset dimension " + std::to_string(subset.dim()) +
                                    " differs from teacher dimension " +
                                    std::to_string(teacher.dim()));
}

SubsetClassifier fit_trial(const TeacherModel& teacher, Eigen::Index n, const FeatureSubset& subset,
                           const McConfig& cfg, Eigen::Index k) {
    Rng rng(substream(cfg, k, kTrainStream));
    const SampleSet train = sample_train(teacher, n, rng);
    return fit_subset(train.X, train.y, subset, teacher.activation);
}

}  // namespace

McEstimate mc_expected_risk(const TeacherModel& teacher, Eigen::Index n,
                            const FeatureSubset& subset, const McConfig& cfg) {
    check_dims(teacher, n, subset);
    cfg.validate();
    std::vector<double> values(static_cast<std::size_t>(cfg.trials));
    run_trials(cfg.trials, cfg.threads, [&](Eigen::Index k) {
        const SubsetClassifier clf = fit_trial(teacher, n, subset, cfg, k);
        const TestDraws test = draw_id_test(teacher, cfg.test_points, substream(cfg, k, kIdTestStream));
        values[static_cast<std::size_t>(k)] = squared_risk(test, clf.w_hat, teacher.activation);
    });
    return summarize(values);
}

McEstimate mc_ood_risk(const TeacherModel& teacher, Eigen::Index n, const FeatureSubset& subset,
                       const OodInputConfig& ood_cfg, const McConfig& cfg) {
    check_dims(teacher, n, subset);
    cfg.validate();
    std::vector<double> values(static_cast<std::size_t>(cfg.trials));
    run_trials(cfg.trials, cfg.threads, [&](Eigen::Index k) {
        const SubsetClassifier clf = fit_trial(teacher, n, subset, cfg, k);
        const TestDraws id = draw_id_test(teacher, cfg.test_points, substream(cfg, k, kIdTestStream));
        const TestDraws ood =
            draw_ood_test(teacher, cfg.test_points, ood_cfg, substream(cfg, k, kOodTestStream));
        values[static_cast<std::size_t>(k)] = confidence_risk(id, clf.w_hat, teacher.activation) +
                                              confidence_risk(ood, clf.w_hat, teacher.activation);
    });
    return summarize(values);
}

McEstimate mc_ood_risk_fixed(const TeacherModel& teacher,
                             const Eigen::Ref<const Eigen::VectorXd>& w_hat,
                             const OodInputConfig& ood_cfg, const McConfig& cfg) {
    teacher.validate();
    cfg.validate();
    if (w_hat.size() != teacher.dim())
        throw std::invalid_argument("mc_ood_risk_fixed: weight length differs from teacher");
    const Eigen::VectorXd w = w_hat;
    std::vector<double> values(static_cast<std::size_t>(cfg.trials));
    run_trials(cfg.trials, cfg.threads, [&](Eigen::Index k) {
        const TestDraws id = draw_id_test(teacher, cfg.test_points, substream(cfg, k, kIdTestStream));
        const TestDraws ood =
            draw_ood_test(teacher, cfg.test_points, ood_cfg, substream(cfg, k, kOodTestStream));
        values[static_cast<std::size_t>(k)] =
            confidence_risk(id, w, teacher.activation) + confidence_risk(ood, w, teacher.activation);
    });
    return summarize(values);
}

McEstimate mc_weight_error(const TeacherModel& teacher, Eigen::Index n,
                           const FeatureSubset& subset, const McConfig& cfg) {
    check_dims(teacher, n, subset);
    cfg.validate();
    std::vector<double> values(static_cast<std::size_t>(cfg.trials));
    run_trials(cfg.trials, cfg.threads, [&](Eigen::Index k) {
        const SubsetClassifier clf = fit_trial(teacher, n, subset, cfg, k);
        values[static_cast<std::size_t>(k)] = (clf.w_hat - teacher.w_star).squaredNorm();
    });
    return summarize(values);
}

const RiskRecord& RiskCurve::at_p(Eigen::Index p) const {
    for (const auto& r : records)
        if (r.p() == p) return r;
    throw std::out_of_range("RiskCurve: no record for p=" + std::to_string(p));
}

namespace {

template <typename Key>
Eigen::Index argmax_p(const std::vector<RiskRecord>& records, Key key) {
    if (records.empty()) throw std::logic_error("RiskCurve: empty curve");
    const RiskRecord* best = &records.front();
    for (const auto& r : records)
        if (key(r) > key(*best)) best = &r;
    return best->p();
}

}  // namespace

Eigen::Index RiskCurve::peak_p_risk() const {
    return argmax_p(records, [](const RiskRecord& r) { return r.mc_risk.mean; });
}

Eigen::Index RiskCurve::peak_p_ood() const {
    return argmax_p(records, [](const RiskRecord& r) { return r.mc_ood.mean; });
}

std::pair<SpectrumBounds, SpectrumBounds> default_spectra(const TeacherModel& teacher,
                                                          const OodInputConfig& ood_cfg,
                                                          std::uint64_t seed) {
    if (teacher.activation == Activation::Identity)
        return {SpectrumBounds::isotropic(1.0),
                SpectrumBounds::isotropic(ood_cfg.scale * ood_cfg.scale)};
    const Eigen::Index samples = std::max<Eigen::Index>(200000, teacher.dim());
    return {estimate_sigma_spectrum(teacher, 1.0, samples, stream_seed(seed, 0)),
            estimate_sigma_spectrum(teacher, ood_cfg.scale, samples, stream_seed(seed, 1))};
}

RiskCurve dd_sweep(const TeacherModel& teacher, Eigen::Index n,
                   const std::vector<FeatureSubset>& schedule, const OodInputConfig& ood_cfg,
                   const McConfig& cfg,
                   std::optional<std::pair<SpectrumBounds, SpectrumBounds>> spectra,
                   UnderparamForm form) {
    cfg.validate();
    for (const auto& s : schedule) check_dims(teacher, n, s);
    if (!spectra) spectra = default_spectra(teacher, ood_cfg, stream_seed(cfg.base_seed, ~0ULL));

    RiskCurve curve;
    curve.id_spectrum = spectra->first;
    curve.ood_spectrum = spectra->second;
    const TheoryCurve theory =
        theory_sweep(teacher, schedule, n, *spectra, teacher.sigma_prime, form);

    const std::size_t P = schedule.size();
    const std::size_t T = static_cast<std::size_t>(cfg.trials);
    // values[metric][p][trial]
    std::vector<std::vector<std::vector<double>>> values(
        3, std::vector<std::vector<double>>(P, std::vector<double>(T)));

    run_trials(cfg.trials, cfg.threads, [&](Eigen::Index k) {
        Rng train_rng(substream(cfg, k, kTrainStream));
        const SampleSet train = sample_train(teacher, n, train_rng);
        const TestDraws id = draw_id_test(teacher, cfg.test_points, substream(cfg, k, kIdTestStream));
        const TestDraws ood =
            draw_ood_test(teacher, cfg.test_points, ood_cfg, substream(cfg, k, kOodTestStream));
        const auto t = static_cast<std::size_t>(k);
        for (std::size_t i = 0; i < P; ++i) {
            const SubsetClassifier clf = fit_subset(train.X, train.y, schedule[i], teacher.activation);
            values[0][i][t] = squared_risk(id, clf.w_hat, teacher.activation);
            values[1][i][t] = confidence_risk(id, clf.w_hat, teacher.activation) +
                              confidence_risk(ood, clf.w_hat, teacher.activation);
            values[2][i][t] = (clf.w_hat - teacher.w_star).squaredNorm();
        }
    });

    curve.records.reserve(P);
    for (std::size_t i = 0; i < P; ++i) {
        curve.records.push_back(RiskRecord{theory[i], summarize(values[0][i]),
                                           summarize(values[1][i]), summarize(values[2][i])});
    }
    return curve;
}

}  // namespace ddlab
