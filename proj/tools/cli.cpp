#include "cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ddlab/errors.hpp"
#include "ddlab/ingest.hpp"
#include "ddlab/metrics.hpp"
#include "ddlab/ood_scores.hpp"
#include "ddlab/risk_mc.hpp"
#include "ddlab/risk_theory.hpp"

#ifndef DDLAB_VERSION
#define DDLAB_VERSION "dev"
#endif

namespace ddlab::cli {

namespace {

using json = nlohmann::ordered_json;

constexpr const char* kCurveSchema = "ddlab-curve v1";

/// Thrown for parameter combinations that parse but make no sense.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct TeacherArgs {
    Eigen::Index d = 60;
    Eigen::Index n = 30;
    Eigen::Index p_min = 2;
    Eigen::Index p_max = 0;  // 0 = d
    double sigma = 0.5;
    double sigma_prime = 0.1;
    double ood_scale = 2.0;
    Eigen::Index signal_dims = 20;
    double signal_norm2 = 1.0;
    std::string phi = "identity";
    std::string convention = "proof";
    std::string form = "printed";
    std::uint64_t seed = 1;
};

void add_teacher_options(CLI::App& cmd, TeacherArgs& a) {
    cmd.add_option("--d", a.d, "Feature dimension")->capture_default_str();
    cmd.add_option("--n", a.n, "Training samples")->capture_default_str();
    cmd.add_option("--p-min", a.p_min, "Smallest subset size")->capture_default_str();
    cmd.add_option("--p-max", a.p_max, "Largest subset size (0 = d)")->capture_default_str();
    cmd.add_option("--sigma", a.sigma, "Training noise std")->capture_default_str();
    cmd.add_option("--sigma-prime", a.sigma_prime, "OOD target noise std")->capture_default_str();
    cmd.add_option("--ood-scale", a.ood_scale, "OOD input scale s (x ~ s N(0, I))")->capture_default_str();
    cmd.add_option("--signal-dims", a.signal_dims, "Teacher signal spread evenly over the first k coordinates")
        ->capture_default_str();
    cmd.add_option("--signal-norm2", a.signal_norm2, "Squared norm of the teacher weights")->capture_default_str();
    cmd.add_option("--phi", a.phi, "Activation")->check(CLI::IsMember({"identity", "sigmoid"}))->capture_default_str();
    cmd.add_option("--convention", a.convention, "OOD bound columns")
        ->check(CLI::IsMember({"proof", "paper"}))
        ->capture_default_str();
    cmd.add_option("--form", a.form, "Underparameterized variance coefficient: printed n/(n-p-1) or wishart p/(n-p-1)")
        ->check(CLI::IsMember({"printed", "wishart"}))
        ->capture_default_str();
    cmd.add_option("--seed", a.seed, "Base seed")->capture_default_str();
}

TeacherModel make_teacher(const TeacherArgs& a) {
    if (a.d < 1 || a.n < 1) throw UsageError("--d and --n must be >= 1");
    if (a.signal_dims < 1 || a.signal_dims > a.d) throw UsageError("--signal-dims must be in [1, d]");
    if (!(a.signal_norm2 >= 0.0)) throw UsageError("--signal-norm2 must be >= 0");
    if (!(a.sigma >= 0.0) || !(a.sigma_prime >= 0.0)) throw UsageError("noise levels must be >= 0");
    if (!(a.ood_scale > 0.0)) throw UsageError("--ood-scale must be > 0");
    Eigen::VectorXd w = Eigen::VectorXd::Zero(a.d);
    w.head(a.signal_dims).setConstant(std::sqrt(a.signal_norm2 / static_cast<double>(a.signal_dims)));
    return TeacherModel::with_shared_weights(std::move(w), a.sigma, a.sigma_prime, parse_activation(a.phi));
}

std::vector<FeatureSubset> make_schedule(const TeacherArgs& a) {
    const Eigen::Index p_max = a.p_max == 0 ? a.d : a.p_max;
    if (a.p_min < 1 || p_max < a.p_min || p_max > a.d)
        throw UsageError("invalid p range [" + std::to_string(a.p_min) + ", " + std::to_string(p_max) +
                         "] for d=" + std::to_string(a.d));
    return prefix_schedule(a.p_min, p_max, a.d);
}

BoundConvention convention_of(const TeacherArgs& a) {
    return a.convention == "paper" ? BoundConvention::PaperLiteral : BoundConvention::ProofConsistent;
}

UnderparamForm form_of(const TeacherArgs& a) {
    return a.form == "wishart" ? UnderparamForm::InverseWishart : UnderparamForm::AsPrinted;
}

/// Theory columns of one curve row.
std::string theory_columns(const TheoryRecord& r, BoundConvention conv) {
    std::ostringstream os;
    os << r.p << ',' << format_ext(r.c) << ',' << format_ext(r.risk.lo) << ',' << format_ext(r.risk.hi) << ',';
    if (conv == BoundConvention::ProofConsistent)
        os << format_ext(r.ood_proof.lo) << ',' << format_ext(r.ood_proof.hi);
    else
        os << format_ext(r.ood_paper_lo) << ',' << format_ext(r.ood_paper_hi);
    os << ',' << to_string(conv);
    return os.str();
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
    if (path.empty() || path == "-") {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write '" + path + "'");
    f << text;
}

json teacher_json(const TeacherArgs& a) {
    return json{{"d", a.d},
                {"n", a.n},
                {"p_min", a.p_min},
                {"p_max", a.p_max == 0 ? a.d : a.p_max},
                {"sigma", a.sigma},
                {"sigma_prime", a.sigma_prime},
                {"ood_scale", a.ood_scale},
                {"signal_dims", a.signal_dims},
                {"signal_norm2", a.signal_norm2},
                {"phi", a.phi},
                {"convention", a.convention},
                {"form", a.form}};
}

void write_manifest(const std::string& command, const std::vector<std::string>& argv, json params,
                    std::uint64_t seed, const std::vector<std::string>& outputs, double seconds,
                    json summary, const std::string& path, std::ostream& out) {
    json m;
    m["command"] = command;
    m["argv"] = argv;
    m["parameters"] = std::move(params);
    m["base_seed"] = seed;
    m["tool_version"] = DDLAB_VERSION;
    m["outputs"] = outputs;
    m["wall_clock_seconds"] = seconds;
    if (!summary.is_null()) m["summary"] = std::move(summary);
    emit(m.dump(2) + "\n", path, out);
}

std::string default_manifest_path(const std::string& out_path) {
    return (out_path.empty() || out_path == "-") ? std::string() : out_path + ".manifest.json";
}

FeatureTable load_table(const std::string& path) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) return FeatureTable{read_csv(path), {}};
    return read_table(path);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

struct ScoreArgs {
    std::string train, eval, methods = "all", out;
    double temperature = 1.0;
    double ash_percentile = 90.0;
};

int cmd_score(const ScoreArgs& a, std::ostream& out) {
    const FeatureTable train = load_table(a.train);
    const FeatureTable eval = load_table(a.eval);
    const std::optional<ClassifierHead> head = train.head ? train.head : eval.head;
    if (head) head->check_against(eval.outputs);
    const IdStats stats = fit_id_stats(train.outputs, head);

    std::vector<Method> methods;
    if (a.methods == "all") {
        methods = applicable_methods(eval.outputs, head, stats);
    } else {
        for (const auto& name : split_list(a.methods)) {
            try {
                methods.push_back(parse_method(name));
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
        }
    }
    if (methods.empty()) throw UsageError("no scoring method selected");

    ScoreOptions opts{a.temperature, a.ash_percentile};
    std::vector<ScoreVector> columns;
    for (Method m : methods) columns.push_back(score(m, eval.outputs, head, stats, opts));

    std::ostringstream os;
    for (std::size_t k = 0; k < columns.size(); ++k) os << (k ? "," : "") << to_string(columns[k].method);
    os << '\n';
    for (Eigen::Index i = 0; i < eval.outputs.rows(); ++i) {
        for (std::size_t k = 0; k < columns.size(); ++k) os << (k ? "," : "") << format_double(columns[k].scores(i));
        os << '\n';
    }
    emit(os.str(), a.out, out);
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Double-descent risk laboratory and post-hoc OOD scoring engine", "ddlab"};
    app.require_subcommand(1);
    app.set_version_flag("--version", DDLAB_VERSION);

    TeacherArgs theory_args;
    std::string theory_out;
    auto* theory = app.add_subcommand("theory-sweep", "Closed-form risk and OOD-risk bounds over p");
    add_teacher_options(*theory, theory_args);
    theory->add_option("--out", theory_out, "Curve CSV (default stdout)");

    TeacherArgs mc_args;
    std::string mc_out, mc_manifest;
    Eigen::Index trials = 500, test_points = 2000;
    unsigned threads = 0;
    auto* mc = app.add_subcommand("mc-sweep", "Monte Carlo double-descent sweep with theory columns");
    add_teacher_options(*mc, mc_args);
    mc->add_option("--trials", trials, "Training-set draws per p")->capture_default_str();
    mc->add_option("--test-points", test_points, "Evaluation draws per trial")->capture_default_str();
    mc->add_option("--threads", threads, "Worker threads (0 = DDLAB_THREADS or all cores)")->capture_default_str();
    mc->add_option("--out", mc_out, "Curve CSV (default stdout)");
    mc->add_option("--manifest", mc_manifest, "Run manifest JSON (default <out>.manifest.json)");

    ScoreArgs score_args;
    auto* scorecmd = app.add_subcommand("score", "Fit ID statistics on --train and score --eval");
    scorecmd->add_option("--train", score_args.train, "Training table (DDFT binary or .csv)")->required();
    scorecmd->add_option("--eval", score_args.eval, "Evaluation table (DDFT binary or .csv)")->required();
    scorecmd->add_option("--method", score_args.methods, "Comma-separated methods or 'all'")->capture_default_str();
    scorecmd->add_option("--temperature", score_args.temperature, "Energy temperature")->capture_default_str();
    scorecmd->add_option("--ash-percentile", score_args.ash_percentile, "ASH-P pruning percentile")
        ->capture_default_str();
    scorecmd->add_option("--out", score_args.out, "Scores CSV (default stdout)");

    std::string auc_id, auc_ood, auc_column, auc_out;
    auto* auccmd = app.add_subcommand("auc", "AUC of ID vs OOD score files");
    auccmd->add_option("--id", auc_id, "ID scores CSV")->required();
    auccmd->add_option("--ood", auc_ood, "OOD scores CSV")->required();
    auccmd->add_option("--column", auc_column, "Score column (default: first)");
    auccmd->add_option("--out", auc_out, "JSON output (default stdout)");

    std::string nc1_table, nc1_over, nc1_out;
    auto* nc1cmd = app.add_subcommand("nc1", "Within/between class variability NC1 of a labelled table");
    nc1cmd->add_option("--table", nc1_table, "Labelled feature table")->required();
    nc1cmd->add_option("--over-table", nc1_over, "Features of the widest model; adds the NC1 ratio");
    nc1cmd->add_option("--out", nc1_out, "JSON output (default stdout)");

    std::string spec_table, spec_out;
    std::int64_t spec_classes = 0;
    auto* speccmd = app.add_subcommand("spectrum", "Explained-variance eigen-spectrum of the features");
    speccmd->add_option("--table", spec_table, "Feature table")->required();
    speccmd->add_option("--classes", spec_classes, "Marker position (default: classes in the table)");
    speccmd->add_option("--out", spec_out, "JSON output (default stdout)");

    std::string conv_in, conv_out;
    auto* convcmd = app.add_subcommand("convert", "Convert between DDFT binary and CSV (by extension)");
    convcmd->add_option("--in", conv_in, "Input table")->required();
    convcmd->add_option("--out", conv_out, "Output table")->required();

    std::string replay_manifest;
    auto* replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
    replay->add_option("manifest", replay_manifest, "Manifest JSON")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    try {
        if (theory->parsed()) {
            const TeacherModel teacher = make_teacher(theory_args);
            const auto schedule = make_schedule(theory_args);
            const auto spectra = default_spectra(teacher, OodInputConfig{theory_args.ood_scale}, theory_args.seed);
            const TheoryCurve curve =
                theory_sweep(teacher, schedule, theory_args.n, spectra, teacher.sigma_prime, form_of(theory_args));
            const BoundConvention conv = convention_of(theory_args);
            std::ostringstream os;
            os << "# " << kCurveSchema << " command=theory-sweep form=" << theory_args.form << '\n';
            os << "p,c,risk_lo,risk_hi,ood_lo,ood_hi,convention\n";
            for (const auto& r : curve) os << theory_columns(r, conv) << '\n';
            emit(os.str(), theory_out, out);
            return kExitOk;
        }
        if (mc->parsed()) {
            const auto start = std::chrono::steady_clock::now();
            const TeacherModel teacher = make_teacher(mc_args);
            const auto schedule = make_schedule(mc_args);
            if (trials < 1 || test_points < 1) throw UsageError("--trials and --test-points must be >= 1");
            McConfig mc_cfg;
            mc_cfg.threads = threads;
            mc_cfg.trials = trials;
            mc_cfg.test_points = test_points;
            mc_cfg.base_seed = mc_args.seed;
            const RiskCurve curve = dd_sweep(teacher, mc_args.n, schedule, OodInputConfig{mc_args.ood_scale},
                                             mc_cfg, std::nullopt, form_of(mc_args));
            const BoundConvention conv = convention_of(mc_args);
            std::ostringstream os;
            os << "# " << kCurveSchema << " command=mc-sweep form=" << mc_args.form << '\n';
            os << "p,c,risk_lo,risk_hi,ood_lo,ood_hi,convention,mc_risk,mc_risk_se,mc_ood,mc_ood_se,mc_werr,mc_werr_se\n";
            for (const auto& r : curve.records) {
                os << theory_columns(r.theory, conv) << ',' << format_double(r.mc_risk.mean) << ','
                   << format_double(r.mc_risk.std_error) << ',' << format_double(r.mc_ood.mean) << ','
                   << format_double(r.mc_ood.std_error) << ',' << format_double(r.mc_weight_err.mean) << ','
                   << format_double(r.mc_weight_err.std_error) << '\n';
            }
            emit(os.str(), mc_out, out);

            const std::string manifest_path = mc_manifest.empty() ? default_manifest_path(mc_out) : mc_manifest;
            if (!manifest_path.empty()) {
                json params = teacher_json(mc_args);
                params["trials"] = trials;
                params["test_points"] = test_points;
                const double seconds =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                json summary{{"peak_p_risk", curve.peak_p_risk()},
                             {"peak_p_ood", curve.peak_p_ood()},
                             {"peak_in_window", std::abs(curve.peak_p_risk() - mc_args.n) <= 2},
                             {"threads", resolve_threads(threads)}};
                write_manifest("mc-sweep", args, params, mc_args.seed, {mc_out}, seconds, summary,
                               manifest_path, out);
            }
            return kExitOk;
        }
        if (scorecmd->parsed()) return cmd_score(score_args, out);
        if (auccmd->parsed()) {
            const NumericCsv id = read_numeric_csv(auc_id);
            const NumericCsv ood = read_numeric_csv(auc_ood);
            const std::string col = auc_column.empty() ? id.header.front() : auc_column;
            const AucResult r = auc(id.column(col), ood.column(col));
            json j{{"auc", r.auc}, {"n_id", r.n_id}, {"n_ood", r.n_ood}, {"column", col}};
            emit(j.dump() + "\n", auc_out, out);
            return kExitOk;
        }
        if (nc1cmd->parsed()) {
            auto nc1_of = [](const std::string& path) {
                const FeatureTable t = load_table(path);
                if (!t.outputs.labels) throw MissingBlock("labels", "nc1");
                try {
                    return nc1(t.outputs.features, *t.outputs.labels);
                } catch (const std::invalid_argument& e) {
                    throw DataError(e.what());
                }
            };
            const Nc1Report r = nc1_of(nc1_table);
            json j{{"nc1", r.nc1}, {"per_class_counts", r.per_class_counts}};
            if (!nc1_over.empty()) {
                const Nc1Report over = nc1_of(nc1_over);
                j["nc1_over"] = over.nc1;
                try {
                    j["nc1_ratio"] = nc1_ratio(r.nc1, over.nc1);
                } catch (const std::invalid_argument& e) {
                    throw DataError(e.what());
                }
            }
            emit(j.dump() + "\n", nc1_out, out);
            return kExitOk;
        }
        if (speccmd->parsed()) {
            const FeatureTable t = load_table(spec_table);
            std::int64_t classes = spec_classes;
            if (classes == 0 && t.outputs.logits) classes = t.outputs.logits->cols();
            if (classes == 0 && t.outputs.labels) classes = t.outputs.labels->maxCoeff() + 1;
            SpectrumReport r;
            try {
                r = explained_variance_spectrum(t.outputs.features, classes);
            } catch (const std::invalid_argument& e) {
                throw DataError(e.what());
            }
            json j{{"eigenvalues", r.eigenvalues},
                   {"explained_fraction", r.explained_fraction},
                   {"marker_index", r.marker_index}};
            emit(j.dump() + "\n", spec_out, out);
            return kExitOk;
        }
        if (convcmd->parsed()) {
            const FeatureTable t = load_table(conv_in);
            if (conv_out.size() >= 4 && conv_out.compare(conv_out.size() - 4, 4, ".csv") == 0) {
                if (t.head) err << "warning: classifier head is not representable in CSV and was dropped\n";
                write_csv(t.outputs, conv_out);
            } else {
                write_table(t.outputs, t.head, conv_out);
            }
            return kExitOk;
        }
        if (replay->parsed()) {
            std::ifstream in(replay_manifest);
            if (!in) throw DataError("cannot open manifest '" + replay_manifest + "'");
            json m;
            try {
                m = json::parse(in);
            } catch (const json::exception& e) {
                throw DataError(std::string("invalid manifest: ") + e.what());
            }
            if (!m.contains("argv") || !m["argv"].is_array()) throw DataError("manifest has no argv");
            return run(m["argv"].get<std::vector<std::string>>(), out, err);
        }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::invalid_argument& e) {
        err << "invalid argument: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace ddlab::cli
