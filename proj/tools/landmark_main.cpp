// Command-line front end: fits the longitudinal and revival models, produces
// dynamic predictions, runs cross-validated evaluations, simulates datasets,
// and emits Kaplan-Meier curves as plot-ready CSV.
//
// Every command is a pure function of (input files, config, seed); reruns
// produce byte-identical output. All outputs carry the hash of the resolved
// configuration.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "landmark/landmark.hpp"

namespace {

using landmark::json;

// flat key=value configuration file; '#' starts a comment
std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw landmark::ConfigError("cannot open config file: " + path);
    std::map<std::string, std::string> cfg;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!key.empty()) cfg[key] = value;
    }
    return cfg;
}

// Pre-scan for --config so file values can seed the option defaults; parsed
// flags then override them.
std::string find_config_path(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config" && i + 1 < argc) return argv[i + 1];
        if (a.rfind("--config=", 0) == 0) return a.substr(9);
    }
    return {};
}

struct Defaults {
    std::map<std::string, std::string> file;

    std::string str(const std::string& key, const std::string& fallback) const {
        const auto it = file.find(key);
        return it == file.end() ? fallback : it->second;
    }
    double num(const std::string& key, double fallback) const {
        const auto it = file.find(key);
        return it == file.end() ? fallback : landmark::csv::parse_double(it->second, "config " + key);
    }
    int integer(const std::string& key, int fallback) const {
        const auto it = file.find(key);
        return it == file.end() ? fallback : landmark::csv::parse_int(it->second, "config " + key);
    }
    bool flag(const std::string& key, bool fallback) const {
        const auto it = file.find(key);
        if (it == file.end()) return fallback;
        const std::string& v = it->second;
        if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
        if (v == "0" || v == "false" || v == "off" || v == "no") return false;
        throw landmark::ConfigError("config " + key + ": expected a boolean, got '" + v + "'");
    }
};

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// resolved settings shared by the pipeline commands
struct RunSettings {
    std::string data_long, data_surv, out;
    double s = 3.0, w = 2.0, tau = 9.0, epsilon = 1.0 / 365.25;
    std::string methods = "all";
    std::string cv = "loo";
    int folds = 10;
    std::uint64_t seed = 1;
    bool exclude_baseline = true;
    bool adjust_arm = false;
    bool per_arm_km = true;
    bool shared_noise = false;
    bool recalibrate_revival = true;

    std::string canonical(const std::string& command) const {
        std::ostringstream os;
        os << "command=" << command << "\n"
           << "data-long=" << data_long << "\n"
           << "data-surv=" << data_surv << "\n"
           << "s=" << landmark::csv::format_double(s) << "\n"
           << "w=" << landmark::csv::format_double(w) << "\n"
           << "tau=" << landmark::csv::format_double(tau) << "\n"
           << "epsilon=" << landmark::csv::format_double(epsilon) << "\n"
           << "methods=" << methods << "\n"
           << "cv=" << cv << "\n"
           << "folds=" << folds << "\n"
           << "seed=" << seed << "\n"
           << "exclude-baseline=" << exclude_baseline << "\n"
           << "adjust-arm=" << adjust_arm << "\n"
           << "per-arm-km=" << per_arm_km << "\n"
           << "shared-noise=" << shared_noise << "\n"
           << "recalibrate-revival=" << recalibrate_revival << "\n";
        return os.str();
    }

    std::string hash(const std::string& command) const { return hex64(fnv1a(canonical(command))); }

    landmark::PipelineOptions pipeline() const {
        landmark::PipelineOptions po;
        po.tau = tau;
        po.epsilon = epsilon;
        po.adjust_arm = adjust_arm;
        po.per_arm_km = per_arm_km;
        po.shared_noise = shared_noise;
        po.fit.exclude_baseline = exclude_baseline;
        return po;
    }

    std::vector<landmark::MethodId> method_list() const {
        std::vector<landmark::MethodId> out;
        if (methods == "all") {
            out = {landmark::MethodId::locf, landmark::MethodId::blup,
                   landmark::MethodId::xhat_gp, landmark::MethodId::xhat_revival,
                   landmark::MethodId::direct_revival};
            return out;
        }
        std::stringstream ss(methods);
        std::string name;
        while (std::getline(ss, name, ',')) out.push_back(landmark::parse_method(name));
        if (out.empty()) throw landmark::ConfigError("empty method list");
        return out;
    }

    landmark::CVScheme cv_scheme() const {
        if (cv == "loo") return landmark::CVScheme::leave_one_out();
        if (cv == "kfold") return landmark::CVScheme::k_fold(folds, seed);
        throw landmark::ConfigError("cv must be 'loo' or 'kfold', got '" + cv + "'");
    }

    // fit-only commands do not use the prediction window, so its constraints
    // are checked only where they apply
    void validate(bool needs_window) const {
        std::vector<std::string> violations;
        if (!(tau > 0.0)) violations.push_back("tau must be > 0");
        if (!(epsilon > 0.0)) violations.push_back("epsilon must be > 0");
        if (needs_window) {
            if (s < 0.0) violations.push_back("s must be >= 0");
            if (!(w > 0.0)) violations.push_back("w must be > 0");
            bool revival = methods == "all";
            if (!revival)
                for (const auto m : method_list())
                    revival |= landmark::uses_revival(m);
            if (revival && s + w > tau)
                violations.push_back("s + w <= tau is required when a revival method is selected");
        }
        if (!violations.empty()) {
            std::string msg = "invalid configuration:";
            for (const auto& v : violations) msg += " [" + v + "]";
            throw landmark::ConfigError(msg);
        }
    }
};

void add_common_options(CLI::App* cmd, RunSettings& rs, const Defaults& d, bool needs_data) {
    rs.data_long = d.str("data-long", "");
    rs.data_surv = d.str("data-surv", "");
    rs.out = d.str("out", "");
    rs.s = d.num("s", rs.s);
    rs.w = d.num("w", rs.w);
    rs.tau = d.num("tau", rs.tau);
    rs.epsilon = d.num("epsilon", rs.epsilon);
    rs.methods = d.str("methods", rs.methods);
    rs.cv = d.str("cv", rs.cv);
    rs.folds = d.integer("folds", rs.folds);
    rs.seed = static_cast<std::uint64_t>(d.num("seed", static_cast<double>(rs.seed)));
    rs.exclude_baseline = d.flag("exclude-baseline", rs.exclude_baseline);
    rs.adjust_arm = d.flag("adjust-arm", rs.adjust_arm);
    rs.per_arm_km = d.flag("per-arm-km", rs.per_arm_km);
    rs.shared_noise = d.flag("shared-noise", rs.shared_noise);
    rs.recalibrate_revival = d.flag("recalibrate-revival", rs.recalibrate_revival);

    static std::string config_echo;
    cmd->add_option("--config", config_echo, "flat key=value config file; flags win");
    auto* lo = cmd->add_option("--data-long", rs.data_long, "longitudinal CSV (id,time,value)");
    auto* so = cmd->add_option("--data-surv", rs.data_surv, "survival CSV (id,survtime,status,arm)");
    if (needs_data) {
        lo->required(rs.data_long.empty());
        so->required(rs.data_surv.empty());
    }
    cmd->add_option("--out", rs.out, "output file (default: stdout)");
    cmd->add_option("--s", rs.s, "landmark time in years");
    cmd->add_option("--w", rs.w, "prediction window in years");
    cmd->add_option("--tau", rs.tau, "revival observation limit in years");
    cmd->add_option("--epsilon", rs.epsilon, "revival log-offset in years");
    cmd->add_option("--methods", rs.methods,
                    "comma list of locf,blup,xhat-gp,xhat-revival,direct-revival or 'all'");
    cmd->add_option("--cv", rs.cv, "cross-validation scheme: loo or kfold");
    cmd->add_option("--folds", rs.folds, "number of folds for kfold");
    cmd->add_option("--seed", rs.seed, "seed for fold assignment / simulation");
    cmd->add_flag("--exclude-baseline,!--no-exclude-baseline", rs.exclude_baseline,
                  "drop t=0 measurements from model fitting");
    cmd->add_flag("--adjust-arm,!--no-adjust-arm", rs.adjust_arm,
                  "add the treatment arm to the landmark Cox model");
    cmd->add_flag("--per-arm-km,!--no-per-arm-km", rs.per_arm_km,
                  "stratify the revival marginal survival by arm");
    cmd->add_flag("--shared-noise,!--no-shared-noise", rs.shared_noise,
                  "share the white-noise variance across revival strata");
    cmd->add_flag("--recalibrate-revival,!--no-recalibrate-revival", rs.recalibrate_revival,
                  "score revival methods on calibrated predictions");
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw landmark::DataError("cannot write to " + path);
    out << text;
}

void write_json(const std::string& path, json j, const std::string& config_hash) {
    j["config_hash"] = config_hash;
    write_text(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

int cmd_fit_longitudinal(const RunSettings& rs) {
    rs.validate(false);
    const auto subjects = landmark::load_dataset(rs.data_long, rs.data_surv);
    landmark::FitOptions fo;
    fo.exclude_baseline = rs.exclude_baseline;
    const auto fit = landmark::fit_gp(subjects, landmark::TrendSpec{}, fo);
    write_json(rs.out, landmark::to_json(fit), rs.hash("fit-longitudinal"));
    return 0;
}

int cmd_fit_revival(const RunSettings& rs) {
    rs.validate(false);
    const auto subjects = landmark::load_dataset(rs.data_long, rs.data_surv);
    landmark::RevivalOptions ro;
    ro.fit.exclude_baseline = rs.exclude_baseline;
    ro.shared_noise = rs.shared_noise;
    const auto model = landmark::fit_revival(subjects, rs.tau, rs.epsilon, ro);
    write_json(rs.out, landmark::to_json(model), rs.hash("fit-revival"));
    return 0;
}

int cmd_predict(const RunSettings& rs, const std::string& json_out,
                const std::string& paths_out) {
    rs.validate(true);
    const auto subjects = landmark::load_dataset(rs.data_long, rs.data_surv);
    const auto methods = rs.method_list();
    const auto lm = landmark::build_landmark(subjects, rs.s, rs.w);
    const landmark::PipelineOptions po = rs.pipeline();
    const std::set<landmark::MethodId> method_set(methods.begin(), methods.end());
    const auto bundle = landmark::fit_models(subjects, method_set, rs.s, po);

    std::ostringstream paths_csv;
    paths_csv << "# config-hash: " << rs.hash("predict") << "\n";
    paths_csv << "id,method,time,xhat\n";

    std::vector<landmark::PredictionResult> results;
    for (const auto m : methods) {
        const auto trained = landmark::train(m, lm, bundle, po);
        for (const auto& sub : lm.subjects)
            results.push_back(landmark::predict_subject(trained, sub));
        if (!paths_out.empty() && landmark::uses_cox(m)) {
            const auto paths = landmark::make_paths(m, lm, bundle);
            for (std::size_t i = 0; i < paths.size(); ++i)
                for (std::size_t g = 0; g < paths[i].times.size(); ++g)
                    paths_csv << lm.subjects[i].id << ',' << method_name(m) << ','
                              << landmark::csv::format_double(paths[i].times[g]) << ','
                              << landmark::csv::format_double(paths[i].values[g]) << '\n';
        }
    }
    if (!paths_out.empty()) write_text(paths_out, paths_csv.str());
    std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) {
        return a.id != b.id ? a.id < b.id : method_name(a.method) < std::string(method_name(b.method));
    });

    std::ostringstream csv;
    csv << "# config-hash: " << rs.hash("predict") << "\n";
    csv << "id,method,pi_hat\n";
    for (const auto& r : results)
        csv << r.id << ',' << method_name(r.method) << ','
            << landmark::csv::format_double(r.pi_hat) << '\n';
    write_text(rs.out, csv.str());

    if (!json_out.empty()) {
        json arr = json::array();
        for (const auto& r : results) arr.push_back(landmark::to_json(r));
        write_json(json_out, json{{"predictions", arr}}, rs.hash("predict"));
    }
    return 0;
}

int cmd_evaluate(const RunSettings& rs, const std::string& json_out,
                 const std::string& preds_out) {
    rs.validate(true);
    const auto subjects = landmark::load_dataset(rs.data_long, rs.data_surv);
    landmark::EvalOptions eo;
    eo.pipeline = rs.pipeline();
    eo.recalibrate_revival = rs.recalibrate_revival;
    landmark::CrossValidation cv;
    const auto report = landmark::evaluate_methods(subjects, rs.method_list(), rs.s, rs.w,
                                                   rs.cv_scheme(), eo, &cv);

    std::string text = "# config-hash: " + rs.hash("evaluate") + "\n";
    text += landmark::format_report(report);
    write_text(rs.out, text);
    if (!json_out.empty()) write_json(json_out, landmark::to_json(report), rs.hash("evaluate"));
    if (!preds_out.empty()) {
        std::ostringstream csv;
        csv << "# config-hash: " << rs.hash("evaluate") << "\n";
        csv << "id,method,pi_hat\n";
        for (const auto& [m, preds] : cv.by_method)
            for (const auto& p : preds)
                csv << p.id << ',' << method_name(m) << ','
                    << landmark::csv::format_double(p.pi_hat) << '\n';
        for (const auto& p : cv.null_model)
            csv << p.id << ",null," << landmark::csv::format_double(p.pi_hat) << '\n';
        write_text(preds_out, csv.str());
    }
    return 0;
}

int cmd_km(const RunSettings& rs, bool per_arm) {
    const auto subjects = rs.data_long.empty()
                              ? landmark::load_survival(rs.data_surv)
                              : landmark::load_dataset(rs.data_long, rs.data_surv);
    std::ostringstream csv;
    csv << "# config-hash: " << rs.hash("km") << "\n";
    csv << "curve,group,time,value\n";
    auto emit = [&](const std::string& curve, const std::string& group,
                    const landmark::StepFunction& sf) {
        csv << curve << ',' << group << ",0," << landmark::csv::format_double(sf.initial) << '\n';
        for (std::size_t i = 0; i < sf.times.size(); ++i)
            csv << curve << ',' << group << ',' << landmark::csv::format_double(sf.times[i])
                << ',' << landmark::csv::format_double(sf.values[i]) << '\n';
    };
    auto run_group = [&](const std::string& group, const std::vector<landmark::Subject>& subs) {
        std::vector<double> times;
        std::vector<int> statuses;
        for (const auto& s : subs) {
            times.push_back(s.event_time);
            statuses.push_back(s.status);
        }
        emit("survival", group, landmark::kaplan_meier(times, statuses));
        emit("censoring", group, landmark::reverse_km(times, statuses));
    };
    if (per_arm) {
        for (int arm = 0; arm <= 1; ++arm) {
            std::vector<landmark::Subject> group;
            for (const auto& s : subjects)
                if (s.arm == arm) group.push_back(s);
            if (!group.empty()) run_group("arm" + std::to_string(arm), group);
        }
    } else {
        run_group("all", subjects);
    }
    write_text(rs.out, csv.str());
    return 0;
}

struct SimSettings {
    landmark::SimConfig cfg;
    std::string out_long = "sim_long.csv";
    std::string out_surv = "sim_surv.csv";

    std::string canonical() const {
        std::ostringstream os;
        os << "command=simulate\n"
           << "sim-n=" << cfg.n_subjects << "\n"
           << "sim-trend=" << landmark::csv::format_double(cfg.trend_coef(0)) << ','
           << landmark::csv::format_double(cfg.trend_coef(1)) << ','
           << landmark::csv::format_double(cfg.trend_coef(2)) << ','
           << landmark::csv::format_double(cfg.trend_coef(3)) << "\n"
           << "sim-sigma1-sq=" << landmark::csv::format_double(cfg.cov.sigma1_sq) << "\n"
           << "sim-sigma2-sq=" << landmark::csv::format_double(cfg.cov.sigma2_sq) << "\n"
           << "sim-lambda=" << landmark::csv::format_double(cfg.cov.lambda_decay) << "\n"
           << "sim-sigma3-sq=" << landmark::csv::format_double(cfg.cov.sigma3_sq) << "\n"
           << "sim-schedule=";
        for (std::size_t i = 0; i < cfg.schedule.size(); ++i)
            os << (i ? "," : "") << landmark::csv::format_double(cfg.schedule[i]);
        os << "\n"
           << "sim-observation-rate=" << landmark::csv::format_double(cfg.observation_rate) << "\n"
           << "sim-baseline-hazard=" << landmark::csv::format_double(cfg.baseline_hazard) << "\n"
           << "sim-log-hazard-coef=" << landmark::csv::format_double(cfg.log_hazard_coef) << "\n"
           << "sim-censoring-rate=" << landmark::csv::format_double(cfg.censoring_rate) << "\n"
           << "sim-max-time=" << landmark::csv::format_double(cfg.max_time) << "\n"
           << "sim-treat-fraction=" << landmark::csv::format_double(cfg.treat_fraction) << "\n"
           << "sim-grid-step=" << landmark::csv::format_double(cfg.grid_step) << "\n"
           << "seed=" << cfg.seed << "\n";
        return os.str();
    }
};

int cmd_simulate(const SimSettings& ss) {
    const auto subjects = landmark::simulate(ss.cfg);
    const std::string hash = hex64(fnv1a(ss.canonical()));
    std::ofstream lo(ss.out_long, std::ios::binary);
    std::ofstream so(ss.out_surv, std::ios::binary);
    if (!lo || !so)
        throw landmark::DataError("cannot write simulation output files");
    landmark::write_dataset_csv(subjects, lo, so, "config-hash: " + hash);
    return 0;
}

std::vector<double> parse_double_list(const std::string& csv_list, const std::string& what) {
    std::vector<double> out;
    if (csv_list.empty()) return out;
    std::stringstream ss(csv_list);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(landmark::csv::parse_double(item, what));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynamic prediction of survival from longitudinal biomarkers"};
    app.require_subcommand(1);

    Defaults defaults;
    std::string config_path = find_config_path(argc, argv);
    try {
        if (!config_path.empty()) defaults.file = read_config_file(config_path);
    } catch (const landmark::Error& e) {
        std::cerr << json{{"error", {{"type", "config"}, {"message", e.what()}}}}.dump() << "\n";
        return 1;
    }
    std::string config_dummy;
    app.add_option("--config", config_dummy, "flat key=value config file; flags win");

    RunSettings rs_fitl, rs_fitr, rs_pred, rs_eval, rs_km;
    std::string predict_json, evaluate_json, predict_paths, evaluate_preds;
    bool km_per_arm = defaults.flag("per-arm-km", true);

    auto* fit_long = app.add_subcommand("fit-longitudinal",
                                        "fit the working Gaussian process by maximum likelihood");
    add_common_options(fit_long, rs_fitl, defaults, true);

    auto* fit_rev = app.add_subcommand("fit-revival", "fit the time-reversed longitudinal models");
    add_common_options(fit_rev, rs_fitr, defaults, true);

    auto* predict = app.add_subcommand("predict", "dynamic predictions for the landmark cohort");
    add_common_options(predict, rs_pred, defaults, true);
    predict->add_option("--json", predict_json, "also write predictions with diagnostics as JSON");
    predict->add_option("--paths-out", predict_paths,
                        "write the per-subject covariate paths xhat(t|s) as CSV");

    auto* evaluate = app.add_subcommand("evaluate",
                                        "cross-validated comparison of prediction methods");
    add_common_options(evaluate, rs_eval, defaults, true);
    evaluate->add_option("--json", evaluate_json, "also write the report as JSON");
    evaluate->add_option("--preds-out", evaluate_preds,
                         "write the cross-validated predictions as CSV");

    auto* km = app.add_subcommand("km", "Kaplan-Meier survival and censoring curves as CSV");
    add_common_options(km, rs_km, defaults, false);
    km->get_option("--data-surv")->required(defaults.str("data-surv", "").empty());

    auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset");
    SimSettings ss;
    std::string sim_trend = defaults.str("sim-trend", "69.03,2.19,80.57,1.03");
    std::string sim_schedule = defaults.str("sim-schedule", "0,0.25,0.5,1,2,3");
    ss.cfg.n_subjects = defaults.integer("sim-n", 200);
    ss.cfg.cov.sigma1_sq = defaults.num("sim-sigma1-sq", 308.4);
    ss.cfg.cov.sigma2_sq = defaults.num("sim-sigma2-sq", 240.8);
    ss.cfg.cov.lambda_decay = defaults.num("sim-lambda", 0.52);
    ss.cfg.cov.sigma3_sq = defaults.num("sim-sigma3-sq", 184.3);
    ss.cfg.observation_rate = defaults.num("sim-observation-rate", 0.0);
    ss.cfg.baseline_hazard = defaults.num("sim-baseline-hazard", 0.1);
    ss.cfg.log_hazard_coef = defaults.num("sim-log-hazard-coef", 0.0);
    ss.cfg.censoring_rate = defaults.num("sim-censoring-rate", 0.05);
    ss.cfg.max_time = defaults.num("sim-max-time", 12.0);
    ss.cfg.treat_fraction = defaults.num("sim-treat-fraction", 0.5);
    ss.cfg.grid_step = defaults.num("sim-grid-step", 0.01);
    ss.cfg.seed = static_cast<std::uint64_t>(defaults.num("seed", 1));
    ss.out_long = defaults.str("out-long", ss.out_long);
    ss.out_surv = defaults.str("out-surv", ss.out_surv);
    simulate->add_option("--sim-n", ss.cfg.n_subjects, "number of subjects");
    simulate->add_option("--sim-trend", sim_trend, "trend coefficients int0,slope0,int1,slope1");
    simulate->add_option("--sim-sigma1-sq", ss.cfg.cov.sigma1_sq, "between-subject variance");
    simulate->add_option("--sim-sigma2-sq", ss.cfg.cov.sigma2_sq, "serial variance");
    simulate->add_option("--sim-lambda", ss.cfg.cov.lambda_decay, "serial decay rate");
    simulate->add_option("--sim-sigma3-sq", ss.cfg.cov.sigma3_sq, "white-noise variance");
    simulate->add_option("--sim-schedule", sim_schedule, "observation times, comma separated");
    simulate->add_option("--sim-observation-rate", ss.cfg.observation_rate,
                         "observations per year when no schedule");
    simulate->add_option("--sim-baseline-hazard", ss.cfg.baseline_hazard, "baseline hazard");
    simulate->add_option("--sim-log-hazard-coef", ss.cfg.log_hazard_coef,
                         "log-hazard per unit of the true marker");
    simulate->add_option("--sim-censoring-rate", ss.cfg.censoring_rate, "censoring rate");
    simulate->add_option("--sim-max-time", ss.cfg.max_time, "administrative end of follow-up");
    simulate->add_option("--sim-treat-fraction", ss.cfg.treat_fraction, "treatment probability");
    simulate->add_option("--sim-grid-step", ss.cfg.grid_step, "hazard discretization step");
    simulate->add_option("--seed", ss.cfg.seed, "simulation seed");
    simulate->add_option("--out-long", ss.out_long, "longitudinal output CSV");
    simulate->add_option("--out-surv", ss.out_surv, "survival output CSV");
    std::string sim_config_echo;
    simulate->add_option("--config", sim_config_echo, "flat key=value config file; flags win");

    km->add_flag("--per-arm,!--pooled", km_per_arm, "one curve per treatment arm");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*fit_long) return cmd_fit_longitudinal(rs_fitl);
        if (*fit_rev) return cmd_fit_revival(rs_fitr);
        if (*predict) return cmd_predict(rs_pred, predict_json, predict_paths);
        if (*evaluate) return cmd_evaluate(rs_eval, evaluate_json, evaluate_preds);
        if (*km) return cmd_km(rs_km, km_per_arm);
        if (*simulate) {
            const auto trend = parse_double_list(sim_trend, "sim-trend");
            if (trend.size() != 4)
                throw landmark::ConfigError("sim-trend needs exactly 4 coefficients");
            for (int i = 0; i < 4; ++i) ss.cfg.trend_coef(i) = trend[static_cast<std::size_t>(i)];
            ss.cfg.schedule = parse_double_list(sim_schedule, "sim-schedule");
            return cmd_simulate(ss);
        }
    } catch (const landmark::ConfigError& e) {
        std::cerr << json{{"error", {{"type", "config"}, {"message", e.what()}}}}.dump() << "\n";
        return 1;
    } catch (const landmark::DataError& e) {
        std::cerr << json{{"error", {{"type", "data"}, {"message", e.what()}}}}.dump() << "\n";
        return 1;
    } catch (const landmark::NumericError& e) {
        std::cerr << json{{"error", {{"type", "numeric"}, {"message", e.what()}}}}.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", {{"type", "internal"}, {"message", e.what()}}}}.dump() << "\n";
        return 1;
    }
    return 0;
}
