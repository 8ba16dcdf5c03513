#pragma once

#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <string>
#include <vector>

#include "landmark/cox.hpp"
#include "landmark/covariance.hpp"
#include "landmark/errors.hpp"
#include "landmark/evaluate.hpp"
#include "landmark/longitudinal.hpp"
#include "landmark/pipeline.hpp"
#include "landmark/revival.hpp"
#include "landmark/survival.hpp"

namespace landmark {

using json = nlohmann::json;

inline json to_json(const CovarianceParams& p) {
    return json{{"sigma1_sq", p.sigma1_sq},
                {"sigma2_sq", p.sigma2_sq},
                {"lambda_decay", p.lambda_decay},
                {"sigma3_sq", p.sigma3_sq}};
}

inline CovarianceParams covariance_from_json(const json& j) {
    CovarianceParams p;
    p.sigma1_sq = j.at("sigma1_sq").get<double>();
    p.sigma2_sq = j.at("sigma2_sq").get<double>();
    p.lambda_decay = j.at("lambda_decay").get<double>();
    p.sigma3_sq = j.at("sigma3_sq").get<double>();
    return p;
}

inline json to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (long i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline Eigen::VectorXd vector_from_json(const json& j) {
    Eigen::VectorXd v(static_cast<long>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<long>(i)) = j[i].get<double>();
    return v;
}

inline json to_json(const FittedLongitudinal& fit) {
    return json{{"model", "working-gaussian-process"},
                {"trend", {{"spec", "two-arm-linear"}, {"coefficients", to_json(fit.trend_coef)}}},
                {"covariance", to_json(fit.cov)},
                {"loglik", fit.loglik},
                {"n_obs", fit.n_obs},
                {"n_subjects", fit.n_subjects}};
}

inline FittedLongitudinal longitudinal_from_json(const json& j) {
    FittedLongitudinal fit;
    if (j.at("trend").at("spec").get<std::string>() != "two-arm-linear")
        throw DataError("unknown trend spec in model file");
    fit.trend_coef = vector_from_json(j.at("trend").at("coefficients"));
    fit.cov = covariance_from_json(j.at("covariance"));
    fit.loglik = j.at("loglik").get<double>();
    fit.n_obs = j.at("n_obs").get<int>();
    fit.n_subjects = j.at("n_subjects").get<int>();
    return fit;
}

inline json to_json(const RevivalStratumFit& s) {
    return json{{"coefficients", to_json(s.coef)},
                {"covariance", to_json(s.cov)},
                {"loglik", s.loglik},
                {"n_obs", s.n_obs},
                {"n_subjects", s.n_subjects}};
}

inline RevivalStratumFit stratum_from_json(const json& j) {
    RevivalStratumFit s;
    s.coef = vector_from_json(j.at("coefficients"));
    s.cov = covariance_from_json(j.at("covariance"));
    s.loglik = j.at("loglik").get<double>();
    s.n_obs = j.at("n_obs").get<int>();
    s.n_subjects = j.at("n_subjects").get<int>();
    return s;
}

inline json to_json(const RevivalModel& m) {
    return json{{"model", "revival"},
                {"tau", m.tau},
                {"epsilon", m.epsilon},
                {"dead", to_json(m.dead)},
                {"survivor", to_json(m.survivor)}};
}

inline RevivalModel revival_from_json(const json& j) {
    RevivalModel m;
    m.tau = j.at("tau").get<double>();
    m.epsilon = j.at("epsilon").get<double>();
    m.dead = stratum_from_json(j.at("dead"));
    m.survivor = stratum_from_json(j.at("survivor"));
    return m;
}

inline json to_json(const StepFunction& sf) {
    return json{{"initial", sf.initial}, {"times", sf.times}, {"values", sf.values}};
}

inline json to_json(const CoxFit& fit) {
    json beta = json::array();
    for (long i = 0; i < fit.beta.size(); ++i)
        beta.push_back(json{{"beta", fit.beta(i)}, {"se", fit.se(static_cast<int>(i))}});
    return json{{"coefficients", beta},
                {"loglik_null", fit.loglik_null},
                {"loglik_final", fit.loglik_final},
                {"iterations", fit.iterations},
                {"baseline",
                 {{"times", fit.event_times}, {"increments", fit.baseline_increments}}}};
}

inline json to_json(const PredictionResult& r) {
    json j{{"id", r.id}, {"method", method_name(r.method)}, {"pi_hat", r.pi_hat}};
    if (std::isfinite(r.path_min)) {
        j["path"] = {{"min", r.path_min}, {"mean", r.path_mean}, {"max", r.path_max}};
    }
    if (std::isfinite(r.posterior_entropy)) j["posterior_entropy"] = r.posterior_entropy;
    return j;
}

inline json to_json(const EvaluationReport& rep) {
    json methods = json::array();
    for (const auto& ev : rep.methods) {
        json m{{"method", method_name(ev.method)},
               {"n_predictions", ev.n_predictions},
               {"brier", ev.brier},
               {"kl", ev.kl},
               {"brier_reduction_pct", ev.brier_reduction_pct},
               {"kl_reduction_pct", ev.kl_reduction_pct},
               {"calibration",
                {{"beta", ev.cal_beta},
                 {"se", ev.cal_se},
                 {"wald_chisq", ev.cal_wald_chisq},
                 {"lr_chisq", ev.cal_lr_chisq}}},
               {"recalibrated", ev.recalibrated}};
        if (std::isfinite(ev.lrt_vs_reference)) m["lrt_vs_reference"] = ev.lrt_vs_reference;
        methods.push_back(m);
    }
    return json{{"s", rep.s},
                {"w", rep.w},
                {"tau", rep.tau},
                {"cv", rep.cv_label},
                {"reference", method_name(rep.reference)},
                {"null_model", {{"brier", rep.null_brier}, {"kl", rep.null_kl}}},
                {"methods", methods},
                {"warnings", rep.warnings}};
}

// Text table in the layout of the usual method-comparison reports: calibration
// block then prediction-error block.
inline std::string format_report(const EvaluationReport& rep) {
    char buf[256];
    std::string out;
    std::snprintf(buf, sizeof(buf), "dynamic prediction at s=%g, w=%g, tau=%g, cv=%s\n",
                  rep.s, rep.w, rep.tau, rep.cv_label.c_str());
    out += buf;
    out += "\ncalibration (cloglog-transformed predictions)\n";
    std::snprintf(buf, sizeof(buf), "%-16s %8s %8s %8s %8s\n", "method", "beta", "se", "chi2",
                  "lrt");
    out += buf;
    for (const auto& ev : rep.methods) {
        if (std::isfinite(ev.lrt_vs_reference))
            std::snprintf(buf, sizeof(buf), "%-16s %8.3f %8.3f %8.2f %8.2f\n",
                          method_name(ev.method), ev.cal_beta, ev.cal_se, ev.cal_wald_chisq,
                          ev.lrt_vs_reference);
        else
            std::snprintf(buf, sizeof(buf), "%-16s %8.3f %8.3f %8.2f %8s\n",
                          method_name(ev.method), ev.cal_beta, ev.cal_se, ev.cal_wald_chisq,
                          "---");
        out += buf;
    }
    out += "\nprediction error\n";
    std::snprintf(buf, sizeof(buf), "%-16s %14s %14s\n", "method", "brier", "kl");
    out += buf;
    std::snprintf(buf, sizeof(buf), "%-16s %14.4f %14.4f\n", "null", rep.null_brier, rep.null_kl);
    out += buf;
    for (const auto& ev : rep.methods) {
        std::snprintf(buf, sizeof(buf), "%-16s %7.4f (%4.1f%%) %7.4f (%4.1f%%)\n",
                      method_name(ev.method), ev.brier, ev.brier_reduction_pct, ev.kl,
                      ev.kl_reduction_pct);
        out += buf;
    }
    if (!rep.warnings.empty()) {
        out += "\nwarnings:\n";
        for (const auto& w : rep.warnings) out += "  " + w + "\n";
    }
    return out;
}

}  // namespace landmark
