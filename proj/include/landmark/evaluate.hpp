#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "landmark/cox.hpp"
#include "landmark/data.hpp"
#include "landmark/errors.hpp"
#include "landmark/pipeline.hpp"
#include "landmark/rng.hpp"
#include "landmark/survival.hpp"

namespace landmark {

struct CVScheme {
    enum class Kind { loo, kfold };
    Kind kind = Kind::loo;
    int k = 10;
    std::uint64_t seed = 0;

    static CVScheme leave_one_out() { return {}; }
    static CVScheme k_fold(int k, std::uint64_t seed) {
        if (k < 2) throw ConfigError("k-fold cross-validation needs k >= 2");
        CVScheme s;
        s.kind = Kind::kfold;
        s.k = k;
        s.seed = seed;
        return s;
    }

    std::string label() const {
        return kind == Kind::loo ? "loo" : "kfold(" + std::to_string(k) + ")";
    }
};

struct EvalOptions {
    PipelineOptions pipeline;
    bool recalibrate_revival = true;  // score revival methods on calibrated predictions
    double clip = 1e-12;
    bool warm_start_folds = true;     // start fold refits from the full-data covariance fit
};

// ---------------------------------------------------------------------------
// cross-validation

namespace detail {

// eligible for prediction: at risk at s with a measurement by s
inline bool eligible(const Subject& sub, double s) {
    if (sub.event_time < s) return false;
    for (const auto& m : sub.measurements)
        if (m.time <= s) return true;
    return false;
}

}  // namespace detail

struct CrossValidation {
    std::map<MethodId, std::vector<PredictionResult>> by_method;
    std::vector<PredictionResult> null_model;  // exp(-Nelson-Aalen) per fold
    std::vector<std::string> warnings;
};

// Shared fold loop: every upstream model (longitudinal, revival, marginal
// survival, landmark Cox) is refit on each fold's training subjects, then the
// held-out subjects are predicted by every requested method.
inline CrossValidation cross_validate_methods(const std::vector<Subject>& subjects,
                                              const std::set<MethodId>& methods, double s,
                                              double w, const CVScheme& scheme,
                                              const EvalOptions& opt = {}) {
    CrossValidation cv;
    const int n = static_cast<int>(subjects.size());

    // k-fold: rank subjects by a seeded hash of their id and deal round-robin,
    // giving a balanced seed-deterministic partition (k = n reduces to LOO)
    std::vector<int> fold_of(subjects.size());
    int n_folds = 0;
    if (scheme.kind == CVScheme::Kind::loo) {
        for (int i = 0; i < n; ++i) fold_of[i] = i;
        n_folds = n;
    } else {
        std::vector<int> order(subjects.size());
        for (int i = 0; i < n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            const auto ha = hash_id(subjects[a].id, scheme.seed);
            const auto hb = hash_id(subjects[b].id, scheme.seed);
            return ha != hb ? ha < hb : subjects[a].id < subjects[b].id;
        });
        for (int j = 0; j < n; ++j) fold_of[order[j]] = j % scheme.k;
        n_folds = scheme.k;
    }

    PipelineOptions fold_opt = opt.pipeline;
    std::optional<CovarianceParams> warm_gp, warm_dead, warm_surv;
    if (opt.warm_start_folds) {
        try {
            const ModelBundle full = fit_models(subjects, methods, s, opt.pipeline);
            if (full.gp) warm_gp = full.gp->cov;
            if (full.revival) {
                warm_dead = full.revival->dead.cov;
                warm_surv = full.revival->survivor.cov;
            }
            fold_opt.fit.restarts = std::min(fold_opt.fit.restarts, 1);
        } catch (const Error&) {
            // fall back to cold starts; fold errors surface below
        }
    }

    for (int fold = 0; fold < n_folds; ++fold) {
        std::vector<Subject> training;
        std::vector<const Subject*> held_out;
        training.reserve(subjects.size());
        for (int i = 0; i < n; ++i) {
            if (fold_of[i] == fold) {
                if (detail::eligible(subjects[i], s)) held_out.push_back(&subjects[i]);
            } else {
                training.push_back(subjects[i]);
            }
        }
        if (held_out.empty()) continue;
        try {
            PipelineOptions po = fold_opt;
            po.fit.warm_start = warm_gp;
            ModelBundle bundle;
            {
                bool need_gp = false, need_revival = false;
                for (const MethodId m : methods) {
                    need_gp |= uses_gp(m);
                    need_revival |= uses_revival(m);
                }
                if (need_gp) bundle.gp = fit_gp(training, TrendSpec{}, po.fit);
                if (need_revival) {
                    RevivalOptions ro;
                    ro.fit = po.fit;
                    ro.fit.warm_start.reset();
                    ro.shared_noise = po.shared_noise;
                    ro.warm_dead = warm_dead;
                    ro.warm_survivor = warm_surv;
                    bundle.revival = fit_revival(training, po.tau, po.epsilon, ro);
                    bundle.marginal = marginal_survival_set(training, s, po.tau, po.per_arm_km);
                }
            }
            const LandmarkDataset lm = build_landmark(training, s, w);
            if (lm.event_grid.empty())
                throw DataError("no deaths in the training prediction window");

            // null model: Breslow increments with no covariate
            const Eigen::MatrixXd zero =
                Eigen::MatrixXd::Zero(static_cast<long>(lm.subjects.size()), 1);
            const CoxFit null_fit = fit_cox(expand_fixed_covariates(lm, zero));
            double null_cumhaz = 0.0;
            for (const double inc : null_fit.baseline_increments) null_cumhaz += inc;
            const double null_pi = std::exp(-null_cumhaz);

            std::map<MethodId, TrainedPredictor> trained;
            for (const MethodId m : methods) trained.emplace(m, train(m, lm, bundle, po));

            for (const Subject* sub : held_out) {
                for (const MethodId m : methods)
                    cv.by_method[m].push_back(predict_subject(trained.at(m), *sub));
                PredictionResult null_res;
                null_res.id = sub->id;
                null_res.pi_hat = null_pi;
                cv.null_model.push_back(null_res);
            }
        } catch (const Error& e) {
            cv.warnings.push_back("fold " + std::to_string(fold) + " skipped: " + e.what());
        }
    }

    const auto by_id = [](const PredictionResult& a, const PredictionResult& b) {
        return a.id < b.id;
    };
    for (auto& [m, preds] : cv.by_method) std::sort(preds.begin(), preds.end(), by_id);
    std::sort(cv.null_model.begin(), cv.null_model.end(), by_id);
    return cv;
}

inline std::vector<PredictionResult> cross_validate(const std::vector<Subject>& subjects,
                                                    MethodId method, double s, double w,
                                                    const CVScheme& scheme,
                                                    const EvalOptions& opt = {}) {
    return cross_validate_methods(subjects, {method}, s, w, scheme, opt).by_method[method];
}

// ---------------------------------------------------------------------------
// prediction-error scores

struct BrierKl {
    double brier = 0.0;
    double kl = 0.0;
};

namespace detail {

inline double clip_prob(double p, double clip) {
    return std::min(1.0 - clip, std::max(clip, p));
}

}  // namespace detail

// Inverse-probability-of-censoring weighted scores of predictions against the
// survive-the-window outcome. Weights: deaths in the window 1/G(T-), subjects
// through the window 1/G((s+w)-), censored inside the window 0, with G the
// reverse Kaplan-Meier of the landmark cohort conditioned on > s.
inline BrierKl brier_kl(const std::vector<double>& pi_hat, const LandmarkDataset& lm,
                        double clip = 1e-12) {
    if (pi_hat.size() != lm.subjects.size())
        throw DataError("brier_kl: one prediction per landmark subject required");
    std::vector<double> times;
    std::vector<int> statuses;
    for (const auto& sub : lm.subjects) {
        times.push_back(sub.event_time);
        statuses.push_back(sub.status);
    }
    const StepFunction g = reverse_km(times, statuses);
    const double g_s = g.at(lm.s);
    if (g_s <= 0.0) throw DataError("brier_kl: censoring survival zero at s");

    const double horizon = lm.horizon();
    double sum_w = 0.0, sum_brier = 0.0, sum_kl = 0.0;
    for (std::size_t i = 0; i < lm.subjects.size(); ++i) {
        const auto& sub = lm.subjects[i];
        double y, weight;
        if (sub.status == 1) {
            y = 0.0;  // died in the window
            const double g_t = g.left_limit(sub.event_time) / g_s;
            if (g_t <= 0.0) throw DataError("brier_kl: censoring survival zero before a death");
            weight = 1.0 / g_t;
        } else if (sub.event_time >= horizon) {
            y = 1.0;  // through the window
            const double g_h = g.left_limit(horizon) / g_s;
            if (g_h <= 0.0) throw DataError("brier_kl: censoring survival zero at the horizon");
            weight = 1.0 / g_h;
        } else {
            continue;  // censored inside the window
        }
        const double p = detail::clip_prob(pi_hat[i], clip);
        sum_w += weight;
        sum_brier += weight * (y - p) * (y - p);
        sum_kl += weight * -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    }
    if (sum_w <= 0.0) throw DataError("brier_kl: no scoreable subjects");
    return {sum_brier / sum_w, sum_kl / sum_w};
}

// ---------------------------------------------------------------------------
// calibration and model comparison

struct CalibrationResult {
    double beta = 0.0;
    double se = 0.0;
    double wald_chisq = 0.0;
    double lr_chisq = 0.0;
    CoxFit fit;
    std::vector<double> z;  // cloglog-transformed predictions
};

// Univariate Cox refit of the cloglog-transformed predictions on the landmark
// data: slope 1 means well calibrated.
inline CalibrationResult calibration_cox(const std::vector<double>& pi_hat,
                                         const LandmarkDataset& lm, double clip = 1e-12) {
    if (pi_hat.size() != lm.subjects.size())
        throw DataError("calibration_cox: one prediction per landmark subject required");
    CalibrationResult res;
    res.z.resize(pi_hat.size());
    for (std::size_t i = 0; i < pi_hat.size(); ++i)
        res.z[i] = std::log(-std::log(detail::clip_prob(pi_hat[i], clip)));
    const auto [mn, mx] = std::minmax_element(res.z.begin(), res.z.end());
    if (*mn == *mx) throw DataError("calibration_cox: degenerate predictions (all equal)");

    Eigen::MatrixXd x(static_cast<long>(res.z.size()), 1);
    for (std::size_t i = 0; i < res.z.size(); ++i) x(static_cast<long>(i), 0) = res.z[i];
    res.fit = fit_cox(expand_fixed_covariates(lm, x));
    res.beta = res.fit.beta(0);
    res.se = res.fit.se(0);
    res.wald_chisq = (res.beta / res.se) * (res.beta / res.se);
    res.lr_chisq = 2.0 * (res.fit.loglik_final - res.fit.loglik_null);
    return res;
}

// Likelihood-ratio statistic of the bivariate Cox model (reference plus
// challenger predictions, both cloglog-transformed) against the univariate
// reference model. Exactly affinely dependent challengers add nothing.
inline double lrt_bivariate(const std::vector<double>& reference_preds,
                            const std::vector<double>& other_preds, const LandmarkDataset& lm,
                            double clip = 1e-12) {
    if (reference_preds.size() != lm.subjects.size() || other_preds.size() != lm.subjects.size())
        throw DataError("lrt_bivariate: one prediction per landmark subject required");
    const long n = static_cast<long>(lm.subjects.size());
    Eigen::VectorXd z_ref(n), z_other(n);
    for (long i = 0; i < n; ++i) {
        z_ref(i) = std::log(-std::log(detail::clip_prob(reference_preds[i], clip)));
        z_other(i) = std::log(-std::log(detail::clip_prob(other_preds[i], clip)));
    }

    const Eigen::VectorXd cr = z_ref.array() - z_ref.mean();
    const Eigen::VectorXd co = z_other.array() - z_other.mean();
    const double cr_norm = cr.norm();
    Eigen::VectorXd resid = co;
    if (cr_norm > 0.0) resid -= (co.dot(cr) / (cr_norm * cr_norm)) * cr;
    if (resid.norm() <= 1e-13 * std::max(1.0, z_other.norm()))
        return 0.0;  // the challenger spans nothing new

    const CoxFit uni = fit_cox(expand_fixed_covariates(lm, z_ref));
    Eigen::MatrixXd both(n, 2);
    both.col(0) = z_ref;
    both.col(1) = z_other;
    const CoxFit biv = fit_cox(expand_fixed_covariates(lm, both));
    return 2.0 * (biv.loglik_final - uni.loglik_final);
}

// Model-based predictions from the univariate calibration Cox model; used to
// score the revival methods, which are known to need recalibration.
inline std::vector<double> recalibrate(const std::vector<double>& pi_hat,
                                       const LandmarkDataset& lm, double clip = 1e-12) {
    const CalibrationResult cal = calibration_cox(pi_hat, lm, clip);
    double h0 = 0.0;
    for (const double inc : cal.fit.baseline_increments) h0 += inc;
    std::vector<double> out(pi_hat.size());
    for (std::size_t i = 0; i < pi_hat.size(); ++i)
        out[i] = std::exp(-h0 * std::exp(cal.beta * cal.z[i]));
    return out;
}

// ---------------------------------------------------------------------------
// full report

struct MethodEvaluation {
    MethodId method = MethodId::locf;
    int n_predictions = 0;
    double brier = 0.0, kl = 0.0;
    double brier_reduction_pct = 0.0, kl_reduction_pct = 0.0;
    double cal_beta = 0.0, cal_se = 0.0, cal_wald_chisq = 0.0, cal_lr_chisq = 0.0;
    double lrt_vs_reference = std::numeric_limits<double>::quiet_NaN();
    bool recalibrated = false;
};

struct EvaluationReport {
    double s = 0.0, w = 0.0, tau = 0.0;
    std::string cv_label;
    MethodId reference = MethodId::xhat_revival;
    double null_brier = 0.0, null_kl = 0.0;
    std::vector<MethodEvaluation> methods;
    std::vector<std::string> warnings;
};

// Cross-validated comparison of the requested methods against the null model,
// with calibration slopes and bivariate likelihood-ratio tests against the
// reference method. The raw cross-validated predictions can be captured via
// out_cv (plot data for prediction-comparison figures).
inline EvaluationReport evaluate_methods(const std::vector<Subject>& subjects,
                                         const std::vector<MethodId>& methods, double s, double w,
                                         const CVScheme& scheme, const EvalOptions& opt = {},
                                         CrossValidation* out_cv = nullptr) {
    EvaluationReport report;
    report.s = s;
    report.w = w;
    report.tau = opt.pipeline.tau;
    report.cv_label = scheme.label();

    const std::set<MethodId> method_set(methods.begin(), methods.end());
    const CrossValidation cv = cross_validate_methods(subjects, method_set, s, w, scheme, opt);
    report.warnings = cv.warnings;
    if (out_cv) *out_cv = cv;

    const LandmarkDataset lm = build_landmark(subjects, s, w);
    std::map<std::string, std::size_t> index_of;
    for (std::size_t i = 0; i < lm.subjects.size(); ++i) index_of[lm.subjects[i].id] = i;

    // align a prediction list with the full-data landmark cohort
    const auto align = [&](const std::vector<PredictionResult>& preds, std::vector<bool>& have) {
        std::vector<double> pi(lm.subjects.size(), 0.5);
        have.assign(lm.subjects.size(), false);
        for (const auto& p : preds) {
            const auto it = index_of.find(p.id);
            if (it == index_of.end()) continue;
            pi[it->second] = p.pi_hat;
            have[it->second] = true;
        }
        return pi;
    };

    std::vector<bool> have_null;
    const std::vector<double> null_pi = align(cv.null_model, have_null);

    // restrict scoring to subjects predicted by every method and the null model
    std::vector<bool> common = have_null;
    std::map<MethodId, std::vector<double>> method_pi;
    std::map<MethodId, std::vector<bool>> method_have;
    for (const MethodId m : methods) {
        std::vector<bool> have;
        method_pi[m] = align(cv.by_method.at(m), have);
        method_have[m] = have;
        for (std::size_t i = 0; i < common.size(); ++i)
            common[i] = common[i] && have[i];
    }
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < common.size(); ++i)
        if (common[i]) keep.push_back(i);
    if (keep.empty()) throw DataError("evaluate: no subject was predicted by every method");
    if (keep.size() < lm.subjects.size())
        report.warnings.push_back(std::to_string(lm.subjects.size() - keep.size()) +
                                  " landmark subjects lacked predictions and were not scored");

    LandmarkDataset scored = lm;
    if (keep.size() < lm.subjects.size()) {
        scored.subjects.clear();
        for (const std::size_t i : keep) scored.subjects.push_back(lm.subjects[i]);
        scored.event_grid.clear();
        for (const auto& sub : scored.subjects)
            if (sub.status == 1 && sub.event_time > s && sub.event_time <= s + w)
                scored.event_grid.push_back(sub.event_time);
        std::sort(scored.event_grid.begin(), scored.event_grid.end());
        scored.event_grid.erase(std::unique(scored.event_grid.begin(), scored.event_grid.end()),
                                scored.event_grid.end());
    }
    const auto subset = [&](const std::vector<double>& pi) {
        std::vector<double> out;
        out.reserve(keep.size());
        for (const std::size_t i : keep) out.push_back(pi[i]);
        return out;
    };

    const std::vector<double> null_scored = subset(null_pi);
    const BrierKl null_score = brier_kl(null_scored, scored, opt.clip);
    report.null_brier = null_score.brier;
    report.null_kl = null_score.kl;

    const bool have_reference = method_set.count(report.reference) > 0;
    std::vector<double> ref_scored;
    if (have_reference) ref_scored = subset(method_pi.at(report.reference));

    for (const MethodId m : methods) {
        MethodEvaluation ev;
        ev.method = m;
        const std::vector<double> raw = subset(method_pi.at(m));
        ev.n_predictions = static_cast<int>(raw.size());

        const CalibrationResult cal = calibration_cox(raw, scored, opt.clip);
        ev.cal_beta = cal.beta;
        ev.cal_se = cal.se;
        ev.cal_wald_chisq = cal.wald_chisq;
        ev.cal_lr_chisq = cal.lr_chisq;

        std::vector<double> for_scoring = raw;
        if (opt.recalibrate_revival && uses_revival(m)) {
            for_scoring = recalibrate(raw, scored, opt.clip);
            ev.recalibrated = true;
        }
        const BrierKl score = brier_kl(for_scoring, scored, opt.clip);
        ev.brier = score.brier;
        ev.kl = score.kl;
        ev.brier_reduction_pct = 100.0 * (report.null_brier - score.brier) / report.null_brier;
        ev.kl_reduction_pct = 100.0 * (report.null_kl - score.kl) / report.null_kl;

        if (have_reference && m != report.reference)
            ev.lrt_vs_reference = lrt_bivariate(ref_scored, raw, scored, opt.clip);

        report.methods.push_back(ev);
    }
    return report;
}

}  // namespace landmark
