#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "landmark/cox.hpp"
#include "landmark/data.hpp"
#include "landmark/errors.hpp"
#include "landmark/longitudinal.hpp"
#include "landmark/revival.hpp"

namespace landmark {

// The five prediction routes. The first four feed a landmark Cox model with a
// covariate path; direct revival predicts through Bayes' rule alone.
enum class MethodId { locf, blup, xhat_gp, xhat_revival, direct_revival };

inline const char* method_name(MethodId m) {
    switch (m) {
        case MethodId::locf: return "locf";
        case MethodId::blup: return "blup";
        case MethodId::xhat_gp: return "xhat-gp";
        case MethodId::xhat_revival: return "xhat-revival";
        case MethodId::direct_revival: return "direct-revival";
    }
    return "?";
}

inline MethodId parse_method(const std::string& name) {
    for (const MethodId m : {MethodId::locf, MethodId::blup, MethodId::xhat_gp,
                             MethodId::xhat_revival, MethodId::direct_revival})
        if (name == method_name(m)) return m;
    throw ConfigError("unknown method '" + name + "'");
}

inline bool uses_gp(MethodId m) { return m == MethodId::blup || m == MethodId::xhat_gp; }
inline bool uses_revival(MethodId m) {
    return m == MethodId::xhat_revival || m == MethodId::direct_revival;
}
inline bool uses_cox(MethodId m) { return m != MethodId::direct_revival; }

struct PipelineOptions {
    double tau = 9.0;
    double epsilon = 1.0 / 365.25;  // one day
    bool adjust_arm = false;        // add the treatment arm to the landmark Cox model
    bool per_arm_km = true;         // stratify the revival marginal by arm
    bool shared_noise = false;
    FitOptions fit;
};

// Upstream fitted models shared by the prediction methods.
struct ModelBundle {
    std::optional<FittedLongitudinal> gp;
    std::optional<RevivalModel> revival;
    std::optional<MarginalSurvivalSet> marginal;
};

// Fits whatever the requested methods need on the training subjects. The
// marginal survival is estimated at the landmark time s from the same data.
inline ModelBundle fit_models(const std::vector<Subject>& training,
                              const std::set<MethodId>& methods, double s,
                              const PipelineOptions& opt) {
    ModelBundle bundle;
    bool need_gp = false, need_revival = false;
    for (const MethodId m : methods) {
        need_gp |= uses_gp(m);
        need_revival |= uses_revival(m);
    }
    if (need_gp) bundle.gp = fit_gp(training, TrendSpec{}, opt.fit);
    if (need_revival) {
        RevivalOptions ro;
        ro.fit = opt.fit;
        ro.shared_noise = opt.shared_noise;
        bundle.revival = fit_revival(training, opt.tau, opt.epsilon, ro);
        bundle.marginal = marginal_survival_set(training, s, opt.tau, opt.per_arm_km);
    }
    return bundle;
}

namespace detail {

inline CovariatePath constant_path(double s, const std::vector<double>& grid, double value) {
    CovariatePath p;
    p.s = s;
    p.times = grid;
    p.values.assign(grid.size(), value);
    return p;
}

inline CovariatePath path_for(MethodId method, const Subject& sub,
                              const std::vector<Measurement>& history, double s,
                              const std::vector<double>& grid, const ModelBundle& models) {
    switch (method) {
        case MethodId::locf:
            return constant_path(s, grid, locf(sub, s));
        case MethodId::blup:
            return constant_path(s, grid, blup_at_s(*models.gp, history, sub.arm, s));
        case MethodId::xhat_gp:
            return conditional_path(*models.gp, history, sub.arm, s, grid);
        case MethodId::xhat_revival:
            return revival_conditional_path(*models.revival,
                                            models.marginal->for_arm(sub.arm), history,
                                            sub.arm, s, grid);
        case MethodId::direct_revival:
            break;
    }
    throw ConfigError("direct revival does not use covariate paths");
}

inline void require_models(MethodId method, const ModelBundle& models) {
    if (uses_gp(method) && !models.gp)
        throw ConfigError("method requires a fitted longitudinal model");
    if (uses_revival(method) && (!models.revival || !models.marginal))
        throw ConfigError("method requires a fitted revival model and marginal survival");
}

}  // namespace detail

// Covariate paths on the event grid for every landmark subject. Direct revival
// bypasses the Cox model, so its path list is empty.
inline std::vector<CovariatePath> make_paths(MethodId method, const LandmarkDataset& lm,
                                             const ModelBundle& models) {
    if (method == MethodId::direct_revival) return {};
    detail::require_models(method, models);
    std::vector<CovariatePath> paths;
    paths.reserve(lm.subjects.size());
    for (std::size_t i = 0; i < lm.subjects.size(); ++i) {
        const auto history = lm.history(i);
        paths.push_back(
            detail::path_for(method, lm.subjects[i], history, lm.s, lm.event_grid, models));
    }
    return paths;
}

struct TrainedPredictor {
    MethodId method = MethodId::locf;
    double s = 0.0;
    double w = 0.0;
    PipelineOptions options;
    std::vector<double> event_grid;  // training event grid
    CoxFit cox;                      // unused for direct revival
    ModelBundle models;
};

inline TrainedPredictor train(MethodId method, const LandmarkDataset& lm,
                              const ModelBundle& models, const PipelineOptions& opt = {}) {
    detail::require_models(method, models);
    if (uses_revival(method) && lm.horizon() > opt.tau)
        throw ConfigError("revival methods require s + w <= tau");
    TrainedPredictor tp;
    tp.method = method;
    tp.s = lm.s;
    tp.w = lm.w;
    tp.options = opt;
    tp.event_grid = lm.event_grid;
    tp.models = models;
    if (uses_cox(method)) {
        const auto paths = make_paths(method, lm, models);
        const auto table = expand_counting_process(lm, paths, opt.adjust_arm);
        tp.cox = fit_cox(table);
    }
    return tp;
}

struct PredictionResult {
    std::string id;
    MethodId method = MethodId::locf;
    double pi_hat = std::numeric_limits<double>::quiet_NaN();
    // diagnostics
    double path_min = std::numeric_limits<double>::quiet_NaN();
    double path_mean = std::numeric_limits<double>::quiet_NaN();
    double path_max = std::numeric_limits<double>::quiet_NaN();
    double posterior_entropy = std::numeric_limits<double>::quiet_NaN();
};

// Dynamic prediction for one (possibly new) subject from their history up to s.
inline PredictionResult predict_subject(const TrainedPredictor& tp, const Subject& sub) {
    const auto history = sub.history(tp.s);
    if (history.empty())
        throw DataError("predict_subject: subject " + sub.id + " has no measurement by s");
    PredictionResult res;
    res.id = sub.id;
    res.method = tp.method;

    if (tp.method == MethodId::direct_revival) {
        if (tp.s + tp.w > tp.options.tau)
            throw ConfigError("revival methods require s + w <= tau");
        const auto& marginal = tp.models.marginal->for_arm(sub.arm);
        const auto post = revival_posterior(*tp.models.revival, marginal, history, sub.arm);
        res.pi_hat = post.prob_beyond(tp.s + tp.w);
        res.posterior_entropy = post.entropy();
        return res;
    }

    const CovariatePath path =
        detail::path_for(tp.method, sub, history, tp.s, tp.event_grid, tp.models);
    std::vector<double> extra;
    if (tp.options.adjust_arm) extra.push_back(static_cast<double>(sub.arm));
    res.pi_hat = predict_survival(tp.cox, path, tp.s, tp.w, extra);
    if (!path.values.empty()) {
        double mn = path.values.front(), mx = path.values.front(), sum = 0.0;
        for (const double v : path.values) {
            mn = std::min(mn, v);
            mx = std::max(mx, v);
            sum += v;
        }
        res.path_min = mn;
        res.path_max = mx;
        res.path_mean = sum / static_cast<double>(path.values.size());
    }
    if (tp.method == MethodId::xhat_revival) {
        const auto post = revival_posterior(*tp.models.revival,
                                            tp.models.marginal->for_arm(sub.arm), history,
                                            sub.arm);
        res.posterior_entropy = post.entropy();
    }
    return res;
}

}  // namespace landmark
