#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "landmark/covariance.hpp"
#include "landmark/data.hpp"
#include "landmark/errors.hpp"
#include "landmark/longitudinal.hpp"
#include "landmark/survival.hpp"

namespace landmark {

// Time-reversed longitudinal models, one per stratum. The dead stratum runs
// backwards from the death time with mean
//   b0 + b1*arm + b2*u + b3*log(u+eps) + b4*t_death,
// the survivor stratum backwards from the observation limit tau with mean
//   b0 + b1*arm + b2*u + b3*log(u+eps).
struct RevivalStratumFit {
    Eigen::VectorXd coef;
    CovarianceParams cov;
    double loglik = 0.0;
    int n_obs = 0;
    int n_subjects = 0;
};

struct RevivalModel {
    double tau = 0.0;
    double epsilon = 1.0 / 365.25;
    RevivalStratumFit dead;      // coef: (intercept, arm, u, log(u+eps), t_death)
    RevivalStratumFit survivor;  // coef: (intercept, arm, u, log(u+eps))
};

struct Strata {
    std::vector<Subject> dead;            // died at or before tau
    std::vector<Subject> survivor;        // under follow-up at tau
    std::vector<Subject> censored_early;  // censored before tau, excluded from fitting
};

inline Strata stratify(const std::vector<Subject>& subjects, double tau) {
    if (!(tau > 0.0)) throw ConfigError("stratify: tau must be > 0");
    Strata st;
    for (const auto& sub : subjects) {
        if (sub.status == 1 && sub.event_time <= tau) st.dead.push_back(sub);
        else if (sub.event_time >= tau) st.survivor.push_back(sub);
        else st.censored_early.push_back(sub);
    }
    if (st.dead.empty()) throw DataError("stratify: no deaths at or before tau");
    if (st.survivor.empty()) throw DataError("stratify: no subjects under follow-up at tau");
    return st;
}

struct ReversedObs {
    double u = 0.0;  // time before the anchor (death time or tau)
    double value = 0.0;
    int occasion = 0;
};

// Dead subjects reverse around their death time, survivors around tau;
// survivor measurements taken after tau fall outside the model and are dropped.
inline std::vector<ReversedObs> reverse_time(const Subject& sub, bool is_dead, double tau) {
    const double anchor = is_dead ? sub.event_time : tau;
    std::vector<ReversedObs> out;
    for (const auto& m : sub.measurements) {
        const double u = anchor - m.time;
        if (u < 0.0) continue;
        out.push_back({u, m.value, m.occasion});
    }
    return out;
}

namespace detail {

inline Eigen::RowVectorXd revival_row(int arm, double u, double epsilon,
                                      std::optional<double> death_time) {
    Eigen::RowVectorXd r(death_time ? 5 : 4);
    r(0) = 1.0;
    r(1) = static_cast<double>(arm);
    r(2) = u;
    r(3) = std::log(u + epsilon);
    if (death_time) r(4) = *death_time;
    return r;
}

inline std::vector<GpBlock> revival_blocks(const std::vector<Subject>& stratum, bool is_dead,
                                           double tau, double epsilon, bool exclude_baseline) {
    std::vector<GpBlock> blocks;
    for (const auto& sub : stratum) {
        Subject filtered = sub;
        if (exclude_baseline) {
            std::erase_if(filtered.measurements,
                          [](const Measurement& m) { return m.time == 0.0; });
        }
        const auto obs = reverse_time(filtered, is_dead, tau);
        if (obs.empty()) continue;
        GpBlock b;
        b.id = sub.id;
        b.values.resize(static_cast<long>(obs.size()));
        b.design.resize(static_cast<long>(obs.size()), is_dead ? 5 : 4);
        for (std::size_t j = 0; j < obs.size(); ++j) {
            b.points.push_back({obs[j].u, obs[j].occasion});
            b.values(static_cast<long>(j)) = obs[j].value;
            b.design.row(static_cast<long>(j)) = revival_row(
                sub.arm, obs[j].u, epsilon,
                is_dead ? std::optional<double>(sub.event_time) : std::nullopt);
        }
        blocks.push_back(std::move(b));
    }
    return blocks;
}

}  // namespace detail

struct RevivalOptions {
    FitOptions fit;
    bool shared_noise = false;  // constrain the white-noise variance to be equal across strata
    std::optional<CovarianceParams> warm_dead;
    std::optional<CovarianceParams> warm_survivor;
};

inline RevivalModel fit_revival(const std::vector<Subject>& subjects, double tau, double epsilon,
                                const RevivalOptions& opt = {}) {
    if (!(epsilon > 0.0)) throw ConfigError("fit_revival: epsilon must be > 0");
    const Strata strata = stratify(subjects, tau);
    const auto dead_blocks =
        detail::revival_blocks(strata.dead, true, tau, epsilon, opt.fit.exclude_baseline);
    const auto surv_blocks =
        detail::revival_blocks(strata.survivor, false, tau, epsilon, opt.fit.exclude_baseline);
    if (dead_blocks.empty() || surv_blocks.empty())
        throw DataError("fit_revival: a stratum has no usable measurements");

    RevivalModel model;
    model.tau = tau;
    model.epsilon = epsilon;

    if (!opt.shared_noise) {
        FitOptions fd = opt.fit;
        fd.warm_start = opt.warm_dead;
        const auto dead_fit = fit_variance_components(dead_blocks, fd);
        FitOptions fs = opt.fit;
        fs.warm_start = opt.warm_survivor;
        const auto surv_fit = fit_variance_components(surv_blocks, fs);
        model.dead = {dead_fit.beta, dead_fit.cov, dead_fit.loglik, dead_fit.n_obs, dead_fit.n_blocks};
        model.survivor = {surv_fit.beta, surv_fit.cov, surv_fit.loglik, surv_fit.n_obs, surv_fit.n_blocks};
        return model;
    }

    // shared white noise: one simplex over both strata's parameters with a
    // common sigma3^2, trends still profiled per stratum
    const auto dead_patterns = detail::group_by_pattern(dead_blocks);
    const auto surv_patterns = detail::group_by_pattern(surv_blocks);
    auto pooled_scale = [](const std::vector<GpBlock>& blocks) {
        double ss = 0.0;
        long n = 0;
        for (const auto& b : blocks) {
            const double m = b.values.mean();
            ss += (b.values.array() - m).square().sum();
            n += b.values.size();
        }
        return std::max(ss / std::max<long>(n, 1), 1e-8);
    };
    const detail::ParamTransform transform(
        std::max(pooled_scale(dead_blocks), pooled_scale(surv_blocks)));

    auto decode = [&](const Eigen::VectorXd& x, CovarianceParams& d, CovarianceParams& s) {
        Eigen::VectorXd xd(4), xs(4);
        xd << x(0), x(1), x(2), x(6);
        xs << x(3), x(4), x(5), x(6);
        d = transform.decode(xd);
        s = transform.decode(xs);
    };
    const auto objective = [&](const Eigen::VectorXd& x) {
        CovarianceParams pd, ps;
        decode(x, pd, ps);
        const auto ld = detail::profiled_loglik(dead_blocks, dead_patterns, pd);
        const auto ls = detail::profiled_loglik(surv_blocks, surv_patterns, ps);
        if (!ld.ok || !ls.ok) return std::numeric_limits<double>::infinity();
        return -(ld.loglik + ls.loglik);
    };

    CovarianceParams init_d = opt.warm_dead.value_or(
        CovarianceParams{pooled_scale(dead_blocks) / 3, pooled_scale(dead_blocks) / 3, 1.0,
                         pooled_scale(dead_blocks) / 3});
    CovarianceParams init_s = opt.warm_survivor.value_or(
        CovarianceParams{pooled_scale(surv_blocks) / 3, pooled_scale(surv_blocks) / 3, 1.0,
                         pooled_scale(surv_blocks) / 3});
    Eigen::VectorXd x0(7);
    const Eigen::VectorXd ed = detail::ParamTransform::encode(init_d);
    const Eigen::VectorXd es = detail::ParamTransform::encode(init_s);
    x0 << ed(0), ed(1), ed(2), es(0), es(1), es(2), 0.5 * (ed(3) + es(3));

    SimplexOptions so;
    so.rel_tol = opt.fit.rel_tol;
    so.max_iter = opt.fit.max_iter;
    SimplexResult best = nelder_mead(objective, x0, so);
    bool converged = best.converged;
    for (int run = 1; run <= opt.fit.restarts; ++run) {
        const SimplexResult r = nelder_mead(objective, best.x + detail::restart_shift(run, 7), so);
        if (r.fval < best.fval) {
            best = r;
            converged = r.converged;
        }
    }
    if (!converged) throw NumericError("fit_revival: shared-noise fit did not converge");

    CovarianceParams pd, ps;
    decode(best.x, pd, ps);
    const auto ld = detail::profiled_loglik(dead_blocks, dead_patterns, pd);
    const auto ls = detail::profiled_loglik(surv_blocks, surv_patterns, ps);
    int n_dead_obs = 0, n_surv_obs = 0;
    for (const auto& b : dead_blocks) n_dead_obs += static_cast<int>(b.values.size());
    for (const auto& b : surv_blocks) n_surv_obs += static_cast<int>(b.values.size());
    model.dead = {ld.beta, pd, ld.loglik, n_dead_obs, static_cast<int>(dead_blocks.size())};
    model.survivor = {ls.beta, ps, ls.loglik, n_surv_obs, static_cast<int>(surv_blocks.size())};
    return model;
}

// ---------------------------------------------------------------------------
// marginal survival for the Bayes step

// Discrete conditional distribution of the death time given alive at s: mass
// at each observed death time in (s, tau), all remaining mass lumped at tau.
struct MarginalSurvival {
    double s = 0.0;
    double tau = 0.0;
    std::vector<double> support;  // death times ascending; last entry is tau
    std::vector<double> masses;   // aligned with support, sums to 1
};

inline MarginalSurvival marginal_survival(const std::vector<Subject>& subjects, double s,
                                          double tau) {
    if (!(tau > s)) throw ConfigError("marginal_survival: tau must exceed s");
    std::vector<double> times;
    std::vector<int> statuses;
    for (const auto& sub : subjects) {
        if (sub.event_time < s) continue;
        times.push_back(sub.event_time);
        statuses.push_back(sub.status);
    }
    if (times.empty()) throw DataError("marginal_survival: no subjects at risk at s");
    const StepFunction km = kaplan_meier(times, statuses);
    const double surv_s = km.at(s);
    if (surv_s <= 0.0) throw DataError("marginal_survival: survival at s is zero");

    MarginalSurvival m;
    m.s = s;
    m.tau = tau;
    for (std::size_t j = 0; j < km.times.size(); ++j) {
        const double t = km.times[j];
        if (t <= s || t >= tau) continue;
        const double before = (j == 0) ? km.initial : km.values[j - 1];
        m.support.push_back(t);
        m.masses.push_back((before - km.values[j]) / surv_s);
    }
    m.support.push_back(tau);
    m.masses.push_back(km.left_limit(tau) / surv_s);
    return m;
}

// Kaplan-Meier marginals, optionally stratified by treatment arm.
struct MarginalSurvivalSet {
    bool per_arm = false;
    std::vector<MarginalSurvival> curves;  // size 1 (pooled) or 2 (by arm)

    const MarginalSurvival& for_arm(int arm) const {
        return per_arm ? curves.at(static_cast<std::size_t>(arm)) : curves.front();
    }
};

inline MarginalSurvivalSet marginal_survival_set(const std::vector<Subject>& subjects, double s,
                                                 double tau, bool per_arm) {
    MarginalSurvivalSet set;
    set.per_arm = per_arm;
    if (!per_arm) {
        set.curves.push_back(marginal_survival(subjects, s, tau));
        return set;
    }
    for (int arm = 0; arm <= 1; ++arm) {
        std::vector<Subject> group;
        for (const auto& sub : subjects)
            if (sub.arm == arm) group.push_back(sub);
        set.curves.push_back(marginal_survival(group, s, tau));
    }
    return set;
}

// ---------------------------------------------------------------------------
// conditioning machinery

// Precomputes, for one subject's history, everything that does not depend on
// the death-time hypothesis: reversed-time gaps equal forward-time gaps, so
// each stratum needs a single Cholesky factorization of the history covariance.
class RevivalConditioner {
  public:
    RevivalConditioner(const RevivalModel& model, const std::vector<Measurement>& history,
                       int arm)
        : model_(model), arm_(arm) {
        if (history.empty()) throw DataError("revival conditioning: empty history");
        times_.reserve(history.size());
        std::vector<ProcessPoint> pts;
        values_.resize(static_cast<long>(history.size()));
        for (std::size_t j = 0; j < history.size(); ++j) {
            times_.push_back(history[j].time);
            pts.push_back({history[j].time, history[j].occasion});
            values_(static_cast<long>(j)) = history[j].value;
        }
        dead_solver_.emplace(covariance_matrix(pts, model.dead.cov), model.dead.cov,
                             "revival dead stratum");
        surv_solver_.emplace(covariance_matrix(pts, model.survivor.cov), model.survivor.cov,
                             "revival survivor stratum");
        dead_logdet_ = dead_solver_->log_det();
        surv_logdet_ = surv_solver_->log_det();
    }

    double max_history_time() const {
        double m = 0.0;
        for (const double t : times_) m = std::max(m, t);
        return m;
    }

    // log P(history | T = t) under the dead-stratum reversed model
    double logdensity_death(double t_death) const {
        const Eigen::VectorXd r = residual_death(t_death);
        const Eigen::VectorXd half = dead_solver_->half_solve(r);
        return -0.5 * (static_cast<double>(r.size()) * detail::kLog2Pi + dead_logdet_ +
                       half.squaredNorm());
    }

    // log P(history | survivor at tau)
    double logdensity_survivor() const {
        const Eigen::VectorXd r = residual_survivor();
        const Eigen::VectorXd half = surv_solver_->half_solve(r);
        return -0.5 * (static_cast<double>(r.size()) * detail::kLog2Pi + surv_logdet_ +
                       half.squaredNorm());
    }

    // weights Sigma11^{-1} (history - mean) under each hypothesis; the solves
    // dominate, so path computations cache them per hypothesis
    Eigen::VectorXd alpha_death(double t_death) const {
        return dead_solver_->solve(residual_death(t_death));
    }

    Eigen::VectorXd alpha_survivor() const { return surv_solver_->solve(residual_survivor()); }

    double mean_given_death(double t, double t_death, const Eigen::VectorXd& alpha) const {
        const double u_target = t_death - t;
        if (u_target < 0.0)
            throw ConfigError("revival conditioning: death hypothesis before the target time");
        double v = detail::revival_row(arm_, u_target, model_.epsilon, t_death)
                       .dot(model_.dead.coef);
        const auto& c = model_.dead.cov;
        for (std::size_t j = 0; j < times_.size(); ++j)
            v += (c.sigma1_sq +
                  c.sigma2_sq * std::exp(-c.lambda_decay * std::fabs(t - times_[j]))) *
                 alpha(static_cast<long>(j));
        return v;
    }

    double mean_given_survivor(double t, const Eigen::VectorXd& alpha) const {
        const double u_target = model_.tau - t;
        if (u_target < 0.0)
            throw ConfigError("revival conditioning: target time beyond tau");
        double v = detail::revival_row(arm_, u_target, model_.epsilon, std::nullopt)
                       .dot(model_.survivor.coef);
        const auto& c = model_.survivor.cov;
        for (std::size_t j = 0; j < times_.size(); ++j)
            v += (c.sigma1_sq +
                  c.sigma2_sq * std::exp(-c.lambda_decay * std::fabs(t - times_[j]))) *
                 alpha(static_cast<long>(j));
        return v;
    }

    // E(X(t) | T = t_death, history): the target marker sits at reversed time
    // t_death - t with a fresh occasion
    double cond_mean_death(double t, double t_death) const {
        return mean_given_death(t, t_death, alpha_death(t_death));
    }

    double cond_mean_survivor(double t) const {
        return mean_given_survivor(t, alpha_survivor());
    }

  private:
    Eigen::VectorXd residual_death(double t_death) const {
        Eigen::VectorXd r(values_.size());
        for (std::size_t j = 0; j < times_.size(); ++j) {
            const double u = t_death - times_[j];
            if (u < 0.0)
                throw ConfigError("revival conditioning: death hypothesis before a history time");
            r(static_cast<long>(j)) =
                values_(static_cast<long>(j)) -
                detail::revival_row(arm_, u, model_.epsilon, t_death).dot(model_.dead.coef);
        }
        return r;
    }

    Eigen::VectorXd residual_survivor() const {
        Eigen::VectorXd r(values_.size());
        for (std::size_t j = 0; j < times_.size(); ++j) {
            const double u = model_.tau - times_[j];
            if (u < 0.0)
                throw ConfigError("revival conditioning: history time beyond tau");
            r(static_cast<long>(j)) =
                values_(static_cast<long>(j)) -
                detail::revival_row(arm_, u, model_.epsilon, std::nullopt).dot(model_.survivor.coef);
        }
        return r;
    }

    const RevivalModel& model_;
    int arm_;
    std::vector<double> times_;
    Eigen::VectorXd values_;
    std::optional<SpdSolver> dead_solver_;
    std::optional<SpdSolver> surv_solver_;
    double dead_logdet_ = 0.0;
    double surv_logdet_ = 0.0;
};

// Joint density of the observed history under a death-at-t or survivor-at-tau
// hypothesis (nullopt = survivor).
inline double history_logdensity(const RevivalModel& model,
                                 const std::vector<Measurement>& history, int arm,
                                 std::optional<double> death_time) {
    const RevivalConditioner cond(model, history, arm);
    if (death_time) {
        if (*death_time < cond.max_history_time())
            throw ConfigError("history_logdensity: death hypothesis precedes a history time");
        return cond.logdensity_death(*death_time);
    }
    return cond.logdensity_survivor();
}

// Posterior over the death-time support given the observed history (Bayes rule
// with the marginal Kaplan-Meier prior), computed in log space.
struct RevivalPosterior {
    std::vector<double> support;  // death times, last entry tau
    std::vector<double> masses;

    // P(T > h | T > s, history); the tau point always counts as beyond
    double prob_beyond(double h) const {
        double p = 0.0;
        for (std::size_t k = 0; k < support.size(); ++k)
            if (support[k] > h || k + 1 == support.size()) p += masses[k];
        return std::min(1.0, std::max(0.0, p));
    }

    double entropy() const {
        double e = 0.0;
        for (const double p : masses)
            if (p > 0.0) e -= p * std::log(p);
        return e;
    }
};

namespace detail {

inline std::vector<double> log_sum_exp_normalize(const std::vector<double>& logw) {
    double mx = -std::numeric_limits<double>::infinity();
    for (const double v : logw) mx = std::max(mx, v);
    if (!std::isfinite(mx))
        throw NumericError("revival posterior: all hypothesis weights vanished");
    double total = 0.0;
    std::vector<double> out(logw.size());
    for (std::size_t k = 0; k < logw.size(); ++k) {
        out[k] = std::exp(logw[k] - mx);
        total += out[k];
    }
    for (double& v : out) v /= total;
    return out;
}

}  // namespace detail

inline RevivalPosterior revival_posterior(const RevivalModel& model,
                                          const MarginalSurvival& marginal,
                                          const std::vector<Measurement>& history, int arm) {
    const RevivalConditioner cond(model, history, arm);
    RevivalPosterior post;
    post.support = marginal.support;
    std::vector<double> logw(marginal.support.size());
    for (std::size_t k = 0; k < marginal.support.size(); ++k) {
        const bool is_tau = k + 1 == marginal.support.size();
        const double logdens =
            is_tau ? cond.logdensity_survivor() : cond.logdensity_death(marginal.support[k]);
        logw[k] = logdens + std::log(marginal.masses[k]);
    }
    post.masses = detail::log_sum_exp_normalize(logw);
    return post;
}

// Direct dynamic prediction: P(T > s+w | T > s, history) by Bayes rule over
// the event-time support.
inline double direct_revival_predict(const RevivalModel& model, const MarginalSurvival& marginal,
                                     const std::vector<Measurement>& history, int arm, double s,
                                     double w) {
    if (history.empty()) throw DataError("direct_revival_predict: empty history");
    if (s + w > model.tau)
        throw ConfigError("direct_revival_predict: requires s + w <= tau");
    return revival_posterior(model, marginal, history, arm).prob_beyond(s + w);
}

// xhat(t|s) from the revival model: for every grid time t, a posterior over
// death hypotheses u >= t (tau included) weights the per-hypothesis
// conditional expectations of X(t).
inline CovariatePath revival_conditional_path(const RevivalModel& model,
                                              const MarginalSurvival& marginal,
                                              const std::vector<Measurement>& history, int arm,
                                              double s, const std::vector<double>& event_grid) {
    if (history.empty()) throw DataError("revival_conditional_path: empty history");
    for (const double t : event_grid)
        if (t <= s || t > model.tau)
            throw ConfigError("revival_conditional_path: grid times must lie in (s, tau]");

    const RevivalConditioner cond(model, history, arm);
    const std::size_t n_support = marginal.support.size();  // deaths + tau
    std::vector<double> logdens(n_support);
    std::vector<Eigen::VectorXd> alphas(n_support);
    for (std::size_t k = 0; k + 1 < n_support; ++k) {
        logdens[k] = cond.logdensity_death(marginal.support[k]);
        alphas[k] = cond.alpha_death(marginal.support[k]);
    }
    logdens[n_support - 1] = cond.logdensity_survivor();
    alphas[n_support - 1] = cond.alpha_survivor();

    CovariatePath path;
    path.s = s;
    path.times = event_grid;
    path.values.reserve(event_grid.size());
    for (const double t : event_grid) {
        std::vector<std::size_t> hyp;
        std::vector<double> logw;
        for (std::size_t k = 0; k < n_support; ++k) {
            const bool is_tau = k + 1 == n_support;
            if (!is_tau && marginal.support[k] < t) continue;  // dead before the target
            if (marginal.masses[k] <= 0.0) continue;
            hyp.push_back(k);
            logw.push_back(logdens[k] + std::log(marginal.masses[k]));
        }
        const auto post = detail::log_sum_exp_normalize(logw);
        double value = 0.0;
        for (std::size_t h = 0; h < hyp.size(); ++h) {
            const std::size_t k = hyp[h];
            const bool is_tau = k + 1 == n_support;
            const double mean = is_tau
                                    ? cond.mean_given_survivor(t, alphas[k])
                                    : cond.mean_given_death(t, marginal.support[k], alphas[k]);
            value += post[h] * mean;
        }
        if (!std::isfinite(value))
            throw NumericError("revival_conditional_path: non-finite value at t=" + std::to_string(t));
        path.values.push_back(value);
    }
    return path;
}

}  // namespace landmark
