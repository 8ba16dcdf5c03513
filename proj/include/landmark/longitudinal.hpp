#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "landmark/covariance.hpp"
#include "landmark/data.hpp"
#include "landmark/errors.hpp"
#include "landmark/optim.hpp"

namespace landmark {

// Fixed-effect trend of the working longitudinal model. The default (and only
// built-in) form is a separate linear trend per treatment arm, coefficients
// ordered (intercept0, slope0, intercept1, slope1).
struct TrendSpec {
    enum class Kind { two_arm_linear };
    Kind kind = Kind::two_arm_linear;

    int dim() const { return 4; }

    Eigen::RowVectorXd row(int arm, double t) const {
        Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(4);
        if (arm == 0) { r(0) = 1.0; r(1) = t; }
        else          { r(2) = 1.0; r(3) = t; }
        return r;
    }

    double value(const Eigen::VectorXd& coef, int arm, double t) const {
        return row(arm, t).dot(coef);
    }
};

// One subject's data prepared for the variance-components fit: marker values,
// process coordinates for the covariance, and fixed-effect design rows.
struct GpBlock {
    std::string id;
    std::vector<ProcessPoint> points;
    Eigen::VectorXd values;
    Eigen::MatrixXd design;
};

struct FitOptions {
    double rel_tol = 1e-8;
    int max_iter = 4000;
    int restarts = 3;
    bool exclude_baseline = true;  // drop t == 0 measurements from the fit
    std::optional<CovarianceParams> warm_start;  // skips the method-of-moments init
};

struct FittedLongitudinal {
    TrendSpec trend_spec;
    Eigen::VectorXd trend_coef;
    CovarianceParams cov;
    double loglik = 0.0;
    int n_obs = 0;
    int n_subjects = 0;

    double trend_value(int arm, double t) const {
        return trend_spec.value(trend_coef, arm, t);
    }
};

// Expected marker values on a time grid after the landmark, xhat(t|s).
struct CovariatePath {
    double s = 0.0;
    std::vector<double> times;
    std::vector<double> values;

    double at(double t) const {
        for (std::size_t i = 0; i < times.size(); ++i) {
            const double tol = 1e-9 * std::max(1.0, std::fabs(t));
            if (std::fabs(times[i] - t) <= tol) return values[i];
        }
        throw DataError("covariate path has no value at t=" + std::to_string(t));
    }
};

namespace detail {

constexpr double kLog2Pi = 1.8378770664093454836;

// Blocks sharing the same process points share one covariance factorization.
inline std::vector<std::vector<int>> group_by_pattern(const std::vector<GpBlock>& blocks) {
    std::map<std::vector<std::pair<double, int>>, std::vector<int>> groups;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        std::vector<std::pair<double, int>> key;
        key.reserve(blocks[i].points.size());
        for (const auto& p : blocks[i].points) key.emplace_back(p.time, p.occasion);
        groups[key].push_back(static_cast<int>(i));
    }
    std::vector<std::vector<int>> out;
    out.reserve(groups.size());
    for (auto& [key, idx] : groups) out.push_back(std::move(idx));
    return out;
}

struct ProfiledLoglik {
    double loglik = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd beta;
    bool ok = false;
};

// Gaussian log-likelihood with the fixed effects profiled out by GLS at the
// given covariance parameters.
inline ProfiledLoglik profiled_loglik(const std::vector<GpBlock>& blocks,
                                      const std::vector<std::vector<int>>& patterns,
                                      const CovarianceParams& p) {
    ProfiledLoglik out;
    const int k = static_cast<int>(blocks.front().design.cols());
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd xty = Eigen::VectorXd::Zero(k);
    double yty = 0.0, logdet = 0.0;
    long n = 0;
    for (const auto& idx : patterns) {
        const Eigen::MatrixXd v = covariance_matrix(blocks[idx.front()].points, p);
        SpdSolver solver(v, p, std::nothrow);
        if (!solver.ok()) return out;
        const double block_logdet = solver.log_det();
        for (const int i : idx) {
            const Eigen::MatrixXd a = solver.half_solve(blocks[i].design);
            const Eigen::VectorXd b = solver.half_solve(blocks[i].values);
            gram.noalias() += a.transpose() * a;
            xty.noalias() += a.transpose() * b;
            yty += b.squaredNorm();
            logdet += block_logdet;
            n += blocks[i].values.size();
        }
    }
    Eigen::LLT<Eigen::MatrixXd> gram_llt(gram);
    if (gram_llt.info() != Eigen::Success) return out;
    out.beta = gram_llt.solve(xty);
    const double rss = std::max(0.0, yty - out.beta.dot(xty));
    out.loglik = -0.5 * (static_cast<double>(n) * kLog2Pi + logdet + rss);
    out.ok = true;
    return out;
}

struct ParamTransform {
    double var_floor, var_cap, lambda_floor, lambda_cap;

    explicit ParamTransform(double value_scale) {
        const double s = std::max(value_scale, 1e-8);
        var_floor = 1e-10 * s;
        var_cap = 1e8 * s;
        lambda_floor = 1e-6;
        lambda_cap = 1e6;
    }

    CovarianceParams decode(const Eigen::VectorXd& x, int offset = 0) const {
        CovarianceParams p;
        p.sigma1_sq = std::clamp(std::exp(x(offset + 0)), var_floor, var_cap);
        p.sigma2_sq = std::clamp(std::exp(x(offset + 1)), var_floor, var_cap);
        p.lambda_decay = std::clamp(std::exp(x(offset + 2)), lambda_floor, lambda_cap);
        p.sigma3_sq = std::clamp(std::exp(x(offset + 3)), var_floor, var_cap);
        return p;
    }

    static Eigen::VectorXd encode(const CovarianceParams& p) {
        Eigen::VectorXd x(4);
        x(0) = std::log(std::max(p.sigma1_sq, 1e-300));
        x(1) = std::log(std::max(p.sigma2_sq, 1e-300));
        x(2) = std::log(std::max(p.lambda_decay, 1e-300));
        x(3) = std::log(std::max(p.sigma3_sq, 1e-300));
        return x;
    }
};

// Deterministic perturbation for simplex restarts.
inline Eigen::VectorXd restart_shift(int run, int dim) {
    const double step[] = {0.8, 1.6, 0.4, 1.2};
    Eigen::VectorXd d(dim);
    for (int i = 0; i < dim; ++i)
        d(i) = step[(run - 1) % 4] * (((i + run) % 2 == 0) ? 1.0 : -1.0);
    return d;
}

}  // namespace detail

struct VarianceFit {
    Eigen::VectorXd beta;
    CovarianceParams cov;
    double loglik = 0.0;
    int n_obs = 0;
    int n_blocks = 0;
    int evaluations = 0;
};

// Maximum-likelihood fit of the three-component covariance with the fixed
// effects profiled by GLS. The covariance candidates are explored on the log
// scale by a Nelder-Mead simplex with deterministic restarts.
inline VarianceFit fit_variance_components(const std::vector<GpBlock>& blocks,
                                           const FitOptions& opt = {}) {
    if (blocks.size() < 2)
        throw DataError("variance-components fit needs at least 2 subjects with data");
    int with_repeats = 0;
    long n_obs = 0;
    for (const auto& b : blocks) {
        if (b.values.size() != static_cast<long>(b.points.size()) ||
            b.values.size() != b.design.rows())
            throw DataError("block " + b.id + ": inconsistent sizes");
        if (b.values.size() == 0)
            throw DataError("block " + b.id + ": no measurements");
        if (b.values.size() >= 2) ++with_repeats;
        n_obs += b.values.size();
    }
    if (with_repeats < 2)
        throw DataError("variance components unidentifiable: need >= 2 subjects with >= 2 measurements");

    const auto patterns = detail::group_by_pattern(blocks);

    // rank check and method-of-moments start from the identity-covariance fit
    CovarianceParams identity;
    identity.sigma1_sq = 0.0;
    identity.sigma2_sq = 0.0;
    identity.sigma3_sq = 1.0;
    identity.lambda_decay = 1.0;
    const auto ols = detail::profiled_loglik(blocks, patterns, identity);
    if (!ols.ok)
        throw DataError("rank-deficient trend design");
    double rss = 0.0;
    for (const auto& b : blocks)
        rss += (b.values - b.design * ols.beta).squaredNorm();
    const double pooled_var = rss / static_cast<double>(n_obs);

    const detail::ParamTransform transform(std::max(pooled_var, 1e-8));
    Eigen::VectorXd x0(4);
    if (opt.warm_start) {
        x0 = detail::ParamTransform::encode(*opt.warm_start);
    } else {
        CovarianceParams mom;
        mom.sigma1_sq = mom.sigma2_sq = mom.sigma3_sq = std::max(pooled_var / 3.0, transform.var_floor);
        mom.lambda_decay = 1.0;
        x0 = detail::ParamTransform::encode(mom);
    }

    int evals = 0;
    const auto objective = [&](const Eigen::VectorXd& x) {
        ++evals;
        const auto pl = detail::profiled_loglik(blocks, patterns, transform.decode(x));
        return pl.ok ? -pl.loglik : std::numeric_limits<double>::infinity();
    };

    SimplexOptions simplex_opt;
    simplex_opt.rel_tol = opt.rel_tol;
    simplex_opt.max_iter = opt.max_iter;
    SimplexResult best = nelder_mead(objective, x0, simplex_opt);
    bool converged = best.converged;
    for (int run = 1; run <= opt.restarts; ++run) {
        const Eigen::VectorXd start = best.x + detail::restart_shift(run, 4);
        const SimplexResult r = nelder_mead(objective, start, simplex_opt);
        if (r.fval < best.fval) {
            best = r;
            converged = r.converged;
        }
    }
    if (!converged) {
        const CovarianceParams last = transform.decode(best.x);
        throw NumericError(
            "variance-components fit did not converge after " + std::to_string(opt.max_iter) +
            " iterations; last iterate sigma1^2=" + std::to_string(last.sigma1_sq) +
            " sigma2^2=" + std::to_string(last.sigma2_sq) +
            " lambda=" + std::to_string(last.lambda_decay) +
            " sigma3^2=" + std::to_string(last.sigma3_sq) +
            ", simplex spread=" + std::to_string(best.spread));
    }

    VarianceFit fit;
    fit.cov = transform.decode(best.x);
    const auto pl = detail::profiled_loglik(blocks, patterns, fit.cov);
    if (!pl.ok) throw NumericError("variance-components fit: final factorization failed");
    fit.beta = pl.beta;
    fit.loglik = pl.loglik;
    fit.n_obs = static_cast<int>(n_obs);
    fit.n_blocks = static_cast<int>(blocks.size());
    fit.evaluations = evals;
    return fit;
}

// ---------------------------------------------------------------------------
// working Gaussian process over forward time

inline std::vector<GpBlock> make_working_blocks(const std::vector<Subject>& subjects,
                                                const TrendSpec& trend, bool exclude_baseline) {
    std::vector<GpBlock> blocks;
    for (const auto& sub : subjects) {
        GpBlock b;
        b.id = sub.id;
        std::vector<double> vals;
        std::vector<Eigen::RowVectorXd> rows;
        for (const auto& m : sub.measurements) {
            if (exclude_baseline && m.time == 0.0) continue;
            b.points.push_back({m.time, m.occasion});
            vals.push_back(m.value);
            rows.push_back(trend.row(sub.arm, m.time));
        }
        if (vals.empty()) continue;
        b.values = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<long>(vals.size()));
        b.design.resize(static_cast<long>(rows.size()), trend.dim());
        for (std::size_t r = 0; r < rows.size(); ++r) b.design.row(static_cast<long>(r)) = rows[r];
        blocks.push_back(std::move(b));
    }
    return blocks;
}

// Marginal Gaussian log-likelihood of the marker vectors under a given trend
// and covariance; subjects are independent.
inline double gaussian_loglik(const std::vector<Subject>& subjects, const TrendSpec& trend,
                              const Eigen::VectorXd& trend_coef, const CovarianceParams& params,
                              bool exclude_baseline = false) {
    const auto blocks = make_working_blocks(subjects, trend, exclude_baseline);
    if (blocks.empty()) throw DataError("gaussian_loglik: no measurements");
    double ll = 0.0;
    for (const auto& b : blocks) {
        const Eigen::MatrixXd v = covariance_matrix(b.points, params);
        SpdSolver solver(v, params, std::nothrow);
        if (!solver.ok())
            throw NumericError("gaussian_loglik: covariance not positive definite after jitter, subject " + b.id);
        const Eigen::VectorXd r = solver.half_solve(b.values - b.design * trend_coef);
        ll += -0.5 * (static_cast<double>(b.values.size()) * detail::kLog2Pi +
                      solver.log_det() + r.squaredNorm());
    }
    return ll;
}

inline FittedLongitudinal fit_gp(const std::vector<Subject>& subjects, const TrendSpec& trend,
                                 const FitOptions& opt = {}) {
    const auto blocks = make_working_blocks(subjects, trend, opt.exclude_baseline);
    const auto fit = fit_variance_components(blocks, opt);
    FittedLongitudinal out;
    out.trend_spec = trend;
    out.trend_coef = fit.beta;
    out.cov = fit.cov;
    out.loglik = fit.loglik;
    out.n_obs = fit.n_obs;
    out.n_subjects = fit.n_blocks;
    return out;
}

// ---------------------------------------------------------------------------
// conditional expectation given history (kriging)

namespace detail {

inline std::vector<double> krig_values(const FittedLongitudinal& fit,
                                       const std::vector<Measurement>& history, int arm,
                                       const std::vector<double>& target_times) {
    std::vector<ProcessPoint> pts;
    pts.reserve(history.size());
    for (const auto& m : history) pts.push_back({m.time, m.occasion});
    const Eigen::MatrixXd sigma11 = covariance_matrix(pts, fit.cov);
    const SpdSolver solver(sigma11, fit.cov, "conditional_path");

    Eigen::VectorXd resid(static_cast<long>(history.size()));
    for (std::size_t j = 0; j < history.size(); ++j)
        resid(static_cast<long>(j)) = history[j].value - fit.trend_value(arm, history[j].time);
    const Eigen::VectorXd alpha = solver.solve(resid);

    std::vector<double> out;
    out.reserve(target_times.size());
    for (const double t : target_times) {
        // targets are fresh occasions: no white-noise share with the history
        Eigen::VectorXd cross(static_cast<long>(history.size()));
        for (std::size_t j = 0; j < history.size(); ++j)
            cross(static_cast<long>(j)) =
                fit.cov.sigma1_sq +
                fit.cov.sigma2_sq * std::exp(-fit.cov.lambda_decay * std::fabs(t - history[j].time));
        const double v = fit.trend_value(arm, t) + cross.dot(alpha);
        if (!std::isfinite(v)) throw NumericError("conditional expectation not finite at t=" + std::to_string(t));
        out.push_back(v);
    }
    return out;
}

}  // namespace detail

inline CovariatePath conditional_path(const FittedLongitudinal& fit,
                                      const std::vector<Measurement>& history, int arm, double s,
                                      const std::vector<double>& target_times) {
    if (history.empty()) throw DataError("conditional_path: empty history");
    for (std::size_t i = 0; i < target_times.size(); ++i) {
        if (target_times[i] <= s)
            throw ConfigError("conditional_path: target times must be after the landmark");
        if (i > 0 && target_times[i] <= target_times[i - 1])
            throw ConfigError("conditional_path: target times must be strictly ascending");
    }
    CovariatePath path;
    path.s = s;
    path.times = target_times;
    path.values = detail::krig_values(fit, history, arm, target_times);
    return path;
}

inline double blup_at_s(const FittedLongitudinal& fit, const std::vector<Measurement>& history,
                        int arm, double s) {
    if (history.empty()) throw DataError("blup_at_s: empty history");
    return detail::krig_values(fit, history, arm, {s}).front();
}

}  // namespace landmark
