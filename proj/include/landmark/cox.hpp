#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <string>
#include <vector>

#include "landmark/data.hpp"
#include "landmark/errors.hpp"
#include "landmark/longitudinal.hpp"

namespace landmark {

// Risk-set table: one block per distinct death time, one row per subject at
// risk there, carrying that subject's covariate values at that time.
struct RiskRow {
    int subject = 0;  // index into the landmark dataset
    bool death = false;
    Eigen::RowVectorXd x;
};

struct RiskSet {
    double time = 0.0;
    int deaths = 0;
    std::vector<RiskRow> rows;
};

struct CoxTable {
    int n_covariates = 0;
    std::vector<RiskSet> sets;
};

struct CoxFit {
    Eigen::VectorXd beta;
    Eigen::MatrixXd cov_beta;
    std::vector<double> event_times;          // distinct death times, ascending
    std::vector<double> baseline_increments;  // Breslow hazard increments at those times
    double loglik_null = 0.0;
    double loglik_final = 0.0;
    int iterations = 0;

    double se(int j) const { return std::sqrt(cov_beta(j, j)); }
};

// Evaluates the time-dependent covariate of every at-risk subject at every
// death time of the landmark dataset. Constant-covariate methods pass paths
// that are constant over the grid.
inline CoxTable expand_counting_process(const LandmarkDataset& lm,
                                        const std::vector<CovariatePath>& paths,
                                        bool adjust_arm = false) {
    if (paths.size() != lm.subjects.size())
        throw DataError("expand_counting_process: one path per landmark subject required");
    for (const auto& p : paths)
        if (p.times != lm.event_grid)
            throw DataError("expand_counting_process: path grid does not match the event grid");
    CoxTable table;
    table.n_covariates = adjust_arm ? 2 : 1;
    for (std::size_t g = 0; g < lm.event_grid.size(); ++g) {
        RiskSet set;
        set.time = lm.event_grid[g];
        for (std::size_t i = 0; i < lm.subjects.size(); ++i) {
            const auto& sub = lm.subjects[i];
            if (sub.event_time < set.time) continue;  // left the risk set
            RiskRow row;
            row.subject = static_cast<int>(i);
            row.death = sub.status == 1 && sub.event_time == set.time;
            row.x.resize(table.n_covariates);
            row.x(0) = paths[i].values[g];
            if (adjust_arm) row.x(1) = static_cast<double>(sub.arm);
            set.deaths += row.death;
            set.rows.push_back(std::move(row));
        }
        if (set.deaths > 0) table.sets.push_back(std::move(set));
    }
    return table;
}

// Same table for covariates that are fixed at the landmark (calibration
// models, prediction-comparison models).
inline CoxTable expand_fixed_covariates(const LandmarkDataset& lm, const Eigen::MatrixXd& x) {
    if (x.rows() != static_cast<long>(lm.subjects.size()))
        throw DataError("expand_fixed_covariates: one row per landmark subject required");
    CoxTable table;
    table.n_covariates = static_cast<int>(x.cols());
    for (const double u : lm.event_grid) {
        RiskSet set;
        set.time = u;
        for (std::size_t i = 0; i < lm.subjects.size(); ++i) {
            const auto& sub = lm.subjects[i];
            if (sub.event_time < u) continue;
            RiskRow row;
            row.subject = static_cast<int>(i);
            row.death = sub.status == 1 && sub.event_time == u;
            row.x = x.row(static_cast<long>(i));
            set.deaths += row.death;
            set.rows.push_back(std::move(row));
        }
        if (set.deaths > 0) table.sets.push_back(std::move(set));
    }
    return table;
}

struct CoxOptions {
    int max_iter = 100;
    double loglik_tol = 1e-10;
    double score_tol = 1e-8;
    double beta_bound = 50.0;  // on the standardized scale
};

namespace detail {

struct CoxStats {
    double loglik = 0.0;
    Eigen::VectorXd score;
    Eigen::MatrixXd info;
};

// partial log-likelihood, score, and observed information with Breslow ties
inline CoxStats cox_stats(const std::vector<RiskSet>& sets,
                          const std::vector<std::vector<Eigen::RowVectorXd>>& z,
                          const Eigen::VectorXd& beta, int p) {
    CoxStats st;
    st.score = Eigen::VectorXd::Zero(p);
    st.info = Eigen::MatrixXd::Zero(p, p);
    for (std::size_t g = 0; g < sets.size(); ++g) {
        double s0 = 0.0;
        Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
        Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
        for (std::size_t r = 0; r < sets[g].rows.size(); ++r) {
            const double eta = z[g][r].dot(beta);
            const double e = std::exp(eta);
            s0 += e;
            s1.noalias() += e * z[g][r].transpose();
            s2.noalias() += e * z[g][r].transpose() * z[g][r];
            if (sets[g].rows[r].death) {
                st.loglik += eta;
                st.score += z[g][r].transpose();
            }
        }
        const double d = sets[g].deaths;
        const Eigen::VectorXd xbar = s1 / s0;
        st.loglik -= d * std::log(s0);
        st.score.noalias() -= d * xbar;
        st.info.noalias() += d * (s2 / s0 - xbar * xbar.transpose());
    }
    return st;
}

}  // namespace detail

// Newton-Raphson maximum partial likelihood with Breslow tie handling.
// Covariates are standardized internally; estimates, covariance, and baseline
// increments are reported on the original scale.
inline CoxFit fit_cox(const CoxTable& table, const CoxOptions& opt = {}) {
    int total_deaths = 0;
    long total_rows = 0;
    for (const auto& set : table.sets) {
        total_deaths += set.deaths;
        total_rows += static_cast<long>(set.rows.size());
    }
    if (total_deaths == 0) throw DataError("fit_cox: no deaths in the table");

    const int p = table.n_covariates;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd sd = Eigen::VectorXd::Zero(p);
    for (const auto& set : table.sets)
        for (const auto& row : set.rows) mean += row.x.transpose();
    if (total_rows > 0) mean /= static_cast<double>(total_rows);
    for (const auto& set : table.sets)
        for (const auto& row : set.rows)
            sd += (row.x.transpose() - mean).array().square().matrix();
    sd = (sd / std::max<double>(1.0, static_cast<double>(total_rows))).array().sqrt();

    // a column that never varies carries no information: an all-zero column is
    // pinned at beta = 0 (null-model identity), any other constant is an error
    std::vector<int> active;
    for (int j = 0; j < p; ++j) {
        if (sd(j) > 0.0) {
            active.push_back(j);
        } else if (mean(j) != 0.0) {
            throw DataError("fit_cox: covariate " + std::to_string(j) +
                            " is constant across all risk rows");
        }
    }
    const int q = static_cast<int>(active.size());

    // standardized covariates per risk row
    std::vector<std::vector<Eigen::RowVectorXd>> z(table.sets.size());
    for (std::size_t g = 0; g < table.sets.size(); ++g) {
        z[g].resize(table.sets[g].rows.size());
        for (std::size_t r = 0; r < table.sets[g].rows.size(); ++r) {
            Eigen::RowVectorXd zr(q);
            for (int a = 0; a < q; ++a) {
                const int j = active[a];
                zr(a) = (table.sets[g].rows[r].x(j) - mean(j)) / sd(j);
            }
            z[g][r] = std::move(zr);
        }
    }

    Eigen::VectorXd beta_std = Eigen::VectorXd::Zero(q);
    auto stats = detail::cox_stats(table.sets, z, beta_std, q);
    const double loglik_null = stats.loglik;
    int iter = 0;
    if (q > 0) {
        for (;; ++iter) {
            if (stats.score.cwiseAbs().maxCoeff() < opt.score_tol && iter > 0) break;
            if (iter >= opt.max_iter)
                throw NumericError("fit_cox: no convergence in " + std::to_string(opt.max_iter) +
                                   " Newton iterations");
            Eigen::LLT<Eigen::MatrixXd> llt(stats.info);
            if (llt.info() != Eigen::Success)
                throw NumericError("fit_cox: singular information matrix");
            const Eigen::VectorXd step = llt.solve(stats.score);
            double scale = 1.0;
            Eigen::VectorXd beta_new;
            detail::CoxStats stats_new;
            for (int h = 0; h < 30; ++h) {
                beta_new = beta_std + scale * step;
                stats_new = detail::cox_stats(table.sets, z, beta_new, q);
                if (stats_new.loglik >= stats.loglik - 1e-12) break;
                scale *= 0.5;
            }
            if (beta_new.cwiseAbs().maxCoeff() > opt.beta_bound)
                throw NumericError("fit_cox: diverging coefficients (monotone likelihood)");
            const double delta = std::fabs(stats_new.loglik - stats.loglik);
            beta_std = beta_new;
            stats = stats_new;
            if (delta < opt.loglik_tol && stats.score.cwiseAbs().maxCoeff() < opt.score_tol) {
                ++iter;
                break;
            }
        }
    }

    CoxFit fit;
    fit.beta = Eigen::VectorXd::Zero(p);
    fit.cov_beta = Eigen::MatrixXd::Zero(p, p);
    if (q > 0) {
        Eigen::LLT<Eigen::MatrixXd> llt(stats.info);
        if (llt.info() != Eigen::Success)
            throw NumericError("fit_cox: singular information matrix at the optimum");
        const Eigen::MatrixXd cov_std = llt.solve(Eigen::MatrixXd::Identity(q, q));
        for (int a = 0; a < q; ++a) {
            fit.beta(active[a]) = beta_std(a) / sd(active[a]);
            for (int b = 0; b < q; ++b)
                fit.cov_beta(active[a], active[b]) = cov_std(a, b) / (sd(active[a]) * sd(active[b]));
        }
    }
    fit.loglik_null = loglik_null;
    fit.loglik_final = stats.loglik;
    fit.iterations = iter;

    // Breslow increments d_u / sum_{at risk} exp(beta' x), computed on the
    // standardized scale to keep the exponentials bounded
    const double mean_eta = [&] {
        double v = 0.0;
        for (int a = 0; a < q; ++a) v += beta_std(a) / sd(active[a]) * mean(active[a]);
        return v;
    }();
    for (std::size_t g = 0; g < table.sets.size(); ++g) {
        double s0 = 0.0;
        for (std::size_t r = 0; r < table.sets[g].rows.size(); ++r)
            s0 += std::exp(z[g][r].dot(beta_std));
        fit.event_times.push_back(table.sets[g].time);
        fit.baseline_increments.push_back(static_cast<double>(table.sets[g].deaths) /
                                          (s0 * std::exp(mean_eta)));
    }
    return fit;
}

// pi_hat(s+w | s) = exp(-sum_{s < u <= s+w} lambda0(u) exp(beta' x(u)))
inline double predict_survival(const CoxFit& fit, const CovariatePath& path, double s, double w,
                               const std::vector<double>& extra_covariates = {}) {
    if (fit.beta.size() != 1 + static_cast<long>(extra_covariates.size()))
        throw DataError("predict_survival: covariate count does not match the fit");
    double cumhaz = 0.0;
    for (std::size_t g = 0; g < fit.event_times.size(); ++g) {
        const double u = fit.event_times[g];
        if (u <= s || u > s + w) continue;
        double eta = fit.beta(0) * path.at(u);
        for (std::size_t j = 0; j < extra_covariates.size(); ++j)
            eta += fit.beta(static_cast<long>(j) + 1) * extra_covariates[j];
        cumhaz += fit.baseline_increments[g] * std::exp(eta);
    }
    return std::exp(-cumhaz);
}

}  // namespace landmark
