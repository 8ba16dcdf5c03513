#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "landmark/covariance.hpp"
#include "landmark/data.hpp"
#include "landmark/errors.hpp"
#include "landmark/rng.hpp"

namespace landmark {

// Generative model for synthetic datasets: a Gaussian marker process (random
// intercept + stationary serial component + white noise on observations) and a
// proportional-hazards death time driven by the current true marker value.
struct SimConfig {
    int n_subjects = 100;
    Eigen::Vector4d trend_coef{69.03, 2.19, 80.57, 1.03};  // (int0, slope0, int1, slope1)
    CovarianceParams cov{308.4, 240.8, 0.52, 184.3};
    std::vector<double> schedule;     // observation times; when empty, rate-based
    double observation_rate = 0.0;    // expected observations per year if no schedule
    double baseline_hazard = 0.0;     // lambda0 of the death hazard
    double log_hazard_coef = 0.0;     // beta: log-hazard per unit of the true marker
    double censoring_rate = 0.0;      // exponential censoring
    double max_time = 20.0;           // administrative end of follow-up
    double treat_fraction = 0.5;
    double grid_step = 0.01;          // hazard discretization
    std::uint64_t seed = 1;

    void validate() const {
        if (n_subjects < 1) throw ConfigError("simulate: n_subjects must be >= 1");
        if (!cov.valid()) throw ConfigError("simulate: invalid covariance parameters");
        if (baseline_hazard < 0.0 || censoring_rate < 0.0 || observation_rate < 0.0)
            throw ConfigError("simulate: rates must be >= 0");
        if (!(max_time > 0.0)) throw ConfigError("simulate: max_time must be > 0");
        if (!(grid_step > 0.0)) throw ConfigError("simulate: grid_step must be > 0");
        if (schedule.empty() && observation_rate == 0.0 && baseline_hazard == 0.0)
            throw ConfigError("simulate: no observations and no events requested");
        for (const double t : schedule)
            if (t < 0.0 || t > max_time)
                throw ConfigError("simulate: schedule times must lie in [0, max_time]");
    }
};

namespace detail {

// per-subject random streams
enum SimStream : std::uint64_t {
    stream_arm = 0,
    stream_intercept,
    stream_serial,
    stream_noise,
    stream_event,
    stream_censor,
    stream_schedule
};

}  // namespace detail

inline std::vector<Subject> simulate(const SimConfig& cfg) {
    cfg.validate();
    const int digits = static_cast<int>(std::to_string(cfg.n_subjects).size());

    std::vector<Subject> out;
    out.reserve(static_cast<std::size_t>(cfg.n_subjects));
    for (int i = 0; i < cfg.n_subjects; ++i) {
        Subject sub;
        std::string num = std::to_string(i + 1);
        sub.id = "s" + std::string(static_cast<std::size_t>(digits) - num.size(), '0') + num;

        CounterRng arm_rng(cfg.seed, static_cast<std::uint64_t>(i), detail::stream_arm);
        sub.arm = arm_rng.bernoulli(cfg.treat_fraction) ? 1 : 0;

        // observation times
        std::vector<double> obs_times = cfg.schedule;
        if (obs_times.empty() && cfg.observation_rate > 0.0) {
            CounterRng sched(cfg.seed, static_cast<std::uint64_t>(i), detail::stream_schedule);
            double t = 0.0;
            while (true) {
                t += sched.exponential(cfg.observation_rate);
                if (t > cfg.max_time) break;
                obs_times.push_back(t);
            }
        }
        std::sort(obs_times.begin(), obs_times.end());

        // walk over the union of the hazard grid and the observation times so
        // the serial component is exact at both
        std::vector<double> walk;
        for (double t = 0.0; t < cfg.max_time + 0.5 * cfg.grid_step; t += cfg.grid_step)
            walk.push_back(std::min(t, cfg.max_time));
        walk.insert(walk.end(), obs_times.begin(), obs_times.end());
        std::sort(walk.begin(), walk.end());
        walk.erase(std::unique(walk.begin(), walk.end()), walk.end());

        CounterRng intercept_rng(cfg.seed, static_cast<std::uint64_t>(i), detail::stream_intercept);
        const double b = intercept_rng.normal(0.0, std::sqrt(cfg.cov.sigma1_sq));

        CounterRng serial(cfg.seed, static_cast<std::uint64_t>(i), detail::stream_serial);
        const double serial_sd = std::sqrt(cfg.cov.sigma2_sq);
        std::vector<double> x_true(walk.size());
        double w_val = serial.normal(0.0, serial_sd);
        for (std::size_t k = 0; k < walk.size(); ++k) {
            if (k > 0) {
                const double gap = walk[k] - walk[k - 1];
                const double phi = std::exp(-cfg.cov.lambda_decay * gap);
                w_val = phi * w_val + serial.normal(0.0, serial_sd * std::sqrt(1.0 - phi * phi));
            }
            const int arm = sub.arm;
            const double trend = arm == 0 ? cfg.trend_coef(0) + cfg.trend_coef(1) * walk[k]
                                          : cfg.trend_coef(2) + cfg.trend_coef(3) * walk[k];
            x_true[k] = trend + b + w_val;
        }

        // death time by inversion of the piecewise-constant hazard
        CounterRng event_rng(cfg.seed, static_cast<std::uint64_t>(i), detail::stream_event);
        double death = std::numeric_limits<double>::infinity();
        if (cfg.baseline_hazard > 0.0) {
            const double target = event_rng.exponential(1.0);
            double cum = 0.0;
            for (std::size_t k = 0; k + 1 < walk.size(); ++k) {
                const double h = cfg.baseline_hazard * std::exp(cfg.log_hazard_coef * x_true[k]);
                const double seg = h * (walk[k + 1] - walk[k]);
                if (cum + seg >= target) {
                    death = walk[k] + (target - cum) / h;
                    break;
                }
                cum += seg;
            }
        }

        CounterRng censor_rng(cfg.seed, static_cast<std::uint64_t>(i), detail::stream_censor);
        const double censor = std::min(censor_rng.exponential(cfg.censoring_rate), cfg.max_time);

        sub.status = death <= censor ? 1 : 0;
        sub.event_time = std::min(death, censor);

        CounterRng noise(cfg.seed, static_cast<std::uint64_t>(i), detail::stream_noise);
        const double noise_sd = std::sqrt(cfg.cov.sigma3_sq);
        int occasion = 0;
        for (const double t : obs_times) {
            if (t >= sub.event_time) break;
            const auto it = std::lower_bound(walk.begin(), walk.end(), t);
            Measurement m;
            m.time = t;
            m.value = x_true[static_cast<std::size_t>(it - walk.begin())] +
                      noise.normal(0.0, noise_sd);
            m.occasion = occasion++;
            sub.measurements.push_back(m);
        }
        validate_subject(sub);
        out.push_back(std::move(sub));
    }
    return out;
}

inline void write_dataset_csv(const std::vector<Subject>& subjects, std::ostream& long_out,
                              std::ostream& surv_out, const std::string& comment = "") {
    if (!comment.empty()) {
        long_out << "# " << comment << "\n";
        surv_out << "# " << comment << "\n";
    }
    long_out << "id,time,value\n";
    surv_out << "id,survtime,status,arm\n";
    for (const auto& sub : subjects) {
        surv_out << sub.id << ',' << csv::format_double(sub.event_time) << ',' << sub.status
                 << ',' << sub.arm << '\n';
        for (const auto& m : sub.measurements)
            long_out << sub.id << ',' << csv::format_double(m.time) << ','
                     << csv::format_double(m.value) << '\n';
    }
}

// ---------------------------------------------------------------------------
// brute-force reference implementations (test oracles)

// Conditional mean of the unobserved coordinates given the observed ones,
// computed from the inverse of the complete joint covariance rather than the
// partitioned kriging formula.
inline Eigen::VectorXd bruteforce_conditional_mean(const Eigen::VectorXd& mean,
                                                   const Eigen::MatrixXd& cov,
                                                   const std::vector<int>& observed_idx,
                                                   const Eigen::VectorXd& observed_values) {
    const long n = mean.size();
    if (cov.rows() != n || cov.cols() != n)
        throw DataError("bruteforce_conditional_mean: dimension mismatch");
    if (static_cast<long>(observed_idx.size()) != observed_values.size())
        throw DataError("bruteforce_conditional_mean: observed sizes differ");

    std::vector<bool> is_obs(static_cast<std::size_t>(n), false);
    for (const int j : observed_idx) is_obs.at(static_cast<std::size_t>(j)) = true;
    std::vector<int> unobs;
    for (long j = 0; j < n; ++j)
        if (!is_obs[static_cast<std::size_t>(j)]) unobs.push_back(static_cast<int>(j));

    if (observed_idx.empty()) {
        Eigen::VectorXd prior(static_cast<long>(unobs.size()));
        for (std::size_t a = 0; a < unobs.size(); ++a) prior(static_cast<long>(a)) = mean(unobs[a]);
        return prior;
    }

    const Eigen::MatrixXd precision = cov.fullPivLu().inverse();
    Eigen::MatrixXd p_uu(unobs.size(), unobs.size());
    Eigen::MatrixXd p_uo(unobs.size(), observed_idx.size());
    for (std::size_t a = 0; a < unobs.size(); ++a) {
        for (std::size_t c = 0; c < unobs.size(); ++c)
            p_uu(static_cast<long>(a), static_cast<long>(c)) = precision(unobs[a], unobs[c]);
        for (std::size_t c = 0; c < observed_idx.size(); ++c)
            p_uo(static_cast<long>(a), static_cast<long>(c)) = precision(unobs[a], observed_idx[c]);
    }
    Eigen::VectorXd resid(observed_values.size());
    for (long c = 0; c < observed_values.size(); ++c)
        resid(c) = observed_values(c) - mean(observed_idx[static_cast<std::size_t>(c)]);

    Eigen::VectorXd cond(static_cast<long>(unobs.size()));
    const Eigen::VectorXd shift = p_uu.fullPivLu().solve(p_uo * resid);
    for (std::size_t a = 0; a < unobs.size(); ++a)
        cond(static_cast<long>(a)) = mean(unobs[a]) - shift(static_cast<long>(a));
    return cond;
}

// Direct posterior normalization in extended precision over the full support.
inline std::vector<double> bruteforce_bayes(const std::vector<double>& log_densities,
                                            const std::vector<double>& prior_masses) {
    if (log_densities.size() != prior_masses.size())
        throw DataError("bruteforce_bayes: size mismatch");
    if (log_densities.empty()) throw DataError("bruteforce_bayes: empty support");
    long double mx = -std::numeric_limits<long double>::infinity();
    for (const double v : log_densities) mx = std::max<long double>(mx, v);
    std::vector<long double> w(log_densities.size());
    long double total = 0.0L;
    for (std::size_t k = 0; k < w.size(); ++k) {
        w[k] = static_cast<long double>(prior_masses[k]) *
               std::exp(static_cast<long double>(log_densities[k]) - mx);
        total += w[k];
    }
    if (!(total > 0.0L)) throw NumericError("bruteforce_bayes: posterior underflow");
    std::vector<double> out(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) out[k] = static_cast<double>(w[k] / total);
    return out;
}

}  // namespace landmark
