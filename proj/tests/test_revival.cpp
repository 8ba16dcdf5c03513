#include <gtest/gtest.h>

#include <Eigen/Cholesky>
#include <cmath>

#include "landmark/revival.hpp"
#include "landmark/rng.hpp"
#include "landmark/simulate.hpp"

using namespace landmark;

namespace {

Subject bare_subject(const std::string& id, double event_time, int status, int arm = 0) {
    Subject s;
    s.id = id;
    s.arm = arm;
    s.event_time = event_time;
    s.status = status;
    return s;
}

RevivalModel toy_model() {
    RevivalModel m;
    m.tau = 9.0;
    m.epsilon = 1.0 / 365.25;
    m.dead.coef = Eigen::VectorXd(5);
    m.dead.coef << 70.0, 5.0, -2.0, 3.0, 1.0;
    m.dead.cov = {4.0, 3.0, 0.7, 2.0};
    m.survivor.coef = Eigen::VectorXd(4);
    m.survivor.coef << 85.0, 4.0, -1.0, -0.5;
    m.survivor.cov = {3.0, 2.0, 0.4, 2.0};
    return m;
}

MarginalSurvival toy_marginal() {
    MarginalSurvival mg;
    mg.s = 3.0;
    mg.tau = 9.0;
    mg.support = {4.0, 6.0, 9.0};
    mg.masses = {0.25, 0.25, 0.5};
    return mg;
}

std::vector<Measurement> toy_history() { return {{1.0, 72.0, 0}, {2.5, 74.0, 1}}; }

double dead_mean(const RevivalModel& m, int arm, double u, double t_death) {
    return m.dead.coef(0) + m.dead.coef(1) * arm + m.dead.coef(2) * u +
           m.dead.coef(3) * std::log(u + m.epsilon) + m.dead.coef(4) * t_death;
}

}  // namespace

TEST(Stratify, ThreeWaySplit) {
    const std::vector<Subject> subs{bare_subject("dead", 5.0, 1),
                                    bare_subject("late-death", 10.0, 1),
                                    bare_subject("early-censor", 5.0, 0),
                                    bare_subject("at-tau", 9.0, 0)};
    const auto st = stratify(subs, 9.0);
    ASSERT_EQ(st.dead.size(), 1u);
    EXPECT_EQ(st.dead[0].id, "dead");
    ASSERT_EQ(st.survivor.size(), 2u);
    EXPECT_EQ(st.survivor[0].id, "late-death");  // observed deaths after tau are survivors
    EXPECT_EQ(st.survivor[1].id, "at-tau");
    ASSERT_EQ(st.censored_early.size(), 1u);
    EXPECT_EQ(st.censored_early[0].id, "early-censor");
}

TEST(Stratify, DeathAtTauIsDead) {
    const std::vector<Subject> subs{bare_subject("a", 9.0, 1), bare_subject("b", 9.5, 0)};
    const auto st = stratify(subs, 9.0);
    EXPECT_EQ(st.dead.size(), 1u);
    EXPECT_EQ(st.survivor.size(), 1u);
}

TEST(Stratify, EmptyStratumIsError) {
    EXPECT_THROW(stratify({bare_subject("a", 5.0, 1)}, 9.0), DataError);
    EXPECT_THROW(stratify({bare_subject("a", 10.0, 0)}, 9.0), DataError);
}

TEST(ReverseTime, DeadAnchorsAtDeath) {
    auto s = bare_subject("a", 4.0, 1);
    s.measurements = {{1.0, 70.0, 0}, {3.0, 65.0, 1}};
    const auto obs = reverse_time(s, true, 9.0);
    ASSERT_EQ(obs.size(), 2u);
    EXPECT_DOUBLE_EQ(obs[0].u, 3.0);
    EXPECT_DOUBLE_EQ(obs[1].u, 1.0);
}

TEST(ReverseTime, SurvivorAnchorsAtTau) {
    auto s = bare_subject("a", 12.0, 0);
    s.measurements = {{2.0, 70.0, 0}};
    const auto obs = reverse_time(s, false, 9.0);
    ASSERT_EQ(obs.size(), 1u);
    EXPECT_DOUBLE_EQ(obs[0].u, 7.0);
}

TEST(ReverseTime, SurvivorObsAfterTauDropped) {
    auto s = bare_subject("a", 12.0, 0);
    s.measurements = {{9.5, 70.0, 0}, {8.0, 71.0, 1}};
    // keep measurement order valid
    std::swap(s.measurements[0], s.measurements[1]);
    s.measurements[0].occasion = 0;
    s.measurements[1].occasion = 1;
    const auto obs = reverse_time(s, false, 9.0);
    ASSERT_EQ(obs.size(), 1u);
    EXPECT_DOUBLE_EQ(obs[0].u, 1.0);
}

TEST(FitRevival, RecoversGenerativeModel) {
    const RevivalModel truth = toy_model();
    CounterRng rng(99, 0, 0);
    std::vector<Subject> subs;

    auto draw_block = [&](const std::string& id, int arm, bool is_dead, double anchor,
                          const std::vector<double>& us) {
        Subject s = bare_subject(id, is_dead ? anchor : 9.5, is_dead ? 1 : 0, arm);
        const auto& stratum = is_dead ? truth.dead : truth.survivor;
        std::vector<ProcessPoint> pts;
        for (std::size_t j = 0; j < us.size(); ++j) pts.push_back({us[j], static_cast<int>(j)});
        const Eigen::MatrixXd cov = covariance_matrix(pts, stratum.cov);
        const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();
        Eigen::VectorXd z(static_cast<long>(us.size()));
        for (long j = 0; j < z.size(); ++j) z(j) = rng.normal();
        const Eigen::VectorXd noise = chol * z;
        // forward times descend as u ascends; occasions must follow forward order
        for (std::size_t j = 0; j < us.size(); ++j) {
            const double u = us[us.size() - 1 - j];
            const double t_fwd = (is_dead ? anchor : 9.0) - u;
            double mean = is_dead
                              ? dead_mean(truth, arm, u, anchor)
                              : truth.survivor.coef(0) + truth.survivor.coef(1) * arm +
                                    truth.survivor.coef(2) * u +
                                    truth.survivor.coef(3) * std::log(u + truth.epsilon);
            s.measurements.push_back(
                {t_fwd, mean + noise(static_cast<long>(us.size() - 1 - j)), static_cast<int>(j)});
        }
        return s;
    };

    for (int i = 0; i < 200; ++i) {
        const int arm = i % 2;
        const double t_death = 5.0 + 3.5 * rng.uniform();
        subs.push_back(draw_block("d" + std::to_string(i), arm, true, t_death,
                                  {0.2, 0.8, 2.5, 4.5}));
    }
    for (int i = 0; i < 200; ++i) {
        const int arm = i % 2;
        subs.push_back(draw_block("v" + std::to_string(i), arm, false, 9.0,
                                  {0.5, 1.5, 3.5, 6.5}));
    }

    RevivalOptions opt;
    opt.fit.exclude_baseline = false;
    const auto model = fit_revival(subs, 9.0, truth.epsilon, opt);

    ASSERT_EQ(model.dead.coef.size(), 5);
    ASSERT_EQ(model.survivor.coef.size(), 4);  // no death-time column for survivors
    EXPECT_NEAR(model.dead.coef(0), truth.dead.coef(0), 2.5);
    EXPECT_NEAR(model.dead.coef(1), truth.dead.coef(1), 1.0);
    EXPECT_NEAR(model.dead.coef(2), truth.dead.coef(2), 1.0);
    EXPECT_NEAR(model.dead.coef(3), truth.dead.coef(3), 1.0);
    EXPECT_NEAR(model.dead.coef(4), truth.dead.coef(4), 0.5);
    EXPECT_NEAR(model.survivor.coef(0), truth.survivor.coef(0), 2.5);
    EXPECT_NEAR(model.survivor.coef(1), truth.survivor.coef(1), 1.0);
    EXPECT_NEAR(model.survivor.coef(2), truth.survivor.coef(2), 1.0);
    EXPECT_NEAR(model.survivor.coef(3), truth.survivor.coef(3), 1.5);
    // the marginal variance is strongly identified; the individual components
    // less so at this sample size
    EXPECT_NEAR(model.dead.cov.total_variance(), truth.dead.cov.total_variance(),
                0.25 * truth.dead.cov.total_variance());
    EXPECT_NEAR(model.survivor.cov.total_variance(), truth.survivor.cov.total_variance(),
                0.25 * truth.survivor.cov.total_variance());
    EXPECT_EQ(model.dead.n_subjects, 200);
    EXPECT_EQ(model.survivor.n_subjects, 200);
}

TEST(HistoryLogdensity, ScalarClosedForm) {
    const RevivalModel m = toy_model();
    const std::vector<Measurement> history{{2.0, 75.0, 0}};
    const double t_death = 5.0;
    const double u = t_death - 2.0;
    const double mean = dead_mean(m, 1, u, t_death);
    const double v = m.dead.cov.total_variance();
    const double expected =
        -0.5 * (std::log(2.0 * M_PI * v) + (75.0 - mean) * (75.0 - mean) / v);
    EXPECT_NEAR(history_logdensity(m, history, 1, t_death), expected, 1e-12);
}

TEST(HistoryLogdensity, SurvivorHypothesisScalar) {
    const RevivalModel m = toy_model();
    const std::vector<Measurement> history{{2.0, 80.0, 0}};
    const double u = m.tau - 2.0;
    const double mean = m.survivor.coef(0) + m.survivor.coef(2) * u +
                        m.survivor.coef(3) * std::log(u + m.epsilon);
    const double v = m.survivor.cov.total_variance();
    const double expected =
        -0.5 * (std::log(2.0 * M_PI * v) + (80.0 - mean) * (80.0 - mean) / v);
    EXPECT_NEAR(history_logdensity(m, history, 0, std::nullopt), expected, 1e-12);
}

TEST(HistoryLogdensity, PermutationInvariant) {
    const RevivalModel m = toy_model();
    std::vector<Measurement> history{{0.5, 71.0, 0}, {1.5, 73.0, 1}, {2.5, 70.0, 2}};
    const double a = history_logdensity(m, history, 0, 5.5);
    std::swap(history[0], history[2]);
    const double b = history_logdensity(m, history, 0, 5.5);
    EXPECT_NEAR(a, b, 1e-10);
}

TEST(HistoryLogdensity, ChainRuleConditionalBound) {
    const RevivalModel m = toy_model();
    const std::vector<Measurement> one{{1.0, 74.0, 0}};
    const std::vector<Measurement> two{{1.0, 74.0, 0}, {2.0, 75.0, 1}};
    const double t_death = 6.0;
    const double ld1 = history_logdensity(m, one, 0, t_death);
    const double ld2 = history_logdensity(m, two, 0, t_death);
    // log f(x2 | x1) is bounded by the conditional normal mode
    const auto& c = m.dead.cov;
    const double v = c.total_variance();
    const double cross = c.sigma1_sq + c.sigma2_sq * std::exp(-c.lambda_decay * 1.0);
    const double v_cond = v - cross * cross / v;
    EXPECT_LE(ld2 - ld1, -0.5 * std::log(2.0 * M_PI * v_cond) + 1e-12);
}

TEST(MarginalSurvival, NoDeathsBeforeTau) {
    const std::vector<Subject> subs{bare_subject("a", 10.0, 0), bare_subject("b", 12.0, 1)};
    const auto m = marginal_survival(subs, 3.0, 9.0);
    ASSERT_EQ(m.support.size(), 1u);
    EXPECT_DOUBLE_EQ(m.support[0], 9.0);
    EXPECT_DOUBLE_EQ(m.masses[0], 1.0);
}

TEST(MarginalSurvival, HandKaplanMeierMasses) {
    const std::vector<Subject> subs{bare_subject("a", 4.0, 1), bare_subject("b", 6.0, 1),
                                    bare_subject("c", 10.0, 0), bare_subject("d", 11.0, 0)};
    const auto m = marginal_survival(subs, 3.0, 9.0);
    ASSERT_EQ(m.support.size(), 3u);
    EXPECT_DOUBLE_EQ(m.support[0], 4.0);
    EXPECT_DOUBLE_EQ(m.support[1], 6.0);
    EXPECT_DOUBLE_EQ(m.support[2], 9.0);
    EXPECT_NEAR(m.masses[0], 0.25, 1e-12);
    EXPECT_NEAR(m.masses[1], 0.25, 1e-12);
    EXPECT_NEAR(m.masses[2], 0.5, 1e-12);
}

TEST(MarginalSurvival, MassesSumToOneUnderCensoring) {
    CounterRng rng(31, 0, 0);
    std::vector<Subject> subs;
    for (int i = 0; i < 60; ++i)
        subs.push_back(bare_subject("s" + std::to_string(i), 0.2 + 12.0 * rng.uniform(),
                                    rng.bernoulli(0.6) ? 1 : 0));
    const auto m = marginal_survival(subs, 2.0, 9.0);
    double total = 0.0;
    for (const double p : m.masses) {
        EXPECT_GE(p, 0.0);
        total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(MarginalSurvival, PerArmGivesTwoCurves) {
    std::vector<Subject> subs;
    for (int i = 0; i < 20; ++i)
        subs.push_back(bare_subject("s" + std::to_string(i), 1.0 + i * 0.6, i % 2, i % 2));
    const auto set = marginal_survival_set(subs, 0.5, 9.0, true);
    ASSERT_EQ(set.curves.size(), 2u);
    EXPECT_NE(set.for_arm(0).support, set.for_arm(1).support);
}

TEST(DirectRevival, FlatLikelihoodReturnsMarginal) {
    RevivalModel m = toy_model();
    // identical constant means and identical covariances in both strata make
    // the history density the same under every hypothesis
    m.dead.coef << 70.0, 0.0, 0.0, 0.0, 0.0;
    m.survivor.coef = Eigen::VectorXd::Zero(4);
    m.survivor.coef(0) = 70.0;
    m.survivor.cov = m.dead.cov;
    const auto mg = toy_marginal();
    const double pi = direct_revival_predict(m, mg, toy_history(), 0, 3.0, 2.0);
    // deaths beyond s+w=5: mass at 6 plus the tau lump
    EXPECT_NEAR(pi, 0.75, 1e-12);
}

TEST(DirectRevival, MatchesBruteforceBayes) {
    const RevivalModel m = toy_model();
    const auto mg = toy_marginal();
    const auto history = toy_history();
    for (const int arm : {0, 1}) {
        const auto post = revival_posterior(m, mg, history, arm);
        std::vector<double> logdens;
        for (std::size_t k = 0; k + 1 < mg.support.size(); ++k)
            logdens.push_back(history_logdensity(m, history, arm, mg.support[k]));
        logdens.push_back(history_logdensity(m, history, arm, std::nullopt));
        const auto oracle = bruteforce_bayes(logdens, mg.masses);
        ASSERT_EQ(post.masses.size(), oracle.size());
        double total = 0.0;
        for (std::size_t k = 0; k < oracle.size(); ++k) {
            EXPECT_NEAR(post.masses[k], oracle[k], 1e-12);
            total += post.masses[k];
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
        const double pi = direct_revival_predict(m, mg, history, arm, 3.0, 2.0);
        EXPECT_NEAR(pi, oracle[1] + oracle[2], 1e-12);
        EXPECT_GE(pi, 0.0);
        EXPECT_LE(pi, 1.0);
    }
}

TEST(DirectRevival, WindowBeyondTauIsError) {
    const RevivalModel m = toy_model();
    const auto mg = toy_marginal();
    EXPECT_THROW(direct_revival_predict(m, mg, toy_history(), 0, 3.0, 7.0), ConfigError);
}

TEST(LogSumExp, ShiftInvariant) {
    const std::vector<double> logw{-700.0, -701.3, -702.9};
    const auto a = detail::log_sum_exp_normalize(logw);
    std::vector<double> shifted = logw;
    for (double& v : shifted) v += 1234.5;
    const auto b = detail::log_sum_exp_normalize(shifted);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-10);
}

TEST(RevivalPath, DegenerateMixtureIsSurvivorExpectation) {
    const RevivalModel m = toy_model();
    MarginalSurvival mg;
    mg.s = 3.0;
    mg.tau = 9.0;
    mg.support = {9.0};
    mg.masses = {1.0};
    const auto history = toy_history();
    const std::vector<double> grid{3.5, 4.5};
    const auto path = revival_conditional_path(m, mg, history, 1, 3.0, grid);
    const RevivalConditioner cond(m, history, 1);
    for (std::size_t i = 0; i < grid.size(); ++i)
        EXPECT_NEAR(path.values[i], cond.cond_mean_survivor(grid[i]), 1e-12);
}

TEST(RevivalPath, MatchesExplicitMixture) {
    const RevivalModel m = toy_model();
    const auto mg = toy_marginal();
    const auto history = toy_history();
    const std::vector<double> grid{3.5, 4.5, 5.5};
    const auto path = revival_conditional_path(m, mg, history, 0, 3.0, grid);
    const RevivalConditioner cond(m, history, 0);

    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        const double t = grid[gi];
        std::vector<double> logdens, masses, means;
        for (std::size_t k = 0; k < mg.support.size(); ++k) {
            const bool is_tau = k + 1 == mg.support.size();
            if (!is_tau && mg.support[k] < t) continue;
            logdens.push_back(is_tau ? cond.logdensity_survivor()
                                     : cond.logdensity_death(mg.support[k]));
            masses.push_back(mg.masses[k]);
            means.push_back(is_tau ? cond.cond_mean_survivor(t)
                                   : cond.cond_mean_death(t, mg.support[k]));
        }
        const auto post = bruteforce_bayes(logdens, masses);
        double expected = 0.0;
        double lo = means[0], hi = means[0];
        for (std::size_t k = 0; k < post.size(); ++k) {
            expected += post[k] * means[k];
            lo = std::min(lo, means[k]);
            hi = std::max(hi, means[k]);
        }
        EXPECT_NEAR(path.values[gi], expected, 1e-12);
        EXPECT_GE(path.values[gi], lo - 1e-12);  // convex combination stays in range
        EXPECT_LE(path.values[gi], hi + 1e-12);
    }
}

TEST(RevivalPath, GridBeyondTauIsError) {
    const RevivalModel m = toy_model();
    const auto mg = toy_marginal();
    EXPECT_THROW(revival_conditional_path(m, mg, toy_history(), 0, 3.0, {9.5}), ConfigError);
}

TEST(FitRevival, SharedNoiseConstrainsSigma3) {
    CounterRng rng(123, 0, 0);
    std::vector<Subject> subs;
    for (int i = 0; i < 60; ++i) {
        Subject s = bare_subject("d" + std::to_string(i), 4.0 + 3.0 * rng.uniform(), 1, i % 2);
        for (int j = 0; j < 3; ++j) {
            const double t = s.event_time * (j + 1) / 4.0;
            s.measurements.push_back({t, 70.0 + 8.0 * rng.normal(), j});
        }
        subs.push_back(s);
    }
    for (int i = 0; i < 60; ++i) {
        Subject s = bare_subject("v" + std::to_string(i), 9.5, 0, i % 2);
        for (int j = 0; j < 3; ++j)
            s.measurements.push_back({1.0 + 2.5 * j, 85.0 + 8.0 * rng.normal(), j});
        subs.push_back(s);
    }
    RevivalOptions opt;
    opt.shared_noise = true;
    opt.fit.exclude_baseline = false;
    const auto model = fit_revival(subs, 9.0, 1.0 / 365.25, opt);
    EXPECT_DOUBLE_EQ(model.dead.cov.sigma3_sq, model.survivor.cov.sigma3_sq);
    EXPECT_TRUE(std::isfinite(model.dead.loglik));
    EXPECT_TRUE(std::isfinite(model.survivor.loglik));

    // the unconstrained fit can only do better in total log-likelihood
    RevivalOptions free_opt;
    free_opt.fit.exclude_baseline = false;
    const auto free_model = fit_revival(subs, 9.0, 1.0 / 365.25, free_opt);
    EXPECT_GE(free_model.dead.loglik + free_model.survivor.loglik,
              model.dead.loglik + model.survivor.loglik - 1e-6);
}
