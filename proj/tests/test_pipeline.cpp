#include <gtest/gtest.h>

#include <cmath>

#include "landmark/pipeline.hpp"
#include "landmark/rng.hpp"
#include "landmark/simulate.hpp"

using namespace landmark;

namespace {

std::vector<Subject> toy_cohort() {
    // deaths spread around the window (3, 5], markers informative
    std::vector<Subject> subs;
    CounterRng rng(17, 0, 0);
    for (int i = 0; i < 40; ++i) {
        Subject s;
        s.id = "p" + std::to_string(100 + i);
        s.arm = i % 2;
        const double base = 60.0 + 20.0 * rng.uniform();
        s.measurements = {{0.5, base + rng.normal(), 0},
                          {1.5, base + 1.0 + rng.normal(), 1},
                          {2.8, base + 2.0 + rng.normal(), 2}};
        const double risk = std::exp(-0.05 * (base - 70.0));
        s.event_time = 3.05 + 4.0 * std::pow(rng.uniform(), risk);
        s.status = rng.bernoulli(0.85) ? 1 : 0;
        subs.push_back(s);
    }
    return subs;
}

ModelBundle gp_bundle(const Eigen::Vector4d& coef, const CovarianceParams& cov) {
    ModelBundle b;
    FittedLongitudinal fit;
    fit.trend_coef = coef;
    fit.cov = cov;
    b.gp = fit;
    return b;
}

}  // namespace

TEST(MakePaths, LocfPathIsConstant) {
    const auto subs = toy_cohort();
    const auto lm = build_landmark(subs, 3.0, 2.0);
    const auto paths = make_paths(MethodId::locf, lm, {});
    ASSERT_EQ(paths.size(), lm.subjects.size());
    for (std::size_t i = 0; i < paths.size(); ++i) {
        const double expected = locf(lm.subjects[i], 3.0);
        for (const double v : paths[i].values) EXPECT_DOUBLE_EQ(v, expected);
        EXPECT_EQ(paths[i].times, lm.event_grid);
    }
}

TEST(MakePaths, UninformativeGpPathEqualsTrend) {
    const auto subs = toy_cohort();
    const auto lm = build_landmark(subs, 3.0, 2.0);
    // no between-subject or serial variance: history carries no information
    const Eigen::Vector4d coef{65.0, 2.0, 72.0, 1.0};
    const auto bundle = gp_bundle(coef, {0.0, 0.0, 1.0, 50.0});
    const auto paths = make_paths(MethodId::xhat_gp, lm, bundle);
    for (std::size_t i = 0; i < paths.size(); ++i) {
        const int arm = lm.subjects[i].arm;
        for (std::size_t g = 0; g < paths[i].times.size(); ++g) {
            const double trend = bundle.gp->trend_value(arm, paths[i].times[g]);
            EXPECT_NEAR(paths[i].values[g], trend, 1e-10);
        }
    }
}

TEST(MakePaths, DirectRevivalHasNoPaths) {
    const auto subs = toy_cohort();
    const auto lm = build_landmark(subs, 3.0, 2.0);
    EXPECT_TRUE(make_paths(MethodId::direct_revival, lm, {}).empty());
}

TEST(Train, ConstantPathsReduceToTimeFixedCox) {
    const auto subs = toy_cohort();
    const auto lm = build_landmark(subs, 3.0, 2.0);
    const auto trained = train(MethodId::locf, lm, {});

    Eigen::MatrixXd x(static_cast<long>(lm.subjects.size()), 1);
    for (std::size_t i = 0; i < lm.subjects.size(); ++i)
        x(static_cast<long>(i), 0) = locf(lm.subjects[i], 3.0);
    const auto fixed = fit_cox(expand_fixed_covariates(lm, x));
    EXPECT_NEAR(trained.cox.beta(0), fixed.beta(0), 1e-12);
    EXPECT_NEAR(trained.cox.loglik_final, fixed.loglik_final, 1e-12);
}

TEST(Train, AdjustArmAddsCovariate) {
    const auto subs = toy_cohort();
    const auto lm = build_landmark(subs, 3.0, 2.0);
    PipelineOptions opt;
    opt.adjust_arm = true;
    const auto trained = train(MethodId::locf, lm, {}, opt);
    EXPECT_EQ(trained.cox.beta.size(), 2);
}

TEST(Train, RevivalWindowGuard) {
    const auto subs = toy_cohort();
    const auto lm = build_landmark(subs, 3.0, 2.0);
    PipelineOptions opt;
    opt.tau = 4.0;  // s + w = 5 > tau
    ModelBundle bundle;
    bundle.revival = RevivalModel{};
    bundle.marginal = MarginalSurvivalSet{};
    EXPECT_THROW(train(MethodId::xhat_revival, lm, bundle, opt), ConfigError);
}

TEST(PredictSubject, MatchesInSamplePrediction) {
    const auto subs = toy_cohort();
    const auto lm = build_landmark(subs, 3.0, 2.0);
    const auto trained = train(MethodId::locf, lm, {});
    const auto paths = make_paths(MethodId::locf, lm, {});
    for (std::size_t i = 0; i < lm.subjects.size(); ++i) {
        const auto res = predict_subject(trained, lm.subjects[i]);
        EXPECT_DOUBLE_EQ(res.pi_hat, predict_survival(trained.cox, paths[i], 3.0, 2.0));
        EXPECT_GE(res.pi_hat, 0.0);
        EXPECT_LE(res.pi_hat, 1.0);
    }
}

TEST(PredictSubject, Deterministic) {
    const auto subs = toy_cohort();
    const auto lm = build_landmark(subs, 3.0, 2.0);
    const auto trained = train(MethodId::locf, lm, {});
    const auto a = predict_subject(trained, lm.subjects[3]);
    const auto b = predict_subject(trained, lm.subjects[3]);
    EXPECT_EQ(a.pi_hat, b.pi_hat);
    EXPECT_EQ(a.id, b.id);
}

TEST(PredictSubject, NullBetaIgnoresHistory) {
    TrainedPredictor tp;
    tp.method = MethodId::locf;
    tp.s = 3.0;
    tp.w = 2.0;
    tp.event_grid = {3.5, 4.5};
    tp.cox.beta = Eigen::VectorXd::Zero(1);
    tp.cox.cov_beta = Eigen::MatrixXd::Zero(1, 1);
    tp.cox.event_times = tp.event_grid;
    tp.cox.baseline_increments = {0.1, 0.2};

    Subject lo;
    lo.id = "lo";
    lo.event_time = 9.0;
    lo.status = 0;
    lo.measurements = {{1.0, 40.0, 0}};
    Subject hi = lo;
    hi.id = "hi";
    hi.measurements = {{1.0, 140.0, 0}};
    EXPECT_DOUBLE_EQ(predict_subject(tp, lo).pi_hat, predict_subject(tp, hi).pi_hat);
    EXPECT_NEAR(predict_subject(tp, lo).pi_hat, std::exp(-0.3), 1e-12);
}

TEST(PredictSubject, HandValueViaTrainedPredictor) {
    TrainedPredictor tp;
    tp.method = MethodId::locf;
    tp.s = 3.0;
    tp.w = 2.0;
    tp.event_grid = {3.5, 4.5};
    tp.cox.beta = Eigen::VectorXd::Constant(1, 0.5);
    tp.cox.cov_beta = Eigen::MatrixXd::Identity(1, 1);
    tp.cox.event_times = tp.event_grid;
    tp.cox.baseline_increments = {0.10, 0.05};

    Subject sub;
    sub.id = "x";
    sub.event_time = 9.0;
    sub.status = 0;
    sub.measurements = {{2.0, 1.0, 0}};  // locf value 1 over the whole grid
    const double expected = std::exp(-(0.10 + 0.05) * std::exp(0.5));
    EXPECT_NEAR(predict_subject(tp, sub).pi_hat, expected, 1e-12);

    CovariatePath path;
    path.s = 3.0;
    path.times = tp.event_grid;
    path.values = {1.0, 1.0};
    EXPECT_DOUBLE_EQ(predict_subject(tp, sub).pi_hat,
                     predict_survival(tp.cox, path, 3.0, 2.0));
}

TEST(PredictSubject, EmptyHistoryIsError) {
    const auto subs = toy_cohort();
    const auto lm = build_landmark(subs, 3.0, 2.0);
    const auto trained = train(MethodId::locf, lm, {});
    Subject sub;
    sub.id = "late";
    sub.event_time = 9.0;
    sub.status = 0;
    sub.measurements = {{4.0, 70.0, 0}};  // nothing by s = 3
    EXPECT_THROW(predict_subject(trained, sub), DataError);
}

TEST(PredictSubject, LargerPathLowersSurvivalWhenBetaPositive) {
    // cohort in which a high marker shortens survival, so the fitted slope is
    // positive and the direction of the composite prediction is fixed
    std::vector<Subject> subs;
    CounterRng rng(18, 0, 0);
    for (int i = 0; i < 40; ++i) {
        Subject s;
        s.id = "q" + std::to_string(100 + i);
        s.arm = i % 2;
        const double base = 60.0 + 20.0 * rng.uniform();
        s.measurements = {{1.0, base + rng.normal(), 0}};
        s.event_time = 3.05 + 4.0 * std::pow(rng.uniform(), std::exp(0.08 * (base - 70.0)));
        s.status = rng.bernoulli(0.9) ? 1 : 0;
        subs.push_back(s);
    }
    const auto lm = build_landmark(subs, 3.0, 2.0);
    const auto trained = train(MethodId::locf, lm, {});
    ASSERT_GT(trained.cox.beta(0), 0.0);

    Subject lo;
    lo.id = "lo";
    lo.event_time = 9.0;
    lo.status = 0;
    lo.measurements = {{1.0, 50.0, 0}};
    Subject hi = lo;
    hi.id = "hi";
    hi.measurements = {{1.0, 90.0, 0}};
    EXPECT_LT(predict_subject(trained, hi).pi_hat, predict_subject(trained, lo).pi_hat);
}

TEST(BlupLocfAgreement, SinglePointAtSWithoutNoise) {
    const auto subs = toy_cohort();
    std::vector<Subject> snapped;
    for (auto s : subs) {
        s.measurements = {{3.0, s.measurements[0].value, 0}};  // one observation exactly at s
        snapped.push_back(s);
    }
    const auto lm = build_landmark(snapped, 3.0, 2.0);
    const auto bundle = gp_bundle({65.0, 2.0, 72.0, 1.0}, {30.0, 20.0, 0.7, 0.0});
    const auto blup_paths = make_paths(MethodId::blup, lm, bundle);
    const auto locf_paths = make_paths(MethodId::locf, lm, bundle);
    for (std::size_t i = 0; i < blup_paths.size(); ++i)
        for (std::size_t g = 0; g < blup_paths[i].values.size(); ++g)
            EXPECT_NEAR(blup_paths[i].values[g], locf_paths[i].values[g], 1e-9);
}

TEST(Train, PureNoiseMarkerGivesNullSlope) {
    // marker unrelated to the hazard: the fitted slope sits within 2 SE of 0
    SimConfig cfg;
    cfg.n_subjects = 400;
    cfg.cov = {100.0, 80.0, 0.6, 60.0};
    cfg.schedule = {0.5, 1.5, 2.5};
    cfg.baseline_hazard = 0.15;
    cfg.log_hazard_coef = 0.0;
    cfg.censoring_rate = 0.03;
    cfg.max_time = 10.0;
    cfg.seed = 99;
    const auto subs = simulate(cfg);
    const auto lm = build_landmark(subs, 3.0, 2.0);
    const auto trained = train(MethodId::locf, lm, {});
    EXPECT_LE(std::fabs(trained.cox.beta(0)), 2.0 * trained.cox.se(0));
}

TEST(Pipeline, EndToEndAllMethods) {
    SimConfig cfg;
    cfg.n_subjects = 150;
    cfg.trend_coef = Eigen::Vector4d{69.0, 2.2, 80.6, 1.0};
    cfg.cov = {308.4, 240.8, 0.52, 184.3};
    cfg.schedule = {0.25, 0.75, 1.5, 2.5};
    cfg.baseline_hazard = 0.08;
    cfg.log_hazard_coef = -0.02;
    cfg.censoring_rate = 0.04;
    cfg.max_time = 12.0;
    cfg.seed = 5150;
    const auto subs = simulate(cfg);

    const double s = 3.0, w = 2.0;
    PipelineOptions opt;
    opt.tau = 9.0;
    const std::set<MethodId> methods{MethodId::locf, MethodId::blup, MethodId::xhat_gp,
                                     MethodId::xhat_revival, MethodId::direct_revival};
    const auto bundle = fit_models(subs, methods, s, opt);
    ASSERT_TRUE(bundle.gp.has_value());
    ASSERT_TRUE(bundle.revival.has_value());
    ASSERT_TRUE(bundle.marginal.has_value());

    const auto lm = build_landmark(subs, s, w);
    ASSERT_GT(lm.event_grid.size(), 2u);
    for (const MethodId m : methods) {
        const auto trained = train(m, lm, bundle, opt);
        for (std::size_t i = 0; i < std::min<std::size_t>(lm.subjects.size(), 25); ++i) {
            const auto res = predict_subject(trained, lm.subjects[i]);
            EXPECT_GE(res.pi_hat, 0.0) << method_name(m);
            EXPECT_LE(res.pi_hat, 1.0) << method_name(m);
            EXPECT_TRUE(std::isfinite(res.pi_hat)) << method_name(m);
        }
    }
}

TEST(PredictSubject, AdjustArmChangesPredictionByArm) {
    const auto subs = toy_cohort();
    const auto lm = build_landmark(subs, 3.0, 2.0);
    PipelineOptions opt;
    opt.adjust_arm = true;
    const auto trained = train(MethodId::locf, lm, {}, opt);
    Subject sub;
    sub.id = "x";
    sub.event_time = 9.0;
    sub.status = 0;
    sub.measurements = {{1.0, 70.0, 0}};
    Subject other = sub;
    other.arm = 1;
    const double p0 = predict_subject(trained, sub).pi_hat;
    const double p1 = predict_subject(trained, other).pi_hat;
    EXPECT_TRUE(std::isfinite(p0) && std::isfinite(p1));
    if (trained.cox.beta(1) != 0.0) EXPECT_NE(p0, p1);
}
