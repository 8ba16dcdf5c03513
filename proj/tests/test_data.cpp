#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "landmark/data.hpp"

using namespace landmark;

namespace {

struct TempCsv {
    std::string path;
    explicit TempCsv(const std::string& name, const std::string& content) {
        path = std::string(::testing::TempDir()) + name;
        std::ofstream out(path);
        out << content;
    }
    ~TempCsv() { std::remove(path.c_str()); }
};

Subject make_subject(const std::string& id, double event_time, int status,
                     std::vector<std::pair<double, double>> obs, int arm = 0) {
    Subject s;
    s.id = id;
    s.arm = arm;
    s.event_time = event_time;
    s.status = status;
    int occ = 0;
    for (const auto& [t, v] : obs) s.measurements.push_back({t, v, occ++});
    return s;
}

}  // namespace

TEST(LoadDataset, DirectFieldMapping) {
    TempCsv surv("surv1.csv", "id,survtime,status,arm\np1,4.2,1,0\n");
    TempCsv lng("long1.csv", "id,time,value\np1,0.1,70\np1,1.0,72\n");
    const auto subjects = load_dataset(lng.path, surv.path);
    ASSERT_EQ(subjects.size(), 1u);
    EXPECT_EQ(subjects[0].id, "p1");
    EXPECT_DOUBLE_EQ(subjects[0].event_time, 4.2);
    EXPECT_EQ(subjects[0].status, 1);
    EXPECT_EQ(subjects[0].arm, 0);
    ASSERT_EQ(subjects[0].measurements.size(), 2u);
    EXPECT_DOUBLE_EQ(subjects[0].measurements[0].time, 0.1);
    EXPECT_DOUBLE_EQ(subjects[0].measurements[1].value, 72.0);
    EXPECT_EQ(subjects[0].measurements[0].occasion, 0);
    EXPECT_EQ(subjects[0].measurements[1].occasion, 1);
}

TEST(LoadDataset, EmptyLongitudinalAccepted) {
    TempCsv surv("surv2.csv", "id,survtime,status,arm\np1,4.2,1,0\np2,2.0,0,1\n");
    TempCsv lng("long2.csv", "id,time,value\n");
    const auto subjects = load_dataset(lng.path, surv.path);
    ASSERT_EQ(subjects.size(), 2u);
    EXPECT_TRUE(subjects[0].measurements.empty());
    EXPECT_TRUE(subjects[1].measurements.empty());
}

TEST(LoadDataset, MissingCrossReferenceNamesId) {
    TempCsv surv("surv3.csv", "id,survtime,status,arm\np1,4.2,1,0\n");
    TempCsv lng("long3.csv", "id,time,value\npX,1.0,70\n");
    try {
        load_dataset(lng.path, surv.path);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("pX"), std::string::npos);
    }
}

TEST(LoadDataset, RowLevelErrors) {
    TempCsv surv("surv4.csv", "id,survtime,status,arm\np1,4.2,1,0\n");
    TempCsv neg("long4.csv", "id,time,value\np1,-0.5,70\n");
    EXPECT_THROW(load_dataset(neg.path, surv.path), DataError);
    TempCsv nan_val("long5.csv", "id,time,value\np1,0.5,nanana\n");
    EXPECT_THROW(load_dataset(nan_val.path, surv.path), DataError);
}

TEST(LoadDataset, MeasurementAfterEventTimeRejected) {
    TempCsv surv("surv6.csv", "id,survtime,status,arm\np1,1.0,1,0\n");
    TempCsv lng("long6.csv", "id,time,value\np1,2.0,70\n");
    EXPECT_THROW(load_dataset(lng.path, surv.path), DataError);
}

TEST(BuildLandmark, DeathInsideWindow) {
    const std::vector<Subject> subs{make_subject("a", 4.0, 1, {{1.0, 70.0}})};
    const auto lm = build_landmark(subs, 3.0, 2.0);
    ASSERT_EQ(lm.subjects.size(), 1u);
    EXPECT_DOUBLE_EQ(lm.subjects[0].event_time, 4.0);
    EXPECT_EQ(lm.subjects[0].status, 1);
    ASSERT_EQ(lm.event_grid.size(), 1u);
    EXPECT_DOUBLE_EQ(lm.event_grid[0], 4.0);
}

TEST(BuildLandmark, AdministrativeCensoring) {
    const std::vector<Subject> subs{make_subject("a", 6.0, 1, {{1.0, 70.0}}),
                                    make_subject("b", 4.0, 1, {{0.5, 60.0}})};
    const auto lm = build_landmark(subs, 3.0, 2.0);
    ASSERT_EQ(lm.subjects.size(), 2u);
    EXPECT_DOUBLE_EQ(lm.subjects[0].event_time, 5.0);
    EXPECT_EQ(lm.subjects[0].status, 0);
    EXPECT_EQ(lm.event_grid, std::vector<double>{4.0});
}

TEST(BuildLandmark, NotAtRiskExcluded) {
    const std::vector<Subject> subs{make_subject("a", 2.9, 1, {{1.0, 70.0}}),
                                    make_subject("b", 4.0, 1, {{0.5, 60.0}})};
    const auto lm = build_landmark(subs, 3.0, 2.0);
    ASSERT_EQ(lm.subjects.size(), 1u);
    EXPECT_EQ(lm.subjects[0].id, "b");
}

TEST(BuildLandmark, NoHistoryExcluded) {
    const std::vector<Subject> subs{make_subject("a", 9.0, 0, {{3.5, 70.0}}),
                                    make_subject("b", 9.0, 0, {{3.0, 70.0}})};
    const auto lm = build_landmark(subs, 3.0, 2.0);
    // measurement exactly at s counts as history
    ASSERT_EQ(lm.subjects.size(), 1u);
    EXPECT_EQ(lm.subjects[0].id, "b");
}

TEST(BuildLandmark, CensoredExactlyAtSIncluded) {
    const std::vector<Subject> subs{make_subject("a", 3.0, 0, {{1.0, 70.0}}),
                                    make_subject("b", 4.0, 1, {{0.5, 60.0}})};
    const auto lm = build_landmark(subs, 3.0, 2.0);
    EXPECT_EQ(lm.subjects.size(), 2u);
}

TEST(BuildLandmark, EmptyCohortIsError) {
    const std::vector<Subject> subs{make_subject("a", 1.0, 1, {{0.5, 70.0}})};
    EXPECT_THROW(build_landmark(subs, 3.0, 2.0), DataError);
}

TEST(BuildLandmark, IdempotentInS) {
    std::vector<Subject> subs;
    for (int i = 0; i < 20; ++i)
        subs.push_back(make_subject("s" + std::to_string(i), 0.5 + 0.43 * i, i % 2,
                                    {{0.1, 60.0 + i}, {1.9, 70.0 + i}}, i % 2));
    const auto lm1 = build_landmark(subs, 2.0, 3.0);
    const auto lm2 = build_landmark(lm1.subjects, 2.0, 3.0);
    ASSERT_EQ(lm1.subjects.size(), lm2.subjects.size());
    EXPECT_EQ(lm1.event_grid, lm2.event_grid);
    for (std::size_t i = 0; i < lm1.subjects.size(); ++i) {
        EXPECT_EQ(lm1.subjects[i].id, lm2.subjects[i].id);
        EXPECT_DOUBLE_EQ(lm1.subjects[i].event_time, lm2.subjects[i].event_time);
        EXPECT_EQ(lm1.subjects[i].status, lm2.subjects[i].status);
    }
}

TEST(BuildLandmark, TruncatedDeathsMatchEventGrid) {
    std::vector<Subject> subs;
    for (int i = 0; i < 30; ++i)
        subs.push_back(make_subject("s" + std::to_string(i), 0.3 + 0.37 * i, (i * 7) % 3 != 0,
                                    {{0.0, 65.0}}));
    const auto lm = build_landmark(subs, 1.0, 4.0);
    int deaths = 0;
    for (const auto& sub : lm.subjects) {
        if (sub.status == 1) {
            ++deaths;
            EXPECT_GT(sub.event_time, lm.s);
            EXPECT_LE(sub.event_time, lm.horizon());
            EXPECT_TRUE(std::binary_search(lm.event_grid.begin(), lm.event_grid.end(),
                                           sub.event_time));
        }
    }
    EXPECT_GT(deaths, 0);
}

TEST(Locf, LatestBeforeS) {
    const auto s = make_subject("a", 9.0, 0, {{1.0, 70.0}, {2.5, 85.0}});
    EXPECT_DOUBLE_EQ(locf(s, 3.0), 85.0);
}

TEST(Locf, SingleMeasurement) {
    const auto s = make_subject("a", 9.0, 0, {{0.0, 60.0}});
    EXPECT_DOUBLE_EQ(locf(s, 3.0), 60.0);
}

TEST(Locf, TieBrokenByOccasion) {
    Subject s;
    s.id = "a";
    s.event_time = 9.0;
    s.status = 0;
    s.measurements = {{2.5, 85.0, 1}, {2.5, 90.0, 2}};
    EXPECT_DOUBLE_EQ(locf(s, 3.0), 90.0);
}

TEST(Locf, IgnoresMeasurementsAfterS) {
    auto s = make_subject("a", 9.0, 0, {{1.0, 70.0}, {2.5, 85.0}});
    auto with_later = s;
    with_later.measurements.push_back({4.0, 120.0, 2});
    EXPECT_DOUBLE_EQ(locf(s, 3.0), locf(with_later, 3.0));
}

TEST(Locf, NoHistoryIsError) {
    const auto s = make_subject("a", 9.0, 0, {{5.0, 70.0}});
    EXPECT_THROW(locf(s, 3.0), DataError);
}

TEST(LoadSurvival, SurvivalOnly) {
    TempCsv surv("surv_only.csv", "id,survtime,status,arm\np2,4.2,1,0\np1,2.0,0,1\n");
    const auto subjects = load_survival(surv.path);
    ASSERT_EQ(subjects.size(), 2u);
    EXPECT_EQ(subjects[0].id, "p1");
    EXPECT_TRUE(subjects[0].measurements.empty());
    EXPECT_EQ(subjects[1].arm, 0);
}
