#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "landmark/csv.hpp"
#include "landmark/errors.hpp"

namespace landmark {

// One biomarker observation. Occasions index the measurement visits of a
// subject; two assays taken at the same time still get distinct occasions.
struct Measurement {
    double time = 0.0;   // years since randomization
    double value = 0.0;  // marker level
    int occasion = 0;    // ordinal within subject
};

struct Subject {
    std::string id;
    int arm = 0;              // 0 = placebo, 1 = treatment
    double event_time = 0.0;  // follow-up time (death or censoring), years
    int status = 0;           // 1 = dead, 0 = censored
    std::vector<Measurement> measurements;  // ordered by (time, occasion)

    // measurements observed at or before s (closed interval)
    std::vector<Measurement> history(double s) const {
        std::vector<Measurement> h;
        for (const auto& m : measurements)
            if (m.time <= s) h.push_back(m);
        return h;
    }
};

inline void validate_subject(const Subject& sub) {
    if (!(sub.event_time > 0.0) || !std::isfinite(sub.event_time))
        throw DataError("subject " + sub.id + ": event_time must be positive and finite");
    if (sub.status != 0 && sub.status != 1)
        throw DataError("subject " + sub.id + ": status must be 0 or 1");
    if (sub.arm != 0 && sub.arm != 1)
        throw DataError("subject " + sub.id + ": arm must be 0 or 1");
    double prev_time = -1.0;
    int prev_occ = -1;
    for (const auto& m : sub.measurements) {
        if (m.time < 0.0 || !std::isfinite(m.time) || !std::isfinite(m.value))
            throw DataError("subject " + sub.id + ": negative time or non-finite measurement");
        if (m.time > sub.event_time)
            throw DataError("subject " + sub.id + ": measurement at t=" +
                            std::to_string(m.time) + " after event time");
        if (m.time < prev_time || (m.time == prev_time && m.occasion == prev_occ))
            throw DataError("subject " + sub.id + ": duplicate or unordered (time, occasion)");
        prev_time = m.time;
        prev_occ = m.occasion;
    }
}

// Landmark cohort: subjects at risk at s with at least one measurement by s,
// follow-up administratively censored at s+w.
struct LandmarkDataset {
    double s = 0.0;
    double w = 0.0;
    std::vector<Subject> subjects;        // (event_time, status) already truncated at s+w
    std::vector<double> event_grid;       // distinct death times in (s, s+w], ascending

    double horizon() const { return s + w; }

    std::vector<Measurement> history(std::size_t i) const {
        return subjects.at(i).history(s);
    }
};

// ---------------------------------------------------------------------------
// loading

// Longitudinal file: header id,time,value. Survival file: header
// id,survtime,status,arm. Returns one Subject per id, sorted by id.
inline std::vector<Subject> load_dataset(const std::string& longitudinal_file,
                                         const std::string& survival_file) {
    const auto surv = csv::read_file(survival_file);
    const int sid = surv.column("id");
    const int stime = surv.column("survtime");
    const int sstat = surv.column("status");
    const int sarm = surv.column("arm");

    std::map<std::string, Subject> by_id;
    for (std::size_t r = 0; r < surv.rows.size(); ++r) {
        const auto& row = surv.rows[r];
        const std::string ctx = survival_file + " row " + std::to_string(r + 1);
        Subject sub;
        sub.id = row[sid];
        if (sub.id.empty()) throw DataError(ctx + ": empty id");
        sub.event_time = csv::parse_double(row[stime], ctx);
        sub.status = csv::parse_int(row[sstat], ctx);
        sub.arm = csv::parse_int(row[sarm], ctx);
        if (by_id.count(sub.id))
            throw DataError(survival_file + ": duplicate subject id '" + sub.id + "'");
        by_id.emplace(sub.id, std::move(sub));
    }

    const auto lng = csv::read_file(longitudinal_file);
    const int lid = lng.column("id");
    const int ltime = lng.column("time");
    const int lval = lng.column("value");
    for (std::size_t r = 0; r < lng.rows.size(); ++r) {
        const auto& row = lng.rows[r];
        const std::string ctx = longitudinal_file + " row " + std::to_string(r + 1);
        const auto it = by_id.find(row[lid]);
        if (it == by_id.end())
            throw DataError(ctx + ": id '" + row[lid] + "' has no survival record");
        Measurement m;
        m.time = csv::parse_double(row[ltime], ctx);
        m.value = csv::parse_double(row[lval], ctx);
        if (m.time < 0.0) throw DataError(ctx + ": negative measurement time");
        if (!std::isfinite(m.value)) throw DataError(ctx + ": non-finite value");
        it->second.measurements.push_back(m);
    }

    std::vector<Subject> out;
    out.reserve(by_id.size());
    for (auto& [id, sub] : by_id) {
        // stable sort keeps file order for time ties; occasions then number the
        // visits so later rows at the same time get later occasions
        std::stable_sort(sub.measurements.begin(), sub.measurements.end(),
                         [](const Measurement& a, const Measurement& b) { return a.time < b.time; });
        for (std::size_t j = 0; j < sub.measurements.size(); ++j)
            sub.measurements[j].occasion = static_cast<int>(j);
        validate_subject(sub);
        out.push_back(std::move(sub));
    }
    return out;
}

// Survival file alone, for summaries that need no marker data.
inline std::vector<Subject> load_survival(const std::string& survival_file) {
    const auto surv = csv::read_file(survival_file);
    const int sid = surv.column("id");
    const int stime = surv.column("survtime");
    const int sstat = surv.column("status");
    const int sarm = surv.column("arm");
    std::map<std::string, Subject> by_id;
    for (std::size_t r = 0; r < surv.rows.size(); ++r) {
        const auto& row = surv.rows[r];
        const std::string ctx = survival_file + " row " + std::to_string(r + 1);
        Subject sub;
        sub.id = row[sid];
        if (sub.id.empty()) throw DataError(ctx + ": empty id");
        sub.event_time = csv::parse_double(row[stime], ctx);
        sub.status = csv::parse_int(row[sstat], ctx);
        sub.arm = csv::parse_int(row[sarm], ctx);
        validate_subject(sub);
        if (by_id.count(sub.id))
            throw DataError(survival_file + ": duplicate subject id '" + sub.id + "'");
        by_id.emplace(sub.id, std::move(sub));
    }
    std::vector<Subject> out;
    out.reserve(by_id.size());
    for (auto& [id, sub] : by_id) out.push_back(std::move(sub));
    return out;
}

// ---------------------------------------------------------------------------
// landmarking

inline LandmarkDataset build_landmark(const std::vector<Subject>& subjects, double s, double w) {
    if (s < 0.0) throw ConfigError("build_landmark: s must be >= 0");
    if (!(w > 0.0)) throw ConfigError("build_landmark: w must be > 0");
    LandmarkDataset lm;
    lm.s = s;
    lm.w = w;
    const double horizon = s + w;
    for (const auto& sub : subjects) {
        if (sub.event_time < s) continue;  // not at risk at s
        bool has_history = false;
        for (const auto& m : sub.measurements)
            if (m.time <= s) { has_history = true; break; }
        if (!has_history) continue;
        Subject trunc = sub;
        if (sub.event_time > horizon) {
            trunc.event_time = horizon;
            trunc.status = 0;  // administrative censoring
        }
        lm.subjects.push_back(std::move(trunc));
    }
    if (lm.subjects.empty())
        throw DataError("build_landmark: no subjects at risk at s=" + std::to_string(s) +
                        " with a measurement by s");
    for (const auto& sub : lm.subjects)
        if (sub.status == 1 && sub.event_time > s && sub.event_time <= horizon)
            lm.event_grid.push_back(sub.event_time);
    std::sort(lm.event_grid.begin(), lm.event_grid.end());
    lm.event_grid.erase(std::unique(lm.event_grid.begin(), lm.event_grid.end()),
                        lm.event_grid.end());
    return lm;
}

// Last observation carried forward: value of the latest measurement at or
// before s; at equal times the later occasion wins.
inline double locf(const Subject& sub, double s) {
    const Measurement* best = nullptr;
    for (const auto& m : sub.measurements) {
        if (m.time > s) continue;
        if (!best || m.time > best->time ||
            (m.time == best->time && m.occasion > best->occasion))
            best = &m;
    }
    if (!best)
        throw DataError("locf: subject " + sub.id + " has no measurement at or before s");
    return best->value;
}

}  // namespace landmark
