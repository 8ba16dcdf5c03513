#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "landmark/errors.hpp"

namespace landmark {

// Right-continuous step function. Carries Kaplan-Meier curves, censoring
// curves, and Breslow cumulative hazards.
struct StepFunction {
    double initial = 1.0;
    std::vector<double> times;   // strictly ascending jump times
    std::vector<double> values;  // value at and after each jump

    // value at t (right-continuous)
    double at(double t) const {
        const auto it = std::upper_bound(times.begin(), times.end(), t);
        if (it == times.begin()) return initial;
        return values[static_cast<std::size_t>(it - times.begin()) - 1];
    }

    // value just before t
    double left_limit(double t) const {
        const auto it = std::lower_bound(times.begin(), times.end(), t);
        if (it == times.begin()) return initial;
        return values[static_cast<std::size_t>(it - times.begin()) - 1];
    }
};

// Product-limit estimate. Ties are handled by a single multiplicative step at
// the tied time; censorings at a death time leave the risk set after it.
inline StepFunction kaplan_meier(const std::vector<double>& times,
                                 const std::vector<int>& statuses) {
    if (times.empty()) throw DataError("kaplan_meier: empty input");
    if (times.size() != statuses.size())
        throw DataError("kaplan_meier: times and statuses differ in length");
    std::vector<std::size_t> order(times.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

    StepFunction sf;
    double surv = 1.0;
    std::size_t at_risk = times.size();
    std::size_t i = 0;
    while (i < order.size()) {
        const double t = times[order[i]];
        std::size_t deaths = 0, leaving = 0;
        while (i < order.size() && times[order[i]] == t) {
            deaths += statuses[order[i]] == 1;
            ++leaving;
            ++i;
        }
        if (deaths > 0) {
            surv *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
            sf.times.push_back(t);
            sf.values.push_back(surv);
        }
        at_risk -= leaving;
    }
    return sf;
}

// Censoring distribution: Kaplan-Meier with the status flipped.
inline StepFunction reverse_km(const std::vector<double>& times,
                               const std::vector<int>& statuses) {
    std::vector<int> flipped(statuses.size());
    for (std::size_t i = 0; i < statuses.size(); ++i) flipped[i] = 1 - statuses[i];
    return kaplan_meier(times, flipped);
}

// One product-limit curve per group label, keys sorted.
inline std::map<int, StepFunction> kaplan_meier_by_group(const std::vector<double>& times,
                                                         const std::vector<int>& statuses,
                                                         const std::vector<int>& groups) {
    if (times.size() != groups.size())
        throw DataError("kaplan_meier_by_group: times and groups differ in length");
    std::map<int, std::pair<std::vector<double>, std::vector<int>>> split;
    for (std::size_t i = 0; i < times.size(); ++i) {
        split[groups[i]].first.push_back(times[i]);
        split[groups[i]].second.push_back(statuses[i]);
    }
    std::map<int, StepFunction> out;
    for (const auto& [g, data] : split) out[g] = kaplan_meier(data.first, data.second);
    return out;
}

}  // namespace landmark
