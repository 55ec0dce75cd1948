#pragma once

#include <optional>
#include <string>

#include <json.hpp>

namespace xtqa {

// Accuracy taxonomy: T/F and MC are the non-diagram kinds; "all" spans every
// question. Percentages; serialized with 2 decimal places.
struct MetricsReport {
    std::size_t tf_total = 0, tf_correct = 0;
    std::size_t mc_total = 0, mc_correct = 0;
    std::size_t diagram_total = 0, diagram_correct = 0;
    std::optional<std::pair<std::size_t, std::size_t>> evidence;  // (hits, correct answers)

    static double pct(std::size_t correct, std::size_t total) {
        return total == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(total);
    }

    double tf_acc() const { return pct(tf_correct, tf_total); }
    double mc_acc() const { return pct(mc_correct, mc_total); }
    double nondiagram_acc() const { return pct(tf_correct + mc_correct, tf_total + mc_total); }
    double diagram_acc() const { return pct(diagram_correct, diagram_total); }
    double all_acc() const {
        return pct(tf_correct + mc_correct + diagram_correct,
                   tf_total + mc_total + diagram_total);
    }
    double evidence_hit_rate() const {
        return evidence ? pct(evidence->first, evidence->second) : 0.0;
    }

    nlohmann::json to_json() const;
};

double round2(double x);

}  // namespace xtqa
