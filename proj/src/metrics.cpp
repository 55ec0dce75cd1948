#include "xtqa/metrics.hpp"

#include <cmath>

namespace xtqa {

double round2(double x) { return std::round(x * 100.0) / 100.0; }

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json j;
    j["tf_acc"] = round2(tf_acc());
    j["mc_acc"] = round2(mc_acc());
    j["nondiagram_acc"] = round2(nondiagram_acc());
    j["diagram_acc"] = round2(diagram_acc());
    j["all_acc"] = round2(all_acc());
    j["counts"] = {
        {"tf_total", tf_total},           {"tf_correct", tf_correct},
        {"mc_total", mc_total},           {"mc_correct", mc_correct},
        {"diagram_total", diagram_total}, {"diagram_correct", diagram_correct},
    };
    if (evidence) {
        j["evidence_hit_rate"] = round2(evidence_hit_rate());
        j["counts"]["evidence_hits"] = evidence->first;
        j["counts"]["evidence_eligible"] = evidence->second;
    }
    return j;
}

}  // namespace xtqa
