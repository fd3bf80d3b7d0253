#include <cstdio>

#include <nlohmann/json.hpp>

#include "ddval/valuation.hpp"

namespace ddval {
namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string report_to_json(const ValuationReport& report) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& [id, raw] : report.raw_sv) {
        points.push_back({{"point_id", id},
                          {"raw_sv", raw},
                          {"normalized_sv", report.normalized_sv.at(id)}});
    }
    nlohmann::json groups = nlohmann::json::object();
    for (const auto& [key, v] : report.group_sv) groups[key] = v;
    nlohmann::json j = {
        {"meta",
         {{"k", report.k_param},
          {"d", report.dim},
          {"l", report.n_labels},
          {"n_train", report.n_train},
          {"n_test", report.n_test},
          {"coalition_auroc", report.coalition_auroc}}},
        {"points", std::move(points)},
        {"groups", std::move(groups)},
    };
    return j.dump(2);
}

std::string report_to_csv(const ValuationReport& report, std::span<const DataPoint> train) {
    std::string out = "point_id,client_id,subject_id,raw_sv,normalized_sv,flipped_label_count\n";
    // Rows in point_id order for reproducible files.
    std::map<std::uint64_t, const DataPoint*> by_id;
    for (const DataPoint& p : train) by_id.emplace(p.point_id, &p);
    for (const auto& [id, raw] : report.raw_sv) {
        const DataPoint* p = by_id.at(id);
        out += std::to_string(id) + ',' + std::to_string(p->client_id) + ',' +
               std::to_string(p->subject_id) + ',' + fmt_double(raw) + ',' +
               fmt_double(report.normalized_sv.at(id)) + ',' +
               std::to_string(static_cast<int>(p->flipped_labels)) + '\n';
    }
    return out;
}

}  // namespace ddval
