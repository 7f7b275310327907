#include "reglab/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace reglab {

namespace {

using nlohmann::ordered_json;

bool is_runtime_column(const std::string& name) { return name == "runtime_s"; }

ordered_json number(double x) {
    if (std::isfinite(x)) return x;
    return format_double(x);
}

}  // namespace

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string report_csv(const VerifyReport& rep, const WriteOptions& opts) {
    std::ostringstream out;
    const auto& cols = rep.table.columns;
    for (std::size_t c = 0; c < cols.size(); ++c) out << (c ? "," : "") << cols[c];
    out << '\n';
    for (const auto& row : rep.table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            const bool zero = !opts.timing && c < cols.size() && is_runtime_column(cols[c]);
            out << (c ? "," : "") << format_double(zero ? 0.0 : row[c]);
        }
        out << '\n';
    }
    out << "#summary\n";
    out << "kind,name,value,op,threshold,pass\n";
    out << "experiment," << rep.experiment << ",,,,\n";
    for (const auto& [k, v] : rep.params) out << "param," << k << ',' << v << ",,,\n";
    for (const auto& [k, v] : rep.metrics) out << "metric," << k << ',' << format_double(v) << ",,,\n";
    for (const auto& [k, vs] : rep.trends) {
        out << "trend," << k << ',';
        for (std::size_t i = 0; i < vs.size(); ++i) out << (i ? ";" : "") << format_double(vs[i]);
        out << ",,,\n";
    }
    for (const auto& v : rep.verdicts) {
        const double value = rep.metric_value(v.metric).value_or(std::nan(""));
        out << "verdict," << v.name << ',' << format_double(value) << ',' << v.op << ',' << format_double(v.threshold)
            << ',' << (v.pass ? "true" : "false") << '\n';
    }
    out << "runtime_seconds,total," << format_double(opts.timing ? rep.runtime_seconds : 0.0) << ",,,\n";
    out << "result,all_verdicts," << (rep.all_pass() ? "pass" : "fail") << ",,,\n";
    return out.str();
}

std::string report_json(const VerifyReport& rep, const WriteOptions& opts) {
    ordered_json j;
    j["experiment"] = rep.experiment;
    j["params"] = ordered_json::object();
    for (const auto& [k, v] : rep.params) j["params"][k] = v;
    j["metrics"] = ordered_json::object();
    for (const auto& [k, v] : rep.metrics) j["metrics"][k] = number(v);
    j["trends"] = ordered_json::object();
    for (const auto& [k, vs] : rep.trends) {
        ordered_json arr = ordered_json::array();
        for (double x : vs) arr.push_back(number(x));
        j["trends"][k] = arr;
    }
    j["verdicts"] = ordered_json::array();
    for (const auto& v : rep.verdicts) {
        j["verdicts"].push_back({{"name", v.name},
                                 {"metric", v.metric},
                                 {"value", number(rep.metric_value(v.metric).value_or(std::nan("")))},
                                 {"op", v.op},
                                 {"threshold", number(v.threshold)},
                                 {"pass", v.pass}});
    }
    j["notes"] = rep.notes;
    j["columns"] = rep.table.columns;
    ordered_json rows = ordered_json::array();
    for (const auto& row : rep.table.rows) {
        ordered_json r = ordered_json::array();
        for (std::size_t c = 0; c < row.size(); ++c) {
            const bool zero = !opts.timing && c < rep.table.columns.size() && is_runtime_column(rep.table.columns[c]);
            r.push_back(number(zero ? 0.0 : row[c]));
        }
        rows.push_back(std::move(r));
    }
    j["rows"] = std::move(rows);
    j["runtime_seconds"] = opts.timing ? rep.runtime_seconds : 0.0;
    j["pass"] = rep.all_pass();
    return j.dump(2, ' ', false, ordered_json::error_handler_t::replace) + "\n";
}

std::string failure_summary_json(const VerifyReport& rep) {
    ordered_json j;
    j["experiment"] = rep.experiment;
    j["pass"] = rep.all_pass();
    j["failed"] = ordered_json::array();
    for (const auto& v : rep.verdicts) {
        if (v.pass) continue;
        j["failed"].push_back({{"name", v.name},
                               {"metric", v.metric},
                               {"value", number(rep.metric_value(v.metric).value_or(std::nan("")))},
                               {"op", v.op},
                               {"threshold", number(v.threshold)}});
    }
    return j.dump();
}

std::string trajectory_csv(const Trajectory& traj) {
    std::ostringstream out;
    const std::size_t d = traj.empty() ? 0 : static_cast<std::size_t>(traj.states.front().size());
    out << 't';
    for (std::size_t i = 0; i < d; ++i) out << ",x_" << i;
    out << ",reward,tanh_diag,meas_proj\n";
    for (std::size_t k = 0; k < traj.size(); ++k) {
        out << format_double(traj.times[k]);
        for (std::size_t i = 0; i < d; ++i) out << ',' << format_double(traj.states[k][static_cast<Eigen::Index>(i)]);
        const Diagnostics dg = k < traj.diagnostics.size() ? traj.diagnostics[k] : Diagnostics{};
        out << ',' << format_double(dg.reward) << ',' << format_double(dg.tanh_diag) << ','
            << format_double(dg.meas_proj) << '\n';
    }
    return out.str();
}

}  // namespace reglab
