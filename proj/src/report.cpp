#include "duo/report.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include "duo/errors.hpp"

namespace duo {
namespace {

std::string number(double v) { return fmt::format("{}", v); }

}  // namespace

ReportFormat parse_format(std::string_view text) {
    if (text == "csv") return ReportFormat::Csv;
    if (text == "json" || text == "jsonl") return ReportFormat::JsonLines;
    throw InputError(fmt::format("unknown report format \"{}\" (expected csv or json)", text));
}

std::string sac_column(double target) { return fmt::format("sac_{:.6g}", target * 100.0); }

std::string csv_field(std::string_view text) {
    if (text.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(text);
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void write_report(std::ostream& out, std::span<const MetricRow> rows, ReportFormat format) {
    const std::vector<SacPoint> none;
    const auto& targets = rows.empty() ? none : rows.front().sac;
    for (const auto& row : rows) {
        bool same = row.sac.size() == targets.size();
        for (std::size_t i = 0; same && i < targets.size(); ++i) same = row.sac[i].target == targets[i].target;
        if (!same) throw InvariantError("report rows carry different SAC targets");
    }

    if (format == ReportFormat::Csv) {
        out << "schema_version,dataset,split,large_model,small_model,balance,mode,measure,"
               "accuracy,macro_f1,nll,brier,ece,auroc,aurc";
        for (const auto& s : targets) out << ',' << sac_column(s.target);
        out << '\n';
        for (const auto& r : rows) {
            out << kReportSchemaVersion << ',' << csv_field(r.dataset) << ',' << csv_field(r.split) << ','
                << csv_field(r.large_model) << ',' << csv_field(r.small_model) << ',' << number(r.balance) << ','
                << csv_field(r.mode) << ',' << csv_field(r.measure) << ',' << number(r.accuracy) << ','
                << number(r.macro_f1) << ',' << number(r.nll) << ',' << number(r.brier) << ','
                << number(r.ece) << ',' << number(r.auroc) << ',' << number(r.aurc);
            for (const auto& s : r.sac) out << ',' << number(s.coverage);
            out << '\n';
        }
        return;
    }

    for (const auto& r : rows) {
        nlohmann::ordered_json j;
        j["schema_version"] = kReportSchemaVersion;
        j["dataset"] = r.dataset;
        j["split"] = r.split;
        j["large_model"] = r.large_model;
        j["small_model"] = r.small_model;
        j["balance"] = r.balance;
        j["mode"] = r.mode;
        j["measure"] = r.measure;
        j["accuracy"] = r.accuracy;
        j["macro_f1"] = r.macro_f1;
        j["nll"] = r.nll;
        j["brier"] = r.brier;
        j["ece"] = r.ece;
        j["auroc"] = r.auroc;
        j["aurc"] = r.aurc;
        for (const auto& s : r.sac) j[sac_column(s.target)] = s.coverage;
        out << j.dump() << '\n';
    }
}

}  // namespace duo
