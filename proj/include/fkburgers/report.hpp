#pragma once

// Report files. Reports carry no wall-clock data, so identical inputs give
// byte-identical files; timings go to a separate file.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "harness.hpp"
#include "zones.hpp"

namespace fkb {

inline constexpr int kReportSchema = 1;

enum class ReportFormat { Json, Csv };

/// Run-level data copied into every report.
struct ReportContext {
    std::string field;
    std::uint64_t seed = 0;
    /// Empty when no layout is configured.
    std::string layout_hash;
};

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Hash of the radii and shape constants, printed at full precision.
inline std::string layout_hash(const ZoneLayout& L) {
    std::ostringstream os;
    os.precision(17);
    os << "kappa=" << L.kappa << ";thin_C=" << L.thin_C << ";fat_eps=" << L.fat_eps << ";radii=";
    for (double r : L.radii) os << r << ',';
    return hex64(fnv1a(os.str()));
}

namespace detail {

/// Non-finite values become strings so the JSON stays valid.
inline nlohmann::ordered_json number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const BoundReport& r, const ReportContext& ctx) {
    nlohmann::ordered_json j;
    j["schema"] = kReportSchema;
    j["check"] = r.id;
    j["anchor"] = r.anchor;
    j["field"] = ctx.field;
    j["seed"] = ctx.seed;
    if (!ctx.layout_hash.empty()) j["layout_hash"] = ctx.layout_hash;
    j["pass"] = r.pass;
    j["status"] = r.status;
    j["samples"] = r.samples;
    j["violation_fraction"] = detail::number(r.violation_fraction);
    j["fitted_constant"] = detail::number(r.fitted_constant);
    auto& br = j["breakdown"] = nlohmann::ordered_json::array();
    for (const SubReport& s : r.breakdown) {
        nlohmann::ordered_json e;
        e["name"] = s.name;
        e["samples"] = s.samples;
        e["violations"] = s.violations;
        e["violation_fraction"] = detail::number(s.violation_fraction);
        e["fitted_constant"] = detail::number(s.fitted_constant);
        e["status"] = s.status;
        br.push_back(std::move(e));
    }
    auto& m = j["metrics"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.metrics) m[k] = detail::number(v);
    j["notes"] = r.notes;
    return j;
}

inline std::string to_csv(const BoundReport& r, const ReportContext& ctx) {
    std::ostringstream os;
    os.precision(17);
    os << "key,value\n";
    os << "schema," << kReportSchema << "\ncheck," << r.id << "\nanchor,\"" << r.anchor << "\"\nfield," << ctx.field
       << "\nseed," << ctx.seed << "\n";
    if (!ctx.layout_hash.empty()) os << "layout_hash," << ctx.layout_hash << "\n";
    os << "pass," << (r.pass ? "true" : "false") << "\nstatus," << r.status << "\nsamples," << r.samples
       << "\nviolation_fraction," << r.violation_fraction << "\nfitted_constant," << r.fitted_constant << "\n";
    for (const SubReport& s : r.breakdown)
        os << "breakdown." << s.name << ".samples," << s.samples << "\nbreakdown." << s.name << ".violations,"
           << s.violations << "\nbreakdown." << s.name << ".fitted_constant," << s.fitted_constant << "\nbreakdown."
           << s.name << ".status," << s.status << "\n";
    for (const auto& [k, v] : r.metrics) os << "metric." << k << "," << v << "\n";
    return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParameterError("cannot open " + path.string() + " for writing");
    f << text;
}

/// Writes <dir>/reports/<id>.json (or .csv).
inline std::filesystem::path write_report(const std::filesystem::path& dir, const BoundReport& r,
                                          const ReportContext& ctx, ReportFormat fmt = ReportFormat::Json) {
    const auto path = dir / "reports" / (r.id + (fmt == ReportFormat::Json ? ".json" : ".csv"));
    write_text(path, fmt == ReportFormat::Json ? to_json(r, ctx).dump(2) + "\n" : to_csv(r, ctx));
    return path;
}

/// Wall times of a run, kept apart from the reports.
inline void write_timing(const std::filesystem::path& path, const std::vector<BoundReport>& reports) {
    nlohmann::ordered_json j;
    j["schema"] = kReportSchema;
    for (const BoundReport& r : reports) j["wall_seconds"][r.id] = r.wall_seconds;
    write_text(path, j.dump(2) + "\n");
}

/// True when both directories hold the same relative file names with equal
/// bytes. Differences are appended to `diff`.
inline bool same_tree(const std::filesystem::path& a, const std::filesystem::path& b, std::string* diff = nullptr) {
    namespace fs = std::filesystem;
    auto listing = [](const fs::path& root) {
        std::vector<std::string> out;
        if (!fs::exists(root)) return out;
        for (const auto& e : fs::recursive_directory_iterator(root))
            if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root).generic_string());
        std::sort(out.begin(), out.end());
        return out;
    };
    auto slurp = [](const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(f), {});
    };
    const auto la = listing(a), lb = listing(b);
    bool same = la == lb;
    if (!same && diff) *diff += "file sets differ; ";
    if (!same) return false;
    for (const auto& rel : la)
        if (slurp(a / rel) != slurp(b / rel)) {
            same = false;
            if (diff) *diff += rel + " differs; ";
        }
    return same;
}

}  // namespace fkb
