#pragma once

// Bit-stable CSV/JSON serialization of trajectories, summaries and experiment
// reports. Floats are rendered in 17-significant-digit round-trip form in CSV
// and shortest round-trip form in JSON; identical inputs produce byte-identical
// files.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rym/explorer.hpp"
#include "rym/geometry.hpp"
#include "rym/soliton.hpp"
#include "rym/version.hpp"

namespace rym::io {

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// --- trajectory CSV -----------------------------------------------------------

struct TrajectoryRow {
    double r = 0, f = 0, fp = 0, phi = 0, phip = 0, K = 0, F2 = 0;
    double i1 = 0, i2_drift = 0, i3 = 0, conservation = 0;
};

inline constexpr const char* kTrajectoryHeader =
    "r,f,fp,phi,phip,K,F2,i1,i2_drift,i3,conservation";

/// Fixed-step resampling of a coupled trajectory for serialization. The grid
/// is i*dr clamped to the covered range; a compact trajectory's closing point
/// itself (phi = 0) is excluded so every row carries regular quotients.
inline std::vector<TrajectoryRow> trajectory_rows(const ode::DenseSolution& sol,
                                                  const SolitonParams& params, double dr) {
    if (!(dr > 0.0)) throw std::invalid_argument("trajectory_rows: dr must be > 0");
    const double r_cov = sol.r_end();
    const auto closing = closing_radius(sol, params);
    const auto count = static_cast<std::size_t>(std::floor(r_cov / dr + 1e-9));

    std::vector<TrajectoryRow> rows;
    rows.reserve(count + 1);
    std::optional<detail::ResidualTerms> ref;
    for (std::size_t i = 0; i <= count; ++i) {
        const double r = std::min(static_cast<double>(i) * dr, r_cov);
        if (closing && r >= closing->L) break;
        const SolitonState s = state_at(sol, r, params);
        const double K = gauss_curvature(sol, r, params);
        const auto t = detail::residual_terms(s, K, params);
        if (!ref) ref = t;
        TrajectoryRow row;
        row.r = r;
        row.f = s.f;
        row.fp = s.fp;
        row.phi = s.phi;
        row.phip = s.phip;
        row.K = K;
        row.F2 = ym_density(s, params);
        row.i1 = t.i1;
        row.i2_drift = t.i2_quantity - ref->i2_quantity;
        row.i3 = t.i3;
        row.conservation = t.conservation;
        rows.push_back(row);
    }
    return rows;
}

inline void write_trajectory_csv(std::span<const TrajectoryRow> rows,
                                 const std::filesystem::path& path) {
    if (rows.empty()) throw IoError("write_trajectory_csv: no rows");
    for (std::size_t i = 0; i + 1 < rows.size(); ++i)
        if (!(rows[i].r < rows[i + 1].r))
            throw IoError("write_trajectory_csv: r must be strictly increasing");

    std::string out;
    out += kTrajectoryHeader;
    out += '\n';
    for (const auto& w : rows) {
        const double cols[] = {w.r,  w.f,  w.fp, w.phi,      w.phip, w.K,
                               w.F2, w.i1, w.i2_drift, w.i3, w.conservation};
        for (std::size_t c = 0; c < 11; ++c) {
            if (c) out += ',';
            out += format_double(cols[c]);
        }
        out += '\n';
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("write_trajectory_csv: cannot open " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("write_trajectory_csv: write failed for " + path.string());
}

inline std::vector<TrajectoryRow> read_trajectory_csv(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("read_trajectory_csv: cannot open " + path.string());
    std::string line;
    if (!std::getline(f, line) || line != kTrajectoryHeader)
        throw IoError("read_trajectory_csv: bad header in " + path.string());
    std::vector<TrajectoryRow> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        double cols[11];
        const char* s = line.c_str();
        for (int c = 0; c < 11; ++c) {
            char* end = nullptr;
            cols[c] = std::strtod(s, &end);
            if (end == s || (c < 10 && *end != ',') || (c == 10 && *end != '\0'))
                throw IoError("read_trajectory_csv: malformed row in " + path.string());
            s = (c < 10) ? end + 1 : end;
        }
        rows.push_back({cols[0], cols[1], cols[2], cols[3], cols[4], cols[5], cols[6], cols[7],
                        cols[8], cols[9], cols[10]});
    }
    if (rows.empty()) throw IoError("read_trajectory_csv: no rows in " + path.string());
    return rows;
}

// --- JSON reports -------------------------------------------------------------

inline constexpr int kSchemaVersion = 1;

inline nlohmann::json to_json(const IdentityResiduals& m) {
    return {{"i1", m.i1},
            {"i2_drift", m.i2_drift},
            {"i3", m.i3},
            {"conservation", m.conservation},
            {"potent_curv", m.potent_curv}};
}

inline nlohmann::json to_json(const Topology& t) {
    switch (t.kind) {
        case TopologyKind::Compact:
            return {{"kind", "compact"},
                    {"L", t.L},
                    {"phip_L", t.phip_L},
                    {"cone_angle", t.cone_angle}};
        case TopologyKind::Cusp:
            return {{"kind", "cusp"}, {"asymptotic_radius", t.asymptotic_radius}};
        case TopologyKind::Noncompact:
            return {{"kind", "noncompact"},
                    {"asymptotic_radius", t.asymptotic_radius},
                    {"predicted_radius", t.predicted_radius}};
    }
    throw IoError("to_json: unknown topology kind");
}

inline nlohmann::json to_json(const GeometrySummary& g) {
    return {{"schema_version", kSchemaVersion},
            {"type", "geometry_summary"},
            {"lambda", g.lambda},
            {"K_origin", g.K_origin},
            {"r_covered", g.r_covered},
            {"topology", to_json(g.topology)},
            {"max_residuals", to_json(g.max_residuals)}};
}

inline const char* target_name(ConvergenceTarget t) {
    switch (t) {
        case ConvergenceTarget::Cigar: return "cigar";
        case ConvergenceTarget::Cusp: return "cusp";
        case ConvergenceTarget::Sphere: return "sphere";
    }
    throw IoError("target_name: unknown target");
}

inline nlohmann::json to_json(const ConvergenceReport& rep) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : rep.entries)
        entries.push_back({{"lambda", e.lambda}, {"R", e.R}, {"sup_error", e.sup_error}});
    return {{"schema_version", kSchemaVersion},
            {"type", "convergence_report"},
            {"target", target_name(rep.target)},
            {"entries", entries}};
}

inline nlohmann::json to_json(const CriticalPointRecord& rec) {
    nlohmann::json j = {{"A", rec.problem.A},
                        {"B", rec.problem.B},
                        {"f0", rec.problem.f0},
                        {"fp0", rec.problem.fp0},
                        {"found", rec.found},
                        {"r_star", rec.r_star}};
    if (rec.f_threshold) j["f_threshold"] = *rec.f_threshold;
    return j;
}

namespace detail_io {
inline void require_finite(const nlohmann::json& j) {
    if (j.is_number_float() && !std::isfinite(j.get<double>()))
        throw IoError("write_report_json: non-finite value in report");
    if (j.is_object() || j.is_array())
        for (const auto& child : j) require_finite(child);
}
}  // namespace detail_io

inline std::string report_text(const nlohmann::json& j) {
    detail_io::require_finite(j);
    return j.dump(2) + "\n";
}

/// Stable key ordering (objects are sorted maps), round-trip floats, schema
/// version field; reserialization is byte-idempotent.
inline void write_report_json(const nlohmann::json& j, const std::filesystem::path& path) {
    const std::string text = report_text(j);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("write_report_json: cannot open " + path.string());
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw IoError("write_report_json: write failed for " + path.string());
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("read_json: cannot open " + path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("read_json: parse failure in " + path.string() + ": " + e.what());
    }
    return j;
}

// --- run manifest ---------------------------------------------------------------

inline std::uint64_t fnv1a64(std::span<const unsigned char> data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char b : data) {
        h ^= b;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string file_checksum(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("file_checksum: cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

struct RunManifest {
    std::string command_line;
    std::optional<SolitonParams> params;
    ode::IntegrationConfig config;
    std::vector<std::string> files;  // data files, relative to the manifest directory
};

/// Written atomically (temp file + rename) after all data files, with one
/// checksum entry per file.
inline void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
    nlohmann::json files = nlohmann::json::array();
    for (const auto& name : m.files)
        files.push_back({{"name", name}, {"fnv1a64", file_checksum(path.parent_path() / name)}});
    nlohmann::json j = {{"schema_version", kSchemaVersion},
                        {"type", "run_manifest"},
                        {"artifact_version", kVersion},
                        {"command_line", m.command_line},
                        {"config",
                         {{"rel_tol", m.config.rel_tol},
                          {"abs_tol", m.config.abs_tol},
                          {"h_init", m.config.h_init},
                          {"h_min", m.config.h_min},
                          {"h_max", m.config.h_max},
                          {"max_steps", m.config.max_steps}}},
                        {"files", files}};
    if (m.params)
        j["params"] = {{"mu", m.params->mu}, {"eta", m.params->eta}, {"lambda", m.params->lambda}};

    const std::filesystem::path tmp = path.string() + ".tmp";
    write_report_json(j, tmp);
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("write_manifest: rename failed: " + ec.message());
}

}  // namespace rym::io
