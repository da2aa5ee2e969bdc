#pragma once

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "spatialid/core.hpp"
#include "spatialid/harness.hpp"
#include "spatialid/scheduler.hpp"

/// File formats: the "SIDT" binary tensor container, binary PGM mask export,
/// per-step metrics CSV and the flat key=value run configuration.
namespace spatialid {

/// Malformed input file; `offset` is the byte position of the problem.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& path, std::size_t offset, const std::string& what)
        : std::runtime_error(path + ": " + what + " (offset " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Bad run-config line; carries the 1-based line number.
class ConfigError : public std::runtime_error {
public:
    ConfigError(int line, const std::string& what)
        : std::runtime_error("config line " + std::to_string(line) + ": " + what), line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

enum class NanPolicy { Error, Warn };

/// In-memory tensor: dims plus row-major values (widened from f32 storage).
struct Tensor {
    std::vector<std::uint32_t> dims;
    std::vector<double> values;

    std::size_t element_count() const noexcept {
        std::size_t n = 1;
        for (std::uint32_t d : dims) n *= d;
        return n;
    }
};

namespace detail {

inline void append_u32_le(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
    out.push_back(static_cast<char>((v >> 16) & 0xFF));
    out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

inline std::uint32_t read_u32_le(const unsigned char* p) noexcept {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

inline void write_file_bytes(const std::string& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace detail

inline constexpr char kTensorMagic[4] = {'S', 'I', 'D', 'T'};
inline constexpr std::uint32_t kTensorVersion = 1;

/// Serializes dims + values as magic, version, ndim, dims[], then f32
/// little-endian payload in row-major order.
inline void write_tensor(const std::string& path, const std::vector<std::uint32_t>& dims,
                         const std::vector<double>& values) {
    std::size_t expected = 1;
    for (std::uint32_t d : dims) expected *= d;
    if (dims.empty() || expected != values.size()) {
        throw std::invalid_argument(path + ": dims do not match value count");
    }
    std::string bytes;
    bytes.reserve(12 + 4 * dims.size() + 4 * values.size());
    bytes.append(kTensorMagic, 4);
    detail::append_u32_le(bytes, kTensorVersion);
    detail::append_u32_le(bytes, static_cast<std::uint32_t>(dims.size()));
    for (std::uint32_t d : dims) detail::append_u32_le(bytes, d);
    for (double v : values) {
        detail::append_u32_le(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    detail::write_file_bytes(path, bytes);
}

inline Tensor read_tensor(const std::string& path, NanPolicy nan_policy = NanPolicy::Error) {
    const std::string bytes = detail::read_file_bytes(path);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::size_t size = bytes.size();

    if (size < 4 || std::string_view(bytes.data(), 4) != std::string_view(kTensorMagic, 4)) {
        throw FormatError(path, 0, "bad magic (expected \"SIDT\")");
    }
    if (size < 8) throw FormatError(path, 4, "truncated version field");
    const std::uint32_t version = detail::read_u32_le(p + 4);
    if (version != kTensorVersion) {
        throw FormatError(path, 4, "unsupported version " + std::to_string(version));
    }
    if (size < 12) throw FormatError(path, 8, "truncated ndim field");
    const std::uint32_t ndim = detail::read_u32_le(p + 8);
    if (ndim == 0) throw FormatError(path, 8, "ndim must be >= 1");

    std::size_t offset = 12;
    Tensor tensor;
    tensor.dims.reserve(ndim);
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < ndim; ++i, offset += 4) {
        if (size < offset + 4) throw FormatError(path, offset, "truncated dims");
        const std::uint32_t d = detail::read_u32_le(p + offset);
        if (d == 0) throw FormatError(path, offset, "zero dimension");
        tensor.dims.push_back(d);
        if (count > (size / 4 + 1) / d + 1) {
            throw FormatError(path, offset, "dims exceed the file size");
        }
        count *= d;
    }
    if (size != offset + 4 * count) {
        throw FormatError(path, std::min(size, offset + 4 * count),
                          "payload is " + std::to_string(size - offset) + " bytes, expected " +
                              std::to_string(4 * count));
    }

    tensor.values.resize(count);
    bool warned = false;
    for (std::size_t i = 0; i < count; ++i, offset += 4) {
        const float f = std::bit_cast<float>(detail::read_u32_le(p + offset));
        if (std::isnan(f)) {
            if (nan_policy == NanPolicy::Error) {
                throw FormatError(path, offset, "NaN payload value");
            }
            if (!warned) {
                std::fprintf(stderr, "warning: %s: NaN payload value at offset %zu\n",
                             path.c_str(), offset);
                warned = true;
            }
        }
        tensor.values[i] = static_cast<double>(f);
    }
    return tensor;
}

/// Interprets a tensor as an attention output: either 3D (h, w, dim) or 2D
/// (patches, dim) with the grid supplied by the caller.
inline AttentionOutput tensor_to_attention(const Tensor& tensor, const PatchGrid* grid_hint = nullptr) {
    if (tensor.dims.size() == 3) {
        const PatchGrid grid(tensor.dims[0], tensor.dims[1]);
        return AttentionOutput(
            grid, Matrix::from_rows(grid.patch_count(), tensor.dims[2], tensor.values));
    }
    if (tensor.dims.size() == 2) {
        if (grid_hint == nullptr) {
            throw std::invalid_argument("tensor_to_attention: 2D tensor needs grid dimensions");
        }
        if (grid_hint->patch_count() != tensor.dims[0]) {
            throw std::invalid_argument("tensor_to_attention: grid has " +
                                        std::to_string(grid_hint->patch_count()) +
                                        " patches but tensor has " +
                                        std::to_string(tensor.dims[0]) + " rows");
        }
        return AttentionOutput(*grid_hint,
                               Matrix::from_rows(tensor.dims[0], tensor.dims[1], tensor.values));
    }
    throw std::invalid_argument("tensor_to_attention: expected 2 or 3 dims, got " +
                                std::to_string(tensor.dims.size()));
}

/// Binary PGM (P5, maxval 255); pixel = round(255 * value), half away from
/// zero. `scale` repeats each cell as a scale x scale block for viewing.
inline void write_mask_pgm(const SpatialMask& mask, const std::string& path, int scale = 1) {
    if (scale < 1) throw std::invalid_argument("write_mask_pgm: scale must be >= 1");
    const std::size_t h = mask.grid().height * static_cast<std::size_t>(scale);
    const std::size_t w = mask.grid().width * static_cast<std::size_t>(scale);
    std::string bytes = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    bytes.reserve(bytes.size() + h * w);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            const double v = mask.at(r / static_cast<std::size_t>(scale),
                                     c / static_cast<std::size_t>(scale));
            bytes.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v))));
        }
    }
    detail::write_file_bytes(path, bytes);
}

/// %.6g formatting: six significant digits, no locale dependence beyond the
/// default "C" locale (the library never calls setlocale).
inline std::string format_g6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

/// Per-step metrics CSV. With include_timing = false the two timing columns
/// are written as 0 so files are byte-comparable across runs.
inline void write_metrics_csv(const TrajectoryReport& report, const std::string& path,
                              bool include_timing = true) {
    std::string out =
        "step,t,phase,mask_iou,contamination_ratio,face_energy_ratio,mask_time_us,inject_time_us\n";
    for (const StepRecord& rec : report.steps) {
        out += std::to_string(rec.step_index);
        out += ',';
        out += format_g6(rec.t);
        out += ',';
        out += phase_name(rec.phase);
        out += ',';
        out += format_g6(rec.mask_iou);
        out += ',';
        out += format_g6(rec.contamination_ratio);
        out += ',';
        out += format_g6(rec.face_energy_ratio);
        out += ',';
        out += format_g6(include_timing ? rec.wall_time_mask.count() : 0.0);
        out += ',';
        out += format_g6(include_timing ? rec.wall_time_injection.count() : 0.0);
        out += '\n';
    }
    detail::write_file_bytes(path, out);
}

/// Full trajectory report as JSON: scenario, config, per-step records and
/// the per-phase summary. Keys are emitted sorted, so identical reports
/// serialize identically.
inline void write_metrics_json(const TrajectoryReport& report, const std::string& path,
                               bool include_timing = true) {
    nlohmann::json doc;
    doc["scenario"] = {
        {"grid_h", report.scenario.grid.height},
        {"grid_w", report.scenario.grid.width},
        {"face_region", report.scenario.face_region},
        {"face_norm_ratio", report.scenario.face_norm_ratio},
        {"base_norm", report.scenario.base_norm},
        {"noise_scale", report.scenario.noise_scale},
        {"feature_dim", report.scenario.feature_dim},
        {"seed", report.scenario.seed},
    };
    const ScheduleConfig& cfg = report.config;
    doc["config"] = {
        {"t_early", cfg.t_early},
        {"t_late", cfg.t_late},
        {"f_late", cfg.f_late},
        {"sigma_c", cfg.sigma_c},
        {"beta", cfg.beta},
        {"tau", cfg.tau},
        {"blur_kernel_size", cfg.blur_kernel_size},
        {"blur_sigma", cfg.blur_sigma},
        {"dilation_radius", cfg.dilation_radius},
        {"alpha", cfg.alpha},
        {"global_floor", cfg.global_floor},
        {"total_steps", cfg.total_steps},
        {"symmetric_center", cfg.symmetric_center},
    };
    doc["steps"] = nlohmann::json::array();
    for (const StepRecord& rec : report.steps) {
        doc["steps"].push_back({
            {"step", rec.step_index},
            {"t", rec.t},
            {"phase", phase_name(rec.phase)},
            {"mask_iou", rec.mask_iou},
            {"contamination_ratio", rec.contamination_ratio},
            {"face_energy_ratio", rec.face_energy_ratio},
            {"mask_time_us", include_timing ? rec.wall_time_mask.count() : 0.0},
            {"inject_time_us", include_timing ? rec.wall_time_injection.count() : 0.0},
        });
    }
    auto phase_json = [](const PhaseSummary& s) {
        return nlohmann::json{{"count", s.count},
                              {"mean_iou", s.mean_iou},
                              {"mean_contamination_ratio", s.mean_contamination_ratio},
                              {"mean_face_energy_ratio", s.mean_face_energy_ratio}};
    };
    doc["summary"] = {{"early", phase_json(report.summary.early)},
                      {"mid", phase_json(report.summary.mid)},
                      {"late", phase_json(report.summary.late)}};
    detail::write_file_bytes(path, doc.dump(2) + "\n");
}

/// Paired uniform-vs-spatial energies, one row per step.
inline void write_comparison_csv(const ComparisonRecord& record, const std::string& path) {
    std::string out =
        "step,t,phase,face_energy_uniform,face_energy_spatial,background_energy_uniform,"
        "background_energy_spatial,contamination_ratio,face_energy_ratio\n";
    for (const ComparisonStep& cs : record.steps) {
        out += std::to_string(cs.step_index);
        out += ',';
        out += format_g6(cs.t);
        out += ',';
        out += phase_name(cs.phase);
        out += ',';
        out += format_g6(cs.face_energy_uniform);
        out += ',';
        out += format_g6(cs.face_energy_spatial);
        out += ',';
        out += format_g6(cs.background_energy_uniform);
        out += ',';
        out += format_g6(cs.background_energy_spatial);
        out += ',';
        out += format_g6(cs.contamination_ratio);
        out += ',';
        out += format_g6(cs.face_energy_ratio);
        out += '\n';
    }
    detail::write_file_bytes(path, out);
}

/// Flat run configuration: scheduling parameters plus the synthetic
/// scenario. Omitted keys keep these defaults; unknown keys are an error.
struct RunConfig {
    ScheduleConfig schedule;
    std::size_t grid_h = 16;
    std::size_t grid_w = 16;
    std::size_t feature_dim = 64;
    double face_norm_ratio = 4.0;
    double noise_scale = 1.0;
    std::uint64_t seed = 1;
    std::string face_region = "ellipse";
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline double parse_double(std::string_view v, int line) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ConfigError(line, "expected a number, got '" + std::string(v) + "'");
    }
    return out;
}

inline long long parse_int(std::string_view v, int line) {
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ConfigError(line, "expected an integer, got '" + std::string(v) + "'");
    }
    return out;
}

inline std::uint64_t parse_u64(std::string_view v, int line) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ConfigError(line, "expected an unsigned integer, got '" + std::string(v) + "'");
    }
    return out;
}

inline bool parse_bool(std::string_view v, int line) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(line, "expected true/false, got '" + std::string(v) + "'");
}

}  // namespace detail

inline RunConfig parse_run_config(std::istream& in) {
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view(line);
        if (const auto hash = view.find('#'); hash != std::string_view::npos) {
            view = view.substr(0, hash);
        }
        view = detail::trim(view);
        if (view.empty()) continue;

        const auto eq = view.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(lineno, "expected 'key = value'");
        }
        const std::string_view key = detail::trim(view.substr(0, eq));
        const std::string_view value = detail::trim(view.substr(eq + 1));
        if (key.empty()) throw ConfigError(lineno, "empty key");
        if (value.empty()) throw ConfigError(lineno, "empty value for '" + std::string(key) + "'");

        ScheduleConfig& s = cfg.schedule;
        if (key == "t_early") s.t_early = detail::parse_double(value, lineno);
        else if (key == "t_late") s.t_late = detail::parse_double(value, lineno);
        else if (key == "f_late") s.f_late = detail::parse_double(value, lineno);
        else if (key == "sigma_c") s.sigma_c = detail::parse_double(value, lineno);
        else if (key == "beta") s.beta = detail::parse_double(value, lineno);
        else if (key == "tau") s.tau = detail::parse_double(value, lineno);
        else if (key == "blur_kernel_size") s.blur_kernel_size = static_cast<int>(detail::parse_int(value, lineno));
        else if (key == "blur_sigma") s.blur_sigma = detail::parse_double(value, lineno);
        else if (key == "dilation_radius") s.dilation_radius = static_cast<int>(detail::parse_int(value, lineno));
        else if (key == "alpha") s.alpha = detail::parse_double(value, lineno);
        else if (key == "global_floor") s.global_floor = detail::parse_double(value, lineno);
        else if (key == "total_steps") s.total_steps = static_cast<int>(detail::parse_int(value, lineno));
        else if (key == "symmetric_center") s.symmetric_center = detail::parse_bool(value, lineno);
        else if (key == "grid_h") cfg.grid_h = static_cast<std::size_t>(detail::parse_int(value, lineno));
        else if (key == "grid_w") cfg.grid_w = static_cast<std::size_t>(detail::parse_int(value, lineno));
        else if (key == "feature_dim") cfg.feature_dim = static_cast<std::size_t>(detail::parse_int(value, lineno));
        else if (key == "face_norm_ratio") cfg.face_norm_ratio = detail::parse_double(value, lineno);
        else if (key == "noise_scale") cfg.noise_scale = detail::parse_double(value, lineno);
        else if (key == "seed") cfg.seed = detail::parse_u64(value, lineno);
        else if (key == "face_region") cfg.face_region = std::string(value);
        else throw ConfigError(lineno, "unknown key '" + std::string(key) + "'");
    }
    cfg.schedule.validate();
    if (cfg.grid_h < 1 || cfg.grid_w < 1) {
        throw std::invalid_argument("config: grid dimensions must be >= 1");
    }
    if (cfg.feature_dim < 1) throw std::invalid_argument("config: feature_dim must be >= 1");
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open for reading");
    return parse_run_config(in);
}

/// Face-region specs:
///   ellipse                       inscribed central-third ellipse (default)
///   ellipse:CR,CC,RA,RB           explicit center and semi-axes
///   rect:R0,C0,H,W                axis-aligned rectangle
///   cells:I0,I1,...               explicit flat patch indices
inline std::vector<std::size_t> parse_face_region(const std::string& spec, const PatchGrid& grid) {
    auto split_csv = [](std::string_view s) {
        std::vector<std::string> parts;
        while (!s.empty()) {
            const auto comma = s.find(',');
            parts.emplace_back(detail::trim(s.substr(0, comma)));
            if (comma == std::string_view::npos) break;
            s.remove_prefix(comma + 1);
        }
        return parts;
    };

    const std::string_view view = detail::trim(spec);
    if (view == "ellipse") return central_ellipse_region(grid);

    const auto colon = view.find(':');
    const std::string_view kind = colon == std::string_view::npos ? view : view.substr(0, colon);
    const std::string_view args = colon == std::string_view::npos ? "" : view.substr(colon + 1);

    if (kind == "ellipse") {
        const auto parts = split_csv(args);
        if (parts.size() != 4) {
            throw std::invalid_argument("face_region: ellipse takes CR,CC,RA,RB");
        }
        return ellipse_region(grid, detail::parse_double(parts[0], 0), detail::parse_double(parts[1], 0),
                              detail::parse_double(parts[2], 0), detail::parse_double(parts[3], 0));
    }
    if (kind == "rect") {
        const auto parts = split_csv(args);
        if (parts.size() != 4) throw std::invalid_argument("face_region: rect takes R0,C0,H,W");
        const auto r0 = static_cast<std::size_t>(detail::parse_int(parts[0], 0));
        const auto c0 = static_cast<std::size_t>(detail::parse_int(parts[1], 0));
        const auto rh = static_cast<std::size_t>(detail::parse_int(parts[2], 0));
        const auto rw = static_cast<std::size_t>(detail::parse_int(parts[3], 0));
        if (rh < 1 || rw < 1 || r0 + rh > grid.height || c0 + rw > grid.width) {
            throw std::invalid_argument("face_region: rect outside grid");
        }
        std::vector<std::size_t> cells;
        for (std::size_t r = r0; r < r0 + rh; ++r) {
            for (std::size_t c = c0; c < c0 + rw; ++c) cells.push_back(r * grid.width + c);
        }
        return cells;
    }
    if (kind == "cells") {
        const auto parts = split_csv(args);
        if (parts.empty()) throw std::invalid_argument("face_region: cells needs indices");
        std::vector<std::size_t> cells;
        for (const std::string& part : parts) {
            const auto idx = static_cast<std::size_t>(detail::parse_int(part, 0));
            if (idx >= grid.patch_count()) {
                throw std::invalid_argument("face_region: cell index outside grid");
            }
            cells.push_back(idx);
        }
        return cells;
    }
    throw std::invalid_argument("face_region: unknown spec '" + std::string(view) + "'");
}

/// Builds the synthetic scenario described by a run config.
inline SyntheticScenario make_scenario(const RunConfig& cfg) {
    const PatchGrid grid(cfg.grid_h, cfg.grid_w);
    SyntheticScenario scn(grid, parse_face_region(cfg.face_region, grid));
    scn.face_norm_ratio = cfg.face_norm_ratio;
    scn.noise_scale = cfg.noise_scale;
    scn.feature_dim = cfg.feature_dim;
    scn.seed = cfg.seed;
    scn.validate();
    return scn;
}

}  // namespace spatialid
