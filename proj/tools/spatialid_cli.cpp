// Command-line front end: mask extraction, schedule visualization, the
// synthetic trajectory harness, uniform-vs-spatial comparison and
// parameter-sweep ablation.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spatialid/spatialid.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config,-c", opts.config_path, "run configuration file (key = value)");
    cmd->add_option("--out-dir,-o", opts.out_dir, "output directory (created if missing)");
    cmd->add_option("--seed,-s", opts.seed, "override the configured RNG seed");
}

spatialid::RunConfig resolve_config(const CommonOpts& opts) {
    spatialid::RunConfig cfg;
    if (!opts.config_path.empty()) cfg = spatialid::load_run_config(opts.config_path);
    if (opts.seed) cfg.seed = *opts.seed;
    return cfg;
}

fs::path prepare_out_dir(const CommonOpts& opts) {
    fs::path dir(opts.out_dir);
    fs::create_directories(dir);
    return dir;
}

std::string step_pgm_name(int step) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "mask_step_%03d.pgm", step);
    return buf;
}

double mean_face_energy_ratio(const spatialid::TrajectoryReport& report) {
    double sum = 0.0;
    for (const auto& rec : report.steps) sum += rec.face_energy_ratio;
    return report.steps.empty() ? 0.0 : sum / static_cast<double>(report.steps.size());
}

double mean_contamination_ratio(const spatialid::TrajectoryReport& report) {
    double sum = 0.0;
    for (const auto& rec : report.steps) sum += rec.contamination_ratio;
    return report.steps.empty() ? 0.0 : sum / static_cast<double>(report.steps.size());
}

int run_mask_extract(const CommonOpts& common, const std::string& input,
                     const std::string& out_tensor, int scale, bool allow_nan) {
    const spatialid::RunConfig cfg = resolve_config(common);
    const fs::path dir = prepare_out_dir(common);

    const spatialid::Tensor tensor = spatialid::read_tensor(
        input, allow_nan ? spatialid::NanPolicy::Warn : spatialid::NanPolicy::Error);
    const spatialid::PatchGrid grid_hint(cfg.grid_h, cfg.grid_w);
    const spatialid::AttentionOutput o = spatialid::tensor_to_attention(tensor, &grid_hint);

    const spatialid::SpatialMask mask = spatialid::extract_mask(o, cfg.schedule);
    const fs::path pgm = dir / "mask.pgm";
    spatialid::write_mask_pgm(mask, pgm.string(), scale);
    std::cout << "wrote " << pgm.string() << "\n";

    if (!out_tensor.empty()) {
        const fs::path tensor_path = dir / out_tensor;
        spatialid::write_tensor(tensor_path.string(),
                                {static_cast<std::uint32_t>(mask.grid().height),
                                 static_cast<std::uint32_t>(mask.grid().width)},
                                mask.values());
        std::cout << "wrote " << tensor_path.string() << "\n";
    }
    return 0;
}

int run_schedule(const CommonOpts& common, const std::string& input, int scale) {
    const spatialid::RunConfig cfg = resolve_config(common);
    const fs::path dir = prepare_out_dir(common);

    if (!input.empty()) {
        // One fixed attention output drives every step's mid/late mask.
        const spatialid::Tensor tensor = spatialid::read_tensor(input);
        const spatialid::PatchGrid grid_hint(cfg.grid_h, cfg.grid_w);
        const spatialid::AttentionOutput o = spatialid::tensor_to_attention(tensor, &grid_hint);
        for (int k = 0; k < cfg.schedule.total_steps; ++k) {
            const double t = spatialid::normalized_timestep(k, cfg.schedule.total_steps);
            const spatialid::SpatialMask mask = spatialid::schedule_mask(t, o, cfg.schedule);
            spatialid::write_mask_pgm(mask, (dir / step_pgm_name(k)).string(), scale);
        }
    } else {
        const spatialid::SyntheticScenario scn = spatialid::make_scenario(cfg);
        const auto steps = spatialid::detail::simulate_trajectory(scn, cfg.schedule);
        for (const auto& step : steps) {
            spatialid::write_mask_pgm(step.mask, (dir / step_pgm_name(step.record.step_index)).string(),
                                      scale);
        }
    }
    std::cout << "wrote " << cfg.schedule.total_steps << " mask PGMs to " << dir.string() << "\n";
    return 0;
}

int run_simulate(const CommonOpts& common, bool no_timing, int scale, bool emit_json) {
    const spatialid::RunConfig cfg = resolve_config(common);
    const fs::path dir = prepare_out_dir(common);

    const spatialid::SyntheticScenario scn = spatialid::make_scenario(cfg);
    const auto steps = spatialid::detail::simulate_trajectory(scn, cfg.schedule);

    spatialid::TrajectoryReport report{scn, cfg.schedule, {}, spatialid::detail::summarize(steps)};
    report.steps.reserve(steps.size());
    for (const auto& step : steps) {
        report.steps.push_back(step.record);
        spatialid::write_mask_pgm(step.mask, (dir / step_pgm_name(step.record.step_index)).string(),
                                  scale);
    }

    const fs::path csv = dir / "metrics.csv";
    spatialid::write_metrics_csv(report, csv.string(), !no_timing);
    if (emit_json) {
        spatialid::write_metrics_json(report, (dir / "metrics.json").string(), !no_timing);
    }
    std::cout << "wrote " << csv.string() << " and " << report.steps.size() << " mask PGMs\n";
    return 0;
}

int run_compare(const CommonOpts& common) {
    const spatialid::RunConfig cfg = resolve_config(common);
    const fs::path dir = prepare_out_dir(common);

    const spatialid::SyntheticScenario scn = spatialid::make_scenario(cfg);
    const spatialid::ComparisonRecord record =
        spatialid::compare_uniform_vs_spatial(scn, cfg.schedule);

    const fs::path csv = dir / "compare.csv";
    spatialid::write_comparison_csv(record, csv.string());
    std::cout << "wrote " << csv.string() << "\n"
              << "mean_contamination_ratio=" << spatialid::format_g6(record.mean_contamination_ratio)
              << "\n"
              << "mean_face_energy_ratio=" << spatialid::format_g6(record.mean_face_energy_ratio)
              << "\n"
              << "mean_mid_contamination_ratio="
              << spatialid::format_g6(record.mean_mid_contamination_ratio) << "\n"
              << "mean_mid_face_energy_ratio="
              << spatialid::format_g6(record.mean_mid_face_energy_ratio) << "\n";
    return 0;
}

struct Sweep {
    std::string key;
    std::vector<double> values;
};

void set_schedule_param(spatialid::ScheduleConfig& s, const std::string& key, double value) {
    if (key == "t_early") s.t_early = value;
    else if (key == "t_late") s.t_late = value;
    else if (key == "f_late") s.f_late = value;
    else if (key == "sigma_c") s.sigma_c = value;
    else if (key == "beta") s.beta = value;
    else if (key == "tau") s.tau = value;
    else if (key == "alpha") s.alpha = value;
    else if (key == "global_floor") s.global_floor = value;
    else throw std::invalid_argument("ablate: unsupported sweep key '" + key + "'");
}

std::vector<Sweep> parse_sweeps(const std::vector<std::string>& specs) {
    std::vector<Sweep> sweeps;
    for (const std::string& spec : specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("ablate: sweep must look like key=v1,v2 (got '" + spec + "')");
        }
        Sweep sweep;
        sweep.key = spec.substr(0, eq);
        std::string_view rest(spec);
        rest.remove_prefix(eq + 1);
        while (!rest.empty()) {
            const auto comma = rest.find(',');
            const std::string token(rest.substr(0, comma));
            sweep.values.push_back(spatialid::detail::parse_double(token, 0));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (sweep.values.empty()) {
            throw std::invalid_argument("ablate: sweep '" + sweep.key + "' has no values");
        }
        for (const Sweep& existing : sweeps) {
            if (existing.key == sweep.key) {
                throw std::invalid_argument("ablate: duplicate sweep key '" + sweep.key + "'");
            }
        }
        sweeps.push_back(std::move(sweep));
    }
    return sweeps;
}

int run_ablate(const CommonOpts& common, const std::vector<std::string>& sweep_specs) {
    const spatialid::RunConfig cfg = resolve_config(common);
    const fs::path dir = prepare_out_dir(common);
    const std::vector<Sweep> sweeps = parse_sweeps(sweep_specs);
    const spatialid::SyntheticScenario scn = spatialid::make_scenario(cfg);

    std::string out;
    for (const Sweep& sweep : sweeps) out += sweep.key + ",";
    out +=
        "mean_face_energy_ratio,mean_contamination_ratio,"
        "mean_mid_face_energy_ratio,mean_mid_contamination_ratio,mean_mid_iou\n";

    // Row order: first --sweep varies slowest, last varies fastest.
    std::vector<std::size_t> cursor(sweeps.size(), 0);
    bool done = false;
    while (!done) {
        spatialid::ScheduleConfig schedule = cfg.schedule;
        for (std::size_t i = 0; i < sweeps.size(); ++i) {
            set_schedule_param(schedule, sweeps[i].key, sweeps[i].values[cursor[i]]);
        }
        schedule.validate();
        const spatialid::TrajectoryReport report = spatialid::run_trajectory(scn, schedule);

        for (std::size_t i = 0; i < sweeps.size(); ++i) {
            out += spatialid::format_g6(sweeps[i].values[cursor[i]]) + ",";
        }
        out += spatialid::format_g6(mean_face_energy_ratio(report)) + ",";
        out += spatialid::format_g6(mean_contamination_ratio(report)) + ",";
        out += spatialid::format_g6(report.summary.mid.mean_face_energy_ratio) + ",";
        out += spatialid::format_g6(report.summary.mid.mean_contamination_ratio) + ",";
        out += spatialid::format_g6(report.summary.mid.mean_iou) + "\n";

        done = true;
        for (std::size_t i = sweeps.size(); i-- > 0;) {
            if (++cursor[i] < sweeps[i].values.size()) {
                done = false;
                break;
            }
            cursor[i] = 0;
        }
    }

    const fs::path csv = dir / "ablate.csv";
    spatialid::detail::write_file_bytes(csv.string(), out);
    std::cout << "wrote " << csv.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spatially adaptive identity injection toolkit"};
    app.require_subcommand(1);

    CommonOpts extract_opts, schedule_opts, simulate_opts, compare_opts, ablate_opts;

    auto* extract = app.add_subcommand("mask-extract", "extract a spatial mask from a tensor dump");
    add_common(extract, extract_opts);
    std::string extract_input, extract_out_tensor;
    int extract_scale = 1;
    bool extract_allow_nan = false;
    extract->add_option("--input,-i", extract_input, "SIDT tensor file, (h,w,dim) or (patches,dim)")
        ->required();
    extract->add_option("--out-tensor", extract_out_tensor, "also dump the mask as a SIDT tensor");
    extract->add_option("--scale", extract_scale, "integer PGM upscale factor")
        ->check(CLI::PositiveNumber);
    extract->add_flag("--allow-nan", extract_allow_nan, "downgrade NaN payload values to a warning");

    auto* schedule = app.add_subcommand("schedule", "write the per-step scheduled masks as PGMs");
    add_common(schedule, schedule_opts);
    std::string schedule_input;
    int schedule_scale = 1;
    schedule->add_option("--input,-i", schedule_input,
                         "SIDT tensor reused as the attention output at every step "
                         "(default: synthetic trajectory)");
    schedule->add_option("--scale", schedule_scale, "integer PGM upscale factor")
        ->check(CLI::PositiveNumber);

    auto* simulate = app.add_subcommand("simulate", "run the synthetic trajectory harness");
    add_common(simulate, simulate_opts);
    bool simulate_no_timing = false;
    bool simulate_json = false;
    int simulate_scale = 1;
    simulate->add_flag("--no-timing", simulate_no_timing,
                       "write zeros in the timing columns (for byte-exact comparisons)");
    simulate->add_flag("--json", simulate_json, "also write the full report as metrics.json");
    simulate->add_option("--scale", simulate_scale, "integer PGM upscale factor")
        ->check(CLI::PositiveNumber);

    auto* compare = app.add_subcommand("compare", "paired uniform-vs-spatial energy comparison");
    add_common(compare, compare_opts);

    auto* ablate = app.add_subcommand("ablate", "sweep schedule parameters, one CSV row per config");
    add_common(ablate, ablate_opts);
    std::vector<std::string> sweep_specs;
    ablate->add_option("--sweep", sweep_specs, "parameter sweep, e.g. --sweep f_late=0.5,0.7")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
            return app.exit(e);  // --help and friends
        }
        std::cerr << "error: " << e.what() << "\n"
                  << "usage: spatialid {mask-extract|schedule|simulate|compare|ablate} [options]\n";
        return 2;
    }

    try {
        if (app.got_subcommand(extract)) {
            return run_mask_extract(extract_opts, extract_input, extract_out_tensor, extract_scale,
                                    extract_allow_nan);
        }
        if (app.got_subcommand(schedule)) {
            return run_schedule(schedule_opts, schedule_input, schedule_scale);
        }
        if (app.got_subcommand(simulate)) {
            return run_simulate(simulate_opts, simulate_no_timing, simulate_scale, simulate_json);
        }
        if (app.got_subcommand(compare)) return run_compare(compare_opts);
        if (app.got_subcommand(ablate)) return run_ablate(ablate_opts, sweep_specs);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
