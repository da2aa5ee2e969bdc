#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "spatialid/io.hpp"

using namespace spatialid;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    static int counter = 0;
    const fs::path dir = fs::temp_directory_path() / "spatialid_io_tests";
    fs::create_directories(dir);
    return dir / (std::to_string(++counter) + "_" + name);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

}  // namespace

TEST_CASE("tensor files round-trip losslessly") {
    Rng rng(606);
    for (int trial = 0; trial < 20; ++trial) {
        const std::uint32_t rows = 1 + static_cast<std::uint32_t>(rng.next_u64() % 6);
        const std::uint32_t cols = 1 + static_cast<std::uint32_t>(rng.next_u64() % 6);
        std::vector<double> values(static_cast<std::size_t>(rows) * cols);
        // f32-representable payload: round-trip must be bit-exact.
        for (double& v : values) v = static_cast<double>(static_cast<float>(rng.uniform(-50.0, 50.0)));

        const fs::path path = temp_file("roundtrip.sidt");
        write_tensor(path.string(), {rows, cols}, values);
        const Tensor back = read_tensor(path.string());
        REQUIRE(back.dims == std::vector<std::uint32_t>{rows, cols});
        REQUIRE(back.values.size() == values.size());
        for (std::size_t i = 0; i < values.size(); ++i) CHECK(back.values[i] == values[i]);

        // Writing the reread values reproduces the file byte for byte.
        const fs::path path2 = temp_file("roundtrip2.sidt");
        write_tensor(path2.string(), back.dims, back.values);
        CHECK(slurp(path) == slurp(path2));
    }
}

TEST_CASE("a 2x3 zero tensor is a 44-byte file") {
    const fs::path path = temp_file("zeros.sidt");
    write_tensor(path.string(), {2, 3}, std::vector<double>(6, 0.0));
    CHECK(fs::file_size(path) == 44);
}

TEST_CASE("tensor reader rejects malformed files with byte offsets") {
    const fs::path good = temp_file("good.sidt");
    write_tensor(good.string(), {2, 2}, {1.0, 2.0, 3.0, 4.0});
    std::string bytes = slurp(good);

    const fs::path bad_magic = temp_file("bad_magic.sidt");
    std::string tampered = bytes;
    tampered[0] = 'X';
    detail::write_file_bytes(bad_magic.string(), tampered);
    try {
        read_tensor(bad_magic.string());
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.offset() == 0);
    }

    const fs::path bad_version = temp_file("bad_version.sidt");
    tampered = bytes;
    tampered[4] = 9;
    detail::write_file_bytes(bad_version.string(), tampered);
    try {
        read_tensor(bad_version.string());
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(e.offset() == 4);
    }

    const fs::path truncated = temp_file("truncated.sidt");
    detail::write_file_bytes(truncated.string(), std::string_view(bytes).substr(0, bytes.size() - 2));
    CHECK_THROWS_AS(read_tensor(truncated.string()), FormatError);

    const fs::path trailing = temp_file("trailing.sidt");
    detail::write_file_bytes(trailing.string(), bytes + "!!");
    CHECK_THROWS_AS(read_tensor(trailing.string()), FormatError);

    CHECK_THROWS_AS(read_tensor(temp_file("missing.sidt").string()), std::runtime_error);
}

TEST_CASE("NaN payloads error by default and warn when allowed") {
    const fs::path path = temp_file("nan.sidt");
    write_tensor(path.string(), {1, 2}, {1.0, std::nan("")});
    CHECK_THROWS_AS(read_tensor(path.string()), FormatError);
    const Tensor tolerated = read_tensor(path.string(), NanPolicy::Warn);
    CHECK(tolerated.values[0] == 1.0);
    CHECK(std::isnan(tolerated.values[1]));
}

TEST_CASE("tensors become attention outputs with 3D or hinted 2D shapes") {
    Tensor t3;
    t3.dims = {2, 3, 4};
    t3.values.assign(24, 0.5);
    const AttentionOutput o3 = tensor_to_attention(t3);
    CHECK(o3.grid == PatchGrid(2, 3));
    CHECK(o3.dim == 4);

    Tensor t2;
    t2.dims = {6, 4};
    t2.values.assign(24, 0.5);
    CHECK_THROWS_AS(tensor_to_attention(t2), std::invalid_argument);
    const PatchGrid hint(2, 3);
    CHECK(tensor_to_attention(t2, &hint).grid == hint);
    const PatchGrid wrong(2, 2);
    CHECK_THROWS_AS(tensor_to_attention(t2, &wrong), std::invalid_argument);
}

TEST_CASE("PGM export quantizes with round half up") {
    const PatchGrid g(2, 2);
    const fs::path ones = temp_file("ones.pgm");
    write_mask_pgm(SpatialMask::constant(g, 1.0), ones.string());
    CHECK(slurp(ones) == std::string("P5\n2 2\n255\n") + std::string(4, static_cast<char>(255)));

    const fs::path zeros = temp_file("zeros.pgm");
    write_mask_pgm(SpatialMask::constant(g, 0.0), zeros.string());
    CHECK(slurp(zeros) == std::string("P5\n2 2\n255\n") + std::string(4, '\0'));

    const fs::path half = temp_file("half.pgm");
    write_mask_pgm(SpatialMask::constant(g, 0.5), half.string());
    // 255 * 0.5 = 127.5 rounds up to 128.
    CHECK(slurp(half) == std::string("P5\n2 2\n255\n") + std::string(4, static_cast<char>(128)));

    const fs::path scaled = temp_file("scaled.pgm");
    write_mask_pgm(SpatialMask(g, {0.0, 1.0, 1.0, 0.0}), scaled.string(), 2);
    const std::string body = slurp(scaled);
    CHECK(body.substr(0, 11) == "P5\n4 4\n255\n");
    CHECK(body.size() == 11 + 16);
}

TEST_CASE("metrics CSV has one row per step plus a header") {
    const PatchGrid g(8, 8);
    SyntheticScenario scn(g, {27, 28, 35, 36});
    scn.feature_dim = 8;
    scn.seed = 77;
    const ScheduleConfig cfg;
    const TrajectoryReport report = run_trajectory(scn, cfg);

    const fs::path path = temp_file("metrics.csv");
    write_metrics_csv(report, path.string(), false);
    const std::string text = slurp(path);

    std::istringstream lines(text);
    std::string line;
    int count = 0;
    bool has_header = false;
    while (std::getline(lines, line)) {
        if (count == 0) {
            has_header = line ==
                         "step,t,phase,mask_iou,contamination_ratio,face_energy_ratio,"
                         "mask_time_us,inject_time_us";
        } else {
            const auto phase_start = line.find(',', line.find(',') + 1) + 1;
            const auto phase_end = line.find(',', phase_start);
            const std::string phase = line.substr(phase_start, phase_end - phase_start);
            CHECK((phase == "early" || phase == "mid" || phase == "late"));
            CHECK(line.substr(line.size() - 4) == ",0,0");  // timing suppressed
        }
        ++count;
    }
    CHECK(has_header);
    CHECK(count == 26);

    const fs::path again = temp_file("metrics2.csv");
    write_metrics_csv(report, again.string(), false);
    CHECK(slurp(again) == text);
}

TEST_CASE("JSON report carries scenario, config, steps and summary") {
    const PatchGrid g(8, 8);
    SyntheticScenario scn(g, {27, 28, 35, 36});
    scn.feature_dim = 8;
    scn.seed = 31;
    ScheduleConfig cfg;
    cfg.total_steps = 10;
    const TrajectoryReport report = run_trajectory(scn, cfg);

    const fs::path path = temp_file("metrics.json");
    write_metrics_json(report, path.string(), false);
    const auto doc = nlohmann::json::parse(slurp(path));

    CHECK(doc["scenario"]["grid_h"] == 8);
    CHECK(doc["scenario"]["seed"] == 31);
    CHECK(doc["scenario"]["face_region"].size() == 4);
    CHECK(doc["config"]["total_steps"] == 10);
    REQUIRE(doc["steps"].size() == 10);
    CHECK(doc["steps"][0]["t"] == 1.0);
    CHECK(doc["steps"][0]["phase"] == "early");
    CHECK(doc["steps"][9]["mask_time_us"] == 0.0);
    CHECK(doc["summary"]["mid"]["count"] ==
          static_cast<std::size_t>(report.summary.mid.count));

    const fs::path again = temp_file("metrics2.json");
    write_metrics_json(report, again.string(), false);
    CHECK(slurp(again) == slurp(path));
}

TEST_CASE("run config parsing applies defaults and rejects unknown keys") {
    std::istringstream good(
        "# comment line\n"
        "t_early = 0.8\n"
        "  f_late=0.6  # trailing comment\n"
        "grid_h = 8\n"
        "grid_w = 12\n"
        "seed = 123\n"
        "symmetric_center = false\n"
        "\n");
    const RunConfig cfg = parse_run_config(good);
    CHECK(cfg.schedule.t_early == 0.8);
    CHECK(cfg.schedule.f_late == 0.6);
    CHECK(cfg.schedule.t_late == 0.3);       // untouched default
    CHECK(cfg.schedule.total_steps == 25);   // untouched default
    CHECK(cfg.schedule.symmetric_center == false);
    CHECK(cfg.grid_h == 8);
    CHECK(cfg.grid_w == 12);
    CHECK(cfg.seed == 123);
    CHECK(cfg.face_region == "ellipse");

    std::istringstream unknown("t_earlyy = 0.8\n");
    CHECK_THROWS_AS(parse_run_config(unknown), ConfigError);

    std::istringstream missing_eq("t_early 0.8\n");
    CHECK_THROWS_AS(parse_run_config(missing_eq), ConfigError);

    std::istringstream bad_value("t_early = fast\n");
    CHECK_THROWS_AS(parse_run_config(bad_value), ConfigError);

    std::istringstream invalid("t_early = 0.2\nt_late = 0.5\n");
    CHECK_THROWS_AS(parse_run_config(invalid), std::invalid_argument);
}

TEST_CASE("face region specs cover ellipse, rect and explicit cells") {
    const PatchGrid g(16, 16);
    CHECK(parse_face_region("ellipse", g) == central_ellipse_region(g));
    CHECK(parse_face_region("ellipse:8,8,2.0,3.0", g) == ellipse_region(g, 8, 8, 2, 3));

    const auto rect = parse_face_region("rect:2,3,2,2", g);
    CHECK(rect == std::vector<std::size_t>{g.index_of(2, 3), g.index_of(2, 4), g.index_of(3, 3),
                                           g.index_of(3, 4)});

    CHECK(parse_face_region("cells:0, 17, 5", g) == std::vector<std::size_t>{0, 17, 5});

    CHECK_THROWS_AS(parse_face_region("blob", g), std::invalid_argument);
    CHECK_THROWS_AS(parse_face_region("rect:15,15,3,3", g), std::invalid_argument);
    CHECK_THROWS_AS(parse_face_region("cells:400", g), std::invalid_argument);
    CHECK_THROWS_AS(parse_face_region("ellipse:1,1", g), std::invalid_argument);
}

TEST_CASE("make_scenario wires the config into a validated scenario") {
    RunConfig cfg;
    cfg.grid_h = 12;
    cfg.grid_w = 12;
    cfg.face_region = "rect:4,4,3,3";
    cfg.noise_scale = 0.25;
    cfg.seed = 9;
    const SyntheticScenario scn = make_scenario(cfg);
    CHECK(scn.grid == PatchGrid(12, 12));
    CHECK(scn.face_region.size() == 9);
    CHECK(scn.noise_scale == 0.25);
    CHECK(scn.seed == 9);

    cfg.face_norm_ratio = 0.2;
    CHECK_THROWS_AS(make_scenario(cfg), std::invalid_argument);
}
