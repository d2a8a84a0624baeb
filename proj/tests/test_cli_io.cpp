#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "vpc/cli_io.hpp"
#include "vpc/verification.hpp"

using namespace vpc;

namespace {

const char* kMinimal = "T = 0.5\nlambda = 1e-3\nK = 10\n";

std::string tmp_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("vpc_cli_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

}  // namespace

TEST_CASE("minimal config takes defaults and resolves the kernel width") {
    const RunConfig c = parse_config_text(kMinimal);
    RunConfig ref;
    ref.eps_kernel = ref.h();
    CHECK(c == ref);
}

TEST_CASE("config round trip is exact") {
    RunConfig c = parse_config_text(kMinimal);
    c.dt = 0.1 / 3.0;
    c.lambda = 1.0 / 7.0;
    c.seed = 123456789012345ULL;
    c.n = 12;
    const RunConfig back = parse_config_text(serialize_config(c));
    CHECK(back == c);
    for (const auto& k : config_keys()) CHECK(serialize_config(c).find(k.name + "=") != std::string::npos);
}

TEST_CASE("config errors name the key and the line") {
    CHECK_THROWS_WITH(parse_config_text("T = 0.5\nlambda = -1\nK = 10\n", "run.cfg"),
                      doctest::Contains("run.cfg:2: lambda: lambda must be ≥ 0"));
    CHECK_THROWS_WITH(parse_config_text("T = 0.5\nlambda = 1\nK = 10\nwidth = 3\n", "run.cfg"),
                      doctest::Contains("run.cfg:4: width: unknown key"));
    CHECK_THROWS_WITH(parse_config_text("T = 0.5\nT = 0.6\nlambda = 1\nK = 10\n"), doctest::Contains("duplicate key"));
    CHECK_THROWS_WITH(parse_config_text("T = 0.5\nlambda = 1\n"), doctest::Contains("K: missing required key"));
    CHECK_THROWS_WITH(parse_config_text("T = 0.5\nlambda = abc\nK = 10\n"), doctest::Contains("cannot parse value"));
    CHECK_THROWS_WITH(parse_config_text("T = 0.5\nlambda\nK = 10\n"), doctest::Contains("expected key=value"));
    CHECK_THROWS_WITH(parse_config("/nonexistent/run.cfg"), doctest::Contains("cannot open"));
    try {
        parse_config_text("T = 0.5\nlambda = -1\nK = 10\n");
    } catch (const Error& e) {
        CHECK(e.code() == "config error");
        CHECK(error_line(e).rfind("error code=config error message=\"", 0) == 0);
    }
}

TEST_CASE("field csv and bin round trips") {
    RunConfig c = small_config();
    const ControlField B = twin_control(c) + gaussian_field(c, {1, 0, 0.3}, {0.1, 0, 0}, 0.6, 0.7, 2.0);
    std::stringstream csv;
    write_field_csv(csv, B);
    const ControlField a = read_field_csv(csv, c);
    CHECK(a.data == B.data);
    std::stringstream bin(std::ios::in | std::ios::out | std::ios::binary);
    write_field_bin(bin, B);
    const ControlField b = read_field_bin(bin, c);
    CHECK(b.data == B.data);

    RunConfig other = c;
    other.n = c.n + 1;
    other.eps_kernel = other.h();
    std::stringstream bin2(std::ios::in | std::ios::out | std::ios::binary);
    write_field_bin(bin2, B);
    CHECK_THROWS_WITH(read_field_bin(bin2, other), doctest::Contains("grid mismatch"));
    std::stringstream junk("not a field\n");
    CHECK_THROWS_WITH(read_field_csv(junk, c), doctest::Contains("bad header"));
}

TEST_CASE("forward and export-plot commands write their files") {
    const std::string dir = tmp_dir("forward");
    const std::string cfg = dir + "/run.cfg";
    {
        std::ofstream os(cfg);
        os << "T = 0.1\nlambda = 1e-3\nK = 10\ndt = 0.02\nn = 8\nn_particles = 300\n";
    }
    Command cmd;
    cmd.name = "forward";
    cmd.config_path = cfg;
    cmd.out_dir = dir + "/out";
    std::ostringstream log, err;
    CHECK(run_command(cmd, log, err) == 0);
    CHECK(err.str().empty());
    CHECK(std::filesystem::exists(cmd.out_dir + "/trajectory.csv"));
    CHECK(std::filesystem::exists(cmd.out_dir + "/diagnostics.csv"));
    std::ifstream diag(cmd.out_dir + "/diagnostics.csv");
    std::string header;
    std::getline(diag, header);
    CHECK(header.find("l1[mass]") != std::string::npos);

    cmd.name = "export-plot";
    CHECK(run_command(cmd, log, err) == 0);
    CHECK(std::filesystem::exists(cmd.out_dir + "/slice_0000.csv"));
    CHECK(std::filesystem::exists(cmd.out_dir + "/slice_0005.csv"));
}

TEST_CASE("command exit codes") {
    const std::string dir = tmp_dir("codes");
    std::ostringstream log, err;
    Command cmd;
    cmd.name = "forward";
    cmd.config_path = dir + "/missing.cfg";
    cmd.out_dir = dir;
    CHECK(run_command(cmd, log, err) == 2);
    CHECK(err.str().find("error code=config error") != std::string::npos);

    const std::string cfg = dir + "/run.cfg";
    {
        std::ofstream os(cfg);
        os << kMinimal;
    }
    cmd.config_path = cfg;
    cmd.name = "bogus";
    CHECK(run_command(cmd, log, err) == 2);
    cmd.name = "forward";
    cmd.format = "xml";
    CHECK(run_command(cmd, log, err) == 2);
    cmd.format = "csv";
    cmd.field_path = dir + "/nope.csv";
    err.str("");
    CHECK(run_command(cmd, log, err) == 3);
    CHECK(err.str().find("error code=io error") != std::string::npos);
}
