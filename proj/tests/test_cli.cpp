#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "anisodiff/initial_shapes.hpp"
#include "anisodiff/io.hpp"

using namespace anisodiff;
namespace fs = std::filesystem;

namespace {

const char* cli_path() { return ANISODIFF_CLI_PATH; }

fs::path work_dir() {
    const fs::path dir = fs::temp_directory_path() / "anisodiff_cli_test";
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args, const fs::path& stdout_file = {},
            const fs::path& stderr_file = {}) {
    std::string cmd = std::string("\"") + cli_path() + "\" " + args;
    if (!stdout_file.empty()) cmd += " > " + stdout_file.string();
    if (!stderr_file.empty()) cmd += " 2> " + stderr_file.string();
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream f(p);
    f << text;
}

} // namespace

TEST_CASE("help and argument errors") {
    CHECK(run_cli("--help", work_dir() / "help.txt") == 0);
    CHECK(run_cli("", work_dir() / "null.txt", work_dir() / "null_err.txt") == 2);
    CHECK(run_cli("evolve", work_dir() / "null.txt", work_dir() / "null_err.txt") == 2);
}

TEST_CASE("asymmetric energies are refused with exit code 2") {
    const fs::path dir = work_dir();
    const fs::path cfg = dir / "asym.conf";
    write_file(cfg, "anisotropy = { family = \"fourier\", c0 = 2.0, sin = [1.0] }\n"
                    "geometry = { shape = \"ellipse\", a = 2, b = 0.5, n = 16 }\n"
                    "scheme = { tau_rule = \"h^2\" }\n"
                    "run = { n_steps = 2 }\n");
    const fs::path err = dir / "asym_err.txt";
    CHECK(run_cli("evolve --config " + cfg.string(), dir / "asym_out.txt", err) == 2);
    CHECK(slurp(err).find("symmetry") != std::string::npos);
}

TEST_CASE("evolve emits snapshots, diagnostics and a summary") {
    const fs::path dir = work_dir();
    const fs::path cfg = dir / "run.conf";
    write_file(cfg,
               "anisotropy = { family = \"riemannian\", matrices = [[1, 0, 2]] }\n"
               "stabilizer = { mode = \"explicit\" }\n"
               "geometry = { shape = \"ellipse\", a = 2.0, b = 0.5, n = 16 }\n"
               "scheme = { variant = \"sp_implicit\", tau_rule = \"h^2\" }\n"
               "run = { n_steps = 5, snapshot_every = 2 }\n");

    const fs::path out_a = dir / "out_a";
    const fs::path out_b = dir / "out_b";
    fs::remove_all(out_a);
    fs::remove_all(out_b);
    const fs::path summary = dir / "summary.txt";
    CHECK(run_cli("evolve --config " + cfg.string() + " --out " + out_a.string(), summary) == 0);
    CHECK(run_cli("evolve --config " + cfg.string() + " --out " + out_b.string(),
                  dir / "summary_b.txt") == 0);

    CHECK(fs::exists(out_a / "diagnostics.csv"));
    CHECK(fs::exists(out_a / "snapshot_00000000.txt"));
    CHECK(fs::exists(out_a / "snapshot_00000004.txt"));
    CHECK(fs::exists(out_a / "snapshot_00000005.txt")); // final state
    CHECK(slurp(out_a / "diagnostics.csv") == slurp(out_b / "diagnostics.csv")); // deterministic

    const std::string line = slurp(summary);
    const auto pos = line.find("(max ");
    REQUIRE(pos != std::string::npos);
    CHECK(std::stod(line.substr(pos + 5)) <= 1e-11); // exact conservation shows in the summary

    // a snapshot read back through the CLI distance is at zero distance from itself
    const fs::path dist = dir / "dist.txt";
    const std::string snap = (out_a / "snapshot_00000004.txt").string();
    CHECK(run_cli("distance " + snap + " " + snap, dist) == 0);
    CHECK(std::stod(slurp(dist)) <= 1e-13);
}

TEST_CASE("numerical failures exit with code 3") {
    const fs::path dir = work_dir();
    const fs::path cfg = dir / "diverge.conf";
    write_file(cfg, "anisotropy = { family = \"lr_norm\", r = 4 }\n"
                    "geometry = { shape = \"ellipse\", a = 2, b = 0.5, n = 8 }\n"
                    "scheme = { tau = 10.0, max_iters = 1 }\n"
                    "run = { n_steps = 3 }\n");
    const fs::path err = dir / "diverge_err.txt";
    CHECK(run_cli("evolve --config " + cfg.string() + " --out " + (dir / "dv").string(),
                  dir / "diverge_out.txt", err) == 3);
    CHECK(slurp(err).find("step 1") != std::string::npos);
}

TEST_CASE("distance subcommand computes the symmetric difference") {
    const fs::path dir = work_dir();
    const fs::path a = dir / "sq_a.txt";
    const fs::path b = dir / "sq_b.txt";
    write_snapshot(a, PolygonalCurve({{0, 0}, {0, 1}, {1, 1}, {1, 0}}), 0.0);
    write_snapshot(b, PolygonalCurve({{0.5, 0}, {0.5, 1}, {1.5, 1}, {1.5, 0}}), 0.0);
    const fs::path out = dir / "dist_val.txt";
    CHECK(run_cli("distance " + a.string() + " " + b.string(), out) == 0);
    CHECK(std::stod(slurp(out)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("converge subcommand writes a convergence table") {
    const fs::path dir = work_dir();
    const fs::path cfg = dir / "conv.conf";
    write_file(cfg, "anisotropy = { family = \"isotropic\" }\n"
                    "stabilizer = { mode = \"constant\", k = 2.0 }\n"
                    "geometry = { shape = \"ellipse\", a = 2.0, b = 0.5, n = 8 }\n");
    const fs::path out = dir / "conv_out";
    fs::remove_all(out);
    const fs::path log = dir / "conv_log.txt";
    CHECK(run_cli("converge --config " + cfg.string() + " --t 0.125 --hexp 3,4,5 --ref-hexp 6 "
                      "--ref-tauexp 12 --out " +
                      out.string(),
                  log) == 0);
    std::ifstream f(out / "convergence.csv");
    std::string header, row1, row2;
    std::getline(f, header);
    std::getline(f, row1);
    std::getline(f, row2);
    CHECK(header == "h,tau,error,order");
    CHECK(row1.substr(0, 6) == "0.125,");
    CHECK(!row2.empty());
    CHECK(slurp(log).find("fitted_order") != std::string::npos);
}

TEST_CASE("k0 subcommand tabulates numeric and explicit values") {
    const fs::path dir = work_dir();
    const fs::path cfg = dir / "k0.conf";
    write_file(cfg, "anisotropy = { family = \"m_fold\", m = 2, beta = 0.3333333333333333 }\n");
    const fs::path csv = dir / "k0.csv";
    CHECK(run_cli("k0 --config " + cfg.string() + " --resolution 32 --out " + csv.string(),
                  dir / "k0_log.txt") == 0);

    std::ifstream f(csv);
    std::string header;
    std::getline(f, header);
    CHECK(header == "theta,k0,k_explicit,gap");
    int rows = 0;
    std::string line;
    while (std::getline(f, line)) {
        ++rows;
        std::stringstream ss(line);
        std::string theta, k0v, ke, gap;
        std::getline(ss, theta, ',');
        std::getline(ss, k0v, ',');
        std::getline(ss, ke, ',');
        std::getline(ss, gap, ',');
        CHECK(!ke.empty());
        CHECK(std::abs(std::stod(gap)) <= 1e-8 * (1.0 + std::stod(ke)));
    }
    CHECK(rows == 32);
}

TEST_CASE("frank subcommand emits the unit circle for the isotropic energy") {
    const fs::path dir = work_dir();
    const fs::path cfg = dir / "frank.conf";
    write_file(cfg, "anisotropy = { family = \"isotropic\" }\n");
    const fs::path poly = dir / "frank.txt";
    const fs::path svg = dir / "frank.svg";
    const fs::path log = dir / "frank_log.txt";
    CHECK(run_cli("frank --config " + cfg.string() + " --m 64 --out " + poly.string() +
                      " --svg " + svg.string(),
                  log) == 0);
    CHECK(slurp(log).find("convex true") != std::string::npos);
    CHECK(fs::exists(svg));

    std::ifstream f(poly);
    std::string tag_n, tag_t;
    std::size_t count;
    double time;
    f >> tag_n >> count >> tag_t >> time;
    CHECK(count == 64);
    for (std::size_t i = 0; i < count; ++i) {
        double x, y;
        f >> x >> y;
        CHECK(std::hypot(x, y) == doctest::Approx(1.0).epsilon(1e-14));
    }
}
