#include "gsmotion/cli.hpp"
#include "gsmotion/config.hpp"
#include "gsmotion/image.hpp"
#include "support/tempdir.hpp"

#include <doctest.h>

#include <initializer_list>
#include <sstream>
#include <vector>

using namespace gsmotion;

namespace {

int run(std::initializer_list<std::string> args) {
    std::vector<std::string> owned{"gsmotion"};
    owned.insert(owned.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : owned) argv.push_back(a.c_str());
    return cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string row(const std::string& csv, int n) {
    std::istringstream is(csv);
    std::string l;
    for (int i = 0; i <= n; ++i) std::getline(is, l);
    return l;
}

const char* kBlob =
    "width = 64\nheight = 64\nkernel = 31.5, 31.5, 6, 6, 0, 1\nmotion = 0.25, 0\n";

const char* kQuickFit =
    "width = 41\nheight = 41\nkernel = 20, 20, 4.8, 4.8, 0, 1\nmotion = -0.01, -0.01\n"
    "initial_kernel_count = 40\nstage2_max_iterations = 150\nstage3_max_iterations = 60\nseed = 3\n";

}  // namespace

TEST_CASE("synth writes a 16-bit pair and a truth record") {
    TempDir dir;
    dir.write("ref.cfg", reference_scene_config());
    REQUIRE(run({"synth", "--config", (dir / "ref.cfg").string(), "--out", (dir / "a").string()}) == cli::kOk);
    const auto f1 = read_pgm(dir / "a/frame1.pgm");
    CHECK(f1.width() == 121);
    CHECK(f1.height() == 121);
    CHECK(f1.at(60, 60) == 65535);
    CHECK(slurp(dir / "a/truth.json").find("-0.01") != std::string::npos);

    REQUIRE(run({"synth", "--config", (dir / "ref.cfg").string(), "--out", (dir / "b").string()}) == cli::kOk);
    for (const char* f : {"frame1.pgm", "frame2.pgm", "truth.json"}) {
        CHECK(slurp(dir / (std::string("a/") + f)) == slurp(dir / (std::string("b/") + f)));
    }
}

TEST_CASE("synth rejects bad configs") {
    TempDir dir;
    dir.write("empty.cfg", "width = 8\nheight = 8\n");
    dir.write("typo.cfg", "width = 8\nheight = 8\nkernal = 1,1,1,1,0,1\n");
    CHECK(run({"synth", "--config", (dir / "empty.cfg").string(), "--out", (dir / "o").string()}) ==
          cli::kConfigError);
    CHECK(run({"synth", "--config", (dir / "typo.cfg").string(), "--out", (dir / "o").string()}) ==
          cli::kConfigError);
    CHECK(run({"synth", "--config", (dir / "missing.cfg").string(), "--out", (dir / "o").string()}) ==
          cli::kIoError);
}

TEST_CASE("usage errors") {
    CHECK(run({}) == cli::kUsage);
    CHECK(run({"frobnicate"}) == cli::kUsage);
    CHECK(run({"synth", "--config"}) == cli::kUsage);
    CHECK(run({"--help"}) == cli::kOk);
}

TEST_CASE("baseline command") {
    TempDir dir;
    dir.write("blob.cfg", kBlob);
    REQUIRE(run({"synth", "--config", (dir / "blob.cfg").string(), "--out", dir.path.string()}) == cli::kOk);
    const auto f1 = (dir / "frame1.pgm").string(), f2 = (dir / "frame2.pgm").string();

    REQUIRE(run({"baseline", "--method", "lucas-kanade", "--frame1", f1, "--frame2", f2, "--truth", "0.25,0", "--out",
                 (dir / "lk").string()}) == cli::kOk);
    const auto summary = row(slurp(dir / "lk/summary.csv"), 1);
    const auto median_error = std::stod(summary.substr(summary.rfind(',', summary.rfind(',') - 1) + 1));
    CHECK(median_error <= 0.05);
    CHECK(slurp(dir / "lk/flow.svg").find("<svg") != std::string::npos);
    CHECK(row(slurp(dir / "lk/flow.csv"), 0) == "x,y,u,v,valid");

    REQUIRE(run({"baseline", "--method", "horn-schunck", "--frame1", f1, "--frame2", f1, "--out",
                 (dir / "hs").string()}) == cli::kOk);
    CHECK(row(slurp(dir / "hs/summary.csv"), 1).find(",0.000000e+00,0.000000e+00,0.000000e+00,0.000000e+00,") !=
          std::string::npos);

    CHECK(run({"baseline", "--method", "phase", "--filters", "0", "--frame1", f1, "--frame2", f2, "--out",
               (dir / "ph").string()}) == cli::kConfigError);
    CHECK(run({"baseline", "--method", "phase", "--filters", "0,90", "--frame1", f1, "--frame2", f2, "--out",
               (dir / "ph").string()}) == cli::kOk);
    CHECK(run({"baseline", "--method", "sobel", "--frame1", f1, "--frame2", f2, "--out", (dir / "x").string()}) ==
          cli::kUsage);
    CHECK(run({"baseline", "--method", "phase", "--frame1", f1, "--frame2", (dir / "nope.pgm").string(), "--out",
               (dir / "x").string()}) == cli::kIoError);
}

TEST_CASE("fit command reports every case and is reproducible") {
    TempDir dir;
    dir.write("fit.cfg", kQuickFit);
    REQUIRE(run({"synth", "--config", (dir / "fit.cfg").string(), "--out", dir.path.string()}) == cli::kOk);
    const auto f1 = (dir / "frame1.pgm").string(), f2 = (dir / "frame2.pgm").string();
    auto fit = [&](const std::string& out, const std::string& cases) {
        return run({"fit", "--config", (dir / "fit.cfg").string(), "--frame1", f1, "--frame2", f2, "--cases", cases,
                    "--out", (dir / out).string()});
    };
    // the iteration budget is far too small for the L1 target
    CHECK(fit("a", "2") == cli::kConvergenceFailure);
    CHECK(fit("b", "2") == cli::kConvergenceFailure);
    const auto report = slurp(dir / "a/report.csv");
    CHECK(row(report, 1).rfind("1,", 0) == 0);
    CHECK(row(report, 2).rfind("2,", 0) == 0);
    CHECK(row(report, 1).find("not_converged") != std::string::npos);
    CHECK(row(report, 3).rfind("Average,", 0) == 0);
    for (const char* f : {"report.csv", "case1_motion.svg", "case2_motion.svg", "case1_stage2_trace.csv",
                          "case2_stage3_trace.csv"}) {
        CHECK(slurp(dir / (std::string("a/") + f)) == slurp(dir / (std::string("b/") + f)));
    }
    CHECK(slurp(dir / "a/provenance.json").find("\"seed\": 4") != std::string::npos);
    CHECK(slurp(dir / "a/case1_motion.svg").find("arrow_scale 500") != std::string::npos);

    CHECK(fit("c", "0") == cli::kConfigError);
    CHECK(run({"fit", "--config", (dir / "fit.cfg").string(), "--frame1", (dir / "none.pgm").string(), "--frame2", f2,
               "--out", (dir / "d").string()}) == cli::kIoError);
}
