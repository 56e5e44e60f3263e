#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path work = fs::temp_directory_path() / "cphase_cli_test";

int run(const std::string& args) {
    const std::string cmd = std::string(CPHASE_CLI) + " " + args + " > " + (work / "stdout.txt").string() +
                            " 2> " + (work / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return status == 0 ? 0 : 1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Workdir {
    Workdir() { fs::create_directories(work); }
    ~Workdir() { fs::remove_all(work); }
};

}  // namespace

TEST_CASE("subcommands succeed and are reproducible") {
    Workdir w;
    const std::string d = work.string() + "/";

    REQUIRE(run("gen-data --points 40 --noise 0.3 --seed 4 --out " + d + "a.csv") == 0);
    REQUIRE(run("gen-data --points 40 --noise 0.3 --seed 4 --out " + d + "b.csv") == 0);
    CHECK(slurp(d + "a.csv") == slurp(d + "b.csv"));
    REQUIRE(run("gen-data --points 40 --noise 0.3 --seed 5 --out " + d + "c.csv") == 0);
    CHECK(slurp(d + "a.csv") != slurp(d + "c.csv"));

    REQUIRE(run("calibrate --data " + d + "a.csv --max-iters 20 --out " + d + "p.txt --report " + d + "r.txt") == 0);
    CHECK(slurp(d + "p.txt").find("c9=") != std::string::npos);
    CHECK(slurp(d + "r.txt").rfind("iteration,rmse\n", 0) == 0);

    REQUIRE(run("predict --n 1350 --egr 0.25 --phi 0.7 --p-ivc 3.6 --t-ivc 393 --soi 0 --step 0.1 --params " + d +
                "p.txt") == 0);
    const std::string pred = slurp(d + "stdout.txt");
    CHECK(pred.find("soc=") != std::string::npos);
    CHECK(pred.find("ca50_full=") != std::string::npos);

    REQUIRE(run("simulate --preset case2 --controller feedforward --out " + d + "s1.csv --metrics " + d + "m1.json") == 0);
    REQUIRE(run("simulate --preset case2 --controller feedforward --out " + d + "s2.csv --metrics " + d + "m2.json") == 0);
    CHECK(slurp(d + "s1.csv") == slurp(d + "s2.csv"));
    CHECK(slurp(d + "m1.json") == slurp(d + "m2.json"));
    CHECK(slurp(d + "s1.csv").rfind("cycle_index,time_s,soi_cmd", 0) == 0);

    REQUIRE(run("simulate --config " + std::string(CPHASE_SOURCE_DIR) + "/configs/custom_speed_ramp.json --out " + d +
                "s3.csv") == 0);

    REQUIRE(run("sensitivity --points 30 --out " + d + "sen.csv") == 0);
    CHECK(slurp(d + "sen.csv").find("T_IVC,5,") != std::string::npos);
    REQUIRE(run("sensitivity --data " + d + "a.csv --out " + d + "sen2.csv") == 0);

    REQUIRE(run("compare-soc --points 20 --step 0.1 --out " + d + "cmp1.csv") == 0);
    REQUIRE(run("compare-soc --points 20 --step 0.1 --out " + d + "cmp2.csv") == 0);
    CHECK(slurp(d + "cmp1.csv") == slurp(d + "cmp2.csv"));
}

TEST_CASE("errors exit nonzero with a diagnostic") {
    Workdir w;
    const std::string d = work.string() + "/";
    CHECK(run("") != 0);
    CHECK(run("calibrate --data " + d + "missing.csv") != 0);
    CHECK(slurp(d + "stderr.txt").find("error:") != std::string::npos);
    {
        std::ofstream bad(d + "bad.csv");
        bad << "N,EGR,phi,P_IVC,T_IVC,X_r,SOI,SOC_obs,CA50_obs\n1200,0.2,0.7,2,300,0.04,0,,oops\n";
    }
    CHECK(run("calibrate --data " + d + "bad.csv") != 0);
    CHECK(slurp(d + "stderr.txt").find("bad.csv:2") != std::string::npos);
    CHECK(run("simulate --preset case9") != 0);
    CHECK(run("simulate") != 0);
    CHECK(run("compare-soc --mode sideways") != 0);
    CHECK(run("predict --phi -1") != 0);
}
