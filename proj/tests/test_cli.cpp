#include "homognet/homognet.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;
using homognet::json;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(HOMOGNET_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("homognet_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

const std::string kTrainArgs =
    "train --family matrix-sensing --m 6 --n 6 --rank 2 --N 120 --lambda 1e-3 "
    "--grad-tol 1e-7 --seed 7";

}  // namespace

TEST_CASE("train smoke run emits model, trace, certificate, manifest") {
    const fs::path out = fresh_dir("train");
    REQUIRE(run(kTrainArgs + " --out " + out.string()) == 0);
    for (const char* f : {"model.json", "trace.csv", "growth.csv", "certificate.json",
                          "manifest.json"})
        REQUIRE(fs::exists(out / f));

    const json manifest = json::parse(slurp(out / "manifest.json"));
    REQUIRE(manifest.at("command") == "train");
    // every emitted file is listed
    for (const auto& f : manifest.at("outputs")) REQUIRE(fs::exists(out / f.get<std::string>()));
    REQUIRE(manifest.at("config").contains("train.grad_tolerance"));

    const json cert = json::parse(slurp(out / "certificate.json"));
    REQUIRE(cert.at("value").get<double>() <= 1.0 + 1e-3);
    REQUIRE(cert.at("verdict") == "certified-global");
}

TEST_CASE("bound on the emitted model validates the documented report shape") {
    const fs::path tdir = fresh_dir("train_for_bound");
    REQUIRE(run(kTrainArgs + " --out " + tdir.string()) == 0);

    const fs::path bdir = fresh_dir("bound");
    REQUIRE(run("bound --model " + (tdir / "model.json").string() + " --delta 0.05 --out " +
                bdir.string()) == 0);
    const json rep = json::parse(slurp(bdir / "bound.json"));
    for (const char* key : {"family", "N", "delta", "ledger", "optimization_error",
                            "statistical_error", "total"})
        REQUIRE(rep.contains(key));
    for (const char* key : {"gamma", "omega_up", "eps1", "eps2", "r_theta", "L_phi", "R",
                            "dim_w", "delta_C", "B_C"})
        REQUIRE(rep.at("ledger").contains(key));
    REQUIRE(rep.at("total").get<double>() ==
            Catch::Approx(std::max(rep.at("optimization_error").get<double>(), 0.0) +
                          rep.at("statistical_error").get<double>()));
}

TEST_CASE("sandwich subcommand reports a holding sandwich") {
    const fs::path tdir = fresh_dir("train_for_sandwich");
    REQUIRE(run(kTrainArgs + " --out " + tdir.string()) == 0);
    const fs::path sdir = fresh_dir("sandwich");
    REQUIRE(run("sandwich --model " + (tdir / "model.json").string() + " --out " +
                sdir.string()) == 0);
    const json rep = json::parse(slurp(sdir / "sandwich.json"));
    REQUIRE(rep.at("ok").get<bool>());
}

TEST_CASE("usage errors exit 2 without partial outputs") {
    const fs::path out = fresh_dir("usage");
    // missing config file
    REQUIRE(run("train --config /nonexistent/config.json --out " + out.string()) == 2);
    REQUIRE_FALSE(fs::exists(out / "manifest.json"));
    // unknown family
    REQUIRE(run("train --family no-such-family --out " + out.string()) == 2);
    REQUIRE_FALSE(fs::exists(out / "manifest.json"));
    // unknown flag
    REQUIRE(run("train --definitely-not-a-flag 3 --out " + out.string()) == 2);
    // unknown subcommand
    REQUIRE(run("frobnicate") == 2);
    // bound without a model
    REQUIRE(run("bound --out " + out.string()) == 2);
}

TEST_CASE("numeric failures exit 1 with a machine-readable error record") {
    const fs::path out = fresh_dir("numfail");
    REQUIRE(run("train --lambda -1 --out " + out.string()) == 1);
    REQUIRE(fs::exists(out / "error.json"));
    const json err = json::parse(slurp(out / "error.json"));
    REQUIRE(err.contains("message"));
}

TEST_CASE("certify re-evaluates the polar of a saved model") {
    const fs::path tdir = fresh_dir("train_for_certify");
    REQUIRE(run(kTrainArgs + " --out " + tdir.string()) == 0);
    const fs::path cdir = fresh_dir("certify");
    REQUIRE(run("certify --model " + (tdir / "model.json").string() + " --out " +
                cdir.string()) == 0);
    const json fresh = json::parse(slurp(cdir / "certificate.json"));
    const json orig = json::parse(slurp(tdir / "certificate.json"));
    REQUIRE(fresh.at("value").get<double>() ==
            Catch::Approx(orig.at("value").get<double>()).epsilon(1e-12));
}

TEST_CASE("sweep subcommands emit their CSV tables") {
    const fs::path ldir = fresh_dir("sweep_lip");
    REQUIRE(run("sweep-lipschitz --family matrix-sensing --m 5 --n 5 --rank 2 --N 50 "
                "--lambda 1e-2 --seed 3 --widths 1,2 --out " +
                ldir.string()) == 0);
    const std::string lip = slurp(ldir / "lipschitz.csv");
    REQUIRE(lip.rfind("width,lipschitz_bound,teacher_bound,converged,failed", 0) == 0);
    REQUIRE(std::count(lip.begin(), lip.end(), '\n') == 3);  // header + 2 cells

    const fs::path rdir = fresh_dir("sweep_rate");
    REQUIRE(run("sweep-rate --family matrix-sensing --m 4 --n 4 --rank 1 --sigma 0.3 "
                "--lambda 2e-2 --seed 3 --N-grid 40,80,160,320 --reps 1 --M 1000 --out " +
                rdir.string()) == 0);
    const std::string rate = slurp(rdir / "rate.csv");
    REQUIRE(rate.rfind("N,mean_gap,std_error,bound_total,failed", 0) == 0);
    REQUIRE(std::count(rate.begin(), rate.end(), '\n') == 5);
}

TEST_CASE("HOMOGNET_SEED is the last-resort seed default") {
    const fs::path out = fresh_dir("env_seed");
    const std::string cmd = "HOMOGNET_SEED=4242 " + std::string(HOMOGNET_CLI_PATH) + " " +
                            kTrainArgs.substr(0, kTrainArgs.find("--seed")) + " --out " +
                            out.string() + " >/dev/null 2>&1";
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    const json manifest = json::parse(slurp(out / "manifest.json"));
    REQUIRE(manifest.at("config").at("seed").get<std::uint64_t>() == 4242);
}

TEST_CASE("--threads does not change results") {
    const fs::path a = fresh_dir("thr1");
    const fs::path b = fresh_dir("thr4");
    const std::string relu =
        "train --family two-layer-relu --m 5 --n 5 --rank 2 --N 60 --sigma 0.1 "
        "--lambda 2e-2 --seed 9 ";
    REQUIRE(run(relu + "--threads 1 --out " + a.string()) == 0);
    REQUIRE(run(relu + "--threads 4 --out " + b.string()) == 0);
    REQUIRE(slurp(a / "model.json") == slurp(b / "model.json"));
    REQUIRE(slurp(a / "certificate.json") == slurp(b / "certificate.json"));
}

TEST_CASE("identical config and seed reproduce byte-identical results") {
    const fs::path a = fresh_dir("det_a");
    const fs::path b = fresh_dir("det_b");
    // config file + flag override layering
    const fs::path cfg = fresh_dir("det_cfg") / "config.json";
    {
        json j;
        j["family"] = "matrix-sensing";
        j["m"] = 5;
        j["n"] = 5;
        j["rank"] = 1;
        j["N"] = 60;
        j["lambda"] = 1e-2;
        j["seed"] = 99;
        j["train.grad_tolerance"] = 1e-7;
        homognet::write_json_file(cfg.string(), j);
    }
    REQUIRE(run("train --config " + cfg.string() + " --out " + a.string()) == 0);
    REQUIRE(run("train --config " + cfg.string() + " --out " + b.string()) == 0);

    for (const char* f : {"model.json", "trace.csv", "growth.csv", "certificate.json"})
        REQUIRE(slurp(a / f) == slurp(b / f));

    // manifests agree once timing is stripped
    json ma = json::parse(slurp(a / "manifest.json"));
    json mb = json::parse(slurp(b / "manifest.json"));
    ma.erase("timing");
    mb.erase("timing");
    ma.at("config").erase("out_dir");
    mb.at("config").erase("out_dir");
    REQUIRE(ma == mb);

    // a flag override really overrides the file value
    const fs::path c = fresh_dir("det_c");
    REQUIRE(run("train --config " + cfg.string() + " --seed 100 --out " + c.string()) == 0);
    REQUIRE(slurp(a / "model.json") != slurp(c / "model.json"));
    const json mc = json::parse(slurp(c / "manifest.json"));
    REQUIRE(mc.at("config").at("seed").get<std::uint64_t>() == 100);
}
