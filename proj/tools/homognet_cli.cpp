// Command-line front end: training, certification, bound reports, sandwich
// checks, and the two sweeps. Configuration comes from a JSON file with flat
// dotted keys; command-line flags override file values; the fully resolved
// config lands in the run manifest so every run is self-describing.

#include "homognet/homognet.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace hn = homognet;
namespace fs = std::filesystem;
using hn::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct CliConfig {
    std::string family = "matrix-sensing";
    long m = 6, n = 6, T = 4;
    double temperature = 1.0;
    double gauge_s = 1.0;
    std::string gauge_name = "sparse_bounded";
    int rank = 2;
    double sigma = 0.0;
    long N = 120;
    long M = 0;
    double lambda = 1e-3;
    double delta = 0.05;
    std::uint64_t seed = 0;
    long max_iterations = 200000;
    double grad_tolerance = 1e-6;
    double initial_step = 1.0;
    double backtrack = 0.5;
    double armijo_c = 1e-4;
    int max_width = 8;
    double tau_polar = 1e-3;
    double growth_scale = 1e-4;
    double init_scale = 1e-4;
    int polar_restarts = 32;
    double g_radius = -1.0;
    double bernstein_c = 0.125;
    std::vector<int> widths = {1, 2, 4, 8};
    std::vector<long> n_grid = {250, 500, 1000, 2000, 4000};
    int repetitions = 5;
    int threads = 1;
    std::string out_dir = ".";
    std::string model_path;
};

json config_to_json(const CliConfig& c) {
    json j;
    j["family"] = c.family;
    j["m"] = c.m;
    j["n"] = c.n;
    j["T"] = c.T;
    j["temperature"] = c.temperature;
    j["gauge.name"] = c.gauge_name;
    j["gauge.s"] = c.gauge_s;
    j["rank"] = c.rank;
    j["sigma"] = c.sigma;
    j["N"] = c.N;
    j["M"] = c.M;
    j["lambda"] = c.lambda;
    j["delta"] = c.delta;
    j["seed"] = c.seed;
    j["train.max_iterations"] = c.max_iterations;
    j["train.grad_tolerance"] = c.grad_tolerance;
    j["train.initial_step"] = c.initial_step;
    j["train.backtrack"] = c.backtrack;
    j["train.armijo_c"] = c.armijo_c;
    j["train.max_width"] = c.max_width;
    j["train.tau_polar"] = c.tau_polar;
    j["train.growth_scale"] = c.growth_scale;
    j["train.init_scale"] = c.init_scale;
    j["train.polar_restarts"] = c.polar_restarts;
    j["bound.g_radius"] = c.g_radius;
    j["bound.bernstein_c"] = c.bernstein_c;
    j["sweep.widths"] = c.widths;
    j["sweep.n_grid"] = c.n_grid;
    j["sweep.repetitions"] = c.repetitions;
    j["threads"] = c.threads;
    j["out_dir"] = c.out_dir;
    if (!c.model_path.empty()) j["model"] = c.model_path;
    return j;
}

void apply_json(CliConfig& c, const json& j) {
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("family", c.family);
    get("m", c.m);
    get("n", c.n);
    get("T", c.T);
    get("temperature", c.temperature);
    get("gauge.name", c.gauge_name);
    get("gauge.s", c.gauge_s);
    get("rank", c.rank);
    get("sigma", c.sigma);
    get("N", c.N);
    get("M", c.M);
    get("lambda", c.lambda);
    get("delta", c.delta);
    get("seed", c.seed);
    get("train.max_iterations", c.max_iterations);
    get("train.grad_tolerance", c.grad_tolerance);
    get("train.initial_step", c.initial_step);
    get("train.backtrack", c.backtrack);
    get("train.armijo_c", c.armijo_c);
    get("train.max_width", c.max_width);
    get("train.tau_polar", c.tau_polar);
    get("train.growth_scale", c.growth_scale);
    get("train.init_scale", c.init_scale);
    get("train.polar_restarts", c.polar_restarts);
    get("bound.g_radius", c.g_radius);
    get("bound.bernstein_c", c.bernstein_c);
    get("sweep.widths", c.widths);
    get("sweep.n_grid", c.n_grid);
    get("sweep.repetitions", c.repetitions);
    get("threads", c.threads);
    get("out_dir", c.out_dir);
    get("model", c.model_path);
}

hn::FamilyTag make_tag(const CliConfig& c) {
    hn::FamilyTag tag;
    tag.kind = hn::family_from_name(c.family);
    tag.temperature = c.temperature;
    tag.gauge = c.gauge_name == "l2" ? hn::GaugeSpec::l2()
                                     : hn::GaugeSpec::sparse_bounded(c.gauge_s);
    return tag;
}

hn::TrainOptions make_train_options(const CliConfig& c) {
    hn::TrainOptions o;
    o.max_iterations = c.max_iterations;
    o.grad_tolerance = c.grad_tolerance;
    o.initial_step = c.initial_step;
    o.backtrack = c.backtrack;
    o.armijo_c = c.armijo_c;
    o.max_width = c.max_width;
    o.tau_polar = c.tau_polar;
    o.growth_scale = c.growth_scale;
    o.init_scale = c.init_scale;
    o.polar_restarts = c.polar_restarts;
    return o;
}

hn::ExperimentConfig make_experiment(const CliConfig& c) {
    hn::ExperimentConfig e;
    e.tag = make_tag(c);
    e.dims = {c.m, c.n, c.T};
    e.teacher = hn::make_teacher(e.tag, e.dims, c.rank, c.sigma, hn::derive_seed(c.seed, 0x7eacull));
    e.N = c.N;
    e.M = c.M;
    e.lambda = c.lambda;
    e.delta = c.delta;
    e.seed = c.seed;
    e.widths = c.widths;
    e.n_grid = c.n_grid;
    e.repetitions = c.repetitions;
    e.train = make_train_options(c);
    e.g_radius = c.g_radius;
    e.bernstein_c = c.bernstein_c;
    return e;
}

struct RunContext {
    std::string command;
    CliConfig cfg;
    fs::path out;
    std::vector<std::string> outputs;
    std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
    std::string started_utc;

    RunContext(std::string cmd, const CliConfig& c) : command(std::move(cmd)), cfg(c), out(c.out_dir) {
        fs::create_directories(out);
        const auto now = std::chrono::system_clock::now();
        const std::time_t tt = std::chrono::system_clock::to_time_t(now);
        char buf[64];
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
        started_utc = buf;
    }

    void emit_json(const std::string& name, const json& j) {
        hn::write_json_file((out / name).string(), j);
        outputs.push_back(name);
    }
    void emit_text(const std::string& name, const std::string& text) {
        hn::write_text_file((out / name).string(), text);
        outputs.push_back(name);
    }

    /// The manifest lists every emitted file and is always written last.
    void finish() {
        json manifest;
        manifest["command"] = command;
        manifest["config"] = config_to_json(cfg);
        manifest["outputs"] = outputs;
        manifest["versions"] = {{"homognet", kVersion}, {"format", 1}};
        const auto wall =
            std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - started)
                .count();
        manifest["timing"] = {{"started_utc", started_utc}, {"wall_ms", wall}};
        hn::write_json_file((out / "manifest.json").string(), manifest);
    }
};

json model_bundle(const hn::ParallelModel& model, const hn::TeacherSpec& teacher, long N,
                  std::uint64_t seed) {
    json j;
    j["model"] = hn::model_to_json(model);
    j["data"] = {{"teacher", hn::teacher_to_json(teacher)}, {"N", N}, {"seed", seed}};
    return j;
}

struct LoadedBundle {
    hn::ParallelModel model;
    hn::Dataset dataset;
};

LoadedBundle load_bundle(const std::string& path) {
    const json j = hn::read_json_file(path);
    LoadedBundle b;
    b.model = hn::model_from_json(j.at("model"));
    const hn::TeacherSpec teacher = hn::teacher_from_json(j.at("data").at("teacher"));
    b.dataset = hn::generate(teacher.tag, teacher, j.at("data").at("N").get<long>(),
                             j.at("data").at("seed").get<std::uint64_t>());
    return b;
}

int run_train(const CliConfig& cfg) {
    const hn::ExperimentConfig exp = make_experiment(cfg);
    const hn::Dataset ds = hn::generate(exp.tag, exp.teacher, exp.N, exp.seed);
    hn::MetaTrainResult res = hn::meta_train(ds, exp.tag, exp.dims, exp.lambda, exp.train, exp.seed);

    RunContext ctx("train", cfg);
    ctx.emit_json("model.json", model_bundle(res.model, exp.teacher, exp.N, exp.seed));
    ctx.emit_text("trace.csv", hn::trace_csv(res.trace));
    ctx.emit_text("growth.csv", hn::growth_csv(res.trace));
    ctx.emit_json("certificate.json", hn::certificate_to_json(res.certificate));
    ctx.finish();
    std::cout << "width " << res.model.width() << ", polar "
              << hn::format_double(res.certificate.value) << ", verdict "
              << hn::verdict_name(res.certificate.verdict) << "\n";
    return 0;
}

int run_certify(const CliConfig& cfg) {
    LoadedBundle b = load_bundle(cfg.model_path);
    const hn::PolarCertificate cert =
        hn::compute_polar(b.dataset, b.model, cfg.tau_polar, cfg.polar_restarts);
    RunContext ctx("certify", cfg);
    ctx.emit_json("certificate.json", hn::certificate_to_json(cert));
    ctx.finish();
    std::cout << "polar " << hn::format_double(cert.value) << ", verdict "
              << hn::verdict_name(cert.verdict) << "\n";
    return 0;
}

int run_bound(const CliConfig& cfg) {
    LoadedBundle b = load_bundle(cfg.model_path);
    const hn::PolarCertificate cert =
        hn::compute_polar(b.dataset, b.model, cfg.tau_polar, cfg.polar_restarts);
    const hn::BoundReport rep =
        hn::bound_report(b.dataset, b.model, cert, cfg.delta, cfg.g_radius, cfg.bernstein_c);
    RunContext ctx("bound", cfg);
    ctx.emit_json("bound.json", hn::report_to_json(rep));
    ctx.finish();
    std::cout << "total " << hn::format_double(rep.total) << "\n";
    return 0;
}

int run_sandwich(const CliConfig& cfg) {
    LoadedBundle b = load_bundle(cfg.model_path);
    const hn::SandwichReport rep = hn::sandwich_check(b.dataset, b.model, b.model.lambda);
    RunContext ctx("sandwich", cfg);
    ctx.emit_json("sandwich.json", hn::sandwich_to_json(rep));
    ctx.finish();
    std::cout << (rep.ok() ? "sandwich holds" : "sandwich VIOLATED") << "\n";
    return rep.ok() ? 0 : 1;
}

int run_sweep_lipschitz(const CliConfig& cfg) {
    const auto rows = hn::lipschitz_sweep(make_experiment(cfg));
    RunContext ctx("sweep-lipschitz", cfg);
    ctx.emit_text("lipschitz.csv", hn::lipschitz_csv(rows));
    ctx.finish();
    std::cout << rows.size() << " cells\n";
    return 0;
}

int run_sweep_rate(const CliConfig& cfg) {
    const auto rows = hn::rate_sweep(make_experiment(cfg));
    RunContext ctx("sweep-rate", cfg);
    ctx.emit_text("rate.csv", hn::rate_csv(rows));
    ctx.finish();
    std::cout << rows.size() << " cells\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"parallel positively homogeneous network toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    CliConfig cfg;
    if (const char* env_seed = std::getenv("HOMOGNET_SEED"))
        cfg.seed = std::strtoull(env_seed, nullptr, 10);

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file (flat dotted keys)");
        sub->add_option("--out", cfg.out_dir, "output directory");
        sub->add_option("--seed", cfg.seed, "master seed");
        sub->add_option("--threads", cfg.threads, "cap on internal parallelism");
        sub->add_option("--family", cfg.family,
                        "matrix-sensing | structured-matrix-sensing | two-layer-linear | "
                        "two-layer-relu | multi-head-attention");
        sub->add_option("--m", cfg.m);
        sub->add_option("--n", cfg.n);
        sub->add_option("--T", cfg.T);
        sub->add_option("--temperature", cfg.temperature);
        sub->add_option("--gauge-s", cfg.gauge_s);
        sub->add_option("--gauge", cfg.gauge_name, "l2 | sparse_bounded");
        sub->add_option("--rank", cfg.rank, "teacher rank r*");
        sub->add_option("--sigma", cfg.sigma, "teacher noise scale");
        sub->add_option("--N", cfg.N);
        sub->add_option("--M", cfg.M, "held-out size (0 = auto)");
        sub->add_option("--lambda", cfg.lambda);
        sub->add_option("--delta", cfg.delta);
        sub->add_option("--max-iter", cfg.max_iterations);
        sub->add_option("--grad-tol", cfg.grad_tolerance);
        sub->add_option("--step0", cfg.initial_step);
        sub->add_option("--R-max", cfg.max_width);
        sub->add_option("--tau-polar", cfg.tau_polar);
        sub->add_option("--growth-scale", cfg.growth_scale);
        sub->add_option("--init-scale", cfg.init_scale);
        sub->add_option("--restarts", cfg.polar_restarts);
        sub->add_option("--g-radius", cfg.g_radius);
        sub->add_option("--bernstein-c", cfg.bernstein_c);
        sub->add_option("--widths", cfg.widths)->delimiter(',');
        sub->add_option("--N-grid", cfg.n_grid)->delimiter(',');
        sub->add_option("--reps", cfg.repetitions);
        return sub;
    };

    CLI::App* c_train = add_common(app.add_subcommand("train", "meta-train and certify"));
    CLI::App* c_certify = add_common(app.add_subcommand("certify", "re-certify a saved model"));
    CLI::App* c_bound = add_common(app.add_subcommand("bound", "generalization bound report"));
    CLI::App* c_sandwich = add_common(app.add_subcommand("sandwich", "Theorem-1 sandwich check"));
    CLI::App* c_slip = add_common(app.add_subcommand("sweep-lipschitz", "width sweep"));
    CLI::App* c_srate = add_common(app.add_subcommand("sweep-rate", "sample-size sweep"));
    for (CLI::App* sub : {c_certify, c_bound, c_sandwich})
        sub->add_option("--model", cfg.model_path, "model.json produced by train");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    // Precedence: defaults < config file < flags. Re-parse the flags on top of
    // the file-loaded config.
    if (!config_path.empty()) {
        if (!fs::exists(config_path)) {
            std::cerr << "config file not found: " << config_path << "\n";
            return 2;
        }
        CliConfig merged;
        if (const char* env_seed = std::getenv("HOMOGNET_SEED"))
            merged.seed = std::strtoull(env_seed, nullptr, 10);
        try {
            apply_json(merged, hn::read_json_file(config_path));
        } catch (const std::exception& e) {
            std::cerr << "bad config file: " << e.what() << "\n";
            return 2;
        }
        // CLI11 already wrote parsed flags into cfg; keep file values for
        // everything the user did not pass explicitly.
        CliConfig flag_values = cfg;
        CLI::App* active = app.get_subcommands().front();
        auto passed = [&](const std::string& name) {
            const CLI::Option* o = active->get_option_no_throw(name);
            return o != nullptr && o->count() > 0;
        };
        CliConfig out = merged;
        if (passed("--out")) out.out_dir = flag_values.out_dir;
        if (passed("--seed")) out.seed = flag_values.seed;
        if (passed("--threads")) out.threads = flag_values.threads;
        if (passed("--family")) out.family = flag_values.family;
        if (passed("--m")) out.m = flag_values.m;
        if (passed("--n")) out.n = flag_values.n;
        if (passed("--T")) out.T = flag_values.T;
        if (passed("--temperature")) out.temperature = flag_values.temperature;
        if (passed("--gauge-s")) out.gauge_s = flag_values.gauge_s;
        if (passed("--gauge")) out.gauge_name = flag_values.gauge_name;
        if (passed("--rank")) out.rank = flag_values.rank;
        if (passed("--sigma")) out.sigma = flag_values.sigma;
        if (passed("--N")) out.N = flag_values.N;
        if (passed("--M")) out.M = flag_values.M;
        if (passed("--lambda")) out.lambda = flag_values.lambda;
        if (passed("--delta")) out.delta = flag_values.delta;
        if (passed("--max-iter")) out.max_iterations = flag_values.max_iterations;
        if (passed("--grad-tol")) out.grad_tolerance = flag_values.grad_tolerance;
        if (passed("--step0")) out.initial_step = flag_values.initial_step;
        if (passed("--R-max")) out.max_width = flag_values.max_width;
        if (passed("--tau-polar")) out.tau_polar = flag_values.tau_polar;
        if (passed("--growth-scale")) out.growth_scale = flag_values.growth_scale;
        if (passed("--init-scale")) out.init_scale = flag_values.init_scale;
        if (passed("--restarts")) out.polar_restarts = flag_values.polar_restarts;
        if (passed("--g-radius")) out.g_radius = flag_values.g_radius;
        if (passed("--bernstein-c")) out.bernstein_c = flag_values.bernstein_c;
        if (passed("--widths")) out.widths = flag_values.widths;
        if (passed("--N-grid")) out.n_grid = flag_values.n_grid;
        if (passed("--reps")) out.repetitions = flag_values.repetitions;
        if (passed("--model")) out.model_path = flag_values.model_path;
        cfg = out;
    }

    hn::detail::thread_cap() = std::max(1, cfg.threads);

    const CLI::App* active = app.get_subcommands().front();
    const std::string cmd = active->get_name();
    if ((cmd == "certify" || cmd == "bound" || cmd == "sandwich")) {
        if (cfg.model_path.empty()) {
            std::cerr << cmd << " needs --model (or \"model\" in the config)\n";
            return 2;
        }
        if (!fs::exists(cfg.model_path)) {
            std::cerr << "model file not found: " << cfg.model_path << "\n";
            return 2;
        }
    }

    try {
        hn::family_from_name(cfg.family);  // usage-level validation
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (cmd == "train") return run_train(cfg);
        if (cmd == "certify") return run_certify(cfg);
        if (cmd == "bound") return run_bound(cfg);
        if (cmd == "sandwich") return run_sandwich(cfg);
        if (cmd == "sweep-lipschitz") return run_sweep_lipschitz(cfg);
        if (cmd == "sweep-rate") return run_sweep_rate(cfg);
        std::cerr << "unknown subcommand\n";
        return 2;
    } catch (const std::exception& e) {
        json err;
        err["error"] = std::string(typeid(e).name());
        err["message"] = e.what();
        try {
            fs::create_directories(cfg.out_dir);
            hn::write_json_file((fs::path(cfg.out_dir) / "error.json").string(), err);
        } catch (...) {
        }
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
