#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "sticky/error.hpp"
#include "sticky/experiment.hpp"

namespace {

enum Exit { Ok = 0, ConfigError = 2, SolverError = 3, SimulationError = 4 };

int exit_code(sticky::ErrorCode code) {
    using sticky::ErrorCode;
    switch (code) {
        case ErrorCode::ImaginaryAxisRoot:
        case ErrorCode::DegenerateSpectrum:
        case ErrorCode::SingularBoundary:
        case ErrorCode::NoConvergence:
        case ErrorCode::ParamsMismatch:
        case ErrorCode::InternalError:
            return SolverError;
        case ErrorCode::UnstableStep:
        case ErrorCode::RiccatiBlowup:
            return SimulationError;
        default:
            return ConfigError;
    }
}

int report(std::string_view code, const std::string& message, int status) {
    nlohmann::json rec = {{"error", code}, {"message", message}, {"exit_code", status}};
    std::cerr << rec.dump() << '\n';
    return status;
}

struct Options {
    std::string config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
};

void add_options(CLI::App* cmd, Options& opt) {
    cmd->add_option("config", opt.config, "experiment configuration (JSON)")->required();
    cmd->add_option("--out", opt.out, "output directory");
    cmd->add_option("--seed", opt.seed, "simulation seed");
    cmd->add_option("--threads", opt.threads, "simulation worker threads")->check(CLI::PositiveNumber);
}

int execute(const Options& opt, std::optional<sticky::Mode> mode) {
    try {
        sticky::ExperimentConfig cfg = sticky::load_config(opt.config);
        if (mode) cfg.mode = *mode;
        if (opt.out) cfg.outputs.directory = *opt.out;
        if (opt.seed) cfg.sim.config.seed = *opt.seed;
        if (opt.threads) cfg.sim.config.threads = *opt.threads;
        const auto artifacts = sticky::run_experiment(cfg);
        sticky::write_artifacts(artifacts, cfg.outputs.directory);
        for (const auto& [name, text] : artifacts) std::cout << cfg.outputs.directory << '/' << name << '\n';
        return Ok;
    } catch (const sticky::Error& e) {
        return report(sticky::to_string(e.code()), e.what(), exit_code(e.code()));
    } catch (const std::exception& e) {
        return report("INTERNAL_ERROR", e.what(), SolverError);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sticky-price mean-field game solver and simulator", "mfg-sticky"};
    app.require_subcommand(1);

    Options opt;
    std::optional<sticky::Mode> mode;
    add_options(app.add_subcommand("run", "run the mode named in the config"), opt);
    for (auto m : {sticky::Mode::Nash, sticky::Mode::Social, sticky::Mode::Compare, sticky::Mode::Table1,
                   sticky::Mode::Example1}) {
        const std::string name(sticky::to_string(m));
        auto* cmd = app.add_subcommand(name, "run with mode = " + name);
        add_options(cmd, opt);
        cmd->callback([&mode, m] { mode = m; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return ConfigError;
    }
    return execute(opt, mode);
}
