#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "sticky/model.hpp"
#include "sticky/nash.hpp"
#include "sticky/simulator.hpp"
#include "sticky/social.hpp"

namespace sticky {

enum class Mode { Nash, Social, Compare, Table1, Example1 };

std::string_view to_string(Mode mode) noexcept;
std::optional<Mode> parse_mode(std::string_view name) noexcept;

struct PopulationSpec {
    enum class Kind { Uniform, Gains, Mixture };
    Kind kind = Kind::Uniform;
    std::size_t n = 50;
    double b = 1.0;
    std::vector<double> gains;
    Mixture mixture;  ///< limit distribution (mixture kind, or optional for gains)
    std::uint64_t seed = 1;
    double theta_bound = 0.0;

    /// Population of size n (or of the listed gains).
    [[nodiscard]] Population build(std::optional<std::size_t> n_override = std::nullopt) const;
    [[nodiscard]] Mixture limit() const;
};

enum class Route { Auto, Spectral, FixedPoint };

struct SolverSpec {
    Route route = Route::Auto;
    FixedPointOptions fixed_point;
};

struct GapSpec {
    bool enabled = false;
    std::vector<std::size_t> ladder;
    std::size_t firm = 0;
};

struct PassivitySpec {
    bool enabled = false;
    std::size_t trials = 20;
    DeviationKind kind = DeviationKind::RandomOneFirm;
    double amplitude = 1.0;
};

struct SimSpec {
    bool enabled = false;
    SimConfig config;
    std::vector<std::size_t> mf_ladder;
    GapSpec gap;
    PassivitySpec passivity;
};

struct SweepSpec {
    std::string parameter;
    std::vector<double> values;
};

struct OutputSpec {
    std::string directory = "out";
    double dt = 0.05;
    double horizon = 0.0;  ///< 0 selects the simulation horizon
};

struct ExperimentConfig {
    Mode mode = Mode::Nash;
    MarketParams params;
    PopulationSpec population;
    InitialConditions init;
    SimSpec sim;
    SolverSpec solver;
    std::optional<SweepSpec> sweep;
    OutputSpec outputs;
};

/// Strict parse: `schema` must be 1 and unknown keys are rejected. Throws
/// sticky::Error (INVALID_CONFIG or a parameter-validation code).
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& config);

/// Setter for one scalar field of MarketParams by name.
void set_param(MarketParams& params, const std::string& name, double value);

struct SolutionSummary {
    std::string kind;  ///< "nash" or "social"
    MarketParams params;
    double price_inf = 0.0;
    double output_inf = 0.0;
    double j_inf = 0.0;
};

SolutionSummary summarize(const NashLimit& limit);
SolutionSummary summarize(const SocialLimit& limit);

struct ComparisonRecord {
    double price_nash = 0.0;
    double price_social = 0.0;
    double output_nash = 0.0;
    double output_social = 0.0;
    double j_nash = 0.0;
    double j_social = 0.0;
    double delta_price = 0.0;   ///< social - nash
    double delta_output = 0.0;
    double delta_j = 0.0;
    int sign_price = 0;
    int sign_output = 0;
    int sign_j = 0;
};

/// Throws PARAMS_MISMATCH when the two solutions were computed at different
/// parameters.
ComparisonRecord compare_report(const SolutionSummary& nash, const SolutionSummary& social);

/// In-memory artifacts: file name relative to the output directory -> text.
using Artifacts = std::map<std::string, std::string>;

/// Runs the experiment without touching the file system.
Artifacts run_experiment(const ExperimentConfig& config);

/// Writes artifacts under `directory`, creating it if needed.
void write_artifacts(const Artifacts& artifacts, const std::string& directory);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace sticky
