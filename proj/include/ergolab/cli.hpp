#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "ergolab/catalog.hpp"

namespace ergolab::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
    kOk = 0,
    kConfigError = 2,
    kNumericalFailure = 3,
    kCheckFailed = 4,
    kOutputError = 5,
};

struct SimSection {
    double dt = 1e-3;
    double T = 1.0;
    std::size_t n_paths = 1000;
    std::string scheme = "auto";  // auto | unreflected | penalized | projected
    double n_penal = 64.0;
    Point x0;
    std::size_t record_stride = 10;
    std::vector<double> powers{2.0, 4.0};
};

struct MixingSection {
    double dt = 1e-2;
    double T = 5.0;
    std::size_t n_paths = 20000;
    Point x, y;  // empty: +-0.5 along every axis
    std::size_t record_stride = 10;
    double snr = 5.0;
};

struct BsdeSection {
    double dt = 1e-2;
    std::size_t cloud_size = 5000;
    double burn_in = 3.0;
    std::string basis = "auto";
    int degree = 6;
    double trunc_tol_rel = 1e-4;
    double alpha = 0.1;
    std::vector<double> alphas{0.2, 0.1, 0.05, 0.02, 0.01};
};

struct LongRunSection {
    double dt = 1e-2;
    double T = 50.0;
    std::size_t n_paths = 500;
    std::vector<Point> starts;  // empty: x_ref
};

struct PdeSection {
    std::size_t grid = 400;
    std::string mode = "ergodic";
    double alpha = 0.1;
    bool has_interval = false;
    double a = -1.0, b = 1.0;
};

struct ControlEvalSection {
    double dt = 1e-2;
    double T = 40.0;
    std::size_t n_paths = 1000;
    double burn_in_fraction = 0.5;
    std::string policy = "optimal";
    Point x0;
    bool compare_constants = true;
};

struct ToleranceSection {
    double lambda_pde = 2e-2;
    double lambda_long_run = 5e-2;
    double control = 5e-2;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::string output_dir;  // empty: $ERGOLAB_OUT, then ./ergolab_out
    std::size_t threads = 0;
    std::string model = "linear_ou";
    ParamMap model_params;
    std::string domain = "none";
    ParamMap domain_params;
    std::string driver;  // empty: hamiltonian with a control section, cosine otherwise
    ParamMap driver_params;
    std::string control;  // empty: no control problem
    ParamMap control_params;
    std::size_t check_pairs = kDefaultCheckPairs;
    SimSection sim;
    MixingSection mixing;
    BsdeSection bsde;
    LongRunSection long_run;
    PdeSection pde;
    ControlEvalSection control_eval;
    ToleranceSection tolerances;

    /// Throws ConfigError on unknown presets or out-of-range values.
    void validate() const;
};

/// Parses TOML text, applies dotted `key=value` overrides, then reads and validates the result.
/// Unknown keys are rejected.
ExperimentConfig parse_config(const std::string& toml_text, const std::vector<std::string>& overrides = {});
ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

/// Canonical form of the effective configuration; its hash identifies every artifact.
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// Entry point of the ergolab executable. Returns one of ExitCode.
int run(int argc, char** argv);

}  // namespace ergolab::cli
