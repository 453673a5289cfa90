#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "refmarket/abm.hpp"
#include "refmarket/dynamics.hpp"
#include "refmarket/policy.hpp"

namespace refmarket {

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& message, int line)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line)
    {
    }
    int line() const { return line_; }

private:
    int line_;
};

struct RawEntry {
    std::string value;
    int line = 0;
};

// Parsed but unvalidated document: section -> key -> entry.
struct RawConfig {
    std::map<std::string, std::map<std::string, RawEntry>> sections;
    std::map<std::string, int> section_lines;

    // "section.key" or a bare key that names exactly one schema key.
    void set(const std::string& key, const std::string& value);
    // Canonical text used for hashing: sorted sections and keys.
    std::string canonical() const;
};

RawConfig parse_ini(const std::string& text);

struct RunSettings {
    int periods = 20;
    int steady_starts = 100;
    int uniqueness_grid = 400;
    Tolerances tol = kTol;
};

struct PolicySettings {
    std::optional<AAPolicy> aa;
    std::optional<double> kappa;
    std::optional<double> lambda;
    std::vector<double> lambda_grid;
    std::vector<double> epsilon_grid;
};

struct ScenarioConfig {
    ValueDistribution F = ValueDistribution::two_point(0.0, 1.0, 0.5);
    GroupParams params;
    GroupState state;
    double w_min = 0.0;
    StepOptions opt;
    RunSettings run;
    PolicySettings policy;
    AbmConfig abm;  // scenario fields mirror the ones above
    std::uint64_t hash = 0;

    Scenario scenario() const { return {F, params, state, w_min, opt}; }
};

// Relative file references resolve against base_dir.
ScenarioConfig build_config(const RawConfig& raw, const std::string& base_dir = ".");
ScenarioConfig load_config(const std::string& path, RawConfig* raw_out = nullptr);

std::string config_grammar();

}  // namespace refmarket
