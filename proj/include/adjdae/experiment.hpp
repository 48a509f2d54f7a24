/*
 * Experiment sweeps: a JSON config names a problem, a grid of (dt, T)
 * cells, one QoI and the adjoint path(s); run_experiment produces one row
 * per (dt, T, method) with the estimate, the reference error, the
 * effectivity and the per-term breakdown.
 *
 * Implemented in src/experiment.cpp.
 */
#pragma once

#include "adjdae.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace adjdae {

inline constexpr int experiment_schema_version = 1;

enum class MethodSelection { AdjointDAE, AdjointODE, Both };
enum class OutputFormat { Csv, Markdown };

/// A constant vector as written in a config; resolved against problem dimensions.
struct VectorSpec
{
    enum class Kind { Explicit, Blocks, Fill };
    Kind kind = Kind::Fill;
    Vec values; // explicit entries or block pattern
    double fill = 0.0;

    /// Expands to length `len`; throws DimensionMismatch on size conflicts.
    [[nodiscard]] Vec resolve(std::size_t len) const;
};

struct QoIConfig
{
    QoIKind kind = QoIKind::Cumulative;
    VectorSpec psi_y, psi_z, zeta_y, zeta_z;

    [[nodiscard]] QoISpec resolve(const DAEProblem &p) const;
};

struct ExperimentConfig
{
    int schema_version = experiment_schema_version;
    std::string title;
    std::string problem;
    ParamMap params;
    std::vector<double> dt;
    std::vector<double> T;
    QoIConfig qoi;
    MethodSelection method = MethodSelection::Both;
    std::size_t r = 0; // 0 selects the problem default
    ReferenceBackend reference = ReferenceBackend::Auto;
    RkSettings rk;
    NewtonSettings newton;
    std::size_t cancellation_parts = 0; // 0 disables the split diagnostic
    std::string output_path;
    OutputFormat format = OutputFormat::Csv;
    std::size_t jobs = 1;
};

/// Parses JSON text; throws ConfigError with the offending key.
[[nodiscard]] ExperimentConfig parse_config(const std::string &json_text);
/// Reads and parses a config file; throws IoError or ConfigError.
[[nodiscard]] ExperimentConfig load_config(const std::string &path);

struct ResultRow
{
    std::string problem;
    double dt = 0.0;
    double T = 0.0;
    std::string method; // "adjoint-dae" or "adjoint-ode"
    std::optional<double> estimate;
    std::optional<double> reference_error;
    std::optional<double> effectivity;
    std::vector<NamedTerm> terms;
    double wall_ms = 0.0;
    std::optional<double> qoi_numerical;
    bool unreliable = false;
    std::vector<NamedTerm> diagnostics; // cancellation split I1..Ik
    std::string error;                  // empty on success

    [[nodiscard]] bool ok() const noexcept { return error.empty(); }
};

struct ResultTable
{
    std::string title;
    std::vector<ResultRow> rows;

    [[nodiscard]] std::size_t failures() const;
};

/**
 * Runs every cell. Rows are ordered dt outer, T inner, method last,
 * regardless of `jobs`. Cell failures are recorded in the row's error.
 */
[[nodiscard]] ResultTable run_experiment(const ExperimentConfig &cfg);

/// CSV: problem,dt,T,method,estimate,reference_error,effectivity,term:...,wall_ms,
/// qoi_numerical,unreliable,diag:...,error. Numbers use %.16e.
[[nodiscard]] std::string to_csv(const ResultTable &table);
/// Inverse of to_csv; numeric fields round-trip bit-exactly.
[[nodiscard]] ResultTable parse_csv(const std::string &text);
/// Compact table: one line per (dt, T), estimate and E-Ratio per method.
[[nodiscard]] std::string to_markdown(const ResultTable &table);

/// Renders `table` in `format`; throws IoError for an empty table.
[[nodiscard]] std::string render(const ResultTable &table, OutputFormat format);
/// Writes the rendered table to `path`; throws IoError.
void emit_report(const ResultTable &table, OutputFormat format, const std::string &path);

[[nodiscard]] const char *to_string(MethodSelection m) noexcept;
[[nodiscard]] const char *to_string(OutputFormat f) noexcept;
[[nodiscard]] OutputFormat parse_format(const std::string &s);
[[nodiscard]] ReferenceBackend parse_backend(const std::string &s);

} // namespace adjdae
