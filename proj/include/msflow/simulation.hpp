#pragma once

#include "msflow/basis_gmsfem.hpp"
#include "msflow/fields_io.hpp"
#include "msflow/impes.hpp"
#include "msflow/metrics.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace msflow {

/// A schema or cross-field violation, located by a JSON-pointer-like path.
struct Diagnostic {
    std::string path;
    std::string message;
};

/// Thrown by load_config when diagnostics were found.
class ConfigError : public InputError {
public:
    explicit ConfigError(std::vector<Diagnostic> diagnostics);
    const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

private:
    std::vector<Diagnostic> diagnostics_;
};

enum class MethodKind { reference, mmsfem, mgmsfem };
const char* method_kind_name(MethodKind kind);

struct MethodSpec {
    MethodKind kind = MethodKind::reference;
    Index3 factor{1, 1, 1};
    int offline = 0;
    int online = 0;
    int layers = -1; ///< oversampling layers for online sweeps, -1 for the default
    PostprocessMode postprocess = PostprocessMode::automatic;
    bool source_lift = true; ///< carry within-block source variation in the fixed offset

    /// Table label: Fine, MMsFEM or MGMsFEM(a+b).
    std::string label() const;
};

struct PermeabilitySpec {
    std::string source = "synthetic"; ///< synthetic or spe10
    SyntheticKind kind = SyntheticKind::channel;
    double contrast = 1e4;
    std::uint64_t seed = 1;
    std::filesystem::path path;
    Spe10Layout layout;
    bool swap_xy = false;
    std::optional<CellBox> sub_block;
};

struct CustomWell {
    std::string name;
    CellBox box;
    double rate = 0.0;
};

struct WellSpec {
    std::string kind = "case1"; ///< case1, case2, flow_through or custom
    double rate = 1.0;          ///< total injection rate (case1/case2)
    Axis axis = Axis::x;        ///< flow_through
    double velocity = 1.0;      ///< flow_through
    std::vector<CustomWell> custom;
};

struct TimeSpec {
    int steps = 200;
    double dt = 0.0;            ///< 0 derives dt from pore_volumes
    double pore_volumes = 1.0;
    int pressure_interval = 5;
    double cfl_safety = 0.9;
    int record_interval = 1;
    std::vector<int> checkpoints;
    double initial_saturation = 0.0;
};

struct OutputSpec {
    bool volumes = true;
    bool reference_errors = true; ///< also run the fine reference and report e_s
    std::filesystem::path cache_dir; ///< empty disables the basis cache
};

struct Config {
    Index3 cells{16, 16, 8};
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    PermeabilitySpec permeability;
    MethodSpec method;
    MobilityModel mobility;
    WellSpec wells;
    TimeSpec time;
    OutputSpec output;
    std::vector<MethodSpec> compare;
};

/// Parses JSON text. Returns all schema and cross-field diagnostics; the
/// config is usable only when the list is empty.
std::vector<Diagnostic> parse_config(const std::string& text, Config& config);
/// Reads and parses a file; throws ConfigError on any diagnostic.
Config load_config(const std::filesystem::path& path);
/// Full check without running, including the permeability source.
std::vector<Diagnostic> validate_config_file(const std::filesystem::path& path);

/// Parses "a+b" into offline and online counts.
std::pair<int, int> parse_basis_counts(const std::string& text);

/// Inputs shared by every method of one configuration.
struct Scenario {
    FineGrid grid;
    PermeabilityField kappa;
    WellSet wells;
    SourceSpec sources;
    double dt = 0.0;
};

Scenario build_scenario(const Config& config);
PermeabilityField load_permeability(const PermeabilitySpec& spec, Index3 cells);

struct RunResult {
    MethodSpec method;
    long dof = 0;
    double t_setup = 0.0;
    double t_sim = 0.0;
    TimeSeries series;
    std::optional<SaturationError> error;
    std::vector<double> residual_norms; ///< online sweeps
    std::vector<int> fallback_edges;    ///< limited-global edges seeded by the uniform trace
    std::vector<int> dropped;           ///< near-dependent functions left out of the coarse system
    double worst_coarse_conservation = 0.0;
    double worst_fine_conservation = 0.0;
    bool postprocessed = false;
};

/// Builds the multiscale space for a method (empty for the reference) and
/// runs the time loop.
RunResult run_method(const Scenario& scenario, const Config& config, const MethodSpec& method, int threads = 1);

/// Attaches e_s against a reference run.
void attach_error(RunResult& result, const RunResult& reference, const FineGrid& grid);

/// Run mode: the configured method (plus the reference when requested), artifacts under `out`.
std::vector<RunResult> run(const Config& config, const std::filesystem::path& out, int threads = 1);
/// Compare mode: reference plus every entry of `compare`, table under `out`.
std::vector<RunResult> compare(const Config& config, const std::filesystem::path& out, int threads = 1);

void write_water_cut(const std::filesystem::path& path, const RunResult& result);
void write_errors(const std::filesystem::path& path, const std::vector<RunResult>& results);
void write_timing(const std::filesystem::path& path, const RunResult& result);
void write_dof_report(const std::filesystem::path& path, const Config& config, const std::vector<RunResult>& results);
void write_table(const std::filesystem::path& path, const std::vector<RunResult>& results);

} // namespace msflow
