#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fm/channel.hpp"
#include "fm/environment.hpp"
#include "fm/linalg.hpp"
#include "fm/multiindex.hpp"

namespace fm {

// Parsed scenario configuration (JSON schema documented in the README).
// Complex scalars appear in the file as [re, im] pairs; matrices as nested
// row-major arrays of such pairs.

struct TransformSpec {
    enum class Kind { blocks, full_unitary, heff };
    Kind kind = Kind::blocks;
    ComplexMatrix A, B;   // kind == blocks
    ComplexMatrix W;      // kind == full_unitary
    ComplexMatrix H_eff;  // kind == heff
    double t = 0.0;       // kind == heff
};

struct EnvironmentSpec {
    GammaKind kind = GammaKind::vacuum;
    ComplexMatrix C;      // gaussian
    MultiIndex M;         // fock
    int N = 0;            // uniform
    ComplexMatrix sigma;  // explicit density matrix
};

struct EffectDescriptor {
    enum class Kind { matrix, coefficients };
    Kind kind = Kind::matrix;
    ComplexMatrix E;
    std::map<std::pair<MultiIndex, MultiIndex>, Complex> coeffs;
    bool trusted = false;
};

struct DynamicsSpec {
    enum class Kind { channel_step, gksl, postselect };
    Kind kind = Kind::channel_step;
    std::vector<double> t_grid;                // gksl
    std::optional<ComplexMatrix> hamiltonian;  // gksl
    EffectDescriptor effect;                   // postselect
};

struct InitialMoments {
    enum class Kind { fock_occupation, gaussian, explicit_terms };
    Kind kind = Kind::fock_occupation;
    MultiIndex M;
    ComplexMatrix C0;
    std::map<MonomialKey, Complex, CanonicalKeyOrder> terms;
};

struct ScenarioConfig {
    int schema_version = 1;
    int m = 0;
    int k = 0;
    TransformSpec transform;
    EnvironmentSpec environment;
    DynamicsSpec dynamics;
    InitialMoments initial;
    // Admission tolerance for the load-time constraint checks (--tolerance).
    double load_tolerance = kDefaultTol;
};

ScenarioConfig load_config(const std::string& path, double tolerance = kDefaultTol);
ScenarioConfig parse_config(const std::string& json_text, double tolerance = kDefaultTol);
std::string serialize_config(const ScenarioConfig& cfg);

// Materialize the channel pieces from a config (validates as it goes).
CorrelationTensor build_gamma(const ScenarioConfig& cfg);
ChannelSpec build_channel_spec(const ScenarioConfig& cfg, bool need_full_W = false);

// Initial moment <f_J^dagger f_I> under the configured initial state.
// explicit_terms: missing keys are zero except (empty,empty) which defaults
// to 1 (normalized state).
Complex initial_moment(const ScenarioConfig& cfg, const MultiIndex& J,
                       const MultiIndex& I);
ComplexVector initial_moment_vector(const ScenarioConfig& cfg,
                                    const std::vector<MonomialKey>& basis);

struct RunResult {
    std::vector<std::string> files_written;
};

// channel_step -> moments.csv; gksl -> trajectory.csv; postselect ->
// conditional_moments.csv. Byte-deterministic for a fixed config.
RunResult run_scenario(const ScenarioConfig& cfg, const std::string& out_dir);

// Oracle cross-validation of every formula family on this config's channel.
struct VerifyReport {
    std::map<std::string, double> deviations;
    double threshold = 1e-6;
    bool pass = false;
    std::uint64_t seed = 0;
    std::string to_json() const;
};

VerifyReport verify_scenario(const ScenarioConfig& cfg, std::uint64_t seed);

struct BenchmarkEntry {
    int m = 0;
    std::uint64_t D = 0;
    double assembly_seconds = 0.0;
    double expm_seconds = 0.0;
    std::optional<double> oracle_seconds;  // 2^{2m} contrast, only for m <= 3
};

struct BenchmarkReport {
    int k = 0;
    int repetitions = 1;
    std::vector<BenchmarkEntry> entries;
    std::string to_json() const;
};

BenchmarkReport run_benchmark(const std::vector<int>& m_list, int k, int repetitions,
                              std::uint64_t seed);

// Dilation / exterior-power / semigroup diagnostics for the secondquant
// subcommand (requires an H_eff transform for the semigroup probes).
std::string secondquant_report_json(const ScenarioConfig& cfg);

// Shared CSV formatting: fixed 17-significant-digit scientific notation.
std::string format_sig17(double x);
std::string csv_quote(const std::string& s);

} // namespace fm
