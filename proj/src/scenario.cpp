#include "fm/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/SVD>

#include "json.hpp"

#include "fm/errors.hpp"
#include "fm/fock_oracle.hpp"
#include "fm/gksl.hpp"
#include "fm/postselect.hpp"
#include "fm/random.hpp"
#include "fm/secondquant.hpp"

namespace fm {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw validation_error(msg); }

const json& need(const json& j, const char* field, const std::string& ctx) {
    if (!j.is_object())
        fail("config: " + ctx + " must be a JSON object");
    auto it = j.find(field);
    if (it == j.end())
        fail("config: missing field '" + std::string(field) + "' in " + ctx);
    return *it;
}

double get_number(const json& j, const std::string& ctx) {
    if (!j.is_number()) fail("config: " + ctx + " must be a number");
    return j.get<double>();
}

int get_int(const json& j, const std::string& ctx) {
    if (!j.is_number_integer()) fail("config: " + ctx + " must be an integer");
    return j.get<int>();
}

std::string get_string(const json& j, const std::string& ctx) {
    if (!j.is_string()) fail("config: " + ctx + " must be a string");
    return j.get<std::string>();
}

bool get_bool(const json& j, const std::string& ctx) {
    if (!j.is_boolean()) fail("config: " + ctx + " must be a boolean");
    return j.get<bool>();
}

Complex get_complex(const json& j, const std::string& ctx) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        fail("config: " + ctx + " must be a [re, im] pair");
    return {j[0].get<double>(), j[1].get<double>()};
}

ComplexMatrix get_matrix(const json& j, const std::string& ctx) {
    if (!j.is_array() || j.empty())
        fail("config: " + ctx + " must be a nonempty array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    Eigen::Index cols = -1;
    ComplexMatrix M;
    for (Eigen::Index r = 0; r < rows; ++r) {
        const json& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || row.empty())
            fail("config: " + ctx + " rows must be nonempty arrays");
        if (cols < 0) {
            cols = static_cast<Eigen::Index>(row.size());
            M.resize(rows, cols);
        } else if (static_cast<Eigen::Index>(row.size()) != cols) {
            fail("config: " + ctx + " rows must all have the same length");
        }
        for (Eigen::Index c = 0; c < cols; ++c)
            M(r, c) = get_complex(row[static_cast<std::size_t>(c)],
                                  ctx + " entry (" + std::to_string(r) + "," + std::to_string(c) + ")");
    }
    require_finite(M, ctx.c_str());
    return M;
}

ComplexMatrix get_square_matrix(const json& j, Eigen::Index n, const std::string& ctx) {
    ComplexMatrix M = get_matrix(j, ctx);
    if (M.rows() != n || M.cols() != n)
        fail("config: " + ctx + " must be " + std::to_string(n) + "x" + std::to_string(n));
    return M;
}

MultiIndex get_multiindex(const json& j, int m, const std::string& ctx) {
    if (!j.is_array()) fail("config: " + ctx + " must be an array of mode labels");
    std::vector<int> entries;
    entries.reserve(j.size());
    for (const json& e : j) entries.push_back(get_int(e, ctx + " entry"));
    try {
        return make_multiindex(std::move(entries), m);
    } catch (const validation_error& e) {
        fail("config: " + ctx + ": " + e.what());
    }
}

json dump_complex(Complex z) { return json::array({z.real(), z.imag()}); }

json dump_matrix(const ComplexMatrix& M) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(dump_complex(M(r, c)));
        rows.push_back(std::move(row));
    }
    return rows;
}

json dump_multiindex(const MultiIndex& idx) {
    json a = json::array();
    for (int x : idx) a.push_back(x);
    return a;
}

void parse_transform(const json& j, ScenarioConfig& cfg) {
    const std::string kind = get_string(need(j, "kind", "transform"), "transform.kind");
    const auto m = static_cast<Eigen::Index>(cfg.m);
    if (kind == "blocks") {
        cfg.transform.kind = TransformSpec::Kind::blocks;
        cfg.transform.A = get_square_matrix(need(j, "A", "transform"), m, "transform.A");
        cfg.transform.B = get_square_matrix(need(j, "B", "transform"), m, "transform.B");
    } else if (kind == "full_unitary") {
        cfg.transform.kind = TransformSpec::Kind::full_unitary;
        cfg.transform.W = get_square_matrix(need(j, "W", "transform"), 2 * m, "transform.W");
    } else if (kind == "heff") {
        cfg.transform.kind = TransformSpec::Kind::heff;
        cfg.transform.H_eff = get_square_matrix(need(j, "H_eff", "transform"), m, "transform.H_eff");
        cfg.transform.t = get_number(need(j, "t", "transform"), "transform.t");
        if (!(cfg.transform.t >= 0.0)) fail("config: transform.t must be nonnegative");
    } else {
        fail("config: transform.kind must be one of blocks|full_unitary|heff");
    }
}

void parse_environment(const json& j, ScenarioConfig& cfg) {
    const std::string kind = get_string(need(j, "kind", "environment"), "environment.kind");
    const auto m = static_cast<Eigen::Index>(cfg.m);
    if (kind == "vacuum") {
        cfg.environment.kind = GammaKind::vacuum;
    } else if (kind == "gaussian") {
        cfg.environment.kind = GammaKind::gaussian;
        cfg.environment.C = get_square_matrix(need(j, "C", "environment"), m, "environment.C");
    } else if (kind == "fock") {
        cfg.environment.kind = GammaKind::fock;
        cfg.environment.M = get_multiindex(need(j, "M", "environment"), cfg.m, "environment.M");
    } else if (kind == "uniform") {
        cfg.environment.kind = GammaKind::uniform;
        cfg.environment.N = get_int(need(j, "N", "environment"), "environment.N");
        if (cfg.environment.N < 0 || cfg.environment.N > cfg.m)
            fail("config: environment.N must lie in [0, modes]");
    } else if (kind == "explicit") {
        cfg.environment.kind = GammaKind::explicit_table;
        if (cfg.m > oracle::kMaxExpansionModes)
            throw resource_error(
                "config: an explicit environment density needs the brute-force table, "
                "which is guarded to modes <= " + std::to_string(oracle::kMaxExpansionModes));
        const auto dim = static_cast<Eigen::Index>(1) << cfg.m;
        cfg.environment.sigma = get_square_matrix(need(j, "sigma", "environment"), dim, "environment.sigma");
    } else {
        fail("config: environment.kind must be one of vacuum|gaussian|fock|uniform|explicit");
    }
}

void parse_effect(const json& j, ScenarioConfig& cfg) {
    EffectDescriptor& eff = cfg.dynamics.effect;
    const std::string kind = get_string(need(j, "kind", "dynamics.effect"), "dynamics.effect.kind");
    if (kind == "matrix") {
        eff.kind = EffectDescriptor::Kind::matrix;
        if (cfg.m > oracle::kMaxExpansionModes)
            throw resource_error(
                "config: a matrix effect needs the brute-force expansion, which is guarded "
                "to modes <= " + std::to_string(oracle::kMaxExpansionModes));
        const auto dim = static_cast<Eigen::Index>(1) << cfg.m;
        eff.E = get_square_matrix(need(j, "E", "dynamics.effect"), dim, "dynamics.effect.E");
    } else if (kind == "coefficients") {
        eff.kind = EffectDescriptor::Kind::coefficients;
        const json& terms = need(j, "terms", "dynamics.effect");
        if (!terms.is_array()) fail("config: dynamics.effect.terms must be an array");
        for (const json& term : terms) {
            MultiIndex M = get_multiindex(need(term, "M", "an effect term"), cfg.m, "effect term M");
            MultiIndex N = get_multiindex(need(term, "N", "an effect term"), cfg.m, "effect term N");
            Complex v = get_complex(need(term, "value", "an effect term"), "effect term value");
            eff.coeffs[{std::move(M), std::move(N)}] = v;
        }
        eff.trusted = j.contains("trusted") ? get_bool(j["trusted"], "dynamics.effect.trusted") : false;
    } else {
        fail("config: dynamics.effect.kind must be one of matrix|coefficients");
    }
}

void parse_dynamics(const json& j, ScenarioConfig& cfg) {
    const std::string kind = get_string(need(j, "kind", "dynamics"), "dynamics.kind");
    const auto m = static_cast<Eigen::Index>(cfg.m);
    if (kind == "channel_step") {
        cfg.dynamics.kind = DynamicsSpec::Kind::channel_step;
    } else if (kind == "gksl") {
        cfg.dynamics.kind = DynamicsSpec::Kind::gksl;
        const json& grid = need(j, "t_grid", "dynamics");
        if (!grid.is_array() || grid.empty())
            fail("config: dynamics.t_grid must be a nonempty array of times");
        double prev = -1.0;
        for (const json& e : grid) {
            double t = get_number(e, "dynamics.t_grid entry");
            if (t < 0.0) fail("config: dynamics.t_grid entries must be nonnegative");
            if (t <= prev) fail("config: dynamics.t_grid must be strictly increasing");
            cfg.dynamics.t_grid.push_back(t);
            prev = t;
        }
        if (j.contains("hamiltonian"))
            cfg.dynamics.hamiltonian = get_square_matrix(j["hamiltonian"], m, "dynamics.hamiltonian");
    } else if (kind == "postselect") {
        cfg.dynamics.kind = DynamicsSpec::Kind::postselect;
        parse_effect(need(j, "effect", "dynamics"), cfg);
    } else {
        fail("config: dynamics.kind must be one of channel_step|gksl|postselect");
    }
}

void parse_initial(const json& j, ScenarioConfig& cfg) {
    const std::string kind = get_string(need(j, "kind", "initial_moments"), "initial_moments.kind");
    const auto m = static_cast<Eigen::Index>(cfg.m);
    if (kind == "fock_occupation") {
        cfg.initial.kind = InitialMoments::Kind::fock_occupation;
        cfg.initial.M = get_multiindex(need(j, "M", "initial_moments"), cfg.m, "initial_moments.M");
    } else if (kind == "gaussian") {
        cfg.initial.kind = InitialMoments::Kind::gaussian;
        cfg.initial.C0 = get_square_matrix(need(j, "C0", "initial_moments"), m, "initial_moments.C0");
    } else if (kind == "explicit") {
        cfg.initial.kind = InitialMoments::Kind::explicit_terms;
        const json& terms = need(j, "terms", "initial_moments");
        if (!terms.is_array()) fail("config: initial_moments.terms must be an array");
        for (const json& term : terms) {
            MonomialKey key;
            key.J = get_multiindex(need(term, "J", "an initial term"), cfg.m, "initial term J");
            key.I = get_multiindex(need(term, "I", "an initial term"), cfg.m, "initial term I");
            key.parity_exp = 0;
            cfg.initial.terms[key] = get_complex(need(term, "value", "an initial term"), "initial term value");
        }
    } else {
        fail("config: initial_moments.kind must be one of fock_occupation|gaussian|explicit");
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw validation_error("cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw validation_error("cannot open output file " + path);
    out << content;
    out.flush();
    if (!out) throw validation_error("failed while writing " + path);
}

// |S><S| for an occupation set S (mode 1 on the slowest bit).
ComplexMatrix fock_projector(int m, const MultiIndex& S) {
    const auto dim = static_cast<Eigen::Index>(1) << m;
    Eigen::Index idx = 0;
    for (int j : S) idx += static_cast<Eigen::Index>(1) << (m - j);
    ComplexMatrix P = ComplexMatrix::Zero(dim, dim);
    P(idx, idx) = Complex(1.0, 0.0);
    return P;
}

ComplexMatrix environment_density_from_spec(const EnvironmentSpec& env, int m,
                                            const oracle::FockRep& rep, double tol) {
    switch (env.kind) {
        case GammaKind::vacuum:
            return fock_projector(m, {});
        case GammaKind::gaussian:
            return oracle::gaussian_density(env.C, rep, tol);
        case GammaKind::fock:
            return fock_projector(m, env.M);
        case GammaKind::uniform: {
            const auto dim = static_cast<Eigen::Index>(1) << m;
            ComplexMatrix sigma = ComplexMatrix::Zero(dim, dim);
            const double w = 1.0 / static_cast<double>(binom_u64(m, env.N));
            MultiIndex comb(static_cast<std::size_t>(env.N));
            std::iota(comb.begin(), comb.end(), 1);
            do {
                Eigen::Index idx = 0;
                for (int j : comb) idx += static_cast<Eigen::Index>(1) << (m - j);
                sigma(idx, idx) += w;
            } while (next_combination(comb, m));
            return sigma;
        }
        case GammaKind::explicit_table:
            return env.sigma;
    }
    throw validation_error("environment kind not recognized");
}

ComplexMatrix initial_density(const ScenarioConfig& cfg, const oracle::FockRep& rep) {
    switch (cfg.initial.kind) {
        case InitialMoments::Kind::fock_occupation:
            return fock_projector(cfg.m, cfg.initial.M);
        case InitialMoments::Kind::gaussian:
            return oracle::gaussian_density(cfg.initial.C0, rep, cfg.load_tolerance);
        case InitialMoments::Kind::explicit_terms:
            // An arbitrary moment list need not come from a density matrix;
            // the oracle comparisons substitute the vacuum for it.
            return fock_projector(cfg.m, {});
    }
    throw validation_error("initial_moments kind not recognized");
}

EffectExpansion build_effect(const ScenarioConfig& cfg) {
    const EffectDescriptor& d = cfg.dynamics.effect;
    if (d.kind == EffectDescriptor::Kind::matrix)
        return expand_effect(d.E, cfg.load_tolerance);
    return effect_from_coefficients(cfg.m, d.coeffs, d.trusted);
}

double elapsed_seconds(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

ScenarioConfig parse_config(const std::string& json_text, double tolerance) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw validation_error(std::string("config: JSON parse failed: ") + e.what());
    }
    if (!j.is_object()) fail("config: top level must be a JSON object");

    ScenarioConfig cfg;
    cfg.load_tolerance = tolerance;
    cfg.schema_version = get_int(need(j, "schema_version", "the top level"), "schema_version");
    if (cfg.schema_version != 1) fail("config: unsupported schema_version (expected 1)");
    cfg.m = get_int(need(j, "modes", "the top level"), "modes");
    if (cfg.m < 1) fail("config: modes must be >= 1");
    cfg.k = get_int(need(j, "order_cap", "the top level"), "order_cap");
    if (cfg.k < 0 || cfg.k > 2 * cfg.m)
        fail("config: order_cap must lie in [0, 2*modes]");

    parse_transform(need(j, "transform", "the top level"), cfg);
    parse_environment(need(j, "environment", "the top level"), cfg);
    parse_dynamics(need(j, "dynamics", "the top level"), cfg);
    parse_initial(need(j, "initial_moments", "the top level"), cfg);

    // Admissibility checks run at load so that a bad config fails here, with
    // the violated constraint named, and not halfway into a run.
    build_channel_spec(cfg, cfg.transform.kind == TransformSpec::Kind::full_unitary);
    if (cfg.dynamics.kind == DynamicsSpec::Kind::postselect) build_effect(cfg);
    if (cfg.initial.kind == InitialMoments::Kind::gaussian)
        gamma_gaussian(cfg.initial.C0, cfg.load_tolerance);

    return cfg;
}

ScenarioConfig load_config(const std::string& path, double tolerance) {
    return parse_config(read_file(path), tolerance);
}

std::string serialize_config(const ScenarioConfig& cfg) {
    json j;
    j["schema_version"] = cfg.schema_version;
    j["modes"] = cfg.m;
    j["order_cap"] = cfg.k;

    json tr;
    switch (cfg.transform.kind) {
        case TransformSpec::Kind::blocks:
            tr["kind"] = "blocks";
            tr["A"] = dump_matrix(cfg.transform.A);
            tr["B"] = dump_matrix(cfg.transform.B);
            break;
        case TransformSpec::Kind::full_unitary:
            tr["kind"] = "full_unitary";
            tr["W"] = dump_matrix(cfg.transform.W);
            break;
        case TransformSpec::Kind::heff:
            tr["kind"] = "heff";
            tr["H_eff"] = dump_matrix(cfg.transform.H_eff);
            tr["t"] = cfg.transform.t;
            break;
    }
    j["transform"] = tr;

    json env;
    switch (cfg.environment.kind) {
        case GammaKind::vacuum:
            env["kind"] = "vacuum";
            break;
        case GammaKind::gaussian:
            env["kind"] = "gaussian";
            env["C"] = dump_matrix(cfg.environment.C);
            break;
        case GammaKind::fock:
            env["kind"] = "fock";
            env["M"] = dump_multiindex(cfg.environment.M);
            break;
        case GammaKind::uniform:
            env["kind"] = "uniform";
            env["N"] = cfg.environment.N;
            break;
        case GammaKind::explicit_table:
            env["kind"] = "explicit";
            env["sigma"] = dump_matrix(cfg.environment.sigma);
            break;
    }
    j["environment"] = env;

    json dyn;
    switch (cfg.dynamics.kind) {
        case DynamicsSpec::Kind::channel_step:
            dyn["kind"] = "channel_step";
            break;
        case DynamicsSpec::Kind::gksl:
            dyn["kind"] = "gksl";
            dyn["t_grid"] = cfg.dynamics.t_grid;
            if (cfg.dynamics.hamiltonian)
                dyn["hamiltonian"] = dump_matrix(*cfg.dynamics.hamiltonian);
            break;
        case DynamicsSpec::Kind::postselect: {
            dyn["kind"] = "postselect";
            json eff;
            if (cfg.dynamics.effect.kind == EffectDescriptor::Kind::matrix) {
                eff["kind"] = "matrix";
                eff["E"] = dump_matrix(cfg.dynamics.effect.E);
            } else {
                eff["kind"] = "coefficients";
                json terms = json::array();
                for (const auto& [mn, v] : cfg.dynamics.effect.coeffs) {
                    json term;
                    term["M"] = dump_multiindex(mn.first);
                    term["N"] = dump_multiindex(mn.second);
                    term["value"] = dump_complex(v);
                    terms.push_back(std::move(term));
                }
                eff["terms"] = terms;
                eff["trusted"] = cfg.dynamics.effect.trusted;
            }
            dyn["effect"] = eff;
            break;
        }
    }
    j["dynamics"] = dyn;

    json init;
    switch (cfg.initial.kind) {
        case InitialMoments::Kind::fock_occupation:
            init["kind"] = "fock_occupation";
            init["M"] = dump_multiindex(cfg.initial.M);
            break;
        case InitialMoments::Kind::gaussian:
            init["kind"] = "gaussian";
            init["C0"] = dump_matrix(cfg.initial.C0);
            break;
        case InitialMoments::Kind::explicit_terms: {
            init["kind"] = "explicit";
            json terms = json::array();
            for (const auto& [key, v] : cfg.initial.terms) {
                json term;
                term["J"] = dump_multiindex(key.J);
                term["I"] = dump_multiindex(key.I);
                term["value"] = dump_complex(v);
                terms.push_back(std::move(term));
            }
            init["terms"] = terms;
            break;
        }
    }
    j["initial_moments"] = init;

    return j.dump(2) + "\n";
}

CorrelationTensor build_gamma(const ScenarioConfig& cfg) {
    switch (cfg.environment.kind) {
        case GammaKind::vacuum:
            return gamma_vacuum(cfg.m);
        case GammaKind::gaussian:
            return gamma_gaussian(cfg.environment.C, cfg.load_tolerance);
        case GammaKind::fock:
            return gamma_fock(cfg.m, cfg.environment.M);
        case GammaKind::uniform:
            return gamma_uniform(cfg.m, cfg.environment.N);
        case GammaKind::explicit_table:
            return gamma_from_density(cfg.environment.sigma, cfg.load_tolerance);
    }
    throw validation_error("environment kind not recognized");
}

ChannelSpec build_channel_spec(const ScenarioConfig& cfg, bool need_full_W) {
    CorrelationTensor gamma = build_gamma(cfg);
    ComplexMatrix A, B;
    std::optional<ComplexMatrix> W;
    switch (cfg.transform.kind) {
        case TransformSpec::Kind::blocks:
            A = cfg.transform.A;
            B = cfg.transform.B;
            if (need_full_W) W = complete_isometry(A, B, cfg.load_tolerance);
            break;
        case TransformSpec::Kind::full_unitary: {
            const auto m = static_cast<Eigen::Index>(cfg.m);
            A = cfg.transform.W.topLeftCorner(m, m);
            B = cfg.transform.W.topRightCorner(m, m);
            W = cfg.transform.W;
            break;
        }
        case TransformSpec::Kind::heff: {
            A = contraction_semigroup(cfg.transform.H_eff, cfg.transform.t, cfg.load_tolerance);
            ContractionDilation dil = dilate_contraction(A, cfg.load_tolerance);
            B = dil.B;
            if (need_full_W) W = complete_isometry(A, B, cfg.load_tolerance);
            break;
        }
    }
    return ChannelSpec(std::move(A), std::move(B), std::move(gamma), std::move(W),
                       cfg.load_tolerance);
}

Complex initial_moment(const ScenarioConfig& cfg, const MultiIndex& J, const MultiIndex& I) {
    switch (cfg.initial.kind) {
        case InitialMoments::Kind::fock_occupation: {
            if (J != I) return Complex(0.0, 0.0);
            const MultiIndex& M = cfg.initial.M;
            if (!std::includes(M.begin(), M.end(), J.begin(), J.end()))
                return Complex(0.0, 0.0);
            return Complex(1.0, 0.0);
        }
        case InitialMoments::Kind::gaussian: {
            if (J.size() != I.size()) return Complex(0.0, 0.0);
            return det(submatrix(cfg.initial.C0, I, J));
        }
        case InitialMoments::Kind::explicit_terms: {
            MonomialKey key{J, I, 0};
            auto it = cfg.initial.terms.find(key);
            if (it != cfg.initial.terms.end()) return it->second;
            if (J.empty() && I.empty()) return Complex(1.0, 0.0);
            return Complex(0.0, 0.0);
        }
    }
    throw validation_error("initial_moments kind not recognized");
}

ComplexVector initial_moment_vector(const ScenarioConfig& cfg,
                                    const std::vector<MonomialKey>& basis) {
    ComplexVector mu0(static_cast<Eigen::Index>(basis.size()));
    for (std::size_t i = 0; i < basis.size(); ++i)
        mu0(static_cast<Eigen::Index>(i)) = initial_moment(cfg, basis[i].J, basis[i].I);
    return mu0;
}

RunResult run_scenario(const ScenarioConfig& cfg, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw validation_error("cannot create output directory " + out_dir + ": " + ec.message());

    RunResult result;
    switch (cfg.dynamics.kind) {
        case DynamicsSpec::Kind::channel_step: {
            ChannelSpec spec = build_channel_spec(cfg, false);
            MomentTransferMatrix T = transfer_matrix(spec, cfg.k);
            ComplexVector mu0 = initial_moment_vector(cfg, T.basis);
            ComplexVector out = apply_transfer(T, mu0);
            std::ostringstream os;
            os << "key,re,im\n";
            for (std::size_t i = 0; i < T.basis.size(); ++i) {
                const auto r = static_cast<Eigen::Index>(i);
                os << csv_quote(key_to_string(T.basis[i])) << ','
                   << format_sig17(out(r).real()) << ',' << format_sig17(out(r).imag()) << '\n';
            }
            const std::string path = (fs::path(out_dir) / "moments.csv").string();
            write_file(path, os.str());
            result.files_written.push_back(path);
            break;
        }
        case DynamicsSpec::Kind::gksl: {
            ChannelSpec spec = build_channel_spec(cfg, false);
            MomentODESystem sys = moment_ode_system(spec, cfg.k, cfg.dynamics.hamiltonian);
            ComplexVector mu0 = initial_moment_vector(cfg, sys.basis);
            std::ostringstream os;
            os << 't';
            for (const MonomialKey& key : sys.basis) {
                const std::string s = key_to_string(key);
                os << ',' << csv_quote("re(" + s + ")") << ',' << csv_quote("im(" + s + ")");
            }
            os << '\n';
            for (double t : cfg.dynamics.t_grid) {
                ComplexVector mu = evolve_moments(sys, mu0, t);
                os << format_sig17(t);
                for (Eigen::Index i = 0; i < mu.size(); ++i)
                    os << ',' << format_sig17(mu(i).real()) << ',' << format_sig17(mu(i).imag());
                os << '\n';
            }
            const std::string path = (fs::path(out_dir) / "trajectory.csv").string();
            write_file(path, os.str());
            result.files_written.push_back(path);
            break;
        }
        case DynamicsSpec::Kind::postselect: {
            ChannelSpec spec = build_channel_spec(cfg, true);
            EffectExpansion eff = build_effect(cfg);
            const std::vector<MonomialKey> basis = monomial_basis(cfg.m, cfg.k);
            std::ostringstream os;
            os << "key,re,im\n";
            for (const MonomialKey& key : basis) {
                MonomialPoly poly =
                    dual_action_postselected_even(*spec.W, spec.gamma, eff, key.J, key.I);
                Complex v(0.0, 0.0);
                for (const auto& [out_key, coeff] : poly)
                    v += coeff * initial_moment(cfg, out_key.J, out_key.I);
                os << csv_quote(key_to_string(key)) << ','
                   << format_sig17(v.real()) << ',' << format_sig17(v.imag()) << '\n';
            }
            const std::string path = (fs::path(out_dir) / "conditional_moments.csv").string();
            write_file(path, os.str());
            result.files_written.push_back(path);
            break;
        }
    }
    return result;
}

std::string VerifyReport::to_json() const {
    json j;
    j["seed"] = seed;
    j["threshold"] = threshold;
    j["pass"] = pass;
    json dev = json::object();
    for (const auto& [name, value] : deviations)
        dev[name] = std::isfinite(value) ? json(value) : json();  // null: check could not run
    j["deviations"] = dev;
    return j.dump(2) + "\n";
}

VerifyReport verify_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
    if (cfg.m > oracle::kMaxCombinedModes)
        throw resource_error(
            "verify needs the 2^{2m}-dimensional combined space and is guarded to modes <= " +
            std::to_string(oracle::kMaxCombinedModes) +
            "; the hierarchy itself has no such limit");

    VerifyReport report;
    report.seed = seed;
    report.threshold = 1e-6;

    const oracle::FockRep rep = oracle::build_rep(cfg.m);
    const auto dim = static_cast<Eigen::Index>(1) << cfg.m;
    ChannelSpec spec = build_channel_spec(cfg, true);
    const int m = cfg.m;

    // The configured blocks may have been admitted with a loose --tolerance;
    // the oracle needs an exactly unitary W, so it runs on the polar factor.
    Eigen::JacobiSVD<ComplexMatrix> svd(*spec.W, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const ComplexMatrix W_oracle = svd.matrixU() * svd.matrixV().adjoint();
    const ComplexMatrix U = oracle::implement_unitary(W_oracle);
    const ComplexMatrix sigma =
        environment_density_from_spec(cfg.environment, m, rep, cfg.load_tolerance);

    // Seeded draws, in fixed order: one extra Haar channel, one random even effect.
    auto rng = seeded_rng(seed);
    const ComplexMatrix W_rand = haar_unitary(2 * m, rng);
    ChannelSpec spec_rand(W_rand.topLeftCorner(m, m), W_rand.topRightCorner(m, m),
                          spec.gamma, W_rand);
    const ComplexMatrix U_rand = oracle::implement_unitary(W_rand);
    ComplexMatrix R = random_hermitian(static_cast<int>(dim), rng);
    R = 0.5 * (R + rep.parity * R * rep.parity);
    const ComplexMatrix E_rand =
        0.5 * (R / (R.norm() + 1.0) + ComplexMatrix::Identity(dim, dim));

    const std::vector<MonomialKey> probes = monomial_basis(m, 2 * m);

    auto run_check = [&report](const char* name, auto&& fn) {
        double value = std::numeric_limits<double>::infinity();
        try {
            value = fn();
        } catch (const std::exception&) {
            // leave infinity: the formula's own preconditions failed on this
            // config (reported as null, counts as a failure)
        }
        report.deviations[name] = value;
    };

    run_check("general_action", [&] {
        double dev = 0.0;
        for (const MonomialKey& key : probes) {
            const int tau = static_cast<int>((key.J.size() + key.I.size()) % 2);
            const ComplexMatrix X = oracle::monomial_matrix(rep, key.J, key.I);
            dev = std::max(dev, poly_max_deviation(
                dual_action_general(spec, key.J, key.I),
                oracle::expand_with_parity(rep, oracle::dual_apply(U, sigma, X), tau)));
            dev = std::max(dev, poly_max_deviation(
                dual_action_general(spec_rand, key.J, key.I),
                oracle::expand_with_parity(rep, oracle::dual_apply(U_rand, sigma, X), tau)));
        }
        return dev;
    });

    if (spec.gamma.is_even) {
        run_check("even_action", [&] {
            double dev = 0.0;
            for (const MonomialKey& key : probes) {
                const int tau = static_cast<int>((key.J.size() + key.I.size()) % 2);
                const ComplexMatrix X = oracle::monomial_matrix(rep, key.J, key.I);
                dev = std::max(dev, poly_max_deviation(
                    dual_action_even(spec, key.J, key.I),
                    oracle::expand_with_parity(rep, oracle::dual_apply(U, sigma, X), tau)));
                dev = std::max(dev, poly_max_deviation(
                    dual_action_even(spec_rand, key.J, key.I),
                    oracle::expand_with_parity(rep, oracle::dual_apply(U_rand, sigma, X), tau)));
            }
            return dev;
        });
    }

    run_check("trajectory", [&] {
        const std::optional<ComplexMatrix> H =
            (cfg.dynamics.kind == DynamicsSpec::Kind::gksl) ? cfg.dynamics.hamiltonian
                                                            : std::nullopt;
        const std::vector<double> ts = (cfg.dynamics.kind == DynamicsSpec::Kind::gksl)
                                           ? cfg.dynamics.t_grid
                                           : std::vector<double>{0.1, 0.5, 1.0};
        MomentODESystem sys = moment_ode_system(spec, cfg.k, H);
        ComplexVector mu0(static_cast<Eigen::Index>(sys.basis.size()));
        if (cfg.initial.kind == InitialMoments::Kind::explicit_terms) {
            // matches the vacuum substitution made by initial_density
            for (std::size_t i = 0; i < sys.basis.size(); ++i)
                mu0(static_cast<Eigen::Index>(i)) =
                    (sys.basis[i].J.empty() && sys.basis[i].I.empty()) ? 1.0 : 0.0;
        } else {
            mu0 = initial_moment_vector(cfg, sys.basis);
        }
        const ComplexMatrix rho0 = initial_density(cfg, rep);
        double dev = 0.0;
        for (double t : ts) {
            const ComplexVector mu = evolve_moments(sys, mu0, t);
            const ComplexMatrix rho_t = oracle::master_equation_evolve(rep, U, sigma, rho0, t, H);
            for (std::size_t i = 0; i < sys.basis.size(); ++i) {
                const Complex expected =
                    (rho_t * oracle::monomial_matrix(rep, sys.basis[i].J, sys.basis[i].I)).trace();
                dev = std::max(dev, std::abs(mu(static_cast<Eigen::Index>(i)) - expected));
            }
        }
        return dev;
    });

    run_check("postselect", [&] {
        const EffectExpansion eff_id = identity_effect(m);
        const EffectExpansion eff_rand = expand_effect(E_rand, kDefaultTol);
        const ComplexMatrix E_id = ComplexMatrix::Identity(dim, dim);
        double dev = 0.0;
        for (const MonomialKey& key : probes) {
            const int tau = static_cast<int>((key.J.size() + key.I.size()) % 2);
            const ComplexMatrix X = oracle::monomial_matrix(rep, key.J, key.I);
            for (int which = 0; which < 2; ++which) {
                const EffectExpansion& eff = (which == 0) ? eff_id : eff_rand;
                const ComplexMatrix& E = (which == 0) ? E_id : E_rand;
                MonomialPoly model =
                    spec.gamma.is_even
                        ? dual_action_postselected_even(*spec.W, spec.gamma, eff, key.J, key.I)
                        : dual_action_postselected(*spec.W, spec.gamma, eff, key.J, key.I);
                dev = std::max(dev, poly_max_deviation(
                    model, oracle::expand_with_parity(
                               rep, oracle::postselected_dual(U, sigma, E, X), tau)));
            }
        }
        return dev;
    });

    run_check("wick", [&] {
        const CorrelationTensor tab = gamma_from_density(sigma, cfg.load_tolerance);
        const std::vector<MultiIndex> sets = enumerate_multiindices(m, m);
        double dev = 0.0;
        for (const MultiIndex& Xi : sets)
            for (const MultiIndex& Omega : sets)
                dev = std::max(dev, std::abs(spec.gamma(Xi, Omega) - tab(Xi, Omega)));
        return dev;
    });

    report.pass = true;
    for (const auto& [name, value] : report.deviations)
        if (!std::isfinite(value) || value > report.threshold) report.pass = false;
    return report;
}

std::string BenchmarkReport::to_json() const {
    json j;
    j["k"] = k;
    j["repetitions"] = repetitions;
    json list = json::array();
    for (const BenchmarkEntry& e : entries) {
        json entry;
        entry["m"] = e.m;
        entry["D"] = e.D;
        entry["assembly_seconds"] = e.assembly_seconds;
        entry["expm_seconds"] = e.expm_seconds;
        if (e.oracle_seconds) entry["oracle_seconds"] = *e.oracle_seconds;
        list.push_back(std::move(entry));
    }
    j["entries"] = list;
    return j.dump(2) + "\n";
}

BenchmarkReport run_benchmark(const std::vector<int>& m_list, int k, int repetitions,
                              std::uint64_t seed) {
    if (m_list.empty()) throw validation_error("benchmark: m_list must be nonempty");
    if (repetitions < 1) throw validation_error("benchmark: repetitions must be >= 1");
    BenchmarkReport report;
    report.k = k;
    report.repetitions = repetitions;
    for (int m : m_list) {
        if (m < 1) throw validation_error("benchmark: every m must be >= 1");
        if (k < 0 || k > 2 * m)
            throw validation_error("benchmark: k must lie in [0, 2m] for every listed m");

        auto rng = seeded_rng(seed + static_cast<std::uint64_t>(m));
        const ComplexMatrix A = random_contraction(m, rng);
        const ContractionDilation dil = dilate_contraction(A);
        ChannelSpec spec(dil.A, dil.B, gamma_uniform(m, m / 2));

        BenchmarkEntry entry;
        entry.m = m;
        entry.D = moment_dimension(m, k);

        MomentTransferMatrix T;
        double best_assembly = std::numeric_limits<double>::infinity();
        for (int r = 0; r < repetitions; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            T = transfer_matrix(spec, k);
            best_assembly = std::min(best_assembly, elapsed_seconds(t0));
        }
        entry.assembly_seconds = best_assembly;

        const Complex gamma0 = spec.gamma(MultiIndex{}, MultiIndex{});
        double best_expm = std::numeric_limits<double>::infinity();
        double sink = 0.0;
        for (int r = 0; r < repetitions; ++r) {
            ComplexMatrix gen = T.data;
            gen.diagonal().array() -= gamma0;
            const auto t0 = std::chrono::steady_clock::now();
            const ComplexMatrix prop = expm(gen);
            best_expm = std::min(best_expm, elapsed_seconds(t0));
            sink += std::abs(prop(0, 0));
        }
        entry.expm_seconds = best_expm;
        require_finite(ComplexMatrix::Constant(1, 1, Complex(sink, 0.0)), "benchmark propagator");

        if (m <= oracle::kMaxCombinedModes) {
            // one brute-force dual application, for scale contrast
            const auto t0 = std::chrono::steady_clock::now();
            const oracle::FockRep rep = oracle::build_rep(m);
            const ComplexMatrix W = complete_isometry(dil.A, dil.B);
            const ComplexMatrix U = oracle::implement_unitary(W);
            EnvironmentSpec env;
            env.kind = GammaKind::uniform;
            env.N = m / 2;
            const ComplexMatrix sigma = environment_density_from_spec(env, m, rep, kDefaultTol);
            const ComplexMatrix X = oracle::monomial_matrix(rep, MultiIndex{1}, MultiIndex{1});
            const ComplexMatrix Y = oracle::dual_apply(U, sigma, X);
            require_finite(Y, "benchmark oracle contrast");
            entry.oracle_seconds = elapsed_seconds(t0);
        }
        report.entries.push_back(entry);
    }
    return report;
}

std::string secondquant_report_json(const ScenarioConfig& cfg) {
    if (cfg.transform.kind != TransformSpec::Kind::heff)
        throw validation_error(
            "secondquant report: the config must use a transform of kind 'heff'");
    const ComplexMatrix& H = cfg.transform.H_eff;
    const double t = cfg.transform.t;
    const int m = cfg.m;

    json j;
    j["m"] = m;
    j["t"] = t;

    const ComplexMatrix At = contraction_semigroup(H, t, cfg.load_tolerance);
    Eigen::JacobiSVD<ComplexMatrix> svd(At);
    j["sigma_max"] = svd.singularValues()(0);

    const ContractionDilation dil = dilate_contraction(At, cfg.load_tolerance);
    j["isometry_defect"] =
        (dil.A * dil.A.adjoint() + dil.B * dil.B.adjoint() -
         ComplexMatrix::Identity(m, m)).norm();

    const ComplexMatrix A2t = contraction_semigroup(H, 2.0 * t, cfg.load_tolerance);
    json ext = json::object();
    for (int p = 1; p <= std::min(m, 3); ++p) {
        const ExteriorPowerMatrix E1 = exterior_power(At, p);
        const ExteriorPowerMatrix E2 = exterior_power(A2t, p);
        ext["p" + std::to_string(p)] =
            (E2.data - E1.data * E1.data).cwiseAbs().maxCoeff();
    }
    j["exterior_power_semigroup"] = ext;

    const CorrelationTensor gamma = build_gamma(cfg);
    std::vector<MonomialKey> probe_keys;
    probe_keys.push_back(MonomialKey{MultiIndex{}, MultiIndex{1}, 0});
    probe_keys.push_back(MonomialKey{MultiIndex{1}, MultiIndex{1}, 0});
    if (m >= 2) probe_keys.push_back(MonomialKey{MultiIndex{}, MultiIndex{1, 2}, 0});
    json probes = json::array();
    for (const MonomialKey& key : probe_keys) {
        const SemigroupFailureReport rep = check_semigroup_failure(H, gamma, t, t, key);
        json p;
        p["probe"] = key_to_string(key);
        p["max_deviation"] = rep.max_deviation;
        probes.push_back(std::move(p));
    }
    j["semigroup_probes"] = probes;

    return j.dump(2) + "\n";
}

std::string format_sig17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", x);
    return std::string(buf);
}

std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out;
    out.reserve(s.size() + 2);
    out.push_back('"');
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

} // namespace fm
