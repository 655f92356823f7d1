#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "calculus.hpp"
#include "flow.hpp"
#include "io.hpp"
#include "moi.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "shift.hpp"

namespace opcalc {

// Random Hermitian draw: dense complex Gaussian entries, symmetrized, scaled
// by 1/sqrt(dim) so spectra stay O(1) across dimensions.
inline BlockOperator random_hermitian(NormalGenerator& gen,
                                      const std::vector<std::pair<int, double>>& dims) {
    std::vector<Eigen::MatrixXcd> blocks;
    std::vector<double> weights;
    for (const auto& [d, w] : dims) {
        Eigen::MatrixXcd a(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) a(i, j) = gen.complex_unit_normal();
        Eigen::MatrixXcd h = (a + a.adjoint()) / (2.0 * std::sqrt(static_cast<double>(d)));
        blocks.push_back(std::move(h));
        weights.push_back(w);
    }
    return BlockOperator(std::move(blocks), std::move(weights), true);
}

// Deterministic (H, V) instance; V is normalized to weighted trace norm 1.
inline std::pair<BlockOperator, BlockOperator> generate_instance(
    std::uint64_t seed, const std::vector<std::pair<int, double>>& dims) {
    NormalGenerator gen(seed);
    BlockOperator h = random_hermitian(gen, dims);
    BlockOperator v = random_hermitian(gen, dims);
    const double tn = trace_norm(v);
    if (tn > 0.0) v = v.scaled(Complex(1.0 / tn, 0.0));
    return {std::move(h), std::move(v)};
}

struct ScenarioConfig {
    std::uint64_t seed = 20250801;
    std::vector<std::pair<int, double>> dims = {{2, 1.0}, {3, 0.5}};
    std::vector<WienerFunction> functions;
    std::vector<std::string> checks;
    std::map<std::string, double> tolerances;
    int instances = 2;
    std::string lambda_grid = "-3:3:61";
    std::string mu_grid = "-2:2:9";
    double epsilon = 1.0;
    bool averaged_column = false;
    std::string h_file; // optional explicit operators; replace generation
    std::string v_file;
};

inline const std::vector<std::string>& known_checks() {
    static const std::vector<std::string> k = {"moi_dual_path", "dk",      "frechet",
                                               "taylor",        "duhamel", "krein",
                                               "birman_solomyak", "flow_identity"};
    return k;
}

inline ScenarioConfig default_scenario() {
    ScenarioConfig cfg;
    cfg.functions.push_back(WienerFunction::gaussian(1.0, 4));
    cfg.functions.push_back(WienerFunction::cosine(1.3, 4));
    cfg.checks = known_checks();
    cfg.tolerances = {{"moi_dual_path", 1e-6}, {"dk", 1e-9},
                      {"frechet", 1e-6},       {"taylor", 1e-12},
                      {"duhamel", 1e-9},       {"krein", 1e-9},
                      {"birman_solomyak", 1e-6}, {"flow_identity", 1e-6}};
    return cfg;
}

inline ScenarioConfig scenario_from_json(const json& j) {
    ScenarioConfig cfg = default_scenario();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("dims")) {
        cfg.dims.clear();
        for (const auto& d : j["dims"])
            cfg.dims.emplace_back(d.at(0).get<int>(), d.at(1).get<double>());
        if (cfg.dims.empty()) throw ConfigParse("dims must be nonempty");
        for (const auto& [d, w] : cfg.dims)
            if (d < 1 || w <= 0.0) throw ConfigParse("dims need dimension >= 1 and weight > 0");
    }
    if (j.contains("functions")) {
        cfg.functions.clear();
        for (const auto& f : j["functions"]) cfg.functions.push_back(function_from_json(f));
    }
    if (j.contains("checks")) {
        cfg.checks = j["checks"].get<std::vector<std::string>>();
        for (const auto& c : cfg.checks)
            if (std::find(known_checks().begin(), known_checks().end(), c) ==
                known_checks().end())
                throw ConfigParse("unknown check \"" + c + "\"");
    }
    if (j.contains("tolerances"))
        for (const auto& [k, v] : j["tolerances"].items()) {
            if (v.get<double>() <= 0.0) throw ConfigParse("tolerances must be positive");
            cfg.tolerances[k] = v.get<double>();
        }
    if (j.contains("instances")) cfg.instances = j["instances"].get<int>();
    if (j.contains("lambda_grid")) cfg.lambda_grid = j["lambda_grid"].get<std::string>();
    if (j.contains("mu_grid")) cfg.mu_grid = j["mu_grid"].get<std::string>();
    if (j.contains("epsilon")) cfg.epsilon = j["epsilon"].get<double>();
    if (j.contains("averaged_column")) cfg.averaged_column = j["averaged_column"].get<bool>();
    if (j.contains("h_file")) cfg.h_file = j["h_file"].get<std::string>();
    if (j.contains("v_file")) cfg.v_file = j["v_file"].get<std::string>();
    return cfg;
}

inline json scenario_to_json(const ScenarioConfig& cfg) {
    json dims = json::array();
    for (const auto& [d, w] : cfg.dims) dims.push_back(json::array({d, w}));
    json funcs = json::array();
    for (const auto& f : cfg.functions) funcs.push_back(function_to_json(f));
    json j{{"seed", cfg.seed},
           {"dims", std::move(dims)},
           {"functions", std::move(funcs)},
           {"checks", cfg.checks},
           {"tolerances", cfg.tolerances},
           {"instances", cfg.instances},
           {"lambda_grid", cfg.lambda_grid},
           {"mu_grid", cfg.mu_grid},
           {"epsilon", cfg.epsilon},
           {"averaged_column", cfg.averaged_column}};
    if (!cfg.h_file.empty()) j["h_file"] = cfg.h_file;
    if (!cfg.v_file.empty()) j["v_file"] = cfg.v_file;
    return j;
}

struct SuiteRow {
    std::string check;
    int instance = 0;
    double residual = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct SuiteReport {
    std::vector<SuiteRow> rows;
    bool all_pass = true;
    std::uint64_t seed = 0;
    json to_json() const {
        json rows_j = json::array();
        for (const auto& r : rows)
            rows_j.push_back(json{{"check", r.check},
                                  {"instance", r.instance},
                                  {"residual", r.residual},
                                  {"tolerance", r.tolerance},
                                  {"pass", r.pass}});
        return json{{"rng", NormalGenerator::name},
                    {"seed", seed},
                    {"all_pass", all_pass},
                    {"results", std::move(rows_j)}};
    }
};

namespace detail {

// Stable per-(check, instance) seed derivation.
inline std::uint64_t derive_seed(std::uint64_t base, const std::string& check, int instance) {
    std::uint64_t h = base ^ 0x9e3779b97f4a7c15ULL;
    for (char c : check) h = (h ^ static_cast<std::uint64_t>(c)) * 0x100000001b3ULL;
    h ^= static_cast<std::uint64_t>(instance) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

struct SuiteInstance {
    BlockOperator h;
    BlockOperator v;
    NormalGenerator gen;
};

inline SuiteInstance suite_instance(const ScenarioConfig& cfg, const std::string& check,
                                    int instance) {
    if (!cfg.h_file.empty() || !cfg.v_file.empty()) {
        if (cfg.h_file.empty() || cfg.v_file.empty())
            throw ConfigParse("h_file and v_file must be given together");
        BlockOperator h = load_operator(cfg.h_file);
        BlockOperator v = load_operator(cfg.v_file);
        return {std::move(h), std::move(v), NormalGenerator(derive_seed(cfg.seed, check, instance))};
    }
    const std::uint64_t s = derive_seed(cfg.seed, check, instance);
    auto [h, v] = generate_instance(s, cfg.dims);
    NormalGenerator gen(s ^ 0xabcdef12345ULL);
    return {std::move(h), std::move(v), std::move(gen)};
}

inline double run_one_check(const ScenarioConfig& cfg, const std::string& check, int instance) {
    SuiteInstance inst = suite_instance(cfg, check, instance);
    BlockOperator& h = inst.h;
    BlockOperator& v = inst.v;
    NormalGenerator& gen = inst.gen;
    double residual = 0.0;

    if (check == "moi_dual_path") {
        QuadratureConfig quad;
        quad.tolerance = 1e-8;
        for (const auto& f : cfg.functions) {
            for (int n = 1; n <= 2 && n <= f.max_order(); ++n) {
                std::vector<BlockOperator> ops;
                for (int k = 0; k <= n; ++k) ops.push_back(random_hermitian(gen, cfg.dims));
                std::vector<BlockOperator> dirs;
                for (int k = 0; k < n; ++k) {
                    BlockOperator d = random_hermitian(gen, cfg.dims);
                    dirs.push_back(d.scaled(Complex(1.0 / trace_norm(d), 0.0)));
                }
                MOIRequest req{n, ops, dirs, f};
                const BlockOperator spec_path = moi_spectral(req).value;
                const BlockOperator four_path = moi_fourier(req, quad).value;
                residual = std::max(residual, max_abs_diff(spec_path, four_path));
            }
        }
    } else if (check == "dk") {
        for (const auto& f : cfg.functions)
            residual = std::max(residual, operator_difference(f, h + v, h).residual);
    } else if (check == "frechet") {
        const double step = 1e-4;
        for (const auto& f : cfg.functions) {
            const BlockOperator deriv = frechet_derivative(f, h, {v});
            auto scalar = [&f](double x) { return f.evaluate(x, 0); };
            const BlockOperator fd =
                (apply_function(scalar, h + v.scaled(Complex(step, 0.0))) -
                 apply_function(scalar, h + v.scaled(Complex(-step, 0.0))))
                    .scaled(Complex(0.5 / step, 0.0));
            residual = std::max(residual, uniform_norm(deriv - fd));
        }
    } else if (check == "duhamel") {
        for (double s : {0.7, -1.3}) {
            auto scalar = [s](double x) { return std::exp(Complex(0.0, s * x)); };
            const BlockOperator lhs = duhamel_difference(s, h, h + v);
            const BlockOperator rhs = apply_function(scalar, h) - apply_function(scalar, h + v);
            residual = std::max(residual, max_abs_diff(lhs, rhs) /
                                              (1.0 + uniform_norm(v) * std::abs(s)));
        }
    } else if (check == "taylor") {
        for (const auto& f : cfg.functions) {
            for (int n = 1; n <= 2 && n + 1 <= f.max_order(); ++n) {
                const double t1 = 0.1, t2 = 0.05;
                const double r1 =
                    taylor_remainder(f, h, v.scaled(Complex(t1, 0.0)), n).uniform_residual;
                const double r2 =
                    taylor_remainder(f, h, v.scaled(Complex(t2, 0.0)), n).uniform_residual;
                if (r2 < 1e-14) continue; // below resolvable scale
                const double slope = std::log2(r1 / r2);
                residual = std::max(residual, std::max(0.0, (n + 0.9) - slope));
            }
        }
    } else if (check == "krein") {
        for (const auto& f : cfg.functions)
            residual = std::max(residual, krein_trace_check(f, h, v).residual);
        const XiBoundsReport b = xi_bounds_check(h, v);
        residual = std::max(residual, std::max(0.0, b.l1_xi - b.trace_norm_v));
        residual = std::max(residual, std::abs(b.integral_xi - b.trace_v));
        residual = std::max(residual, std::max(0.0, b.max_xi - b.upper_bound));
        residual = std::max(residual, std::max(0.0, b.lower_bound - b.min_xi));
    } else if (check == "birman_solomyak") {
        const AveragedMeasure am(h, v);
        const auto [lo, hi] = am.spectral_hull();
        QuadratureConfig quad;
        quad.tolerance = 1e-8;
        quad.max_evals = 40000;
        const auto report =
            averaging_identity_check(h, v, interval_grid(lo - 0.25, hi + 0.25, 8), quad);
        residual = report.max_residual;
    } else if (check == "flow_identity") {
        FlowRequest req{h, v.scaled(Complex(2.0, 0.0)), 0.0, cfg.epsilon};
        req.quadrature.tolerance = 1e-8;
        const auto rows = flow_shift_identity_check(req, parse_grid(cfg.mu_grid));
        for (const auto& row : rows) {
            if (row.skipped) continue;
            residual = std::max(residual, std::abs(row.sf_counting - row.sf_partition));
            residual = std::max(residual, std::abs(row.sf_counting - row.xi));
            residual = std::max(residual, row.cp_gap);
        }
    } else {
        throw ConfigParse("unknown check \"" + check + "\"");
    }
    return residual;
}

} // namespace detail

// Runs the configured checks over deterministic instances. Rows are ordered
// by (check, instance); instances may be evaluated concurrently.
inline SuiteReport run_suite(const ScenarioConfig& cfg) {
    SuiteReport report;
    report.seed = cfg.seed;
    std::vector<std::pair<std::string, int>> jobs;
    for (const auto& check : cfg.checks)
        for (int i = 0; i < cfg.instances; ++i) jobs.emplace_back(check, i);
    std::vector<SuiteRow> rows(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t k) {
        const auto& [check, inst] = jobs[k];
        SuiteRow row;
        row.check = check;
        row.instance = inst;
        row.tolerance = cfg.tolerances.count(check) ? cfg.tolerances.at(check) : 1e-6;
        row.residual = detail::run_one_check(cfg, check, inst);
        row.pass = row.residual <= row.tolerance;
        rows[k] = std::move(row);
    });
    for (auto& row : rows) {
        report.all_pass = report.all_pass && row.pass;
        report.rows.push_back(std::move(row));
    }
    return report;
}

struct CurveFiles {
    std::string xi_csv;
    std::string flow_csv;
    int skipped_mu = 0;
};

// Renders the shift and flow curves for one instance as CSV text. The xi
// curve samples the exact step function on the lambda grid; with the
// averaged column enabled each row also carries the coupling-averaged
// measure of [lambda_k, lambda_{k+1}) (zero on the last row).
inline CurveFiles emit_curves(const ScenarioConfig& cfg) {
    auto load_pair = [&cfg]() -> std::pair<BlockOperator, BlockOperator> {
        if (!cfg.h_file.empty() && !cfg.v_file.empty())
            return {load_operator(cfg.h_file), load_operator(cfg.v_file)};
        return generate_instance(cfg.seed, cfg.dims);
    };
    auto [h, v] = load_pair();

    CurveFiles out;
    const StepFunction xi = xi_counting(h, v);
    const std::vector<double> lambdas = parse_grid(cfg.lambda_grid);
    std::vector<XiRow> xi_rows;
    xi_rows.reserve(lambdas.size());
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
        XiRow row;
        row.lambda = lambdas[k];
        row.xi = xi(lambdas[k]);
        if (cfg.averaged_column && k + 1 < lambdas.size())
            row.averaged = birman_solomyak_measure(h, v, lambdas[k], lambdas[k + 1]).value;
        xi_rows.push_back(row);
    }
    out.xi_csv = xi_csv(xi_rows, cfg.averaged_column);

    // Same pair for both curves, so matching grid points satisfy sf == xi.
    FlowRequest freq{h, v, 0.0, cfg.epsilon};
    const auto rows = flow_shift_identity_check(freq, parse_grid(cfg.mu_grid));
    for (const auto& r : rows)
        if (r.skipped) ++out.skipped_mu;
    out.flow_csv = flow_csv(rows);
    return out;
}

} // namespace opcalc
