// Command line front end: instance generation, operator integral evaluation,
// calculus checks, shift/flow curve emission, and the verification suite.
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "opcalc/io.hpp"
#include "opcalc/scenario.hpp"

namespace {

std::vector<std::pair<int, double>> parse_dims(const std::string& spec) {
    std::vector<std::pair<int, double>> dims;
    std::stringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ',')) {
        int d = 0;
        double w = 0.0;
        if (std::sscanf(part.c_str(), "%d:%lf", &d, &w) != 2 || d < 1 || w <= 0.0)
            throw opcalc::ConfigParse("dims must be d:w[,d:w...] with d >= 1, w > 0, got \"" +
                                      spec + "\"");
        dims.emplace_back(d, w);
    }
    if (dims.empty()) throw opcalc::ConfigParse("dims list is empty");
    return dims;
}

void print_report(const opcalc::SuiteReport& report) {
    for (const auto& row : report.rows)
        std::printf("%-16s instance %d  residual %.3e  tolerance %.1e  %s\n", row.check.c_str(),
                    row.instance, row.residual, row.tolerance, row.pass ? "pass" : "FAIL");
    std::printf("%s\n", report.all_pass ? "all checks passed" : "FAILURES present");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"operator calculus toolkit: multiple operator integrals, spectral "
                 "shift, and spectral flow over weighted block algebras"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a deterministic (H, V) instance");
    std::uint64_t gen_seed = 1;
    std::string gen_dims = "2:1.0,3:0.5", gen_h = "h.json", gen_v = "v.json";
    gen->add_option("--seed", gen_seed, "64-bit seed");
    gen->add_option("--dims", gen_dims, "blocks as d:w[,d:w...]");
    gen->add_option("--out-h", gen_h, "output path for H");
    gen->add_option("--out-v", gen_v, "output path for V");

    // moi
    auto* moi_cmd = app.add_subcommand("moi", "evaluate a multiple operator integral");
    std::string moi_request, moi_path = "spectral", moi_out = "result.json";
    moi_cmd->add_option("--request", moi_request, "request JSON")->required();
    moi_cmd->add_option("--path", moi_path, "spectral or fourier")
        ->check(CLI::IsMember({"spectral", "fourier"}));
    moi_cmd->add_option("--out", moi_out, "result JSON path");

    // calculus
    auto* calc = app.add_subcommand("calculus", "run a differentiation-calculus check");
    std::string calc_check, calc_corpus, calc_report = "report.json";
    calc->add_option("--check", calc_check, "dk, frechet, taylor, or duhamel")
        ->required()
        ->check(CLI::IsMember({"dk", "frechet", "taylor", "duhamel"}));
    calc->add_option("--corpus", calc_corpus, "scenario config JSON")->required();
    calc->add_option("--report", calc_report, "report JSON path");

    // shift
    auto* shift_cmd = app.add_subcommand("shift", "emit the spectral shift curve");
    std::string shift_h, shift_v, shift_grid = "-3:3:61", shift_out = "xi.csv";
    bool shift_avg = false;
    shift_cmd->add_option("--H", shift_h, "Hermitian base operator JSON")->required();
    shift_cmd->add_option("--V", shift_v, "Hermitian perturbation JSON")->required();
    shift_cmd->add_option("--grid", shift_grid, "lambda grid a:b:n");
    shift_cmd->add_option("--out", shift_out, "CSV output path");
    shift_cmd->add_flag("--avg", shift_avg, "add the coupling-averaged measure column");

    // flow
    auto* flow_cmd = app.add_subcommand("flow", "emit the spectral flow curve");
    std::string flow_d0, flow_v, flow_grid = "-2:2:9", flow_out = "flow.csv";
    double flow_eps = 1.0;
    flow_cmd->add_option("--D0", flow_d0, "initial Hermitian operator JSON")->required();
    flow_cmd->add_option("--V", flow_v, "Hermitian path increment JSON")->required();
    flow_cmd->add_option("--mu-grid", flow_grid, "mu grid a:b:n");
    flow_cmd->add_option("--epsilon", flow_eps, "heat scale for the path-integral route");
    flow_cmd->add_option("--out", flow_out, "CSV output path");

    // verify
    auto* verify = app.add_subcommand("verify", "run the verification suite");
    std::string verify_config, verify_report = "report.json";
    verify->add_option("--config", verify_config, "scenario config JSON (default built in)");
    verify->add_option("--report", verify_report, "report JSON path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            auto [h, v] = opcalc::generate_instance(gen_seed, parse_dims(gen_dims));
            opcalc::save_operator(gen_h, h);
            opcalc::save_operator(gen_v, v);
            std::printf("wrote %s and %s (seed %llu, rng %s)\n", gen_h.c_str(), gen_v.c_str(),
                        static_cast<unsigned long long>(gen_seed),
                        opcalc::NormalGenerator::name);
            return 0;
        }
        if (moi_cmd->parsed()) {
            const opcalc::MOIRequest req = opcalc::load_moi_request(moi_request);
            const opcalc::MoiPath path = moi_path == "spectral" ? opcalc::MoiPath::spectral
                                                                : opcalc::MoiPath::fourier;
            const opcalc::MOIResult res = opcalc::moi(req, path);
            opcalc::write_text_file(moi_out, opcalc::moi_result_to_json(res).dump(2) + "\n");
            std::printf("order %d, %s path: |result| = %.12g, error estimate %.3e -> %s\n",
                        req.order, moi_path.c_str(), opcalc::uniform_norm(res.value),
                        res.error_estimate, moi_out.c_str());
            return 0;
        }
        if (calc->parsed()) {
            opcalc::ScenarioConfig cfg =
                opcalc::scenario_from_json(opcalc::load_json_file(calc_corpus));
            cfg.checks = {calc_check};
            const opcalc::SuiteReport report = opcalc::run_suite(cfg);
            opcalc::write_text_file(calc_report, report.to_json().dump(2) + "\n");
            print_report(report);
            return report.all_pass ? 0 : 1;
        }
        if (shift_cmd->parsed()) {
            const opcalc::BlockOperator h = opcalc::load_operator(shift_h);
            const opcalc::BlockOperator v = opcalc::load_operator(shift_v);
            const opcalc::StepFunction xi = opcalc::xi_counting(h, v);
            const std::vector<double> grid = opcalc::parse_grid(shift_grid);
            std::vector<opcalc::XiRow> rows;
            for (std::size_t k = 0; k < grid.size(); ++k) {
                opcalc::XiRow row;
                row.lambda = grid[k];
                row.xi = xi(grid[k]);
                if (shift_avg && k + 1 < grid.size())
                    row.averaged =
                        opcalc::birman_solomyak_measure(h, v, grid[k], grid[k + 1]).value;
                rows.push_back(row);
            }
            opcalc::write_text_file(shift_out, opcalc::xi_csv(rows, shift_avg));
            std::printf("wrote %s (%zu rows)\n", shift_out.c_str(), rows.size());
            return 0;
        }
        if (flow_cmd->parsed()) {
            opcalc::FlowRequest req{opcalc::load_operator(flow_d0),
                                    opcalc::load_operator(flow_v), 0.0, flow_eps};
            const auto rows =
                opcalc::flow_shift_identity_check(req, opcalc::parse_grid(flow_grid));
            opcalc::write_text_file(flow_out, opcalc::flow_csv(rows));
            int skipped = 0;
            for (const auto& r : rows)
                if (r.skipped) {
                    ++skipped;
                    std::printf("skipped mu = %.12g: level collides with an endpoint spectrum\n",
                                r.mu);
                }
            std::printf("wrote %s (%zu rows, %d skipped)\n", flow_out.c_str(),
                        rows.size() - static_cast<std::size_t>(skipped), skipped);
            return 0;
        }
        if (verify->parsed()) {
            const opcalc::ScenarioConfig cfg =
                verify_config.empty()
                    ? opcalc::default_scenario()
                    : opcalc::scenario_from_json(opcalc::load_json_file(verify_config));
            const opcalc::SuiteReport report = opcalc::run_suite(cfg);
            opcalc::write_text_file(verify_report, report.to_json().dump(2) + "\n");
            print_report(report);
            return report.all_pass ? 0 : 1;
        }
    } catch (const opcalc::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
