#include <gtest/gtest.h>

#include <opcalc/scenario.hpp>

#include <cmath>
#include <complex>
#include <filesystem>
#include <string>
#include <vector>

using namespace opcalc;

namespace {

std::filesystem::path test_dir() {
    static const std::filesystem::path p = [] {
        auto q = std::filesystem::temp_directory_path() / "opcalc_io_tests";
        std::filesystem::create_directories(q);
        return q;
    }();
    return p;
}

BlockOperator random_op(std::uint64_t seed, bool hermitian) {
    NormalGenerator gen(seed);
    std::vector<Matrix> blocks;
    for (int d : {2, 3}) {
        Matrix a(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) a(i, j) = gen.complex_unit_normal();
        if (hermitian) a = Matrix(0.5 * (a + a.adjoint()));
        blocks.push_back(std::move(a));
    }
    return BlockOperator(std::move(blocks), {1.0, 0.5}, hermitian);
}

BlockOperator scalar_op(double x, double weight = 1.0) {
    Matrix m(1, 1);
    m(0, 0) = Complex(x, 0.0);
    return BlockOperator({m}, {weight}, true);
}

std::vector<std::vector<double>> parse_csv_numbers(const std::string& csv) {
    std::vector<std::vector<double>> rows;
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        std::vector<double> fields;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) fields.push_back(std::stod(cell));
        rows.push_back(std::move(fields));
    }
    return rows;
}

} // namespace

TEST(OperatorJson, FileRoundTripPreservesEveryEntryAndTheHermitianFlag) {
    const BlockOperator op = random_op(11, true);
    const std::string path = (test_dir() / "h_roundtrip.json").string();
    save_operator(path, op);
    const BlockOperator back = load_operator(path);
    EXPECT_TRUE(back.hermitian_flag());
    EXPECT_EQ(max_abs_diff(op, back), 0.0);
    EXPECT_EQ(back.weights(), op.weights());
}

TEST(OperatorJson, GeneralOperatorsComeBackUnflagged) {
    const BlockOperator op = random_op(12, false);
    const json j = operator_to_json(op);
    const BlockOperator back = operator_from_json(j);
    EXPECT_FALSE(back.hermitian_flag());
    EXPECT_EQ(max_abs_diff(op, back), 0.0);
}

TEST(OperatorJson, MalformedDocumentsAreRejected) {
    EXPECT_THROW(operator_from_json(json::object()), ConfigParse);
    EXPECT_THROW(operator_from_json(json{{"blocks", json::array()}}), ConfigParse);
    EXPECT_THROW(operator_from_json(json::parse(R"({"blocks":[{"weight":1.0}]})")), ConfigParse);
    // Non-square matrix.
    EXPECT_THROW(operator_from_json(json::parse(
                     R"({"blocks":[{"weight":1.0,"matrix":[[[1,0],[0,0]]]}]})")),
                 ConfigParse);
    // Entries must be [re, im] pairs.
    EXPECT_THROW(
        operator_from_json(json::parse(R"({"blocks":[{"weight":1.0,"matrix":[[1.0]]}]})")),
        ConfigParse);
}

TEST(FunctionJson, ParsesALiteralSpec) {
    const WienerFunction f =
        function_from_json(json::parse(R"({"family":"gaussian","params":{"sigma":1.0},"max_order":3})"));
    EXPECT_EQ(f.family(), WienerFunction::Family::gaussian);
    EXPECT_EQ(f.param(), 1.0);
    EXPECT_EQ(f.max_order(), 3);
}

TEST(FunctionJson, RoundTripsEveryFamily) {
    std::vector<WienerFunction> fams = {
        WienerFunction::complex_exponential(1.3, 5),
        WienerFunction::sine(1.0, 4),
        WienerFunction::cosine(0.7, 4),
        WienerFunction::gaussian(1.1, 3),
        WienerFunction::lorentzian(0.9, 3),
        WienerFunction::finite_trig_combo({{Complex(0.4, 0.2), 0.7}, {Complex(0.3, 0.0), -1.2}},
                                          4),
    };
    for (const auto& f : fams) {
        const WienerFunction back = function_from_json(function_to_json(f));
        EXPECT_EQ(back.family(), f.family());
        EXPECT_EQ(back.max_order(), f.max_order());
        for (double x : {-1.7, 0.0, 0.4, 2.3})
            for (int k = 0; k <= 1; ++k)
                EXPECT_EQ(back.evaluate(x, k), f.evaluate(x, k)) << f.name();
    }
}

TEST(FunctionJson, UnknownFamilyAndMissingParametersAreRejected) {
    EXPECT_THROW(function_from_json(json::parse(R"({"family":"tangent"})")), ConfigParse);
    EXPECT_THROW(function_from_json(json::parse(R"({"family":"gaussian","params":{}})")),
                 ConfigParse);
    EXPECT_THROW(function_from_json(json::parse(R"({"max_order":3})")), ConfigParse);
}

TEST(MoiRequestJson, LoadsOperandsRelativeToTheRequestFile) {
    const auto dir = test_dir();
    NormalGenerator gen(21);
    std::vector<BlockOperator> ops;
    for (int k = 0; k < 3; ++k) {
        ops.push_back(random_hermitian(gen, {{2, 1.0}}));
        save_operator((dir / ("req_h" + std::to_string(k) + ".json")).string(), ops.back());
    }
    BlockOperator v0 = random_hermitian(gen, {{2, 1.0}});
    BlockOperator v1 = random_hermitian(gen, {{2, 1.0}});
    save_operator((dir / "req_v0.json").string(), v0);
    save_operator((dir / "req_v1.json").string(), v1);
    write_text_file((dir / "request.json").string(), json{
        {"order", 2},
        {"operators", {"req_h0.json", "req_h1.json", "req_h2.json"}},
        {"directions", {"req_v0.json", "req_v1.json"}},
        {"function", {{"family", "cosine"}, {"params", {{"a", 1.3}}}, {"max_order", 4}}},
    }.dump());

    const MOIRequest req = load_moi_request((dir / "request.json").string());
    EXPECT_EQ(req.order, 2);
    ASSERT_EQ(req.operators.size(), 3u);
    ASSERT_EQ(req.directions.size(), 2u);
    for (int k = 0; k < 3; ++k) EXPECT_EQ(max_abs_diff(req.operators[k], ops[k]), 0.0);
    EXPECT_EQ(max_abs_diff(req.directions[1], v1), 0.0);
    EXPECT_EQ(std::get<WienerFunction>(req.kernel).family(), WienerFunction::Family::cosine);
}

TEST(MoiRequestJson, SingleOperatorPathIsReusedOnEveryLeg) {
    const auto dir = test_dir();
    const json j{
        {"order", 2},
        {"operators", {"req_h0.json"}},
        {"directions", {"req_v0.json", "req_v1.json"}},
        {"function", {{"family", "sine"}, {"params", {{"a", 1.0}}}, {"max_order", 4}}},
    };
    const MOIRequest req = moi_request_from_json(j, dir.string());
    ASSERT_EQ(req.operators.size(), 3u);
    EXPECT_EQ(max_abs_diff(req.operators[0], req.operators[2]), 0.0);
    EXPECT_THROW(moi_request_from_json(json{{"order", 1}}, dir.string()), ConfigParse);
}

TEST(Formatting, DoublesRoundTripThroughTheirDecimalForm) {
    for (double x : {1.0 / 3.0, 1e-17, std::ldexp(1.0, -40), -0.0, 12345.678901234567}) {
        const double back = std::stod(format_double(x));
        EXPECT_EQ(back, x);
        EXPECT_EQ(std::signbit(back), std::signbit(x));
    }
    EXPECT_EQ(format_double(1.5), "1.5");
    EXPECT_EQ(format_double(-2.0), "-2");
}

TEST(Formatting, CurveCsvBytesAreFixed) {
    std::vector<XiRow> rows{{-1.0, 0.0, 0.0}, {0.5, 1.0 / 3.0, 0.25}};
    EXPECT_EQ(xi_csv(rows, false), "lambda,xi\n-1,0\n0.5,0.33333333333333331\n");
    EXPECT_EQ(xi_csv(rows, true),
              "lambda,xi,Xi\n-1,0,0\n0.5,0.33333333333333331,0.25\n");

    FlowReport live;
    live.mu = 0.25;
    live.sf_counting = live.sf_partition = live.sf_cp = live.xi = 1.0;
    FlowReport dead;
    dead.mu = 1.0;
    dead.skipped = true;
    EXPECT_EQ(flow_csv({live, dead}),
              "mu,sf_counting,sf_partition,sf_cp,xi,kernel_corr\n0.25,1,1,1,1,0\n");
}

TEST(Formatting, GridSpecsExpandInclusively) {
    const std::vector<double> g = parse_grid("-2:2:9");
    ASSERT_EQ(g.size(), 9u);
    EXPECT_EQ(g.front(), -2.0);
    EXPECT_EQ(g[4], 0.0);
    EXPECT_EQ(g.back(), 2.0);
    EXPECT_EQ(parse_grid("3.5:9:1"), std::vector<double>{3.5});
    EXPECT_THROW(parse_grid("1:2"), ConfigParse);
    EXPECT_THROW(parse_grid("a:b:c"), ConfigParse);
    EXPECT_THROW(parse_grid("0:1:0"), ConfigParse);
}

TEST(Files, MissingAndMalformedInputsRaiseDistinctErrors) {
    EXPECT_THROW(load_json_file((test_dir() / "does_not_exist.json").string()), FileNotFound);
    const std::string bad = (test_dir() / "bad.json").string();
    write_text_file(bad, "{not json");
    EXPECT_THROW(load_json_file(bad), ConfigParse);
    EXPECT_THROW(write_text_file((test_dir() / "no_such_dir" / "x.txt").string(), "x"), IOError);
}

TEST(Instances, GenerationIsDeterministicAndNormalized) {
    const std::vector<std::pair<int, double>> dims{{2, 1.0}, {3, 0.5}};
    auto [h1, v1] = generate_instance(77, dims);
    auto [h2, v2] = generate_instance(77, dims);
    EXPECT_EQ(max_abs_diff(h1, h2), 0.0);
    EXPECT_EQ(max_abs_diff(v1, v2), 0.0);
    EXPECT_NEAR(trace_norm(v1), 1.0, 1e-12);
    EXPECT_TRUE(h1.hermitian_flag());

    auto [h3, v3] = generate_instance(78, dims);
    EXPECT_GT(max_abs_diff(h1, h3), 1e-3);

    auto [hs, vs] = generate_instance(5, {{1, 1.0}});
    EXPECT_EQ(hs.block(0)(0, 0).imag(), 0.0);
    EXPECT_EQ(vs.block(0)(0, 0).imag(), 0.0);
}

TEST(Instances, NormalStreamIsSeedStable) {
    EXPECT_STREQ(NormalGenerator::name, "mt19937_64/box-muller");
    NormalGenerator a(7), b(7), c(8);
    bool differs = false;
    for (int k = 0; k < 8; ++k) {
        const double xa = a(), xb = b(), xc = c();
        EXPECT_EQ(xa, xb);
        differs = differs || xa != xc;
    }
    EXPECT_TRUE(differs);
}

TEST(Scenario, JsonRoundTripAndValidation) {
    ScenarioConfig cfg = default_scenario();
    cfg.seed = 99;
    cfg.checks = {"dk", "krein"};
    cfg.dims = {{2, 1.0}, {2, 1.0 / 3.0}};
    cfg.instances = 3;
    cfg.averaged_column = true;
    const ScenarioConfig back = scenario_from_json(scenario_to_json(cfg));
    EXPECT_EQ(back.seed, 99u);
    EXPECT_EQ(back.checks, cfg.checks);
    EXPECT_EQ(back.dims, cfg.dims);
    EXPECT_EQ(back.instances, 3);
    EXPECT_TRUE(back.averaged_column);
    EXPECT_EQ(back.functions.size(), cfg.functions.size());

    EXPECT_THROW(scenario_from_json(json{{"checks", {"no_such_check"}}}), ConfigParse);
    EXPECT_THROW(scenario_from_json(json{{"dims", json::array()}}), ConfigParse);
    EXPECT_THROW(scenario_from_json(json::parse(R"({"dims":[[0,1.0]]})")), ConfigParse);
    EXPECT_THROW(scenario_from_json(json::parse(R"({"tolerances":{"dk":0.0}})")), ConfigParse);
}

TEST(Scenario, SuiteRunsAreDeterministicAndPass) {
    json j{{"seed", 31415},
           {"checks", {"dk"}},
           {"instances", 1},
           {"functions", {{{"family", "cosine"}, {"params", {{"a", 1.3}}}, {"max_order", 4}}}}};
    const ScenarioConfig cfg = scenario_from_json(j);
    const SuiteReport r1 = run_suite(cfg);
    const SuiteReport r2 = run_suite(cfg);
    ASSERT_EQ(r1.rows.size(), 1u);
    EXPECT_EQ(r1.rows[0].check, "dk");
    EXPECT_EQ(r1.rows[0].tolerance, 1e-9);
    EXPECT_TRUE(r1.all_pass);
    EXPECT_EQ(r1.to_json().dump(), r2.to_json().dump());
    EXPECT_EQ(r1.to_json()["rng"], "mt19937_64/box-muller");
}

TEST(Scenario, CanonicalCurvesAreExactAndReemitByteIdentical) {
    const auto dir = test_dir();
    const std::string h_path = (dir / "curve_h.json").string();
    const std::string v_path = (dir / "curve_v.json").string();
    save_operator(h_path, scalar_op(0.0));
    save_operator(v_path, scalar_op(1.0));

    ScenarioConfig cfg = default_scenario();
    cfg.h_file = h_path;
    cfg.v_file = v_path;
    cfg.lambda_grid = "-1:2:7";
    cfg.mu_grid = "0.25:0.75:3";

    const CurveFiles curves = emit_curves(cfg);
    EXPECT_EQ(curves.xi_csv, "lambda,xi\n-1,0\n-0.5,0\n0,1\n0.5,1\n1,0\n1.5,0\n2,0\n");
    EXPECT_EQ(curves.skipped_mu, 0);

    const auto rows = parse_csv_numbers(curves.flow_csv);
    ASSERT_EQ(rows.size(), 3u);
    for (const auto& r : rows) {
        ASSERT_EQ(r.size(), 6u);
        EXPECT_EQ(r[1], 1.0); // counting
        EXPECT_EQ(r[2], 1.0); // partition
        EXPECT_NEAR(r[3], 1.0, 1e-6); // heat formula
        EXPECT_EQ(r[4], 1.0); // shift function
        EXPECT_EQ(r[5], 0.0); // no kernel correction off the spectra
    }

    const CurveFiles again = emit_curves(cfg);
    EXPECT_EQ(again.xi_csv, curves.xi_csv);
    EXPECT_EQ(again.flow_csv, curves.flow_csv);
}
