#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "block_operator.hpp"
#include "flow.hpp"
#include "moi.hpp"
#include "wiener.hpp"

namespace opcalc {

using nlohmann::json;

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FileNotFound("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigParse(path + ": " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOError("cannot open " + path + " for writing");
    out << content;
    if (!out) throw IOError("failed writing " + path);
}

// Shortest round-trip decimal form, byte-stable across runs.
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// ---------------------------------------------------------------------------
// Operators: {"blocks":[{"weight": w, "matrix":[[[re,im],...],...]}, ...]}

inline json operator_to_json(const BlockOperator& op) {
    json blocks = json::array();
    for (std::size_t b = 0; b < op.block_count(); ++b) {
        const auto& m = op.block(b);
        json rows = json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            json row = json::array();
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                row.push_back(json::array({m(i, j).real(), m(i, j).imag()}));
            rows.push_back(std::move(row));
        }
        blocks.push_back(json{{"weight", op.weights()[b]}, {"matrix", std::move(rows)}});
    }
    return json{{"blocks", std::move(blocks)}};
}

inline BlockOperator operator_from_json(const json& j) {
    if (!j.is_object() || !j.contains("blocks") || !j["blocks"].is_array() ||
        j["blocks"].empty())
        throw ConfigParse("operator JSON needs a nonempty \"blocks\" array");
    std::vector<Eigen::MatrixXcd> blocks;
    std::vector<double> weights;
    for (const auto& jb : j["blocks"]) {
        if (!jb.contains("weight") || !jb.contains("matrix"))
            throw ConfigParse("operator block needs \"weight\" and \"matrix\"");
        const auto& jm = jb["matrix"];
        const auto n = static_cast<Eigen::Index>(jm.size());
        if (n == 0) throw ConfigParse("operator block matrix is empty");
        Eigen::MatrixXcd m(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& row = jm[static_cast<std::size_t>(i)];
            if (static_cast<Eigen::Index>(row.size()) != n)
                throw ConfigParse("operator block matrix must be square");
            for (Eigen::Index k = 0; k < n; ++k) {
                const auto& e = row[static_cast<std::size_t>(k)];
                if (!e.is_array() || e.size() != 2)
                    throw ConfigParse("matrix entries must be [re, im] pairs");
                m(i, k) = Complex(e[0].get<double>(), e[1].get<double>());
            }
        }
        blocks.push_back(std::move(m));
        weights.push_back(jb["weight"].get<double>());
    }
    // Flag the operator Hermitian when it measures as such, so downstream
    // spectral routines accept it without a separate declaration.
    double dev = 0.0, scale = 0.0;
    for (const auto& m : blocks) {
        dev = std::max(dev, (m - m.adjoint()).cwiseAbs().maxCoeff());
        scale = std::max(scale, m.cwiseAbs().maxCoeff());
    }
    const bool hermitian = dev <= 1e-12 * (1.0 + scale);
    return BlockOperator(std::move(blocks), std::move(weights), hermitian);
}

inline BlockOperator load_operator(const std::string& path) {
    return operator_from_json(load_json_file(path));
}

inline void save_operator(const std::string& path, const BlockOperator& op) {
    write_text_file(path, operator_to_json(op).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Function specs: {"family":"gaussian","params":{"sigma":1.0},"max_order":3}

inline std::string family_name(WienerFunction::Family f) {
    switch (f) {
        case WienerFunction::Family::complex_exponential: return "complex_exponential";
        case WienerFunction::Family::sine: return "sine";
        case WienerFunction::Family::cosine: return "cosine";
        case WienerFunction::Family::gaussian: return "gaussian";
        case WienerFunction::Family::lorentzian: return "lorentzian";
        case WienerFunction::Family::finite_trig_combo: return "finite_trig_combo";
    }
    throw ConfigParse("unknown function family");
}

inline json function_to_json(const WienerFunction& f) {
    json params = json::object();
    switch (f.family()) {
        case WienerFunction::Family::gaussian: params["sigma"] = f.param(); break;
        case WienerFunction::Family::finite_trig_combo: {
            json terms = json::array();
            for (const auto& [c, s] : f.combo_terms())
                terms.push_back(json{{"c", json::array({c.real(), c.imag()})}, {"s", s}});
            params["terms"] = std::move(terms);
            break;
        }
        default: params["a"] = f.param(); break;
    }
    return json{{"family", family_name(f.family())}, {"params", std::move(params)},
                {"max_order", f.max_order()}};
}

inline WienerFunction function_from_json(const json& j) {
    if (!j.is_object() || !j.contains("family"))
        throw ConfigParse("function spec needs a \"family\" field");
    const std::string fam = j["family"].get<std::string>();
    const json params = j.value("params", json::object());
    const int max_order = j.value("max_order", 6);
    auto param = [&params](const char* key) {
        if (!params.contains(key))
            throw ConfigParse(std::string("function spec missing parameter \"") + key + "\"");
        return params[key].get<double>();
    };
    if (fam == "complex_exponential")
        return WienerFunction::complex_exponential(param("a"), max_order);
    if (fam == "sine") return WienerFunction::sine(param("a"), max_order);
    if (fam == "cosine") return WienerFunction::cosine(param("a"), max_order);
    if (fam == "gaussian") return WienerFunction::gaussian(param("sigma"), max_order);
    if (fam == "lorentzian") return WienerFunction::lorentzian(param("a"), max_order);
    if (fam == "finite_trig_combo") {
        if (!params.contains("terms") || !params["terms"].is_array())
            throw ConfigParse("finite_trig_combo needs params.terms");
        std::vector<std::pair<Complex, double>> terms;
        for (const auto& t : params["terms"]) {
            const auto& c = t.at("c");
            terms.emplace_back(Complex(c[0].get<double>(), c[1].get<double>()),
                               t.at("s").get<double>());
        }
        return WienerFunction::finite_trig_combo(std::move(terms), max_order);
    }
    throw ConfigParse("unknown function family \"" + fam + "\"");
}

// ---------------------------------------------------------------------------
// MOI requests reference operator files and a function spec:
// {"order": n, "operators": [n+1 paths], "directions": [n paths],
//  "function": {...}}. A single operator path is reused for all legs.
// Paths are resolved relative to the request file's directory.

inline MOIRequest moi_request_from_json(const json& j, const std::string& base_dir) {
    if (!j.contains("order") || !j.contains("operators") || !j.contains("directions") ||
        !j.contains("function"))
        throw ConfigParse("request needs order, operators, directions, function");
    MOIRequest req;
    req.order = j["order"].get<int>();
    auto resolve = [&base_dir](const std::string& p) {
        const std::filesystem::path fp(p);
        return fp.is_absolute() ? fp.string() : (std::filesystem::path(base_dir) / fp).string();
    };
    std::vector<std::string> op_paths = j["operators"].get<std::vector<std::string>>();
    if (op_paths.size() == 1) op_paths.assign(static_cast<std::size_t>(req.order) + 1,
                                              op_paths.front());
    for (const auto& p : op_paths) req.operators.push_back(load_operator(resolve(p)));
    for (const auto& p : j["directions"].get<std::vector<std::string>>())
        req.directions.push_back(load_operator(resolve(p)));
    req.kernel = function_from_json(j["function"]);
    req.validate();
    return req;
}

inline MOIRequest load_moi_request(const std::string& path) {
    return moi_request_from_json(load_json_file(path),
                                 std::filesystem::path(path).parent_path().string());
}

inline json moi_result_to_json(const MOIResult& res) {
    return json{{"path", res.path == MoiPath::spectral ? "spectral" : "fourier"},
                {"error_estimate", res.error_estimate},
                {"value", operator_to_json(res.value)}};
}

// ---------------------------------------------------------------------------
// Curve files. Columns are fixed; numbers use the shortest exact decimal form
// so reruns are byte-identical.

struct XiRow {
    double lambda = 0.0;
    double xi = 0.0;
    double averaged = 0.0; // only emitted when with_averaged is set
};

inline std::string xi_csv(const std::vector<XiRow>& rows, bool with_averaged) {
    std::ostringstream out;
    out << (with_averaged ? "lambda,xi,Xi\n" : "lambda,xi\n");
    for (const auto& r : rows) {
        out << format_double(r.lambda) << ',' << format_double(r.xi);
        if (with_averaged) out << ',' << format_double(r.averaged);
        out << '\n';
    }
    return out.str();
}

inline std::string flow_csv(const std::vector<FlowReport>& rows) {
    std::ostringstream out;
    out << "mu,sf_counting,sf_partition,sf_cp,xi,kernel_corr\n";
    for (const auto& r : rows) {
        if (r.skipped) continue; // collision rows are reported by the caller
        out << format_double(r.mu) << ',' << format_double(r.sf_counting) << ','
            << format_double(r.sf_partition) << ',' << format_double(r.sf_cp) << ','
            << format_double(r.xi) << ',' << format_double(r.kernel_corr) << '\n';
    }
    return out.str();
}

// "a:b:n" -> n points from a to b inclusive (n >= 2; n == 1 gives just a).
inline std::vector<double> parse_grid(const std::string& spec) {
    double a = 0.0, b = 0.0;
    long n = 0;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%ld", &a, &b, &n) != 3 || n < 1)
        throw ConfigParse("grid spec must be a:b:n with n >= 1, got \"" + spec + "\"");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n));
    if (n == 1) {
        out.push_back(a);
        return out;
    }
    for (long k = 0; k < n; ++k)
        out.push_back(a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1));
    return out;
}

} // namespace opcalc
