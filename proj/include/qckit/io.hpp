#pragma once

#include "qckit/circuits.hpp"
#include "qckit/kernels.hpp"
#include "qckit/statespace.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace qckit {

using Json = nlohmann::ordered_json;

inline constexpr int kStateFormatVersion = 1;

/// Shortest form that round-trips: 17 significant digits.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string read_text_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ValidationError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::filesystem::path& p, const std::string& text) {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + p.string());
    out << text;
}

inline Json read_json_file(const std::filesystem::path& p) {
    try {
        return Json::parse(read_text_file(p));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(p.string() + ": " + e.what());
    }
}

inline void write_json_file(const std::filesystem::path& p, const Json& j) { write_text_file(p, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Complex arrays as interleaved (re, im)

inline Json interleave(const CVector& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        a.push_back(v[i].real());
        a.push_back(v[i].imag());
    }
    return a;
}

inline CVector deinterleave(const Json& a, Eigen::Index expected, const char* field) {
    if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != 2 * expected)
        throw ValidationError(std::string(field) + ": expected " + std::to_string(2 * expected) + " numbers");
    CVector v(expected);
    for (Eigen::Index i = 0; i < expected; ++i) {
        const auto& re = a[static_cast<std::size_t>(2 * i)];
        const auto& im = a[static_cast<std::size_t>(2 * i + 1)];
        if (!re.is_number() || !im.is_number()) throw ValidationError(std::string(field) + ": non-numeric entry");
        v[i] = Complex{re.get<double>(), im.get<double>()};
    }
    return v;
}

namespace detail {

inline void check_format(const Json& j, const char* format) {
    if (!j.is_object() || j.value("format", "") != format)
        throw ValidationError(std::string("expected a '") + format + "' record");
    if (j.value("format_version", 0) != kStateFormatVersion)
        throw ValidationError(std::string(format) + ": unsupported format_version");
}

}  // namespace detail

/// `ordering[s]` is the chain position of qubit s; basis index bit (n-1-q) holds qubit q.
inline Json to_json(const PureState& psi) {
    Json j;
    j["format"] = "qckit.pure_state";
    j["format_version"] = kStateFormatVersion;
    j["num_qubits"] = psi.num_qubits();
    j["qubit_order"] = "qubit 0 is the most significant bit of the basis index";
    j["ordering"] = psi.ordering().positions();
    j["amplitudes"] = interleave(psi.amplitudes());
    return j;
}

inline PureState pure_state_from_json(const Json& j) {
    detail::check_format(j, "qckit.pure_state");
    const int n = j.at("num_qubits").get<int>();
    if (n < 1 || n > 30) throw ValidationError("num_qubits out of range");
    ChainOrdering ord(j.at("ordering").get<std::vector<int>>());
    return {n, deinterleave(j.at("amplitudes"), static_cast<Eigen::Index>(dim_of(n)), "amplitudes"), std::move(ord)};
}

/// Row-major matrix entries, interleaved.
inline Json to_json(const DensityMatrix& rho) {
    Json j;
    j["format"] = "qckit.density_matrix";
    j["format_version"] = kStateFormatVersion;
    j["num_qubits"] = rho.num_qubits();
    j["support"] = rho.support();
    const auto d = rho.matrix().rows();
    CVector flat(d * d);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c) flat[r * d + c] = rho.matrix()(r, c);
    j["matrix"] = interleave(flat);
    return j;
}

inline DensityMatrix density_matrix_from_json(const Json& j) {
    detail::check_format(j, "qckit.density_matrix");
    auto support = j.at("support").get<std::vector<int>>();
    if (support.empty() || support.size() > 14) throw ValidationError("support size out of range");
    const auto d = static_cast<Eigen::Index>(dim_of(static_cast<int>(support.size())));
    const CVector flat = deinterleave(j.at("matrix"), d * d, "matrix");
    CMatrix m(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c) m(r, c) = flat[r * d + c];
    return {std::move(support), std::move(m)};
}

inline Json to_json(const BoundReport& r) {
    Json j;
    j["kind"] = r.kind;
    j["seed"] = r.seed;
    j["quantities"] = Json::object();
    for (const auto& [k, v] : r.quantities) j["quantities"][k] = v;
    j["margins"] = Json::object();
    for (const auto& [k, v] : r.margins) j["margins"][k] = v;
    j["flags"] = Json::object();
    for (const auto& [k, v] : r.flags) j["flags"][k] = v;
    j["violations"] = r.violations;
    return j;
}

inline Json to_json(const KernelConfig& c) {
    Json j;
    j["kind"] = to_string(c.kind);
    j["beta"] = c.beta;
    j["r_max"] = c.r_max;
    j["weights"] = c.weights;
    j["subsets_per_order"] = c.subsets_per_order;
    j["subset_policy"] = c.policy == SubsetPolicy::Adjacent ? "adjacent" : "uniform";
    j["nu"] = c.nu;
    j["normalize"] = c.normalize;
    return j;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return out + "\"";
}

/// Square matrix with sample indices as row and column headers.
inline std::string matrix_to_csv(const RMatrix& m) {
    std::string out = "sample";
    for (Eigen::Index c = 0; c < m.cols(); ++c) out += "," + std::to_string(c);
    out += "\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        out += std::to_string(r);
        for (Eigen::Index c = 0; c < m.cols(); ++c) out += "," + format_double(m(r, c));
        out += "\n";
    }
    return out;
}

inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char ch = line[i];
            if (quoted) {
                if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else if (ch == '"') {
                    quoted = false;
                } else {
                    cell += ch;
                }
            } else if (ch == '"') {
                quoted = true;
            } else if (ch == ',') {
                cells.push_back(std::move(cell));
                cell.clear();
            } else {
                cell += ch;
            }
        }
        cells.push_back(std::move(cell));
        rows.push_back(std::move(cells));
    }
    return rows;
}

inline double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ValidationError(what + ": not a number: '" + s + "'");
    }
}

inline RMatrix matrix_from_csv(const std::string& text) {
    const auto rows = parse_csv(text);
    if (rows.size() < 2) throw ValidationError("kernel csv: no data rows");
    const auto n = static_cast<Eigen::Index>(rows.size() - 1);
    RMatrix m(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& row = rows[static_cast<std::size_t>(r + 1)];
        if (static_cast<Eigen::Index>(row.size()) != n + 1) throw ValidationError("kernel csv: ragged row");
        for (Eigen::Index c = 0; c < n; ++c) m(r, c) = parse_double(row[static_cast<std::size_t>(c + 1)], "kernel csv");
    }
    return m;
}

}  // namespace qckit
