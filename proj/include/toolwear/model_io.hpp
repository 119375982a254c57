#pragma once

#include <charconv>
#include <string>
#include <system_error>

#include <json.hpp>

#include "toolwear/cells.hpp"

namespace toolwear {

inline constexpr int kModelFormatVersion = 1;

/// Doubles travel through JSON as hex-float strings ("1.8p+3") so that a
/// save/load round trip is bit-exact.
inline std::string double_to_hex(double x) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::hex);
    return std::string(buf, res.ptr);
}

inline double hex_to_double(const std::string& s) {
    double x = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), x, std::chars_format::hex);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::invalid_argument("malformed hex-float value: " + s);
    if (!std::isfinite(x))
        throw std::invalid_argument("non-finite value in model file: " + s);
    return x;
}

inline nlohmann::json vector_to_json(const Vector& v) {
    nlohmann::json a = nlohmann::json::array();
    for (double x : v) a.push_back(double_to_hex(x));
    return a;
}

inline Vector vector_from_json(const nlohmann::json& a) {
    Vector v;
    v.reserve(a.size());
    for (const auto& s : a) v.push_back(hex_to_double(s.get<std::string>()));
    return v;
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
    return {{"rows", m.rows}, {"cols", m.cols}, {"data", vector_to_json(m.data)}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
    Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    m.data = vector_from_json(j.at("data"));
    if (m.data.size() != m.rows * m.cols)
        throw std::invalid_argument("matrix data length does not match rows*cols");
    return m;
}

inline nlohmann::json cell_to_json(const CellParams& p) {
    nlohmann::json w;
    const auto& names = gate_names(p.kind);
    for (int g = 0; g < gate_count(p.kind); ++g) {
        w["U_" + names[g]] = matrix_to_json(p.U[g]);
        w["W_" + names[g]] = matrix_to_json(p.W[g]);
        w["b_" + names[g]] = vector_to_json(p.b[g]);
    }
    w["V"] = matrix_to_json(p.V);
    w["c_out"] = vector_to_json(p.c_out);
    nlohmann::json j{{"format_version", kModelFormatVersion},
                     {"kind", to_string(p.kind)},
                     {"input_dim", p.input_dim},
                     {"hidden_dim", p.hidden_dim},
                     {"output_dim", p.output_dim},
                     {"weights", std::move(w)}};
    if (p.kind == CellKind::Gru) j["gru_no_reset"] = p.gru_no_reset;
    return j;
}

inline CellParams cell_from_json(const nlohmann::json& j) {
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion)
        throw std::invalid_argument("unsupported cell format_version " + std::to_string(version));
    CellParams p;
    p.kind = cell_kind_from_string(j.at("kind").get<std::string>());
    p.input_dim = j.at("input_dim").get<std::size_t>();
    p.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    p.output_dim = j.at("output_dim").get<std::size_t>();
    if (p.kind == CellKind::Gru) p.gru_no_reset = j.value("gru_no_reset", false);
    const auto& w = j.at("weights");
    const auto& names = gate_names(p.kind);
    for (int g = 0; g < gate_count(p.kind); ++g) {
        p.U.push_back(matrix_from_json(w.at("U_" + names[g])));
        p.W.push_back(matrix_from_json(w.at("W_" + names[g])));
        p.b.push_back(vector_from_json(w.at("b_" + names[g])));
    }
    p.V = matrix_from_json(w.at("V"));
    p.c_out = vector_from_json(w.at("c_out"));
    for (int g = 0; g < gate_count(p.kind); ++g) {
        if (p.U[g].rows != p.input_dim || p.U[g].cols != p.hidden_dim ||
            p.W[g].rows != p.hidden_dim || p.W[g].cols != p.hidden_dim ||
            p.b[g].size() != p.hidden_dim)
            throw std::invalid_argument("cell weights inconsistent with declared dimensions");
    }
    if (p.V.rows != p.hidden_dim || p.V.cols != p.output_dim || p.c_out.size() != p.output_dim)
        throw std::invalid_argument("readout weights inconsistent with declared dimensions");
    return p;
}

}  // namespace toolwear
