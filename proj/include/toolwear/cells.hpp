#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "toolwear/numerics.hpp"

namespace toolwear {

enum class CellKind { ElmanRnn, Lstm, Gru };

// Gate slot indices into CellParams::U/W/b.
// Elman: {candidate}; LSTM: {input, forget, candidate, output};
// GRU: {update, reset, candidate}.
namespace gate {
inline constexpr int elman_h = 0;
inline constexpr int lstm_i = 0;
inline constexpr int lstm_f = 1;
inline constexpr int lstm_g = 2;
inline constexpr int lstm_o = 3;
inline constexpr int gru_z = 0;
inline constexpr int gru_r = 1;
inline constexpr int gru_h = 2;
}  // namespace gate

inline int gate_count(CellKind kind) {
    switch (kind) {
        case CellKind::ElmanRnn: return 1;
        case CellKind::Lstm: return 4;
        case CellKind::Gru: return 3;
    }
    return 0;
}

inline const std::vector<std::string>& gate_names(CellKind kind) {
    static const std::vector<std::string> elman{"h"};
    static const std::vector<std::string> lstm{"i", "f", "g", "o"};
    static const std::vector<std::string> gru{"z", "r", "h"};
    switch (kind) {
        case CellKind::Lstm: return lstm;
        case CellKind::Gru: return gru;
        default: return elman;
    }
}

inline std::string to_string(CellKind kind) {
    switch (kind) {
        case CellKind::ElmanRnn: return "elman";
        case CellKind::Lstm: return "lstm";
        case CellKind::Gru: return "gru";
    }
    return "?";
}

inline CellKind cell_kind_from_string(const std::string& s) {
    if (s == "elman" || s == "rnn") return CellKind::ElmanRnn;
    if (s == "lstm") return CellKind::Lstm;
    if (s == "gru") return CellKind::Gru;
    throw std::invalid_argument("unknown cell kind: " + s);
}

/// Weights of one recurrent cell plus its linear readout.
/// U[g]: input_dim x hidden_dim, W[g]: hidden_dim x hidden_dim, b[g]: hidden_dim,
/// one slot per gate in the order given by gate_names(kind).
/// V: hidden_dim x output_dim, c_out: output_dim.
struct CellParams {
    CellKind kind = CellKind::ElmanRnn;
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    std::size_t output_dim = 0;
    // Reproduces the printed GRU variant whose candidate ignores the reset
    // gate; the default applies r to h_{t-1}.
    bool gru_no_reset = false;

    std::vector<Matrix> U;
    std::vector<Matrix> W;
    std::vector<Vector> b;
    Matrix V;
    Vector c_out;

    bool operator==(const CellParams&) const = default;
};

/// Recurrent state: h always, c only for LSTM (empty otherwise).
struct HiddenState {
    Vector h;
    Vector c;

    bool operator==(const HiddenState&) const = default;
};

/// All tensors of a parameter set, in a fixed order. The same order is used
/// for gradients, Adam moments, serialization, and flat parameter walks.
inline std::vector<std::vector<double>*> tensor_list(CellParams& p) {
    std::vector<std::vector<double>*> out;
    for (auto& m : p.U) out.push_back(&m.data);
    for (auto& m : p.W) out.push_back(&m.data);
    for (auto& v : p.b) out.push_back(&v);
    out.push_back(&p.V.data);
    out.push_back(&p.c_out);
    return out;
}

inline std::vector<const std::vector<double>*> tensor_list(const CellParams& p) {
    std::vector<const std::vector<double>*> out;
    for (auto& m : p.U) out.push_back(&m.data);
    for (auto& m : p.W) out.push_back(&m.data);
    for (auto& v : p.b) out.push_back(&v);
    out.push_back(&p.V.data);
    out.push_back(&p.c_out);
    return out;
}

/// Same shapes as `p`, every entry zero.
inline CellParams zeros_like(const CellParams& p) {
    CellParams z = p;
    for (auto* t : tensor_list(z))
        for (double& x : *t) x = 0.0;
    return z;
}

/// Glorot-initialized cell. Biases start at zero except the LSTM forget
/// gate, which starts at +1 so early training does not wipe the cell state.
inline CellParams make_cell(CellKind kind, std::size_t input_dim, std::size_t hidden_dim,
                            std::size_t output_dim, std::uint64_t seed) {
    require(input_dim >= 1 && hidden_dim >= 1 && output_dim >= 1,
            "make_cell: dimensions must be >= 1");
    CellParams p;
    p.kind = kind;
    p.input_dim = input_dim;
    p.hidden_dim = hidden_dim;
    p.output_dim = output_dim;
    const int n = gate_count(kind);
    for (int g = 0; g < n; ++g) {
        p.U.push_back(init_params(input_dim, hidden_dim, mix_seed(seed, 2 * g)));
        p.W.push_back(init_params(hidden_dim, hidden_dim, mix_seed(seed, 2 * g + 1)));
        p.b.emplace_back(hidden_dim, 0.0);
    }
    if (kind == CellKind::Lstm)
        for (double& x : p.b[gate::lstm_f]) x = 1.0;
    p.V = init_params(hidden_dim, output_dim, mix_seed(seed, 2 * n));
    p.c_out.assign(output_dim, 0.0);
    return p;
}

inline HiddenState zero_state(const CellParams& p) {
    HiddenState s;
    s.h.assign(p.hidden_dim, 0.0);
    if (p.kind == CellKind::Lstm) s.c.assign(p.hidden_dim, 0.0);
    return s;
}

/// Everything one forward step computes, kept for backpropagation.
/// `gate_act` holds the activated gate values in gate-slot order; `rh` is
/// the GRU's r * h_{t-1} product (what actually multiplies W_h).
struct StepTrace {
    std::vector<Vector> gate_act;
    Vector rh;
    Vector c;
    Vector h;
    Vector y;
};

inline StepTrace step_trace(const CellParams& p, const HiddenState& state, const Vector& x) {
    require(x.size() == p.input_dim, "step: input length does not match input_dim");
    require(state.h.size() == p.hidden_dim, "step: state does not match hidden_dim");
    StepTrace t;
    switch (p.kind) {
        case CellKind::ElmanRnn: {
            t.h = tanh_act(affine(x, p.U[gate::elman_h], state.h, p.W[gate::elman_h],
                                  p.b[gate::elman_h]));
            t.gate_act = {t.h};
            break;
        }
        case CellKind::Lstm: {
            require(state.c.size() == p.hidden_dim, "step: LSTM state has no cell vector");
            Vector i = sigmoid(affine(x, p.U[gate::lstm_i], state.h, p.W[gate::lstm_i], p.b[gate::lstm_i]));
            Vector f = sigmoid(affine(x, p.U[gate::lstm_f], state.h, p.W[gate::lstm_f], p.b[gate::lstm_f]));
            Vector g = tanh_act(affine(x, p.U[gate::lstm_g], state.h, p.W[gate::lstm_g], p.b[gate::lstm_g]));
            Vector o = sigmoid(affine(x, p.U[gate::lstm_o], state.h, p.W[gate::lstm_o], p.b[gate::lstm_o]));
            t.c.resize(p.hidden_dim);
            t.h.resize(p.hidden_dim);
            for (std::size_t k = 0; k < p.hidden_dim; ++k) {
                t.c[k] = f[k] * state.c[k] + i[k] * g[k];
                t.h[k] = o[k] * std::tanh(t.c[k]);
            }
            t.gate_act = {std::move(i), std::move(f), std::move(g), std::move(o)};
            break;
        }
        case CellKind::Gru: {
            Vector z = sigmoid(affine(x, p.U[gate::gru_z], state.h, p.W[gate::gru_z], p.b[gate::gru_z]));
            Vector r = sigmoid(affine(x, p.U[gate::gru_r], state.h, p.W[gate::gru_r], p.b[gate::gru_r]));
            t.rh.resize(p.hidden_dim);
            for (std::size_t k = 0; k < p.hidden_dim; ++k)
                t.rh[k] = p.gru_no_reset ? state.h[k] : r[k] * state.h[k];
            Vector cand = tanh_act(affine(x, p.U[gate::gru_h], t.rh, p.W[gate::gru_h], p.b[gate::gru_h]));
            t.h.resize(p.hidden_dim);
            for (std::size_t k = 0; k < p.hidden_dim; ++k)
                t.h[k] = (1.0 - z[k]) * cand[k] + z[k] * state.h[k];
            t.gate_act = {std::move(z), std::move(r), std::move(cand)};
            break;
        }
    }
    t.y = p.c_out;
    for (std::size_t r = 0; r < p.hidden_dim; ++r) {
        const double hr = t.h[r];
        for (std::size_t c = 0; c < p.output_dim; ++c) t.y[c] += hr * p.V(r, c);
    }
    return t;
}

struct StepResult {
    HiddenState state;
    Vector y;
};

inline StepResult step(const CellParams& p, const HiddenState& state, const Vector& x) {
    StepTrace t = step_trace(p, state, x);
    StepResult r;
    r.state.h = std::move(t.h);
    if (p.kind == CellKind::Lstm) r.state.c = std::move(t.c);
    r.y = std::move(t.y);
    return r;
}

/// Forward pass over a whole sequence from the zero state.
inline std::vector<Vector> run_sequence(const CellParams& p, const std::vector<Vector>& inputs) {
    std::vector<Vector> out;
    out.reserve(inputs.size());
    HiddenState s = zero_state(p);
    for (const Vector& x : inputs) {
        StepResult r = step(p, s, x);
        s = std::move(r.state);
        out.push_back(std::move(r.y));
    }
    return out;
}

}  // namespace toolwear
