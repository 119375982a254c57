#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <vector>

#include "toolwear/cells.hpp"

namespace toolwear {

/// One training sequence: aligned input and target vectors per time step.
struct SequenceExample {
    std::vector<Vector> inputs;
    std::vector<Vector> targets;
};

using Gradients = CellParams;  // shape mirror of the owning CellParams

struct TrainConfig {
    int iterations = 14;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 5.0;
    std::optional<int> early_stop_patience;
    std::uint64_t seed = 0;
    std::size_t hidden_dim = 5;
    // One Adam update per sequence by default; per-step truncated updates
    // (depth 1) when set, for comparison with the per-time-step reading.
    bool update_per_step = false;
    bool gru_no_reset = false;
};

struct TrainRecord {
    int iteration;
    double train_mse;
    double val_mse;
};

struct TrainHistory {
    std::vector<TrainRecord> records;

    void save_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot open " + path + " for writing");
        out << "iteration,train_mse,val_mse\n";
        std::ostringstream row;
        for (const auto& r : records) {
            row.str("");
            row.precision(17);
            row << r.iteration << ',' << r.train_mse << ',' << r.val_mse << '\n';
            out << row.str();
        }
    }
};

inline double mse(const std::vector<Vector>& pred, const std::vector<Vector>& target) {
    require(!pred.empty() && pred.size() == target.size(),
            "mse: sequences must be nonempty and of equal length");
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t t = 0; t < pred.size(); ++t) {
        require(pred[t].size() == target[t].size(), "mse: component count mismatch");
        for (std::size_t j = 0; j < pred[t].size(); ++j) {
            const double d = pred[t][j] - target[t][j];
            sum += d * d;
        }
        n += pred[t].size();
    }
    return sum / static_cast<double>(n);
}

namespace detail {

// M(r,c) += a[r] * d[c]
inline void add_outer(Matrix& M, const Vector& a, const Vector& d) {
    for (std::size_t r = 0; r < M.rows; ++r) {
        const double ar = a[r];
        for (std::size_t c = 0; c < M.cols; ++c) M(r, c) += ar * d[c];
    }
}

// out[r] = sum_c W(r,c) * d[c]
inline Vector matT_vec(const Matrix& W, const Vector& d) {
    Vector out(W.rows, 0.0);
    for (std::size_t r = 0; r < W.rows; ++r)
        for (std::size_t c = 0; c < W.cols; ++c) out[r] += W(r, c) * d[c];
    return out;
}

inline void add_inplace(Vector& a, const Vector& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

}  // namespace detail

/// Forward + exact backward over `inputs` starting from `init`. Gradients of
/// the mean-squared error over every time step and output component, with
/// respect to every parameter; no truncation. Derivatives flowing into
/// `init` are discarded (the initial state is not a parameter).
inline std::pair<double, Gradients> loss_and_grads_from(const CellParams& p,
                                                        const HiddenState& init,
                                                        const std::vector<Vector>& inputs,
                                                        const std::vector<Vector>& targets) {
    require(!inputs.empty() && inputs.size() == targets.size(),
            "loss_and_grads: inputs and targets must be nonempty and aligned");
    const std::size_t T = inputs.size();
    const std::size_t H = p.hidden_dim;

    std::vector<StepTrace> traces;
    traces.reserve(T);
    HiddenState s = init;
    std::vector<Vector> preds;
    preds.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
        traces.push_back(step_trace(p, s, inputs[t]));
        s.h = traces.back().h;
        if (p.kind == CellKind::Lstm) s.c = traces.back().c;
        preds.push_back(traces.back().y);
    }
    const double loss = mse(preds, targets);

    Gradients g = zeros_like(p);
    const double scale = 2.0 / static_cast<double>(T * p.output_dim);

    Vector dh_next(H, 0.0);  // dL/dh_t flowing back from step t+1
    Vector dc_next(H, 0.0);  // dL/dc_t for LSTM
    for (std::size_t ti = T; ti-- > 0;) {
        const StepTrace& tr = traces[ti];
        const Vector& x = inputs[ti];
        const Vector& h_prev = ti == 0 ? init.h : traces[ti - 1].h;

        // readout
        Vector dy(p.output_dim);
        for (std::size_t j = 0; j < p.output_dim; ++j)
            dy[j] = scale * (tr.y[j] - targets[ti][j]);
        detail::add_outer(g.V, tr.h, dy);
        detail::add_inplace(g.c_out, dy);
        Vector dh = detail::matT_vec(p.V, dy);
        detail::add_inplace(dh, dh_next);

        Vector dh_prev(H, 0.0);
        switch (p.kind) {
            case CellKind::ElmanRnn: {
                Vector da(H);
                for (std::size_t k = 0; k < H; ++k)
                    da[k] = dh[k] * (1.0 - tr.h[k] * tr.h[k]);
                detail::add_outer(g.U[gate::elman_h], x, da);
                detail::add_outer(g.W[gate::elman_h], h_prev, da);
                detail::add_inplace(g.b[gate::elman_h], da);
                dh_prev = detail::matT_vec(p.W[gate::elman_h], da);
                break;
            }
            case CellKind::Lstm: {
                const Vector& c_prev = ti == 0 ? init.c : traces[ti - 1].c;
                const Vector& i = tr.gate_act[gate::lstm_i];
                const Vector& f = tr.gate_act[gate::lstm_f];
                const Vector& gg = tr.gate_act[gate::lstm_g];
                const Vector& o = tr.gate_act[gate::lstm_o];
                Vector da_i(H), da_f(H), da_g(H), da_o(H), dc(H);
                for (std::size_t k = 0; k < H; ++k) {
                    const double tc = std::tanh(tr.c[k]);
                    da_o[k] = dh[k] * tc * o[k] * (1.0 - o[k]);
                    dc[k] = dh[k] * o[k] * (1.0 - tc * tc) + dc_next[k];
                    da_i[k] = dc[k] * gg[k] * i[k] * (1.0 - i[k]);
                    da_f[k] = dc[k] * c_prev[k] * f[k] * (1.0 - f[k]);
                    da_g[k] = dc[k] * i[k] * (1.0 - gg[k] * gg[k]);
                    dc_next[k] = dc[k] * f[k];  // becomes dc for step ti-1
                }
                const int gates[4] = {gate::lstm_i, gate::lstm_f, gate::lstm_g, gate::lstm_o};
                const Vector* das[4] = {&da_i, &da_f, &da_g, &da_o};
                for (int gi = 0; gi < 4; ++gi) {
                    detail::add_outer(g.U[gates[gi]], x, *das[gi]);
                    detail::add_outer(g.W[gates[gi]], h_prev, *das[gi]);
                    detail::add_inplace(g.b[gates[gi]], *das[gi]);
                    detail::add_inplace(dh_prev, detail::matT_vec(p.W[gates[gi]], *das[gi]));
                }
                break;
            }
            case CellKind::Gru: {
                const Vector& z = tr.gate_act[gate::gru_z];
                const Vector& r = tr.gate_act[gate::gru_r];
                const Vector& cand = tr.gate_act[gate::gru_h];
                Vector da_z(H), da_r(H, 0.0), da_h(H);
                for (std::size_t k = 0; k < H; ++k) {
                    da_z[k] = dh[k] * (h_prev[k] - cand[k]) * z[k] * (1.0 - z[k]);
                    da_h[k] = dh[k] * (1.0 - z[k]) * (1.0 - cand[k] * cand[k]);
                    dh_prev[k] += dh[k] * z[k];
                }
                Vector drh = detail::matT_vec(p.W[gate::gru_h], da_h);
                if (p.gru_no_reset) {
                    detail::add_inplace(dh_prev, drh);
                } else {
                    for (std::size_t k = 0; k < H; ++k) {
                        da_r[k] = drh[k] * h_prev[k] * r[k] * (1.0 - r[k]);
                        dh_prev[k] += drh[k] * r[k];
                    }
                }
                detail::add_outer(g.U[gate::gru_h], x, da_h);
                detail::add_outer(g.W[gate::gru_h], tr.rh, da_h);
                detail::add_inplace(g.b[gate::gru_h], da_h);
                const int gates[2] = {gate::gru_z, gate::gru_r};
                const Vector* das[2] = {&da_z, &da_r};
                for (int gi = 0; gi < 2; ++gi) {
                    detail::add_outer(g.U[gates[gi]], x, *das[gi]);
                    detail::add_outer(g.W[gates[gi]], h_prev, *das[gi]);
                    detail::add_inplace(g.b[gates[gi]], *das[gi]);
                    detail::add_inplace(dh_prev, detail::matT_vec(p.W[gates[gi]], *das[gi]));
                }
                break;
            }
        }
        dh_next = std::move(dh_prev);
    }
    return {loss, std::move(g)};
}

/// Full-unroll BPTT from the zero state, as used for per-sequence updates.
inline std::pair<double, Gradients> sequence_loss_and_grads(const CellParams& p,
                                                            const std::vector<Vector>& inputs,
                                                            const std::vector<Vector>& targets) {
    return loss_and_grads_from(p, zero_state(p), inputs, targets);
}

inline double sequence_loss(const CellParams& p, const std::vector<Vector>& inputs,
                            const std::vector<Vector>& targets) {
    return mse(run_sequence(p, inputs), targets);
}

/// Central-difference gradient estimate, (L(th+eps) - L(th-eps)) / 2eps per
/// entry. Verification oracle for sequence_loss_and_grads; deliberately goes
/// through the forward pass only.
inline Gradients fd_gradients(const CellParams& p, const std::vector<Vector>& inputs,
                              const std::vector<Vector>& targets, double eps) {
    require(eps > 0.0, "fd_gradients: eps must be positive");
    CellParams work = p;
    Gradients g = zeros_like(p);
    auto tensors = tensor_list(work);
    auto grads = tensor_list(g);
    for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
        for (std::size_t k = 0; k < tensors[ti]->size(); ++k) {
            double& th = (*tensors[ti])[k];
            const double saved = th;
            th = saved + eps;
            const double lp = sequence_loss(work, inputs, targets);
            th = saved - eps;
            const double lm = sequence_loss(work, inputs, targets);
            th = saved;
            (*grads[ti])[k] = (lp - lm) / (2.0 * eps);
        }
    }
    return g;
}

inline double global_norm(const Gradients& g) {
    double sq = 0.0;
    for (const auto* t : tensor_list(g))
        for (double x : *t) sq += x * x;
    return std::sqrt(sq);
}

/// Scales the whole gradient to `max_norm` when its global L2 norm exceeds
/// it; direction is preserved.
inline Gradients clip_gradients(Gradients g, double max_norm) {
    require(max_norm > 0.0, "clip_gradients: max_norm must be positive");
    const double norm = global_norm(g);
    if (norm > max_norm) {
        const double s = max_norm / norm;
        for (auto* t : tensor_list(g))
            for (double& x : *t) x *= s;
    }
    return g;
}

struct AdamState {
    CellParams m;  // first moment, shape mirror
    CellParams v;  // second moment, shape mirror
    long t = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

inline AdamState make_adam(const CellParams& p, const TrainConfig& cfg) {
    AdamState s;
    s.m = zeros_like(p);
    s.v = zeros_like(p);
    s.lr = cfg.lr;
    s.beta1 = cfg.beta1;
    s.beta2 = cfg.beta2;
    s.eps = cfg.eps;
    return s;
}

/// One bias-corrected Adam update, in place.
inline void adam_step(CellParams& p, const Gradients& g, AdamState& s) {
    s.t += 1;
    const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
    const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
    auto tp = tensor_list(p);
    auto tg = tensor_list(g);
    auto tm = tensor_list(s.m);
    auto tv = tensor_list(s.v);
    for (std::size_t ti = 0; ti < tp.size(); ++ti) {
        for (std::size_t k = 0; k < tp[ti]->size(); ++k) {
            const double gk = (*tg[ti])[k];
            double& m = (*tm[ti])[k];
            double& v = (*tv[ti])[k];
            m = s.beta1 * m + (1.0 - s.beta1) * gk;
            v = s.beta2 * v + (1.0 - s.beta2) * gk * gk;
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            (*tp[ti])[k] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
        }
    }
}

struct TrainResult {
    CellParams params;
    TrainHistory history;
};

namespace detail {

inline double dataset_mse(const CellParams& p, const std::vector<SequenceExample>& set) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& ex : set) {
        auto preds = run_sequence(p, ex.inputs);
        for (std::size_t t = 0; t < preds.size(); ++t)
            for (std::size_t j = 0; j < preds[t].size(); ++j) {
                const double d = preds[t][j] - ex.targets[t][j];
                sum += d * d;
                ++n;
            }
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace detail

/// Loops `cfg.iterations` times over the training sequences, hidden state
/// reset at each sequence start, one clipped Adam update per sequence (or
/// per step in update_per_step mode). Returns the parameters with the best
/// validation MSE seen; optional patience stops early after that many
/// iterations without improvement. When `val_set` is empty the training set
/// stands in for validation.
inline TrainResult train(CellKind kind, const std::vector<SequenceExample>& train_set,
                         const std::vector<SequenceExample>& val_set, const TrainConfig& cfg) {
    require(!train_set.empty(), "train: training set is empty");
    require(cfg.iterations >= 1 && cfg.lr > 0.0 && cfg.clip_norm > 0.0,
            "train: invalid config");
    for (const auto& ex : train_set)
        require(!ex.inputs.empty() && ex.inputs.size() == ex.targets.size(),
                "train: misaligned sequence example");

    const std::size_t input_dim = train_set.front().inputs.front().size();
    const std::size_t output_dim = train_set.front().targets.front().size();
    CellParams params = make_cell(kind, input_dim, cfg.hidden_dim, output_dim, cfg.seed);
    params.gru_no_reset = cfg.gru_no_reset;
    AdamState adam = make_adam(params, cfg);

    const auto& selection_set = val_set.empty() ? train_set : val_set;
    TrainResult result;
    result.params = params;
    double best_val = std::numeric_limits<double>::infinity();
    int iters_since_best = 0;

    for (int iter = 1; iter <= cfg.iterations; ++iter) {
        for (std::size_t si = 0; si < train_set.size(); ++si) {
            const auto& ex = train_set[si];
            auto diverged = [&](double loss) {
                if (std::isfinite(loss)) return;
                throw std::runtime_error("training diverged: non-finite loss at iteration " +
                                         std::to_string(iter) + ", sequence " +
                                         std::to_string(si));
            };
            if (cfg.update_per_step) {
                HiddenState state = zero_state(params);
                for (std::size_t t = 0; t < ex.inputs.size(); ++t) {
                    StepResult next = step(params, state, ex.inputs[t]);
                    auto [loss, grads] = loss_and_grads_from(
                        params, state, {ex.inputs[t]}, {ex.targets[t]});
                    diverged(loss);
                    adam_step(params, clip_gradients(std::move(grads), cfg.clip_norm), adam);
                    state = std::move(next.state);
                }
            } else {
                auto [loss, grads] = sequence_loss_and_grads(params, ex.inputs, ex.targets);
                diverged(loss);
                adam_step(params, clip_gradients(std::move(grads), cfg.clip_norm), adam);
            }
        }

        const double train_mse = detail::dataset_mse(params, train_set);
        const double val_mse = detail::dataset_mse(params, selection_set);
        result.history.records.push_back({iter, train_mse, val_mse});

        if (val_mse < best_val) {
            best_val = val_mse;
            result.params = params;
            iters_since_best = 0;
        } else {
            ++iters_since_best;
        }
        if (cfg.early_stop_patience && iters_since_best >= *cfg.early_stop_patience) break;
    }
    return result;
}

}  // namespace toolwear
