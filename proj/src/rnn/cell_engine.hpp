#pragma once

// Shared forward step used by inference, training and the public cell APIs,
// so every path performs bit-identical arithmetic.

#include <algorithm>
#include <cmath>
#include <vector>

#include "procsight/kernels.hpp"
#include "procsight/rnn.hpp"

namespace procsight::detail {

inline double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Activations of one step, kept for backpropagation.
///   act:    G*H post-nonlinearity gate values (LSTM i,f,g,o; GRU z,r,n)
///   tanh_c: LSTM only, tanh of the new cell state
///   rh:     GRU only, r * h_prev
struct StepBuffers {
    double* act;
    double* tanh_c;
    double* rh;
};

inline void cell_step(const RnnParams& p, const kernels::KernelTable& k, const double* x, const double* h_prev,
                      const double* c_prev, StepBuffers buf, double* h_out, double* c_out) {
    const std::size_t H = p.hidden_width();
    const std::size_t I = p.input_width();
    const std::size_t G = p.gates();
    double* act = buf.act;
    const auto b = p.b();
    std::copy(b.begin(), b.end(), act);
    k.gemv_acc(p.W().data(), G * H, I, x, act);

    if (p.cell() == CellKind::lstm) {
        k.gemv_acc(p.U().data(), G * H, H, h_prev, act);
        double* i = act;
        double* f = act + H;
        double* g = act + 2 * H;
        double* o = act + 3 * H;
        for (std::size_t j = 0; j < H; ++j) {
            i[j] = sigmoid(i[j]);
            f[j] = sigmoid(f[j]);
            g[j] = std::tanh(g[j]);
            o[j] = sigmoid(o[j]);
            c_out[j] = f[j] * c_prev[j] + i[j] * g[j];
            buf.tanh_c[j] = std::tanh(c_out[j]);
            h_out[j] = o[j] * buf.tanh_c[j];
        }
        return;
    }

    // GRU: update and reset gates see h_prev; the candidate sees r * h_prev.
    k.gemv_acc(p.U().data(), 2 * H, H, h_prev, act);
    double* z = act;
    double* r = act + H;
    double* n = act + 2 * H;
    for (std::size_t j = 0; j < H; ++j) {
        z[j] = sigmoid(z[j]);
        r[j] = sigmoid(r[j]);
        buf.rh[j] = r[j] * h_prev[j];
    }
    k.gemv_acc(p.U().data() + 2 * H * H, H, H, buf.rh, n);
    for (std::size_t j = 0; j < H; ++j) {
        n[j] = std::tanh(n[j]);
        h_out[j] = (1.0 - z[j]) * h_prev[j] + z[j] * n[j];
    }
}

inline bool all_finite(const double* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(v[i])) return false;
    return true;
}

} // namespace procsight::detail
