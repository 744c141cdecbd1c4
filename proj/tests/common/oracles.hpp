#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls the library's kernels or cell engine.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "procsight/eval.hpp"
#include "procsight/rng.hpp"
#include "procsight/rnn.hpp"

namespace oracle {

using procsight::CellKind;
using procsight::RnnParams;

inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// pre-activation of gate g, unit j: b + W x + U h
inline double pre(const RnnParams& p, std::size_t g, std::size_t j, std::span<const double> x,
                  std::span<const double> h) {
    const std::size_t H = p.hidden_width(), I = p.input_width();
    const std::size_t row = g * H + j;
    long double acc = p.b()[row];
    for (std::size_t i = 0; i < I; ++i) acc += static_cast<long double>(p.W()[row * I + i]) * x[i];
    for (std::size_t k = 0; k < H; ++k) acc += static_cast<long double>(p.U()[row * H + k]) * h[k];
    return static_cast<double>(acc);
}

inline std::vector<double> gru_step(const RnnParams& p, std::span<const double> x, std::span<const double> h) {
    const std::size_t H = p.hidden_width();
    std::vector<double> z(H), r(H), rh(H), out(H);
    const std::vector<double> zero(H, 0.0);
    for (std::size_t j = 0; j < H; ++j) {
        z[j] = sig(pre(p, 0, j, x, h));
        r[j] = sig(pre(p, 1, j, x, h));
        rh[j] = r[j] * h[j];
    }
    for (std::size_t j = 0; j < H; ++j) {
        const double n = std::tanh(pre(p, 2, j, x, rh));
        out[j] = (1 - z[j]) * h[j] + z[j] * n;
    }
    return out;
}

inline void lstm_step(const RnnParams& p, std::span<const double> x, std::vector<double>& h, std::vector<double>& c) {
    const std::size_t H = p.hidden_width();
    std::vector<double> hn(H), cn(H);
    for (std::size_t j = 0; j < H; ++j) {
        const double i = sig(pre(p, 0, j, x, h));
        const double f = sig(pre(p, 1, j, x, h));
        const double g = std::tanh(pre(p, 2, j, x, h));
        const double o = sig(pre(p, 3, j, x, h));
        cn[j] = f * c[j] + i * g;
        hn[j] = o * std::tanh(cn[j]);
    }
    h = hn;
    c = cn;
}

inline double forward(const procsight::RnnModel& m, const procsight::FeatureSequence& s) {
    const RnnParams& p = m.params;
    const std::size_t H = p.hidden_width();
    std::vector<double> h(H, 0.0), c(H, 0.0);
    for (std::size_t t = 0; t < s.steps(); ++t) {
        if (p.cell() == CellKind::gru) h = gru_step(p, s.row(t), h);
        else lstm_step(p, s.row(t), h, c);
    }
    long double z = p.out_b();
    for (std::size_t j = 0; j < H; ++j) z += static_cast<long double>(p.out_w()[j]) * h[j];
    return sig(static_cast<double>(z));
}

inline double bce(double p, double y) {
    p = std::clamp(p, 1e-12, 1 - 1e-12);
    return -(y * std::log(p) + (1 - y) * std::log(1 - p));
}

inline double mean_loss(const procsight::RnnModel& m, std::span<const procsight::FeatureSequence> batch) {
    double total = 0;
    for (const auto& s : batch) total += bce(forward(m, s), s.label == procsight::Label::malicious ? 1.0 : 0.0);
    return total / static_cast<double>(batch.size());
}

inline procsight::FeatureSequence random_sequence(procsight::Rng& rng, std::size_t width, std::size_t steps,
                                                  procsight::Label label) {
    procsight::FeatureSequence s;
    s.schema = procsight::SchemaId::event_only_5;
    s.width = width;
    s.label = label;
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t c = 0; c < width; ++c) s.values.push_back(rng.uniform(-1, 1));
        s.times_ms.push_back(static_cast<std::int64_t>(t) * 1000);
    }
    return s;
}

inline double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// Max relative error between backward() and central differences on the
// library's own loss, step 1e-5.
inline double gradient_check(const procsight::RnnModel& model, std::span<const procsight::FeatureSequence> batch) {
    std::vector<const procsight::FeatureSequence*> ptrs;
    for (const auto& s : batch) ptrs.push_back(&s);
    const auto analytic = procsight::backward(model, ptrs);
    procsight::RnnModel probe = model;
    double worst = 0;
    const double h = 1e-5;
    for (std::size_t i = 0; i < probe.params.size(); ++i) {
        const double orig = probe.params.all()[i];
        probe.params.all()[i] = orig + h;
        const double up = procsight::batch_loss(probe, ptrs);
        probe.params.all()[i] = orig - h;
        const double down = procsight::batch_loss(probe, ptrs);
        probe.params.all()[i] = orig;
        worst = std::max(worst, relative_error(analytic.grads.all()[i], (up - down) / (2 * h)));
    }
    return worst;
}

struct Recount {
    double accuracy, precision, recall, f1, fpr;
};

// Brute force over (predicted, actual) pairs.
inline Recount recount(std::span<const procsight::Label> pred, std::span<const procsight::Label> actual) {
    using procsight::Label;
    double tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] == Label::malicious, a = actual[i] == Label::malicious;
        if (p && a) tp += 1;
        else if (!p && !a) tn += 1;
        else if (p) fp += 1;
        else fn += 1;
    }
    Recount r{};
    r.accuracy = (tp + tn) / (tp + tn + fp + fn) * 100.0;
    r.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    r.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    r.fpr = fp + tn > 0 ? fp / (fp + tn) : 0.0;
    return r;
}

} // namespace oracle
