#include <cmath>

#include "cell_engine.hpp"
#include "procsight/error.hpp"
#include "procsight/rnn.hpp"

namespace procsight {

namespace {

// Forward with activation caching over the given rows, then BPTT. Adds
// scale * dLoss/dparams into grads and returns the unscaled sample loss.
double accumulate_sample(const RnnParams& p, const kernels::KernelTable& k, const std::vector<const double*>& rows,
                         double target, double scale, Gradients& grads) {
    const std::size_t H = p.hidden_width();
    const std::size_t I = p.input_width();
    const std::size_t G = p.gates();
    const std::size_t T = rows.size();
    const bool lstm = p.cell() == CellKind::lstm;

    // states[t] is the hidden state before step t; states[T] is h_T.
    std::vector<double> h((T + 1) * H, 0.0);
    std::vector<double> c(lstm ? (T + 1) * H : 0, 0.0);
    std::vector<double> act(T * G * H), tanh_c(lstm ? T * H : 0), rh(lstm ? 0 : T * H);

    for (std::size_t t = 0; t < T; ++t) {
        detail::StepBuffers buf{act.data() + t * G * H, lstm ? tanh_c.data() + t * H : nullptr,
                                lstm ? nullptr : rh.data() + t * H};
        detail::cell_step(p, k, rows[t], h.data() + t * H, lstm ? c.data() + t * H : nullptr, buf,
                          h.data() + (t + 1) * H, lstm ? c.data() + (t + 1) * H : nullptr);
        if (!detail::all_finite(h.data() + (t + 1) * H, H))
            throw NumericError("non-finite hidden state at step " + std::to_string(t), static_cast<long>(t));
    }

    const double* h_T = h.data() + T * H;
    const double logit = p.out_b() + k.dot(p.out_w().data(), h_T, H);
    const double prob = detail::sigmoid(logit);
    const double loss = bce_loss(prob, target);
    const double dlogit = scale * (prob - target);
    if (!std::isfinite(loss) || !std::isfinite(dlogit)) throw NumericError("non-finite loss", static_cast<long>(T));

    grads.out_b() += dlogit;
    k.axpy(dlogit, h_T, grads.out_w().data(), H);

    std::vector<double> dh(H), dc(H, 0.0), da(G * H), d_rh(H);
    for (std::size_t j = 0; j < H; ++j) dh[j] = dlogit * p.out_w()[j];

    const double* U = p.U().data();
    for (std::size_t t = T; t-- > 0;) {
        const double* a = act.data() + t * G * H;
        const double* h_prev = h.data() + t * H;
        std::vector<double> dh_prev(H, 0.0);

        if (lstm) {
            const double* i = a;
            const double* f = a + H;
            const double* g = a + 2 * H;
            const double* o = a + 3 * H;
            const double* tc = tanh_c.data() + t * H;
            const double* c_prev = c.data() + t * H;
            for (std::size_t j = 0; j < H; ++j) {
                const double dc_total = dc[j] + dh[j] * o[j] * (1.0 - tc[j] * tc[j]);
                da[j] = dc_total * g[j] * i[j] * (1.0 - i[j]);
                da[H + j] = dc_total * c_prev[j] * f[j] * (1.0 - f[j]);
                da[2 * H + j] = dc_total * i[j] * (1.0 - g[j] * g[j]);
                da[3 * H + j] = dh[j] * tc[j] * o[j] * (1.0 - o[j]);
                dc[j] = dc_total * f[j];
            }
            k.ger(grads.U().data(), G * H, H, da.data(), h_prev);
            k.gemv_t_acc(U, G * H, H, da.data(), dh_prev.data());
        } else {
            const double* z = a;
            const double* r = a + H;
            const double* n = a + 2 * H;
            const double* rh_t = rh.data() + t * H;
            for (std::size_t j = 0; j < H; ++j) {
                da[2 * H + j] = dh[j] * z[j] * (1.0 - n[j] * n[j]);
                da[j] = dh[j] * (n[j] - h_prev[j]) * z[j] * (1.0 - z[j]);
                dh_prev[j] = dh[j] * (1.0 - z[j]);
            }
            // Candidate path: a_n = ... + U_n (r * h_prev)
            std::fill(d_rh.begin(), d_rh.end(), 0.0);
            k.gemv_t_acc(U + 2 * H * H, H, H, da.data() + 2 * H, d_rh.data());
            k.ger(grads.U().data() + 2 * H * H, H, H, da.data() + 2 * H, rh_t);
            for (std::size_t j = 0; j < H; ++j) {
                da[H + j] = d_rh[j] * h_prev[j] * r[j] * (1.0 - r[j]);
                dh_prev[j] += d_rh[j] * r[j];
            }
            k.ger(grads.U().data(), 2 * H, H, da.data(), h_prev);
            k.gemv_t_acc(U, 2 * H, H, da.data(), dh_prev.data());
        }

        k.ger(grads.W().data(), G * H, I, da.data(), rows[t]);
        k.axpy(1.0, da.data(), grads.b().data(), G * H);
        dh.swap(dh_prev);
    }
    return loss;
}

void check_batch_schema(const RnnModel& model, SchemaId schema, std::size_t width) {
    if (schema != model.schema || width != model.params.input_width())
        fail(ErrorKind::schema, std::string("batch schema ") + to_string(schema) + " does not match model schema " +
                                    to_string(model.schema));
}

} // namespace

LossAndGradients backward(const RnnModel& model, std::span<const FeatureSequence* const> batch) {
    require(!batch.empty(), ErrorKind::precondition, "backward on an empty batch");
    const auto& k = kernels::active();
    LossAndGradients out{0.0, Gradients(model.params.cell(), model.params.input_width(), model.params.hidden_width())};
    const double scale = 1.0 / static_cast<double>(batch.size());
    std::vector<const double*> rows;
    for (const FeatureSequence* s : batch) {
        check_batch_schema(model, s->schema, s->width);
        require(!s->empty(), ErrorKind::precondition, "backward on an empty sequence '" + s->source_id + "'");
        rows.clear();
        for (std::size_t t = 0; t < s->steps(); ++t) rows.push_back(s->row(t).data());
        out.loss += accumulate_sample(model.params, k, rows, label_target(s->label), scale, out.grads);
    }
    out.loss *= scale;
    return out;
}

LossAndGradients backward(const RnnModel& model, const PaddedBatch& batch, std::span<const double> targets) {
    require(batch.batch > 0, ErrorKind::precondition, "backward on an empty batch");
    require(targets.size() == batch.batch, ErrorKind::shape, "one target per batch member required");
    check_batch_schema(model, batch.schema, batch.width);
    const auto& k = kernels::active();
    LossAndGradients out{0.0, Gradients(model.params.cell(), model.params.input_width(), model.params.hidden_width())};
    const double scale = 1.0 / static_cast<double>(batch.batch);
    std::vector<const double*> rows;
    for (std::size_t b = 0; b < batch.batch; ++b) {
        rows.clear();
        for (std::size_t t = 0; t < batch.steps; ++t)
            if (batch.mask[b * batch.steps + t]) rows.push_back(batch.row(b, t).data());
        require(!rows.empty(), ErrorKind::precondition, "backward: batch member has no unmasked steps");
        out.loss += accumulate_sample(model.params, k, rows, targets[b], scale, out.grads);
    }
    out.loss *= scale;
    return out;
}

double batch_loss(const RnnModel& model, std::span<const FeatureSequence* const> batch) {
    require(!batch.empty(), ErrorKind::precondition, "batch_loss on an empty batch");
    double total = 0.0;
    for (const FeatureSequence* s : batch) total += bce_loss(predict(model, *s), label_target(s->label));
    return total / static_cast<double>(batch.size());
}

} // namespace procsight
