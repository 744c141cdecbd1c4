#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "procsight/kernels.hpp"
#include "procsight/rng.hpp"

using namespace procsight;
using namespace procsight::kernels;

namespace {

std::vector<double> randv(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-2, 2);
    return v;
}

void close(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-13));
}

} // namespace

TEST_CASE("scalar kernels against naive loops") {
    const KernelTable& s = scalar_table();
    Rng rng(1);
    const std::size_t R = 7, C = 5;
    const auto A = randv(rng, R * C), x = randv(rng, C), y = randv(rng, R);

    double d = 0;
    for (std::size_t i = 0; i < C; ++i) d += x[i] * A[i];
    CHECK(s.dot(x.data(), A.data(), C) == doctest::Approx(d));

    std::vector<double> out(R, 1.0), want(R, 1.0);
    s.gemv_acc(A.data(), R, C, x.data(), out.data());
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) want[r] += A[r * C + c] * x[c];
    close(out, want);

    std::vector<double> xt(C, 0.0), wt(C, 0.0);
    s.gemv_t_acc(A.data(), R, C, y.data(), xt.data());
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) wt[c] += A[r * C + c] * y[r];
    close(xt, wt);

    auto G = A, GW = A;
    s.ger(G.data(), R, C, y.data(), x.data());
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) GW[r * C + c] += y[r] * x[c];
    close(G, GW);
}

TEST_CASE("every available ISA agrees with scalar") {
    const KernelTable& ref = scalar_table();
    for (Isa isa : available_isas()) {
        const KernelTable* k = table_for(isa);
        REQUIRE(k != nullptr);
        CAPTURE(k->name);
        Rng rng(77);
        for (std::size_t n : {1u, 3u, 4u, 7u, 8u, 17u, 64u, 131u}) {
            for (std::size_t rows : {1u, 5u, 12u}) {
                const auto A = randv(rng, rows * n), x = randv(rng, n), y = randv(rng, rows);
                CHECK(k->dot(A.data(), x.data(), n) == doctest::Approx(ref.dot(A.data(), x.data(), n)).epsilon(1e-13));

                std::vector<double> a1(rows, 0.5), a2(rows, 0.5);
                k->gemv_acc(A.data(), rows, n, x.data(), a1.data());
                ref.gemv_acc(A.data(), rows, n, x.data(), a2.data());
                close(a1, a2);

                std::vector<double> t1(n, -1.0), t2(n, -1.0);
                k->gemv_t_acc(A.data(), rows, n, y.data(), t1.data());
                ref.gemv_t_acc(A.data(), rows, n, y.data(), t2.data());
                close(t1, t2);

                auto g1 = A, g2 = A;
                k->ger(g1.data(), rows, n, y.data(), x.data());
                ref.ger(g2.data(), rows, n, y.data(), x.data());
                close(g1, g2);

                auto p1 = x, p2 = x;
                k->axpy(0.3, A.data(), p1.data(), n);
                ref.axpy(0.3, A.data(), p2.data(), n);
                CHECK(p1 == p2);

                auto q1 = x, q2 = x;
                std::vector<double> m1(n, 0.1), m2(n, 0.1), v1(n, 0.2), v2(n, 0.2);
                const auto grad = randv(rng, n);
                const AdamCoeffs c{0.01, 0.9, 0.999, 1e-8, 1 - 0.9 * 0.9, 1 - 0.999 * 0.999};
                k->adam_update(q1.data(), m1.data(), v1.data(), grad.data(), n, c);
                ref.adam_update(q2.data(), m2.data(), v2.data(), grad.data(), n, c);
                CHECK(q1 == q2);
                CHECK(m1 == m2);
                CHECK(v1 == v2);
            }
        }
    }
}

TEST_CASE("selection") {
    CHECK(available_isas().front() == Isa::scalar);
    CHECK(select(Isa::scalar));
    CHECK(active().isa == Isa::scalar);
    const Isa widest = available_isas().back();
    CHECK(select(widest));
    CHECK(active().isa == widest);
    Isa parsed{};
    CHECK(parse_isa("avx2", parsed));
    CHECK(parsed == Isa::avx2);
    CHECK_FALSE(parse_isa("sse9", parsed));
}
