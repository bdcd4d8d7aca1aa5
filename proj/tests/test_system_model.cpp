#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "commtopo/errors.hpp"
#include "commtopo/rng.hpp"
#include "commtopo/system_model.hpp"

using namespace commtopo;

TEST_CASE("swing benchmark assembly") {
    const SwingParams p = benchmark_swing_params();
    const NetworkedSystem sys = build_swing_benchmark(p);

    SUBCASE("global dimensions") {
        CHECK(sys.num_subsystems() == 4);
        CHECK(sys.n_total() == 8);
        CHECK(sys.m_total() == 4);
        CHECK(sys.p_total() == 4);
    }

    SUBCASE("first node block, hand-evaluated") {
        // k_1 = 1.25, m_1 = 1.4, d_1 = 0.6, dt = 0.2
        const Mat& A1 = sys.subsystem(0).A;
        CHECK(A1(0, 0) == 1.0);
        CHECK(A1(0, 1) == 0.2);
        CHECK(A1(1, 0) == doctest::Approx(-(1.25 / 1.4) * 0.2).epsilon(1e-15));
        CHECK(A1(1, 1) == doctest::Approx(1.0 - (0.6 / 1.4) * 0.2).epsilon(1e-15));
        CHECK(sys.subsystem(0).B(1, 0) == doctest::Approx(1.0 / 1.4));
        CHECK(sys.subsystem(0).C(0, 0) == 1.0);
        CHECK(sys.subsystem(0).C(0, 1) == 0.0);
        CHECK(sys.subsystem(0).D(0, 0) == 0.0);
    }

    SUBCASE("global A carries E_ij C_j off the diagonal") {
        // Block (0,1) of A must equal E_01 * C_1 = [0; (1.25/1.4)*0.2] * [1 0].
        const Mat block = sys.A().block(0, 2, 2, 2);
        CHECK(block(1, 0) == doctest::Approx((1.25 / 1.4) * 0.2).epsilon(1e-15));
        CHECK(block(0, 0) == 0.0);
        CHECK(block(0, 1) == 0.0);
        CHECK(block(1, 1) == 0.0);
        // Uncoupled pair (1,4): zero block.
        CHECK(sys.A().block(0, 6, 2, 2).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("observability and controllability ranks") {
        CHECK(sys.observability_rank() == 8);
        CHECK(sys.controllability_rank() == 8);
    }

    SUBCASE("parameter validation names the offender") {
        SwingParams bad = p;
        bad.inertia[2] = 0.0;
        CHECK_THROWS_WITH_AS(build_swing_benchmark(bad), doctest::Contains("inertia[2]"),
                             precondition_error);
        bad = p;
        bad.coupling(0, 1) = -1.0;
        CHECK_THROWS_AS(build_swing_benchmark(bad), precondition_error);
        bad = p;
        bad.dt = 0.0;
        CHECK_THROWS_AS(build_swing_benchmark(bad), precondition_error);
        bad = p;
        bad.damping.pop_back();
        CHECK_THROWS_AS(build_swing_benchmark(bad), precondition_error);
    }

    SUBCASE("zero coupling decouples the global matrices") {
        SwingParams dec = p;
        dec.coupling.setZero();
        const NetworkedSystem d = build_swing_benchmark(dec);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                if (i == j) continue;
                CHECK(d.A().block(2 * i, 2 * j, 2, 2).cwiseAbs().maxCoeff() == 0.0);
            }
        CHECK(d.coupling().cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("simulate") {
    const NetworkedSystem sys = build_swing_benchmark(benchmark_swing_params());

    SUBCASE("equilibrium stays at zero") {
        const Trajectory t =
            simulate(sys, Mat::Zero(4, 50), Vec::Zero(8), NoiseSpec::noiseless());
        CHECK(t.y.cwiseAbs().maxCoeff() == 0.0);
        CHECK(t.y_clean.cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("impulse response matches the subsystem-level recursion") {
        // Independent oracle: per-subsystem stepping with couplings applied
        // through measured outputs; no global matrices involved.
        Mat u = Mat::Zero(4, 10);
        u(0, 0) = 1.0;  // unit impulse on the first input at the first step
        const Trajectory t = simulate(sys, u, Vec::Zero(8), NoiseSpec::noiseless());

        std::vector<Vec> x(4, Vec::Zero(2));
        Mat y_oracle = Mat::Zero(4, 10);
        for (int k = 0; k < 10; ++k) {
            Vec y_now(4);
            for (int i = 0; i < 4; ++i) {
                const auto& s = sys.subsystem(i);
                y_now(i) = (s.C * x[static_cast<size_t>(i)])(0) + s.D(0, 0) * u(i, k);
            }
            std::vector<Vec> x_next(4);
            for (int i = 0; i < 4; ++i) {
                const auto& s = sys.subsystem(i);
                Vec xi = s.A * x[static_cast<size_t>(i)] + s.B * u.block(i, k, 1, 1);
                for (const auto& [j, Eij] : s.E) xi += Eij * y_now(j);
                x_next[static_cast<size_t>(i)] = xi;
            }
            y_oracle.col(k) = y_now;
            x = x_next;
        }
        CHECK((t.y - y_oracle).cwiseAbs().maxCoeff() < 1e-14);
        CHECK(t.y.cwiseAbs().maxCoeff() > 0.0);  // the impulse does propagate
    }

    SUBCASE("noise calibration hits the requested snr") {
        // The noise std is calibrated against the noise-free response; the
        // recorded clean outputs of the noisy run additionally carry the
        // coupling-propagated noise, so the reference is a noiseless pass.
        const Mat u = generate_pe_input(4, 10000, 1.0, 9);
        const Trajectory ref = simulate(sys, u, Vec::Zero(8), NoiseSpec::noiseless());
        const Trajectory t = simulate(sys, u, Vec::Zero(8), NoiseSpec::by_snr(1e3, 4));
        const Mat noise_mat = t.y - t.y_clean;
        for (int ch = 0; ch < 4; ++ch) {
            const auto clean = ref.y_clean.row(ch);
            const auto noise = noise_mat.row(ch);
            const double vc = (clean.array() - clean.mean()).square().mean();
            const double vn = (noise.array() - noise.mean()).square().mean();
            const double ratio = vn / vc;
            CHECK(ratio > 0.8e-3);
            CHECK(ratio < 1.2e-3);
        }
    }

    SUBCASE("noise-free runs ignore the noise seed") {
        const Mat u = generate_pe_input(4, 40, 1.0, 1);
        NoiseSpec a = NoiseSpec::noiseless();
        NoiseSpec b = NoiseSpec::noiseless();
        b.seed = 999;
        const Trajectory ta = simulate(sys, u, Vec::Zero(8), a);
        const Trajectory tb = simulate(sys, u, Vec::Zero(8), b);
        CHECK((ta.y - tb.y).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("noisy runs are seed-deterministic") {
        const Mat u = generate_pe_input(4, 40, 1.0, 1);
        const Trajectory ta = simulate(sys, u, Vec::Zero(8), NoiseSpec::by_snr(1e3, 5));
        const Trajectory tb = simulate(sys, u, Vec::Zero(8), NoiseSpec::by_snr(1e3, 5));
        CHECK((ta.y - tb.y).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("decoupled system simulates like independent subsystems") {
        SwingParams dec = benchmark_swing_params();
        dec.coupling.setZero();
        const NetworkedSystem d = build_swing_benchmark(dec);
        const Mat u = generate_pe_input(4, 30, 1.0, 3);
        const Trajectory whole = simulate(d, u, Vec::Zero(8), NoiseSpec::noiseless());
        for (int i = 0; i < 4; ++i) {
            SwingParams solo;
            solo.inertia = {dec.inertia[static_cast<size_t>(i)]};
            solo.damping = {dec.damping[static_cast<size_t>(i)]};
            solo.coupling = Mat::Zero(1, 1);
            solo.dt = dec.dt;
            const NetworkedSystem one = build_swing_benchmark(solo);
            const Trajectory ti =
                simulate(one, u.row(i), Vec::Zero(2), NoiseSpec::noiseless());
            CHECK((whole.y.row(i) - ti.y.row(0)).cwiseAbs().maxCoeff() == 0.0);
        }
    }

    SUBCASE("instability raises a divergence error with the step index") {
        SubsystemModel s;
        s.A = Mat::Constant(1, 1, 10.0);
        s.B = Mat::Constant(1, 1, 1.0);
        s.C = Mat::Constant(1, 1, 1.0);
        s.D = Mat::Zero(1, 1);
        const NetworkedSystem unstable({s});
        Mat u = Mat::Ones(1, 400);
        try {
            simulate(unstable, u, Vec::Ones(1), NoiseSpec::noiseless());
            FAIL("expected divergence");
        } catch (const divergence_error& e) {
            CHECK(e.step > 100);
            CHECK(e.step < 400);
        }
    }

    SUBCASE("dimension mismatches throw") {
        CHECK_THROWS_AS(simulate(sys, Mat::Zero(3, 10), Vec::Zero(8), NoiseSpec::noiseless()),
                        precondition_error);
        CHECK_THROWS_AS(simulate(sys, Mat::Zero(4, 10), Vec::Zero(7), NoiseSpec::noiseless()),
                        precondition_error);
        CHECK_THROWS_AS(simulate(sys, Mat::Zero(4, 0), Vec::Zero(8), NoiseSpec::noiseless()),
                        precondition_error);
    }
}

TEST_CASE("generate_pe_input") {
    SUBCASE("sample variance near the requested one") {
        const Mat u = generate_pe_input(4, 200, 1.0, 12);
        for (int ch = 0; ch < 4; ++ch) {
            const double v = (u.row(ch).array() - u.row(ch).mean()).square().mean();
            CHECK(v > 0.75);
            CHECK(v < 1.25);
        }
    }
    SUBCASE("zero variance rejected") {
        CHECK_THROWS_AS(generate_pe_input(2, 10, 0.0, 1), precondition_error);
    }
    SUBCASE("deterministic under a fixed seed") {
        const Mat a = generate_pe_input(3, 64, 2.0, 77);
        const Mat b = generate_pe_input(3, 64, 2.0, 77);
        CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
        const Mat c = generate_pe_input(3, 64, 2.0, 78);
        CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
    }
}

TEST_CASE("NetworkedSystem validation") {
    SUBCASE("nonzero self-coupling rejected") {
        SubsystemModel s;
        s.A = Mat::Constant(1, 1, 0.5);
        s.B = Mat::Constant(1, 1, 1.0);
        s.C = Mat::Constant(1, 1, 1.0);
        s.D = Mat::Zero(1, 1);
        s.E[0] = Mat::Constant(1, 1, 0.1);
        CHECK_THROWS_AS(NetworkedSystem({s}), precondition_error);
    }
    SUBCASE("unobservable pair rejected") {
        SubsystemModel s;
        s.A = Mat{{0.5, 0.1}, {0.0, 0.4}};
        s.B = Mat{{1.0}, {1.0}};
        s.C = Mat{{0.0, 0.0}};  // observes nothing
        s.D = Mat::Zero(1, 1);
        CHECK_THROWS_AS(NetworkedSystem({s}), precondition_error);
    }
    SUBCASE("uncontrollable pair rejected") {
        SubsystemModel s;
        s.A = Mat{{0.5, 0.0}, {0.0, 0.4}};
        s.B = Mat{{1.0}, {0.0}};  // second state unreachable
        s.C = Mat{{1.0, 1.0}};
        s.D = Mat::Zero(1, 1);
        CHECK_THROWS_AS(NetworkedSystem({s}), precondition_error);
    }
}
