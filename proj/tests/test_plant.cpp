#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>

#include "dfig/controller.hpp"
#include "dfig/plant.hpp"

using namespace dfig;

namespace {

double uniform(std::mt19937_64& g, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(g);
}

Vec4 random_vec(std::mt19937_64& g, double amp = 2.0) {
    return {uniform(g, -amp, amp), uniform(g, -amp, amp), uniform(g, -amp, amp), uniform(g, -amp, amp)};
}

// Flux-current relations written directly: phi_s = L_s i_s + L_m i_r, phi_r = L_m i_s + L_r i_r.
Mat4 hand_inductance(const MachineParams& m) {
    return Mat4::from_rows({{m.l_s, 0, m.l_m, 0}, {0, m.l_s, 0, m.l_m}, {m.l_m, 0, m.l_r, 0}, {0, m.l_m, 0, m.l_r}});
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

// ---------------------------------------------------------------------------
// Flux / current maps
// ---------------------------------------------------------------------------

TEST(Currents, ZeroFluxGivesZeroCurrent) {
    const auto i = currents_from_fluxes({0, 0, 0, 0}, MachineParams{});
    EXPECT_EQ(i.as_vector(), (Vec4{0, 0, 0, 0}));
}

TEST(Currents, UnitStatorDFluxMatchesNumericInverse) {
    const MachineParams mp;
    const auto i = currents_from_fluxes({1, 0, 0, 0}, mp);
    const double sigma = 1 - 2.9 * 2.9 / (3.071 * 3.056);
    EXPECT_NEAR(i.i_ds, 1 / (sigma * 3.071), 1e-12);
    EXPECT_NEAR(i.i_dr, -2.9 / (sigma * 3.071 * 3.056), 1e-12);
    EXPECT_EQ(i.i_qs, 0.0);
    EXPECT_EQ(i.i_qr, 0.0);
    const auto oracle = inverse(hand_inductance(mp)) * Vec4{1, 0, 0, 0};
    EXPECT_LT(norm_inf(sub(i.as_vector(), oracle)), 1e-12);
}

TEST(Currents, MatchesInverseInductanceOnRandomFluxes) {
    std::mt19937_64 g(3);
    const MachineParams mp;
    const Mat4 linv = inverse(hand_inductance(mp));
    for (int k = 0; k < 1000; ++k) {
        const Vec4 x = random_vec(g);
        EXPECT_LT(norm_inf(sub(currents_from_fluxes(x, mp).as_vector(), linv * x)), 1e-11);
    }
}

TEST(Fluxes, ZeroCurrentGivesZeroFlux) {
    EXPECT_EQ(fluxes_from_currents(Currents{}, MachineParams{}), (Vec4{0, 0, 0, 0}));
}

TEST(Fluxes, DirectAxisUnitCurrents) {
    const auto x = fluxes_from_currents({1, 0, 1, 0}, MachineParams{});
    EXPECT_NEAR(x[0], 5.971, 1e-12);
    EXPECT_NEAR(x[2], 5.956, 1e-12);
    EXPECT_EQ(x[1], 0.0);
    EXPECT_EQ(x[3], 0.0);
}

TEST(Fluxes, RoundTripIsIdentity) {
    std::mt19937_64 g(4);
    const MachineParams mp;
    for (int k = 0; k < 1000; ++k) {
        const Vec4 x = random_vec(g);
        EXPECT_LT(norm_inf(sub(fluxes_from_currents(currents_from_fluxes(x, mp), mp), x)), 1e-12);
        const auto i = Currents::from_vector(random_vec(g));
        EXPECT_LT(norm_inf(sub(currents_from_fluxes(fluxes_from_currents(i, mp), mp).as_vector(), i.as_vector())),
                  1e-11);
    }
}

// ---------------------------------------------------------------------------
// Electrical dynamics
// ---------------------------------------------------------------------------

TEST(ElectricalDynamics, ZeroStateZeroInputIsAtRest) {
    const auto d = electrical_derivatives({0, 0, 0, 0}, 1.0, Voltages{}, MachineParams{});
    EXPECT_EQ(d, (Vec4{0, 0, 0, 0}));
}

TEST(ElectricalDynamics, ScalarAndMatrixPathsAgree) {
    std::mt19937_64 g(5);
    const MachineParams mp;
    for (int k = 0; k < 1000; ++k) {
        const Vec4 x = random_vec(g);
        const Vec4 v = random_vec(g);
        const double w = uniform(g, 0.1, 2.0);
        const Voltages volt{v[0], v[1], v[2], v[3]};
        const auto a = electrical_derivatives(x, w, volt, mp);
        const auto b = electrical_derivatives_matrix(x, w, volt, mp);
        EXPECT_LT(norm_inf(sub(a, b)), 1e-14 * std::max(1.0, norm_inf(a)) * 10);
    }
}

TEST(ElectricalDynamics, ControlledEquilibriumIsStationary) {
    const MachineParams mp;
    const auto g = synthesize(mp, kDefaultElectricalPoles);
    const Vec2 u{0.3, -0.2};
    // Oracle: solve (A - BK) x = -[v_ds, v_qs, u1, u2] with the library LU.
    const Vec4 x = solve(state_matrix(mp) - rotor_input_map() * g.k, Vec4{-mp.v_ds, -mp.v_qs, -u[0], -u[1]});
    const double w = 0.93;
    const auto rv = feedback_linearize(x, w, u, g);
    const auto d = electrical_derivatives(x, w, {mp.v_ds, mp.v_qs, rv.v_dr, rv.v_qr}, mp);
    EXPECT_LT(norm_inf(d), 1e-9);
    EXPECT_LT(norm_inf(sub(x, equilibrium_fluxes(u, g))), 1e-10);
}

// ---------------------------------------------------------------------------
// Powers
// ---------------------------------------------------------------------------

TEST(Powers, GeneratingSignConvention) {
    const auto p = powers({1, 0, 0, 0}, {-1, 0, 0, 0});
    EXPECT_EQ(p.p, 1.0);
    EXPECT_EQ(p.q, 0.0);
    EXPECT_EQ(p.pf, 1.0);
}

TEST(Powers, ZeroCurrentsGiveZeroPower) {
    const auto p = powers({1, 0.5, 0.2, -0.1}, Currents{});
    EXPECT_EQ(p.p, 0.0);
    EXPECT_EQ(p.q, 0.0);
    EXPECT_EQ(p.pf, 0.0);
}

TEST(Powers, MatchComplexPowerOracle) {
    std::mt19937_64 g(6);
    for (int k = 0; k < 1000; ++k) {
        const Vec4 v = random_vec(g), i = random_vec(g);
        const auto p = powers({v[0], v[1], v[2], v[3]}, {i[0], i[1], i[2], i[3]});
        using C = std::complex<double>;
        const C s = -C(v[0], v[1]) * std::conj(C(i[0], i[1])) - C(v[2], v[3]) * std::conj(C(i[2], i[3]));
        EXPECT_NEAR(p.p, s.real(), 1e-13);
        EXPECT_NEAR(p.q, s.imag(), 1e-13);
        EXPECT_EQ(p.p, p.p_s + p.p_r);
        EXPECT_EQ(p.q, p.q_s + p.q_r);
        EXPECT_NEAR(p.pf, p.p / std::hypot(p.p, p.q), 1e-15);
    }
}

// ---------------------------------------------------------------------------
// Electromagnetic torque
// ---------------------------------------------------------------------------

TEST(Torque, ZeroFluxZeroTorque) { EXPECT_EQ(electromagnetic_torque({0, 0, 0, 0}, MachineParams{}), 0.0); }

TEST(Torque, QuadratureStatorWithDirectRotorFlux) {
    // phi_qs = phi_dr = 1: i_ds = -L_m / (sigma L_s L_r), i_qs = 0, so T_e = phi_qs i_ds.
    const MachineParams mp;
    const double expected = -mp.l_m / (mp.sigma() * mp.l_s * mp.l_r);
    EXPECT_NEAR(electromagnetic_torque({0, 1, 1, 0}, mp), expected, 1e-14);
    EXPECT_NEAR(electromagnetic_torque_quadratic({0, 1, 1, 0}, mp), expected, 1e-14);
}

TEST(Torque, StatorFluxAloneProducesNoTorque) {
    // phi_s parallel to i_s: the cross product vanishes.
    EXPECT_NEAR(electromagnetic_torque({0, 1, 0, 0}, MachineParams{}), 0.0, 1e-15);
    EXPECT_NEAR(electromagnetic_torque({0.6, -0.8, 0, 0}, MachineParams{}), 0.0, 1e-15);
}

TEST(Torque, CurrentAndQuadraticFormsAgree) {
    const MachineParams mp;
    EXPECT_DOUBLE_EQ(electromagnetic_torque({1, 1, 1, 1}, mp), electromagnetic_torque_quadratic({1, 1, 1, 1}, mp));
    std::mt19937_64 g(7);
    for (int k = 0; k < 1000; ++k) {
        const Vec4 x = random_vec(g, 5);
        EXPECT_LT(rel_err(electromagnetic_torque(x, mp), electromagnetic_torque_quadratic(x, mp)), 1e-12);
    }
}

// ---------------------------------------------------------------------------
// Aerodynamics
// ---------------------------------------------------------------------------

TEST(Cp, NominalPeakValue) { EXPECT_NEAR(performance_coefficient(8.1, 0, CpCoefficients{}), 0.48, 5e-4); }

TEST(Cp, DegradedCoefficientsNearTheirPeak) { EXPECT_NEAR(performance_coefficient(8.45, 0, kDegradedCp), 0.39, 5e-3); }

TEST(Cp, BoundedByLinearEnvelope) {
    // Cp / lambda peaks at about 0.0647 near lambda = 6.75, so c = 0.065 bounds it on the grid.
    const CpCoefficients c;
    double worst = 0;
    for (int k = 10; k <= 10000; ++k) {
        const double l = 0.01 * k;
        worst = std::max(worst, performance_coefficient(l, 0, c) / l);
    }
    EXPECT_LE(worst, 0.065);
    EXPECT_GT(worst, 0.064);
    // Far out Cp is c6 lambda plus a bounded term.
    for (double l = 100; l <= 1e6; l *= 10) EXPECT_LT(std::abs(performance_coefficient(l, 0, c) - c.c6 * l), 10.0);
}

TEST(Cp, PitchReducesPeak) {
    const CpCoefficients c;
    EXPECT_LT(performance_coefficient(8.1, 5, c), performance_coefficient(8.1, 0, c));
}

TEST(Cp, RejectsNonPositiveLambda) {
    EXPECT_THROW(performance_coefficient(0.0, 0, CpCoefficients{}), DomainError);
    EXPECT_THROW(performance_coefficient(-1.0, 0, CpCoefficients{}), DomainError);
}

TEST(TipSpeedRatio, NominalPoint) {
    const AeroParams ap;
    EXPECT_DOUBLE_EQ(tip_speed_ratio(1.0, 1.0, ap), 8.1);
    EXPECT_DOUBLE_EQ(tip_speed_ratio(0.7, 0.7, ap), 8.1);
    EXPECT_DOUBLE_EQ(tip_speed_ratio(0.5, 1.0, ap), 4.05);
    EXPECT_DOUBLE_EQ(tip_speed_ratio(1.2, 0.9, ap), tip_speed_ratio(2.4, 1.8, ap));
    EXPECT_THROW(tip_speed_ratio(1.0, 0.0, ap), DomainError);
}

TEST(MechanicalPower, RatedWindCap) {
    const AeroParams ap;
    EXPECT_NEAR(mechanical_power_pu(0.48, 1.0, ap), 0.657, 1e-12);
    EXPECT_EQ(mechanical_power_pu(0.0, 1.0, ap), 0.0);
    EXPECT_NEAR(mechanical_power_pu(0.48, 0.6, ap), 0.657 * 0.216, 1e-12);
    EXPECT_NEAR(mechanical_power_pu(0.48, 0.6, ap), 0.1419, 1e-4);
}

TEST(MechanicalTorque, RatedPointAndScaling) {
    const AeroParams ap;
    const double cp = performance_coefficient(8.1, 0, ap.cp);
    EXPECT_NEAR(mechanical_torque(1.0, 0, 1.0, ap), 0.657 * cp / 0.48, 1e-12);
    EXPECT_NEAR(mechanical_torque(1.0, 0, 1.0, ap), 0.657, 1e-3);
    const CpCoefficients zero{0, 0, 0, 0, 0, 0};
    EXPECT_EQ(mechanical_torque(1.0, 0, 1.0, ap, zero), 0.0);
    // Same lambda reached at half speed and half wind: T_m = P / w_r with P ~ v^3.
    EXPECT_NEAR(mechanical_torque(0.5, 0, 0.5, ap), mechanical_torque(1.0, 0, 1.0, ap) / 4, 1e-12);
}

TEST(MechanicalTorque, HalvingSpeedAtFixedPowerDoublesTorque) {
    const AeroParams ap;
    const double p = mechanical_power_pu(0.4, 0.9, ap);
    EXPECT_NEAR(p / 0.5, 2 * (p / 1.0), 1e-15);
    EXPECT_THROW(mechanical_torque(0.0, 0, 1.0, ap), DomainError);
    EXPECT_THROW(mechanical_torque(1.0, ap.beta_max + 1, 1.0, ap), DomainError);
}

// ---------------------------------------------------------------------------
// Full plant
// ---------------------------------------------------------------------------

TEST(PlantDerivatives, ZeroFluxNoTorqueDecaysByFriction) {
    TurbineParams p;
    p.aero.cp = {0, 0, 0, 0, 0, 0};
    p.machine.v_ds = 0;
    const PlantState s{{0, 0, 0, 0}, 0.9};
    const auto d = plant_derivatives(s, {0, 0, 0}, 1.0, p);
    EXPECT_NEAR(d[4], -p.drive.c_f * 0.9 / p.drive.j, 1e-15);
    for (int i = 0; i < 4; ++i) EXPECT_EQ(d[i], 0.0);
}

TEST(PlantDerivatives, StackOfComponentOperations) {
    std::mt19937_64 g(8);
    const TurbineParams p;
    for (int k = 0; k < 1000; ++k) {
        const PlantState s{random_vec(g), uniform(g, 0.2, 1.5)};
        const PlantControls u{uniform(g, -1, 1), uniform(g, -1, 1), uniform(g, 0, 20)};
        const double v = uniform(g, 0.4, 1.2);
        const auto d = plant_derivatives(s, u, v, p);
        const auto e = electrical_derivatives(s.flux, s.omega_r, {p.machine.v_ds, p.machine.v_qs, u.v_dr, u.v_qr},
                                              p.machine);
        for (int i = 0; i < 4; ++i) EXPECT_EQ(d[static_cast<std::size_t>(i)], e[static_cast<std::size_t>(i)]);
        const double tm = mechanical_torque(s.omega_r, u.beta, v, p.aero);
        const double te = electromagnetic_torque(s.flux, p.machine);
        EXPECT_NEAR(d[4], (tm - te - p.drive.c_f * s.omega_r) / p.drive.j, 1e-14);
    }
}

TEST(Params, ValidationRejectsNonPhysicalValues) {
    MachineParams m;
    m.l_s = 2.0;  // below l_m
    EXPECT_THROW(m.validate(), ConfigError);
    DriveTrainParams d;
    d.j = 0;
    EXPECT_THROW(d.validate(), ConfigError);
    d = {};
    d.c_f = -0.1;
    EXPECT_THROW(d.validate(), ConfigError);
    EXPECT_NO_THROW(TurbineParams{}.validate());
}
