import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import solve_ivp

from fowlerlab import floquet, fowler, spheres


def test_constant_orbit_monodromy_closed_form(const5_orbit):
    lam = 10.0
    op = floquet.ModeOperator(const5_orbit, lam)
    m = floquet.monodromy(op)
    # eigenvalues e^{+-rho T} with rho^2 = lambda + q(1-e) = lambda - n + 2
    rho = math.sqrt(lam - 5 + 2)
    T = const5_orbit.period
    evals = np.sort(np.linalg.eigvals(m))
    # the small eigenvalue of a large-entry matrix carries absolute rounding
    # ~ eps * ||M||, so compare it at matching absolute accuracy
    assert_allclose(np.sort([math.exp(-rho * T), math.exp(rho * T)]), evals,
                    rtol=1e-10, atol=1e-11 * float(np.abs(m).max()))


def test_nonconstant_mode1_trace(conf5_orbit):
    # sigma = 1 exactly for the degree-1 modes, so tr M = e^T + e^{-T}
    op = floquet.ModeOperator(conf5_orbit, 4.0)
    m = floquet.monodromy(op)
    T = conf5_orbit.period
    assert abs(np.trace(m) - (math.exp(T) + math.exp(-T))) < 1e-6 * math.exp(T)


def test_determinant_is_one(conf3_orbit, ckn_orbit):
    rng = np.random.default_rng(11)
    pairs = [(conf3_orbit, lam) for lam in rng.uniform(0.5, 12.0, 10)]
    pairs += [(ckn_orbit, lam) for lam in rng.uniform(0.5, 12.0, 10)]
    for orbit, lam in pairs:
        _, det = floquet.monodromy(floquet.ModeOperator(orbit, float(lam)),
                                   with_det=True)
        assert abs(det - 1.0) < 1e-9


def test_classify_rotation_cases(ckn_const_orbit):
    # conformal constant, mode 0: rotation number sqrt(n-2)
    p = fowler.FowlerParams.conformal(6, 1.0)
    orb = fowler.constant_orbit(p)
    d = floquet.mode_datum(orb, 0, 0.0, 0)
    assert d.type == floquet.TYPE_IV
    assert_allclose(d.omega, math.sqrt(6 - 2), rtol=1e-12)
    # CKN constant, mode 0: omega = (n - 2a - 2) sqrt(p-2) / 2
    params = ckn_const_orbit.params
    d0 = floquet.mode_datum(ckn_const_orbit, 0, 0.0, 0)
    expected = (params.n - 2 * params.a - 2) * math.sqrt(params.p - 2) / 2.0
    assert d0.type == floquet.TYPE_IV
    assert_allclose(d0.omega, expected, rtol=1e-12)


def test_classify_synthetic_matrices():
    # hyperbolic
    c = floquet.classify(np.diag([math.exp(2.0), math.exp(-2.0)]), 1.0)
    assert c.type == floquet.TYPE_III and abs(c.sigma - 2.0) < 1e-12
    # elliptic
    th = 0.7
    rot = np.array([[math.cos(th), math.sin(th)],
                    [-math.sin(th), math.cos(th)]])
    c = floquet.classify(rot, 1.0)
    assert c.type == floquet.TYPE_IV and abs(c.omega - th) < 1e-12
    # unit eigenvalue, diagonal vs Jordan block
    assert floquet.classify(np.eye(2), 1.0).type == floquet.TYPE_I
    assert floquet.classify(np.array([[1.0, 0.5], [0.0, 1.0]]), 1.0).type \
        == floquet.TYPE_II
    with pytest.raises(ValueError, match="determinant"):
        floquet.classify(np.diag([2.0, 1.0]), 1.0)


def test_mode0_kernel_contains_orbit_derivative():
    # L_0 xi' = 0; checked through spectral differentiation of the samples
    # (a tight integration tolerance keeps the k^2-amplified sampling noise
    # below the 1e-8 bar)
    params = fowler.FowlerParams.conformal(5, 1.0)
    orb = fowler.periodic_orbit(0.5 * fowler.constant_solution(params),
                                params, tol=1e-12)
    d0 = floquet.mode_datum(orb, 0, 0.0, 0)
    assert d0.type == floquet.TYPE_II
    y = orb.xi_prime[:-1]
    T = orb.period
    k = np.fft.rfftfreq(y.size, d=T / y.size) * 2 * np.pi
    coeffs = np.fft.rfft(y)
    coeffs[np.abs(coeffs) < 1e-13 * np.max(np.abs(coeffs))] = 0.0
    ypp = np.fft.irfft((1j * k) ** 2 * coeffs, n=y.size)
    op = floquet.ModeOperator(orb, 0.0)
    residual = -ypp + op.potential(orb.t[:-1]) * y
    assert np.max(np.abs(residual)) < 1e-8


def test_mode0_coupling_matches_period_derivative(ckn_orbit):
    # the t-term coefficient equals -dT/deps / T (independent oracle:
    # centered difference of the period quadrature)
    orb = ckn_orbit
    d0 = floquet.mode_datum(orb, 0, 0.0, 0)
    de = 1e-6
    p = orb.params
    tp = (fowler.period_quadrature(orb.epsilon + de, p)
          - fowler.period_quadrature(orb.epsilon - de, p)) / (2 * de)
    assert abs(d0.coupling - (-tp / orb.period)) < 1e-5


def test_exponent_sequence_constant(const5_orbit):
    data = floquet.exponent_sequence(const5_orbit, 6)
    assert_allclose([d.sigma for d in data[:5]], np.ones(5), atol=1e-12)
    assert_allclose(data[5].sigma, math.sqrt(7.0), rtol=1e-12)


def test_exponent_sequence_ckn_constant(ckn_const_orbit):
    params = ckn_const_orbit.params
    data = floquet.exponent_sequence(ckn_const_orbit, 12)
    for d in data:
        expected = math.sqrt(d.lam - (params.p - 2) * (params.n - 2 * params.a
                                                       - 2) ** 2 / 4.0)
        assert abs(d.sigma - expected) < 1e-12


def test_exponent_sequence_nonconstant_unit_exponents(conf3_orbit, conf6_orbit):
    for orb in (conf3_orbit, conf6_orbit):
        n = orb.params.n
        data = floquet.exponent_sequence(orb, n)
        assert max(abs(d.sigma - 1.0) for d in data) < 1e-6


def test_kernel_basis_matches_translate_derivative(conf5_orbit):
    orb = conf5_orbit
    d1 = floquet.mode_datum(orb, 1, 4.0, 1, with_factors=True)
    t = orb.t
    p_plus = 1.5 * orb.xi - orb.xi_prime
    p_minus = 1.5 * orb.xi + orb.xi_prime
    assert np.max(np.abs(d1.q_plus(t) - p_plus / p_plus[0])) < 1e-6
    assert np.max(np.abs(d1.q_minus(t) - p_minus / p_minus[0])) < 1e-6
    assert d1.periodicity_defect < 1e-6


def test_kernel_basis_constant_orbit_trivial(const5_orbit):
    d = floquet.mode_datum(const5_orbit, 6, 10.0, 2, with_factors=True)
    assert_allclose(d.q_plus(const5_orbit.t), 1.0, atol=1e-14)


def test_kernel_basis_requires_type_three(conf5_orbit):
    d0 = floquet.mode_datum(conf5_orbit, 0, 0.0, 0)
    with pytest.raises(ValueError, match="Type III"):
        floquet.kernel_basis(floquet.ModeOperator(conf5_orbit, 0.0), d0)


def test_growth_rate_cross_check(conf6_orbit):
    # integrate L_i h = 0 forward over 5 periods from generic data and fit
    # log|h| at period multiples; slope must reproduce +sigma for 3 randomly
    # chosen hyperbolic modes
    orb = conf6_orbit
    T = orb.period
    rng = np.random.default_rng(3)
    count = spheres.index_of_last_degree(orb.params.n, 3) + 1
    data = floquet.exponent_sequence(orb, count)
    distinct = {round(d.sigma, 9): d for d in data}
    picks = rng.choice(list(distinct), size=min(3, len(distinct)),
                       replace=False)
    for key in picks:
        d = distinct[key]
        op = floquet.ModeOperator(orb, d.lam)
        sol = solve_ivp(lambda s, y: [y[1], op.potential(s) * y[0]],
                        (0.0, 5 * T), [1.0, 0.3], method="DOP853",
                        rtol=1e-12, atol=1e-12, dense_output=True)
        ks = np.arange(1, 6)
        vals = np.log(np.abs(sol.sol(ks * T)[0]))
        slope = np.polyfit(ks * T, vals, 1)[0]
        assert abs(slope - d.sigma) < 1e-4, (d.lam, slope, d.sigma)


def test_lower_bound_report(conf6_orbit):
    n = 6
    const = fowler.constant_orbit(fowler.FowlerParams.conformal(n, 1.0))
    data_c = floquet.exponent_sequence(const, n + 1)
    rep_c = floquet.lower_bound_check(data_c, const)
    assert rep_c.ok
    # mode n+1 on the constant orbit: rho^2 = 2n - n + 2 = 8 for n = 6
    assert_allclose(data_c[n].sigma ** 2, 8.0, rtol=1e-12)
    assert data_c[n].sigma > 2.0

    data = floquet.exponent_sequence(conf6_orbit, n + 1)
    rep = floquet.lower_bound_check(data, conf6_orbit)
    assert rep.ok
    assert all(m > 0 for m in rep.margins)


def test_lower_bound_margin_cross_checked_by_growth_fit(conf6_orbit):
    # the mode-(n+1) exponent used in the bound is reproduced by forward
    # integration growth fitting (independent of the monodromy eigenvalues)
    orb = conf6_orbit
    d = floquet.exponent_sequence(orb, 7)[-1]
    op = floquet.ModeOperator(orb, d.lam)
    T = orb.period
    sol = solve_ivp(lambda s, y: [y[1], op.potential(s) * y[0]],
                    (0.0, 5 * T), [0.9, 0.1], method="DOP853", rtol=1e-12,
                    atol=1e-12, dense_output=True)
    ks = np.arange(1, 6)
    slope = np.polyfit(ks * T, np.log(np.abs(sol.sol(ks * T)[0])), 1)[0]
    assert abs(slope - d.sigma) < 1e-4
    assert d.sigma ** 2 > d.lam - (3 * 6 - 2) / 2.0


def test_ckn_exponent_ordering_and_positivity(ckn_orbit):
    orb = ckn_orbit
    n = orb.params.n
    count = spheres.index_of_last_degree(n, 2) + 1
    data = floquet.exponent_sequence(orb, count, with_factors=True)
    sig = [d.sigma for d in data]
    assert max(abs(s - sig[0]) for s in sig[:n]) < 1e-6
    assert sig[n] > sig[0] + 1e-6
    for d in data[n:]:
        assert np.min(d.q_plus(orb.t)) > 0.0
        assert d.periodicity_defect < 1e-6


def test_datum_json_roundtrip(conf5_orbit):
    d = floquet.mode_datum(conf5_orbit, 1, 4.0, 1, with_factors=True)
    payload = d.to_dict()
    assert payload["type"] == "III"
    assert len(payload["q_plus"]) == 256
    assert abs(payload["sigma"] - 1.0) < 1e-6


def test_exponent_sequence_rejects_elliptic_mode(conf5_orbit, monkeypatch):
    # an elliptic classification for i >= 1 contradicts the hyperbolic kernel
    # structure and must be a hard error
    real = floquet.mode_datum

    def fake(orbit, index, lam, degree, with_factors=False):
        d = real(orbit, index, lam, degree, with_factors=with_factors)
        if lam > 0:
            d = floquet.FloquetDatum(
                index=d.index, degree=d.degree, lam=d.lam, period=d.period,
                monodromy=d.monodromy, type=floquet.TYPE_IV, omega=1.0)
        return d

    monkeypatch.setattr(floquet, "mode_datum", fake)
    with pytest.raises(floquet.FloquetStructureError, match="Type IV"):
        floquet.exponent_sequence(conf5_orbit, 3)
