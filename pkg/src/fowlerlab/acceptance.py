"""Quantitative desk-scale checks bundled behind `verify` and the test suite.

Each criterion returns a dict with `name`, `passed`, `runtime_s`, and a
`details` payload carrying every measured number and its tolerance, so both
the CLI and the tests report from one source of truth.
"""

from __future__ import annotations

import itertools
import math
import time

import numpy as np

from . import cylinder, expansion, floquet, index_set, spheres
from .fowler import (FowlerParams, constant_orbit, constant_solution,
                     hamiltonian, periodic_orbit, period_quadrature)


def _wrap(name):
    def deco(fn):
        def run(**kwargs):
            start = time.perf_counter()
            passed, details = fn(**kwargs)
            return {"name": name, "passed": bool(passed),
                    "runtime_s": time.perf_counter() - start,
                    "details": details}
        run.criterion_name = name
        return run
    return deco


@_wrap("constant_floquet_closed_form")
def check_constant_floquet():
    """sigma_i = sqrt(lambda_i - n + 2) on constant conformal orbits, 1e-9."""
    tol = 1e-9
    worst = 0.0
    for n in range(3, 9):
        orb = constant_orbit(FowlerParams.conformal(n, 1.0))
        data = floquet.exponent_sequence(orb, 12)
        for d in data:
            worst = max(worst, abs(d.sigma - math.sqrt(d.lam - n + 2)))
    return worst < tol, {"max_abs_error": worst, "tolerance": tol,
                         "dimensions": list(range(3, 9)), "modes": 12}


@_wrap("nonconstant_kernel_factors")
def check_nonconstant_kernel():
    """sigma_1..n = 1 within 1e-6 and q+ = (n-2)/2 xi - xi' pointwise 1e-6."""
    tol = 1e-6
    worst_sigma, worst_factor = 0.0, 0.0
    cases = []
    for n in (4, 5, 6):
        params = FowlerParams.conformal(n, 1.0)
        xistar = constant_solution(params)
        for frac in (0.3, 0.55, 0.8):
            orb = periodic_orbit(frac * xistar, params)
            data = floquet.exponent_sequence(orb, n, with_factors=False)
            sig_err = max(abs(d.sigma - 1.0) for d in data)
            d1 = floquet.mode_datum(orb, 1, float(n - 1), 1, with_factors=True)
            p_plus = (n - 2) / 2.0 * orb.xi - orb.xi_prime
            fac_err = float(np.max(np.abs(d1.q_plus(orb.t) - p_plus / p_plus[0])))
            worst_sigma = max(worst_sigma, sig_err)
            worst_factor = max(worst_factor, fac_err)
            cases.append({"n": n, "epsilon_frac": frac, "sigma_error": sig_err,
                          "factor_error": fac_err})
    ok = worst_sigma < tol and worst_factor < tol
    return ok, {"max_sigma_error": worst_sigma, "max_factor_error": worst_factor,
                "tolerance": tol, "cases": cases}


@_wrap("exponent_lower_bound")
def check_lower_bound():
    """rho_i^2 > lambda_i - (3n-2)/2 with positive margin; mu_2 = 2 for n >= 6."""
    count = 12
    all_ok = True
    records = []
    for n in range(3, 9):
        params = FowlerParams.conformal(n, 1.0)
        for orb, tag in ((constant_orbit(params), "constant"),
                         (periodic_orbit(0.5 * constant_solution(params), params),
                          "nonconstant")):
            data = floquet.exponent_sequence(orb, count)
            report = floquet.lower_bound_check(data, orb)
            entry = {"n": n, "orbit": tag, "ok": report.ok,
                     "min_margin": float(np.min(report.margins))}
            if n >= 6:
                sig = [d.sigma for d in data]
                deg = [d.degree for d in data]
                iset = index_set.generate(sig, 2.5, degrees=deg)
                entry["mu2"] = float(iset.values[1])
                entry["mu2_ok"] = abs(entry["mu2"] - 2.0) < 1e-9
                all_ok &= entry["mu2_ok"]
            all_ok &= report.ok
            records.append(entry)
    return all_ok, {"records": records, "modes": count}


@_wrap("hamiltonian_and_period")
def check_hamiltonian_period():
    """Energy drift < 1e-9, quadrature/shooting < 1e-6, -ln eps period growth."""
    drift_tol, agree_tol = 1e-9, 1e-6
    sweeps = [FowlerParams.conformal(3, 1.0),
              FowlerParams.conformal(5, (5 - 2) ** 2 / 4.0),
              FowlerParams.ckn(5, 0.5, 0.7)]
    worst_drift, worst_agree = 0.0, 0.0
    for params in sweeps:
        xistar = constant_solution(params)
        for frac in (0.2, 0.5, 0.8):
            orb = periodic_orbit(frac * xistar, params, tol=1e-11)
            worst_drift = max(worst_drift, orb.energy_drift)
            tq = period_quadrature(orb.epsilon, params)
            worst_agree = max(worst_agree, abs(tq - orb.period) / orb.period)
    # slow-orbit limit: T grows like (2 / sqrt(q)) (-ln eps) + O(1)
    params = FowlerParams.ckn(5, 0.0, 0.0)
    eps_list = [10.0 ** (-k) for k in range(1, 5)]
    periods = [period_quadrature(eps, params) for eps in eps_list]
    logs = [-math.log(eps) for eps in eps_list]
    slope = np.polyfit(logs, periods, 1)[0]
    slope_expected = 2.0 / math.sqrt(params.q)
    ratios = [T / L for T, L in zip(periods, logs)]
    ratio_steps = [abs(b - a) for a, b in zip(ratios, ratios[1:])]
    stabilizes = all(b < a for a, b in zip(ratio_steps, ratio_steps[1:]))
    slope_ok = abs(slope / slope_expected - 1.0) < 0.01
    ok = worst_drift < drift_tol and worst_agree < agree_tol and \
        stabilizes and slope_ok
    return ok, {"max_drift": worst_drift, "drift_tolerance": drift_tol,
                "max_period_disagreement": worst_agree,
                "agreement_tolerance": agree_tol,
                "orbit_integration_tol": 1e-11,
                "period_ratios": ratios, "ratio_steps": ratio_steps,
                "log_slope": float(slope), "log_slope_expected": slope_expected}


@_wrap("second_order_operator_identity")
def check_xi2_identity():
    """|| L xi_2 - explicit quadratic source ||_inf < 1e-6, n in {6,7,8}."""
    tol = 1e-6
    worst = 0.0
    records = []
    for n in (6, 7, 8):
        params = FowlerParams.conformal(n, 1.0)
        for orb, tag in ((constant_orbit(params), "constant"),
                         (periodic_orbit(0.6 * constant_solution(params), params),
                          "nonconstant")):
            defect = expansion.xi2_identity_defect(orb)
            worst = max(worst, defect)
            records.append({"n": n, "orbit": tag, "defect": defect})
    return worst < tol, {"max_defect": worst, "tolerance": tol,
                         "records": records}


@_wrap("translate_expansion_orders")
def check_translate_orders():
    """Remainder slopes of xi_a minus order-1/order-2 sums: 2 and 3 within 10%."""
    params = FowlerParams.conformal(5, 1.0)
    orb = periodic_orbit(0.8 * constant_solution(params), params)
    amag = 0.9
    a = np.zeros(5)
    a[0] = amag
    ts = np.linspace(5.0, 12.0, 141)
    svals = np.linspace(-1.0, 1.0, 21)
    exact = np.array([expansion.translate_zonal(orb, amag, ts, s)
                      for s in svals]).T
    base = orb.value(ts)[:, None]
    fits = {}
    for order, target in ((1, 2.0), (2, 3.0)):
        terms = expansion.translate_expansion(orb, a, order)
        model = expansion.evaluate_terms(terms, ts, svals)
        rem = np.max(np.abs(exact - base - model), axis=1)
        fit = cylinder.decay_rate_fit((ts, rem), floor=3e-14)
        fits[order] = {"slope": fit.slope_plain, "target": target,
                       "relative_error": abs(fit.slope_plain / target - 1.0),
                       "n_points": fit.n_points, "window": fit.window}
    ok = all(f["relative_error"] < 0.10 for f in fits.values())
    return ok, {"order_1": fits[1], "order_2": fits[2], "amplitude": amag}


def _brute_force_sums(rho, cutoff, tol):
    rho = np.asarray(rho, dtype=float)
    caps = [int(math.floor(cutoff / r + tol)) for r in rho]
    sums = set()
    for counts in itertools.product(*[range(c + 1) for c in caps]):
        s = float(np.dot(counts, rho))
        if 0.0 < s <= cutoff + tol:
            sums.add(round(s / tol))
    return sorted(sums)


@_wrap("index_set_oracle")
def check_index_oracle(seed: int = 20240801):
    """generate == nested-loop enumeration; mu_2 = min(2, rho_{n+1})."""
    rng = np.random.default_rng(seed)
    tol = 1e-9
    mismatches = 0
    for _ in range(10):
        k = int(rng.integers(1, 5))
        rho = np.sort(rng.uniform(0.5, 2.5, size=k))
        cutoff = float(rng.uniform(3.0, 6.0))
        mine = index_set.generate(rho, cutoff, tol)
        ref = _brute_force_sums(rho, cutoff, tol)
        if [round(v / tol) for v in mine.values] != ref:
            mismatches += 1
    mu2_records = []
    mu2_ok = True
    for n in range(3, 9):
        params = FowlerParams.conformal(n, 1.0)
        for orb, tag in ((constant_orbit(params), "constant"),
                         (periodic_orbit(0.45 * constant_solution(params),
                                         params), "nonconstant")):
            data = floquet.exponent_sequence(orb, n + 1)
            sig = [d.sigma for d in data]
            iset = index_set.generate(sig, 3.0,
                                      degrees=[d.degree for d in data])
            expected = min(2.0, sig[-1])
            err = abs(float(iset.values[1]) - expected)
            mu2_ok &= err < 1e-9
            mu2_records.append({"n": n, "orbit": tag, "mu2": float(iset.values[1]),
                                "expected": expected, "error": err})
    return mismatches == 0 and mu2_ok, {
        "oracle_mismatches": mismatches, "trials": 10, "tol": tol,
        "mu2_records": mu2_records}


def _construction_orbit():
    params = FowlerParams.conformal(5, 1.0)
    xistar = constant_solution(params)
    orb = periodic_orbit(0.5 * xistar, params)
    # keep the degree-2 exponent clear of the tested rates
    data = floquet.exponent_sequence(orb, 6)
    if min(abs(data[-1].sigma - 1.5), abs(data[-1].sigma - 2.5)) < 0.05:
        orb = periodic_orbit(0.42 * xistar, params)
    return params, orb


def _period_aligned_window(field, orbit, lead: float = 0.5, trail: float = 1.5):
    """Fit window spanning a whole number of orbit periods, so the periodic
    coefficient modulation does not bias the slope."""
    lo = field.t[0] + lead
    avail = field.t[-1] - trail - lo
    k = max(1, int(math.floor(avail / orbit.period)))
    return lo, lo + k * orbit.period


@_wrap("contraction_construction")
def check_contraction(beta_values=(1.5, 2.5), resonant_beta=1.0):
    """Constructed v has |v - xi| decaying at the forcing rate; at beta =
    sigma_1 the t e^{-beta t} model wins."""
    params, orb = _construction_orbit()
    records = []
    ok = True
    for beta in beta_values:
        profile = cylinder.ForcingProfile(k0=1.0, components=((1, 0.05, beta),))
        v, trace = cylinder.contraction_construct(orb, profile)
        diff = v.combination(cylinder.orbit_field(orb, v.t), 1.0, -1.0)
        fit = cylinder.decay_rate_fit(diff,
                                      t_window=_period_aligned_window(v, orb))
        rel = abs(fit.slope_plain / beta - 1.0)
        ok &= rel < 0.05 and trace.converged
        records.append({"beta": beta, "slope": fit.slope_plain,
                        "relative_error": rel, "r2": fit.r2_plain,
                        "iterations": trace.iterations,
                        "factors": trace.factors[-3:],
                        "log_corrected": fit.log_corrected})
    profile = cylinder.ForcingProfile(
        k0=1.0, components=((1, 0.05, resonant_beta),))
    v, trace = cylinder.contraction_construct(orb, profile)
    diff = v.combination(cylinder.orbit_field(orb, v.t), 1.0, -1.0)
    fit = cylinder.decay_rate_fit(diff,
                                  t_window=_period_aligned_window(v, orb))
    rel = abs(fit.slope_log / resonant_beta - 1.0)
    # t e^{-beta t} signature: the log-corrected slope matches the rate while
    # the plain slope drifts below it
    prefers_log = (abs(fit.slope_log - resonant_beta)
                   < abs(fit.slope_plain - resonant_beta))
    drift_below = fit.slope_plain < resonant_beta
    ok &= prefers_log and drift_below and rel < 0.05
    records.append({"beta": resonant_beta, "resonant": True,
                    "log_model_preferred": prefers_log,
                    "plain_slope_drifts_below": drift_below,
                    "slope_plain": fit.slope_plain,
                    "slope_log": fit.slope_log, "relative_error": rel,
                    "r2_plain": fit.r2_plain, "r2_log": fit.r2_log})
    return ok, {"records": records, "epsilon": orb.epsilon}


@_wrap("first_order_expansion_of_constructed")
def check_first_order_expansion(beta: float = 1.5):
    """decay fit of v - xi - xi_1 lies in the predicted window (1, 2)."""
    params, orb = _construction_orbit()
    profile = cylinder.ForcingProfile(k0=1.0, components=((1, 0.05, beta),))
    v, trace = cylinder.contraction_construct(orb, profile)
    diff = v.combination(cylinder.orbit_field(orb, v.t), 1.0, -1.0)
    c1 = cylinder.fit_kernel_amplitude(diff, orb)
    term = expansion.first_order_term(orb, amplitude=c1)
    svals = np.linspace(-1.0, 1.0, 201)
    resid = np.abs(diff.evaluate(svals) - term.evaluate(diff.t, svals))
    sup = np.max(resid, axis=1)
    fit = cylinder.decay_rate_fit((diff.t, sup),
                                  t_window=_period_aligned_window(v, orb))
    gamma = fit.slope_plain
    ok = 1.0 < gamma < 2.0
    return ok, {"gamma": gamma, "window": (1.0, 2.0), "kernel_amplitude": c1,
                "beta": beta, "r2": fit.r2_plain}


@_wrap("dimension4_example")
def check_remark_example():
    """4th-order residual convergence and grad K(0) = (1/8, ..., 1/8)."""
    report = cylinder.remark_example_check()
    ratio_ok = 14.0 <= report["refinement_ratio"] <= 18.0
    grad_ok = report["grad_k_error"] < 1e-4
    return ratio_ok and grad_ok, report


@_wrap("ckn_branch")
def check_ckn(nu: float = 2.4):
    """CKN: constant-orbit closed form, exponent ordering and q+ positivity,
    and the N-operator contraction with slope within 5% of nu."""
    tol_const = 1e-9
    params = FowlerParams.ckn(5, 0.5, 0.7)
    n = params.n
    const = constant_orbit(params)
    data_c = floquet.exponent_sequence(const, 12)
    worst_const = max(
        abs(d.sigma - math.sqrt(d.lam - (params.p - 2.0) * params.q))
        for d in data_c)

    orb = periodic_orbit(0.4 * constant_solution(params), params)
    count = spheres.index_of_last_degree(n, 2) + 1
    data = floquet.exponent_sequence(orb, count, with_factors=True)
    sig = [d.sigma for d in data]
    ordering_ok = (max(abs(s - sig[0]) for s in sig[:n]) < 1e-6
                   and sig[n] > sig[0] + 1e-6)
    qplus_min = min(float(np.min(d.q_plus(orb.t)))
                    for d in data[n:] if d.q_plus is not None)

    # nu must avoid the index set; then |w - w_hat| decays at rate nu
    iset = index_set.generate(sig, nu + 1.0, degrees=[d.degree for d in data])
    gap = float(np.min(np.abs(iset.values - nu)))
    w, w_hat, trace = cylinder.ckn_construct(orb, nu)
    diff = w.combination(w_hat, 1.0, -1.0)
    fit = cylinder.decay_rate_fit(diff,
                                  t_window=_period_aligned_window(w, orb))
    rel = abs(fit.slope_plain / nu - 1.0)
    ok = (worst_const < tol_const and ordering_ok and qplus_min > 0.0
          and rel < 0.05 and trace.converged)
    return ok, {"constant_sigma_error": worst_const,
                "constant_tolerance": tol_const,
                "sigma_first": sig[0], "sigma_next": sig[n],
                "ordering_ok": ordering_ok, "qplus_min": qplus_min,
                "nu": nu, "index_gap": gap, "slope": fit.slope_plain,
                "relative_error": rel, "iterations": trace.iterations}


ALL_CRITERIA = [
    check_constant_floquet,
    check_nonconstant_kernel,
    check_lower_bound,
    check_hamiltonian_period,
    check_xi2_identity,
    check_translate_orders,
    check_index_oracle,
    check_contraction,
    check_first_order_expansion,
    check_remark_example,
    check_ckn,
]

SUITES = {fn.criterion_name: fn for fn in ALL_CRITERIA}
SUITES["xi2"] = check_xi2_identity
SUITES["floquet-const"] = check_constant_floquet
SUITES["floquet-nonconst"] = check_nonconstant_kernel
SUITES["bounds"] = check_lower_bound
SUITES["hamiltonian"] = check_hamiltonian_period
SUITES["translate"] = check_translate_orders
SUITES["index"] = check_index_oracle
SUITES["construct"] = check_contraction
SUITES["first-order"] = check_first_order_expansion
SUITES["remark"] = check_remark_example
SUITES["ckn"] = check_ckn


def run_suite(names=None) -> list:
    """Run the named criteria (all by default) and return their reports."""
    if not names or names == ["all"]:
        fns = list(ALL_CRITERIA)
    else:
        unknown = [x for x in names if x not in SUITES]
        if unknown:
            raise KeyError(f"unknown suite name(s): {unknown}; "
                           f"choose from {sorted(set(SUITES))}")
        fns = [SUITES[x] for x in names]
    return [fn() for fn in fns]
