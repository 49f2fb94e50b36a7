"""Positive periodic solutions of the autonomous ODE -xi'' + q xi = c xi^e.

Two parameterizations are supported:

* conformal:  q = (n-2)^2/4,  e = (n+2)/(n-2),  c = K0 > 0
* CKN:        q = (n-2a-2)^2/4,  e = p - 1,  c = 1, with
              p = 2n / (n - 2 + 2(b - a)),  0 <= a < (n-2)/2,  a <= b < a+1

The phase plane has a center at the constant solution xi* = (q/c)^{1/(e-1)};
orbits started at (eps, 0) with 0 < eps < xi* are even, periodic, and conserve
the Hamiltonian H = xi'^2/2 - (q/2) xi^2 + (c/(e+1)) xi^{e+1}.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

DEGENERACY_GAP = 1e-6  # reject eps closer to xi* than this (relative)
DEFAULT_SAMPLES = 2048


class IntegrationError(RuntimeError):
    """Raised when the ODE integrator fails; carries the last accepted step."""


@dataclass(frozen=True)
class FowlerParams:
    """Coefficients of -xi'' + q xi = c xi^e plus their provenance."""

    q: float
    c: float
    e: float
    kind: str  # "conformal" | "ckn"
    n: int
    k0: float | None = None
    a: float | None = None
    b: float | None = None
    p: float | None = None

    @staticmethod
    def conformal(n: int, k0: float = 1.0) -> "FowlerParams":
        if n < 3:
            raise ValueError("conformal problem requires n >= 3")
        if k0 <= 0:
            raise ValueError("K(0) must be positive")
        q = (n - 2) ** 2 / 4.0
        e = (n + 2) / (n - 2)
        return FowlerParams(q=q, c=float(k0), e=e, kind="conformal", n=int(n), k0=float(k0))

    @staticmethod
    def ckn(n: int, a: float, b: float) -> "FowlerParams":
        if n < 3:
            raise ValueError("CKN problem requires n >= 3")
        if not (0 <= a < (n - 2) / 2):
            raise ValueError(f"need 0 <= a < (n-2)/2, got a={a}")
        if not (a <= b < a + 1):
            raise ValueError(f"need a <= b < a+1, got a={a}, b={b}")
        p = 2.0 * n / (n - 2 + 2 * (b - a))
        q = (n - 2 * a - 2) ** 2 / 4.0
        return FowlerParams(q=q, c=1.0, e=p - 1.0, kind="ckn", n=int(n),
                            a=float(a), b=float(b), p=p)

    def describe(self) -> dict:
        d = {"kind": self.kind, "n": self.n, "q": self.q, "c": self.c, "e": self.e}
        if self.kind == "conformal":
            d["k0"] = self.k0
        else:
            d.update(a=self.a, b=self.b, p=self.p)
        return d


def constant_solution(params: FowlerParams) -> float:
    """The unique positive constant solving q xi = c xi^e."""
    return (params.q / params.c) ** (1.0 / (params.e - 1.0))


def hamiltonian(xi, xi_prime, params: FowlerParams):
    """H = xi'^2/2 - (q/2) xi^2 + (c/(e+1)) xi^{e+1} (conserved along orbits)."""
    xi = np.asarray(xi, dtype=float)
    xi_prime = np.asarray(xi_prime, dtype=float)
    val = 0.5 * xi_prime**2 - 0.5 * params.q * xi**2 \
        + params.c / (params.e + 1.0) * xi ** (params.e + 1.0)
    return float(val) if val.ndim == 0 else val


def _potential(s, params):
    # G(s) with H(xi, xi') = xi'^2/2 + G(xi)
    return -0.5 * params.q * s**2 + params.c / (params.e + 1.0) * s ** (params.e + 1.0)


def small_oscillation_period(params: FowlerParams) -> float:
    """Period of linearized oscillations about xi*: 2 pi / sqrt(q (e-1))."""
    return 2.0 * math.pi / math.sqrt(params.q * (params.e - 1.0))


def upper_turning_bound(params: FowlerParams) -> float:
    """Root of G(s) = 0 above xi*; every orbit maximum stays strictly below it."""
    return ((params.e + 1.0) * params.q / (2.0 * params.c)) ** (1.0 / (params.e - 1.0))


def max_value(epsilon: float, params: FowlerParams) -> float:
    """The orbit maximum: unique root s > xi* of G(s) = G(eps)."""
    xistar = constant_solution(params)
    if not 0 < epsilon < xistar:
        raise ValueError("no periodic orbit above the constant solution")
    h0 = _potential(epsilon, params)
    hi = upper_turning_bound(params)
    return brentq(lambda s: _potential(s, params) - h0, xistar, hi,
                  xtol=1e-13, rtol=8.9e-16)


def _expm1_log1p_ratio(y, scale):
    """(exp(scale*log1p(y)) - 1) / y, computed without cancellation."""
    y = np.asarray(y, dtype=float)
    x = scale * np.log1p(y)
    small_y = np.abs(y) < 1e-8
    log_ratio = np.where(small_y, 1.0 - y / 2.0 + y * y / 3.0,
                         np.log1p(np.where(small_y, 1.0, y)) / np.where(small_y, 1.0, y))
    small_x = np.abs(x) < 1e-8
    exp_ratio = np.where(small_x, 1.0 + x / 2.0 + x * x / 6.0,
                         np.expm1(np.where(small_x, 1.0, x)) / np.where(small_x, 1.0, x))
    return scale * log_ratio * exp_ratio


def period_quadrature(epsilon: float, params: FowlerParams) -> float:
    """Orbit period via the energy integral T = 2 int_eps^max ds / sqrt(2(H - G(s))).

    Both endpoints are simple turning points; substituting s = eps + u^2 and
    s = smax - u^2 removes the inverse-square-root singularities, and the
    level differences G(turning point) - G(s) are expanded through
    expm1/log1p so the integrand stays smooth down to u = 0 even for orbits
    close to the constant solution.
    """
    xistar = constant_solution(params)
    if not 0 < epsilon < xistar:
        raise ValueError("no periodic orbit above the constant solution")
    smax = max_value(epsilon, params)
    q, c, e = params.q, params.c, params.e

    def left(u):
        # 2 (G(eps) - G(eps + u^2)) / u^2, exact at u = 0
        u2 = u * u
        s = epsilon + u2
        ratio = _expm1_log1p_ratio(u2 / epsilon, e + 1.0)
        val = q * (s + epsilon) - (2.0 * c / (e + 1.0)) * epsilon**e * ratio
        return 2.0 / np.sqrt(val)

    def right(u):
        # 2 (G(smax) - G(smax - u^2)) / u^2, exact at u = 0
        u2 = u * u
        s = smax - u2
        ratio = _expm1_log1p_ratio(-u2 / smax, e + 1.0)
        val = -q * (s + smax) + (2.0 * c / (e + 1.0)) * smax**e * ratio
        return 2.0 / np.sqrt(val)

    u_left = math.sqrt(xistar - epsilon)
    u_right = math.sqrt(smax - xistar)
    i_left, _ = quad(left, 0.0, u_left, epsabs=1e-13, epsrel=1e-12, limit=200)
    i_right, _ = quad(right, 0.0, u_right, epsabs=1e-13, epsrel=1e-12, limit=200)
    return 2.0 * (i_left + i_right)


@dataclass(frozen=True)
class FowlerOrbit:
    """One period of a positive Fowler solution, from the minimum at t = 0."""

    params: FowlerParams
    epsilon: float
    period: float
    t: np.ndarray
    xi: np.ndarray
    xi_prime: np.ndarray
    energy: float
    is_constant: bool
    energy_drift: float
    _dense: object = field(default=None, repr=False, compare=False)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def value(self, t):
        """xi at arbitrary t (periodic extension)."""
        if self.is_constant:
            return np.full_like(np.asarray(t, dtype=float), self.epsilon)
        tm = np.mod(t, self.period)
        return self._dense(tm)[0]

    def derivative(self, t):
        """xi' at arbitrary t (periodic extension)."""
        if self.is_constant:
            return np.zeros_like(np.asarray(t, dtype=float))
        tm = np.mod(t, self.period)
        return self._dense(tm)[1]

    def nonlinear_power(self, t):
        """c * xi(t)^e, the nonlinear term along the orbit."""
        return self.params.c * self.value(t) ** self.params.e

    def second_derivative(self, t):
        """xi'' from the ODE: q xi - c xi^e (exact given xi)."""
        return self.params.q * self.value(t) - self.nonlinear_power(t)


def _rhs(t, y, params):
    return [y[1], params.q * y[0] - params.c * y[0] ** params.e]


def constant_orbit(params: FowlerParams) -> FowlerOrbit:
    """The constant solution packaged as an orbit.

    A constant has no intrinsic period; the stored period is the linearization
    period 2 pi / sqrt(q (e-1)), which is the limit of orbit periods as
    eps -> xi* and the natural time scale for mode-0 oscillations.
    """
    xistar = constant_solution(params)
    period = small_oscillation_period(params)
    t = np.linspace(0.0, period, DEFAULT_SAMPLES)
    xi = np.full_like(t, xistar)
    return FowlerOrbit(params=params, epsilon=xistar, period=period, t=t,
                       xi=xi, xi_prime=np.zeros_like(t),
                       energy=hamiltonian(xistar, 0.0, params),
                       is_constant=True, energy_drift=0.0)


def periodic_orbit(epsilon: float, params: FowlerParams, tol: float = 1e-10,
                   samples: int = DEFAULT_SAMPLES) -> FowlerOrbit:
    """Shoot the orbit with xi(0) = eps, xi'(0) = 0 over exactly one period.

    The first sign change of xi' (decreasing) locates the maximum at T/2; the
    orbit is even about both turning points, so T = 2 * t_max.  The result
    stores `samples` uniform samples over [0, T] plus a dense interpolant.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    xistar = constant_solution(params)
    if not 0 < epsilon < xistar:
        raise ValueError("no periodic orbit above the constant solution")
    if xistar - epsilon < DEGENERACY_GAP * xistar:
        raise ValueError(
            f"eps within {DEGENERACY_GAP:g}*xi* of the constant solution: "
            "orbit is numerically degenerate")

    def at_max(t, y, params):
        return y[1]
    at_max.terminal = True
    at_max.direction = -1

    # integrate well below the requested tolerance: the dense-output
    # interpolant (used for sampling) is one order weaker than the stepper
    rtol = max(tol / 30.0, 1e-13)
    atol = rtol * 1e-2
    t_cap = 50.0 * (small_oscillation_period(params)
                    + 2.0 * abs(math.log(epsilon)) / math.sqrt(params.q) + 5.0)
    sol = solve_ivp(_rhs, (0.0, t_cap), [epsilon, 0.0], args=(params,),
                    method="DOP853", rtol=rtol, atol=atol, events=at_max,
                    dense_output=False)
    if not sol.success or len(sol.t_events[0]) == 0:
        raise IntegrationError(
            f"no return to xi' = 0 before t = {t_cap:g}; last accepted "
            f"t = {sol.t[-1]:.6g}, state = {sol.y[:, -1]}")
    period = 2.0 * float(sol.t_events[0][0])

    sol2 = solve_ivp(_rhs, (0.0, period), [epsilon, 0.0], args=(params,),
                     method="DOP853", rtol=rtol, atol=atol,
                     dense_output=True, max_step=period / 16.0)
    if not sol2.success:
        raise IntegrationError(
            f"integration over [0, T] failed at t = {sol2.t[-1]:.6g}, "
            f"state = {sol2.y[:, -1]}")

    t = np.linspace(0.0, period, samples)
    ys = sol2.sol(t)
    xi, xip = ys[0], ys[1]
    h0 = hamiltonian(epsilon, 0.0, params)
    drift = float(np.max(np.abs(hamiltonian(xi, xip, params) - h0)))
    energy_scale = max(1.0, abs(h0))
    if drift > 10.0 * max(tol, 1e-12) * energy_scale:
        raise IntegrationError(f"Hamiltonian drift {drift:.3e} exceeds "
                               f"10*tol*{energy_scale:.3g}")
    peak = float(sol2.sol(period / 2.0)[0])  # the maximum sits at T/2 exactly
    peak_expected = max_value(epsilon, params)
    if abs(peak - peak_expected) > 10.0 * max(tol, 1e-12) * peak_expected:
        raise IntegrationError(
            f"orbit maximum {peak:.12g} disagrees with energy-level root "
            f"{peak_expected:.12g}")

    return FowlerOrbit(params=params, epsilon=float(epsilon), period=period,
                       t=t, xi=xi, xi_prime=xip, energy=h0,
                       is_constant=False, energy_drift=drift, _dense=sol2.sol)


def orbit_to_csv(orbit: FowlerOrbit, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "xi", "xi_prime"])
        for row in zip(orbit.t, orbit.xi, orbit.xi_prime):
            writer.writerow([repr(float(v)) for v in row])


def orbit_to_dict(orbit: FowlerOrbit) -> dict:
    return {
        "params": orbit.params.describe(),
        "epsilon": orbit.epsilon,
        "period": orbit.period,
        "energy": orbit.energy,
        "energy_drift": orbit.energy_drift,
        "is_constant": orbit.is_constant,
        "t": orbit.t.tolist(),
        "xi": orbit.xi.tolist(),
        "xi_prime": orbit.xi_prime.tolist(),
    }


def orbit_to_json(orbit: FowlerOrbit, path):
    with open(path, "w") as fh:
        json.dump(orbit_to_dict(orbit), fh, indent=1, sort_keys=True)
        fh.write("\n")
