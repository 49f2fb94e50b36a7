"""Floquet analysis of the mode operators linearized at a Fowler orbit.

Restricting the linearization of the cylinder equation to the i-th
spherical-harmonic mode gives the Hill-type operator

    L_i = -d^2/dt^2 + V_i(t),    V_i = lambda_i + q - e c xi(t)^{e-1},

with V_i periodic with the orbit period T.  The first-order system
Z' = [[0, 1], [V_i, 0]] Z has a monodromy matrix M with det M = 1 whose trace
classifies the kernel:

    |tr M| > 2  -> hyperbolic (exponents +/- sigma, periodic factors),
    |tr M| < 2  -> elliptic   (rotation number),
    tr M  = +/-2 -> degenerate (periodic kernel, possibly with a t-term).

A complex off-circle pair would require a fifth type, but a real 2x2 matrix
with unit determinant has complex eigenvalues only on the unit circle, so
that type is recorded as unreachable.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from . import spheres
from .fowler import FowlerOrbit, IntegrationError
from .periodic import PeriodicFunction

TYPE_I, TYPE_II, TYPE_III, TYPE_IV = "I", "II", "III", "IV"
TYPE_V_UNREACHABLE = "V (unreachable for real unit-determinant monodromy)"

TRACE_TOL = 1e-7  # |tr M| - 2 boundary tolerance
_MONODROMY_RTOL = 1e-12
_MONODROMY_ATOL = 1e-14


class FloquetStructureError(RuntimeError):
    """Raised when a computed kernel type contradicts the hyperbolic structure
    expected for modes i >= 1 (signals an integration failure)."""


@dataclass(frozen=True)
class ModeOperator:
    """The operator -d^2/dt^2 + lambda + q - e c xi^{e-1} along an orbit."""

    orbit: FowlerOrbit
    lam: float

    def potential(self, t):
        p = self.orbit.params
        return self.lam + p.q - p.e * p.c * self.orbit.value(t) ** (p.e - 1.0)

    def potential_samples(self) -> np.ndarray:
        return self.potential(self.orbit.t)

    def apply(self, func, dfunc2, t):
        """L_i applied to a function given with its second derivative."""
        return -dfunc2 + self.potential(t) * func


@dataclass
class FloquetDatum:
    """Classification of one mode: monodromy, type, exponent, factors."""

    index: int
    degree: int
    lam: float
    period: float
    monodromy: np.ndarray
    type: str
    sigma: float | None = None       # Type III exponent
    omega: float | None = None       # Type IV rotation number
    q_plus: PeriodicFunction | None = None
    q_minus: PeriodicFunction | None = None
    periodicity_defect: float = 0.0
    warning: str | None = None
    coupling: float | None = None    # Type II t-term coefficient estimate
    det_defect: float = 0.0          # |Liouville determinant - 1|

    def to_dict(self) -> dict:
        d = {
            "index": self.index,
            "degree": self.degree,
            "lambda": self.lam,
            "period": self.period,
            "monodromy": [list(map(float, row)) for row in self.monodromy],
            "type": self.type,
            "sigma": self.sigma,
            "omega": self.omega,
            "periodicity_defect": self.periodicity_defect,
            "warning": self.warning,
        }
        if self.q_plus is not None:
            ts = np.linspace(0.0, self.period, 257)[:-1]
            d["q_plus"] = self.q_plus(ts).tolist()
            d["q_minus"] = self.q_minus(ts).tolist()
        return d


def _system(t, z, op):
    v = op.potential(t)
    return [z[1], v * z[0]] if np.isscalar(z[0]) else np.concatenate([z[2:4], v * z[0:2]])


def monodromy(op: ModeOperator, with_det: bool = False):
    """Fundamental solution over one period with identity initial data.

    For constant orbits the system is autonomous and the matrix exponential is
    written in closed form.  Otherwise the period is split into subintervals
    short enough that each partial propagator has moderate entries, and the
    monodromy is their product; the Liouville determinant check multiplies the
    subinterval determinants, which stays well conditioned even when the
    assembled matrix has exponentially large entries.
    """
    orbit = op.orbit
    T = orbit.period
    if orbit.is_constant:
        v = float(op.potential(0.0))
        if v > 0:
            r = math.sqrt(v)
            ch, sh = math.cosh(r * T), math.sinh(r * T)
            m = np.array([[ch, sh / r], [r * sh, ch]])
        elif v < 0:
            w = math.sqrt(-v)
            cw, sw = math.cos(w * T), math.sin(w * T)
            m = np.array([[cw, sw / w], [-w * sw, cw]])
        else:
            m = np.array([[1.0, T], [0.0, 1.0]])
        return (m, 1.0) if with_det else m

    def rhs(t, y):
        v = op.potential(t)
        return [y[2], y[3], v * y[0], v * y[1]]

    rate = math.sqrt(max(1.0, op.lam + orbit.params.q))
    pieces = max(1, min(64, math.ceil(rate * T / 3.0)))
    breaks = np.linspace(0.0, T, pieces + 1)
    m = np.eye(2)
    det = 1.0
    y0 = np.array([1.0, 0.0, 0.0, 1.0])
    for a, b in zip(breaks[:-1], breaks[1:]):
        sol = solve_ivp(rhs, (a, b), y0, method="DOP853",
                        rtol=_MONODROMY_RTOL, atol=_MONODROMY_ATOL)
        if not sol.success:
            raise IntegrationError(
                f"monodromy integration failed at t = {sol.t[-1]:.6g} "
                f"(lambda = {op.lam})")
        yb = sol.y[:, -1]
        mk = np.array([[yb[0], yb[1]], [yb[2], yb[3]]])
        m = mk @ m
        det *= float(np.linalg.det(mk))
    return (m, det) if with_det else m


@dataclass(frozen=True)
class Classification:
    type: str
    sigma: float | None
    omega: float | None
    warning: str | None


def classify(m: np.ndarray, period: float, tol: float = TRACE_TOL,
             det: float | None = None) -> Classification:
    """Kernel type from the monodromy trace; see module docstring.

    `det` may carry a well-conditioned determinant estimate (from subinterval
    products); otherwise the determinant is formed from the entries, with the
    tolerance widened by the roundoff floor eps * ||M||^2 that a large-entry
    matrix imposes.
    """
    if det is None:
        det = float(np.linalg.det(m))
        floor = 1e-13 * float(np.sum(m * m))
    else:
        floor = 0.0
    if abs(det - 1.0) > 100.0 * tol + floor:
        raise ValueError(f"monodromy determinant {det!r} too far from 1")
    tr = float(np.trace(m))
    if abs(tr) > 2.0 + tol:
        # hyperbolic; the larger eigenvalue magnitude sets the exponent
        mu_big = (abs(tr) + math.sqrt(tr * tr - 4.0)) / 2.0
        sigma = math.log(mu_big) / period
        warn = None if tr > 0 else "negative trace: factors are antiperiodic"
        return Classification(TYPE_III, sigma, None, warn)
    if abs(tr) < 2.0 - tol:
        omega = math.acos(max(-1.0, min(1.0, tr / 2.0))) / period
        return Classification(TYPE_IV, None, omega, None)
    # |tr| within tol of 2: unit eigenvalue; geometric multiplicity via rank
    sign = 1.0 if tr > 0 else -1.0
    defect = m - sign * np.eye(2)
    svals = np.linalg.svd(defect, compute_uv=False)
    warn = f"|tr M| within {tol:g} of 2: degenerate boundary case"
    if svals[0] < tol:
        return Classification(TYPE_I, None, None, warn)
    return Classification(TYPE_II, None, None, warn)


def _eigvec(m, mu):
    """Eigenvector of a 2x2 matrix for eigenvalue mu (better-conditioned row)."""
    c1 = np.array([m[0, 1], mu - m[0, 0]])
    c2 = np.array([mu - m[1, 1], m[1, 0]])
    v = c1 if np.linalg.norm(c1) >= np.linalg.norm(c2) else c2
    nv = np.linalg.norm(v)
    if nv == 0.0:
        raise FloquetStructureError("defective eigenvector in Type III mode")
    v = v / nv
    # normalize the function value at t = 0 to 1 when possible
    if abs(v[0]) > 1e-10:
        v = v / v[0]
    return v


def _integrate_branch(op, y0, t_eval, backward: bool):
    span = (op.orbit.period, 0.0) if backward else (0.0, op.orbit.period)
    sol = solve_ivp(_system, span, y0, args=(op,), method="DOP853",
                    rtol=_MONODROMY_RTOL, atol=_MONODROMY_ATOL,
                    dense_output=True)
    if not sol.success:
        raise IntegrationError("kernel branch integration failed")
    vals = sol.sol(t_eval)
    return vals[0], vals[1]


def kernel_basis(op: ModeOperator, datum: FloquetDatum):
    """Periodic factors (q_plus, q_minus) of a Type III kernel.

    q_plus multiplies the decaying branch e^{-sigma t} and q_minus the growing
    branch e^{+sigma t}.  The decaying branch is integrated backward in time
    (where it grows) so neither branch is contaminated by the other.  Factors
    are normalized to 1 at t = 0 when the value there is nonzero.
    """
    if datum.type != TYPE_III:
        raise ValueError("kernel_basis requires a Type III mode")
    orbit = op.orbit
    T = orbit.period
    sigma = datum.sigma
    m = datum.monodromy
    tr = float(np.trace(m))
    mu_big = (abs(tr) + math.sqrt(tr * tr - 4.0)) / 2.0 * (1.0 if tr > 0 else -1.0)
    mu_small = 1.0 / mu_big
    w_small = _eigvec(m, mu_small)
    w_big = _eigvec(m, mu_big)
    t_eval = orbit.t

    if orbit.is_constant:
        ones = np.ones_like(t_eval)
        qp = PeriodicFunction.from_closed_grid(ones, T)
        return qp, qp, 0.0

    # Decaying branch, integrated backward (where it grows) from O(1) data at
    # T; since mu_small * e^{sigma T} = 1, the periodic factor is
    # e^{sigma (t - T)} h(t) with no small prefactor anywhere.
    h_dec, hp_dec = _integrate_branch(op, w_small, t_eval, backward=True)
    q_plus_vals = np.exp(sigma * (t_eval - T)) * h_dec
    # growing branch, integrated forward
    h_gro, hp_gro = _integrate_branch(op, w_big, t_eval, backward=False)
    q_minus_vals = np.exp(-sigma * t_eval) * h_gro

    qp_prime = np.exp(sigma * (t_eval - T)) * (hp_dec + sigma * h_dec)
    qm_prime = np.exp(-sigma * t_eval) * (hp_gro - sigma * h_gro)
    scale_p = max(np.max(np.abs(q_plus_vals)), 1e-300)
    scale_m = max(np.max(np.abs(q_minus_vals)), 1e-300)
    defect = max(
        abs(q_plus_vals[-1] - q_plus_vals[0]) / scale_p,
        abs(q_minus_vals[-1] - q_minus_vals[0]) / scale_m,
        abs(qp_prime[-1] - qp_prime[0]) / scale_p,
        abs(qm_prime[-1] - qm_prime[0]) / scale_m,
    )
    q_plus = PeriodicFunction.from_closed_grid(q_plus_vals, T)
    q_minus = PeriodicFunction.from_closed_grid(q_minus_vals, T)
    return q_plus, q_minus, float(defect)


def mode_datum(orbit: FowlerOrbit, index: int, lam: float, degree: int,
               with_factors: bool = True) -> FloquetDatum:
    """Full Floquet datum for one mode (cached per distinct eigenvalue)."""
    key = ("datum", float(lam), bool(with_factors))
    hit = orbit._cache.get(key)
    if hit is not None:
        return FloquetDatum(**{**hit.__dict__, "index": index, "degree": degree})
    op = ModeOperator(orbit, lam)
    m, det = monodromy(op, with_det=True)
    if orbit.is_constant:
        # constant coefficients: classify from the potential sign directly
        # (a constant orbit has no intrinsic period, and the stored
        # linearization period makes the mode-0 trace exactly degenerate)
        v = float(op.potential(0.0))
        if v > 0:
            cls = Classification(TYPE_III, math.sqrt(v), None, None)
        elif v < 0:
            cls = Classification(TYPE_IV, None, math.sqrt(-v), None)
        else:
            cls = Classification(TYPE_II, None, None, None)
    else:
        cls = classify(m, orbit.period, det=det)
    datum = FloquetDatum(index=index, degree=degree, lam=float(lam),
                         period=orbit.period, monodromy=m, type=cls.type,
                         sigma=cls.sigma, omega=cls.omega, warning=cls.warning,
                         det_defect=abs(det - 1.0))
    if cls.type == TYPE_III and with_factors:
        qp, qm, defect = kernel_basis(op, datum)
        datum.q_plus, datum.q_minus, datum.periodicity_defect = qp, qm, defect
    if cls.type == TYPE_II and not orbit.is_constant and lam == 0.0:
        datum.coupling = mode0_coupling(orbit, m)
    orbit._cache[key] = datum
    return datum


def mode0_coupling(orbit: FowlerOrbit, m: np.ndarray) -> float:
    """Measured t-term coefficient of the mode-0 kernel.

    In the basis (xi', companion) the monodromy is unipotent; the off-diagonal
    coupling equals -dT/deps up to the companion normalization.  The returned
    number is the coefficient c in the basis element "second + c t first",
    normalized by the period.
    """
    # basis: b1 = (xi'(0), xi''(0)) = (0, xi''(0)); b2 = (1, 0)
    b1 = np.array([0.0, float(orbit.second_derivative(0.0))])
    b2 = np.array([1.0, 0.0])
    B = np.column_stack([b1, b2])
    mb = np.linalg.solve(B, m @ B)
    # mb should be [[1, kappa], [0, 1]]; c = kappa / T
    return float(mb[0, 1]) / orbit.period


def exponent_sequence(orbit: FowlerOrbit, count: int,
                      with_factors: bool = False) -> list[FloquetDatum]:
    """Floquet data for modes i = 1..count, eigenvalues in increasing order
    with multiplicity.  A Type IV classification for i >= 1 contradicts the
    hyperbolic kernel structure and raises FloquetStructureError.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    lams, degs = spheres.eigenvalue_sequence(orbit.params.n, count + 1)
    distinct = sorted(set(float(l) for l in lams[1:count + 1]))

    def build(lam):
        return mode_datum(orbit, 0, lam, 0, with_factors=with_factors)

    threads = int(os.environ.get("FOWLER_LAB_THREADS", "1") or "1")
    if threads > 1 and not orbit.is_constant:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(build, distinct))  # warm the cache in parallel
    out = []
    for i in range(1, count + 1):
        d = mode_datum(orbit, i, float(lams[i]), int(degs[i]),
                       with_factors=with_factors)
        if d.type == TYPE_IV:
            raise FloquetStructureError(
                f"mode {i} (lambda = {lams[i]}) classified Type IV; modes "
                "i >= 1 must be hyperbolic -- integration failure suspected")
        out.append(d)
    sigmas = [d.sigma for d in out if d.sigma is not None]
    if any(s2 < s1 - 1e-9 for s1, s2 in zip(sigmas, sigmas[1:])):
        raise FloquetStructureError("exponent sequence not nondecreasing")
    return out


@dataclass
class BoundReport:
    ok: bool
    margins: list
    messages: list


def lower_bound_check(data: list[FloquetDatum], orbit: FowlerOrbit,
                      tol: float = 1e-9) -> BoundReport:
    """Audit of the exponent lower bound for the conformal problem.

    Constant orbit: sigma_i^2 = lambda_i - n + 2 (to tol).
    Nonconstant orbit: sigma_i^2 > lambda_i - (3n - 2)/2 with positive margin.
    """
    p = orbit.params
    if p.kind != "conformal":
        raise ValueError("lower_bound_check applies to conformal provenance")
    n = p.n
    margins, messages, ok = [], [], True
    for d in data:
        if d.sigma is None:
            ok = False
            messages.append(f"mode {d.index}: no hyperbolic exponent")
            margins.append(float("nan"))
            continue
        if orbit.is_constant:
            err = d.sigma**2 - (d.lam - n + 2)
            margins.append(err)
            if abs(err) > tol:
                ok = False
                messages.append(
                    f"mode {d.index}: sigma^2 deviates from lambda - n + 2 "
                    f"by {err:.3e}")
        else:
            margin = d.sigma**2 - (d.lam - (3 * n - 2) / 2.0)
            margins.append(margin)
            if margin <= 0:
                ok = False
                messages.append(f"mode {d.index}: lower bound violated, "
                                f"margin {margin:.3e}")
    return BoundReport(ok=ok, margins=margins, messages=messages)
