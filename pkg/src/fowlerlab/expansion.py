"""Explicit expansion terms at a Fowler orbit and resonant periodic solves.

Conformal translates: for a vector a the function

    xi_a(t, theta) = |theta - e^{-t} a|^{-(n-2)/2} xi(t + ln|theta - e^{-t} a|)

solves the constant-curvature cylinder equation exactly and expands in powers
of e^{-t}.  The first-order coefficient is (n-2)/2 xi - xi' (times <a,theta>);
the second-order terms split into zonal degree-2 and degree-0 parts through
the decomposition <a,theta>^2 = |a|^2 [ (n-1)/n Z_2 + 1/n ].

The resonant solver inverts L_i on forcings of the form a(t) t^m e^{-mu t}
with periodic a: conjugating by e^{-mu t} gives the periodic-coefficient
operator A = -d^2/dt^2 + 2 mu d/dt + (V - mu^2), solved by Fourier
collocation; when mu hits the mode's Floquet exponent the ansatz gains one
power of t and the top coefficient is fixed by solvability against the
adjoint kernel.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import floquet, spheres
from .fowler import FowlerOrbit
from .periodic import PeriodicFunction

RESONANCE_TOL = 1e-8
COLLOCATION_SIZE = 256
RESIDUAL_LIMIT = 1e-8


@dataclass(frozen=True)
class ExpansionTerm:
    """One term c(t) t^j e^{-mu t} X(theta) with periodic coefficient c."""

    mu: float
    t_power: int
    coeff: PeriodicFunction
    mode: spheres.HarmonicMode

    def evaluate(self, t, s):
        """Value on the tensor grid of times t and cosines s = <axis, theta>."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        radial = self.coeff(t) * t**self.t_power * np.exp(-self.mu * t)
        angular = spheres.eval_zonal(self.mode, s)
        return np.outer(radial, angular)

    def coefficient_samples(self, t):
        return self.coeff(np.asarray(t, dtype=float))

    def to_dict(self, num: int = 128) -> dict:
        ts = np.linspace(0.0, self.coeff.period, num + 1)[:-1]
        return {
            "mu": self.mu,
            "t_power": self.t_power,
            "degree": self.mode.degree,
            "dimension": self.mode.dimension,
            "period": self.coeff.period,
            "coeff_t": ts.tolist(),
            "coeff": self.coeff(ts).tolist(),
        }


def _require_conformal(orbit):
    if orbit.params.kind != "conformal":
        raise ValueError("translate machinery requires conformal provenance")


def _periodic_from_orbit(orbit, values):
    return PeriodicFunction.from_closed_grid(values, orbit.period)


def first_order_term(orbit: FowlerOrbit, amplitude: float = 1.0) -> ExpansionTerm:
    """The kernel term e^{-t} ((n-2)/2 xi - xi') Y with Y = amplitude * Z_1."""
    _require_conformal(orbit)
    n = orbit.params.n
    coeff = amplitude * ((n - 2) / 2.0 * orbit.xi - orbit.xi_prime)
    return ExpansionTerm(mu=1.0, t_power=0,
                         coeff=_periodic_from_orbit(orbit, coeff),
                         mode=spheres.HarmonicMode(1, n))


def exact_translate(orbit: FowlerOrbit, a, t, theta):
    """xi_a evaluated through the orbit's dense interpolant.

    Defined for t > ln|a|; theta must be a unit vector.
    """
    _require_conformal(orbit)
    a = np.asarray(a, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if abs(np.linalg.norm(theta) - 1.0) > 1e-10:
        raise ValueError("theta must be a unit vector")
    amag = float(np.linalg.norm(a))
    s = float(a @ theta) / amag if amag > 0 else 0.0
    return translate_zonal(orbit, amag, t, s)


def translate_zonal(orbit: FowlerOrbit, amag: float, t, s):
    """xi_a as a function of t and the cosine s = <a/|a|, theta>."""
    _require_conformal(orbit)
    t = np.asarray(t, dtype=float)
    if amag > 0 and np.any(t <= np.log(amag)):
        raise ValueError("translate undefined for t <= ln|a|")
    n = orbit.params.n
    r = amag * np.exp(-t)
    w2 = 1.0 - 2.0 * r * s + r * r  # |theta - e^{-t} a|^2
    logw = 0.5 * np.log(w2)
    return w2 ** (-(n - 2) / 4.0) * orbit.value(t + logw)


def translate_expansion(orbit: FowlerOrbit, a, order: int):
    """Expansion terms of xi_a through the requested order (1 or 2).

    Order 1 returns the degree-1 kernel term; order 2 appends the degree-2
    and degree-0 parts of the quadratic terms.  All angular factors are
    zonal about a/|a| with the magnitude |a| folded into the coefficients.
    """
    _require_conformal(orbit)
    if order not in (1, 2):
        raise ValueError("only expansion orders 1 and 2 are defined")
    a = np.asarray(a, dtype=float)
    amag = float(np.linalg.norm(a))
    if amag == 0.0:
        return []
    n = orbit.params.n
    params = orbit.params
    terms = [first_order_term(orbit, amplitude=amag)]
    if order == 2:
        e = params.e
        a_coeff = -0.5 * params.c * orbit.xi**e          # multiplies Y^2
        b_coeff = -(n - 2) / 8.0 * orbit.xi + 0.25 * orbit.xi_prime
        c22 = amag**2 * (n - 1) * (a_coeff / n - 2.0 * b_coeff)
        c20 = amag**2 * a_coeff / n
        terms.append(ExpansionTerm(mu=2.0, t_power=0,
                                   coeff=_periodic_from_orbit(orbit, c22),
                                   mode=spheres.HarmonicMode(2, n)))
        terms.append(ExpansionTerm(mu=2.0, t_power=0,
                                   coeff=_periodic_from_orbit(orbit, c20),
                                   mode=spheres.HarmonicMode(0, n)))
    return terms


def evaluate_terms(terms, t, s):
    """Sum of term values on the (t, s) tensor grid."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.zeros((t.size, s.size))
    for term in terms:
        out += term.evaluate(t, s)
    return out


def xi2_term(orbit: FowlerOrbit, mode: spheres.HarmonicMode):
    """The second-order pair for a degree-1 harmonic Y = Z_1 (unit amplitude).

    Returns (degree-2 term, degree-0 term); their sum is the e^{-2t} part of
    the translate expansion with |a| = 1.  Intended for n >= 6 (where the
    quadratic value 2 stays below the next exponent); smaller n is allowed
    but flagged.
    """
    _require_conformal(orbit)
    if mode.degree != 1:
        raise ValueError("Y must be a degree-1 harmonic mode")
    if orbit.params.n < 6:
        warnings.warn("second-order pair requested for n < 6: the quadratic "
                      "term is not below the next kernel exponent",
                      stacklevel=2)
    terms = translate_expansion(orbit, spheres.HarmonicMode(1, orbit.params.n).unit_axis(), 2)
    return terms[1], terms[2]


def xi2_identity_defect(orbit: FowlerOrbit) -> float:
    """Sup-norm defect of the operator identity satisfied by the pair.

    Assembles L(xi_2) - F ((n-2)/2 xi - xi')^2 Y^2 e^{-2t} mode-by-mode (F
    the explicit prefactor) and returns the max over the orbit-period grid
    and a dense cosine grid.  Every t-derivative of the coefficients reduces
    through xi'' = q xi - c xi^e to an exact expression in (xi, xi'), so no
    numerical differentiation enters.
    """
    _require_conformal(orbit)
    n = orbit.params.n
    params = orbit.params
    t = orbit.t[:-1]
    xi, xip = orbit.xi[:-1], orbit.xi_prime[:-1]
    e, c, q = params.e, params.c, params.q

    xipp = q * xi - c * xi**e
    xippp = (q - e * c * xi ** (e - 1.0)) * xip

    # A = -(c/2) xi^e multiplies Y^2; B = -(n-2)/8 xi + xi'/4 multiplies
    # Delta_theta(Y^2); derivatives via the ODE
    a0 = -0.5 * c * xi**e
    a1 = -0.5 * c * e * xi ** (e - 1.0) * xip
    a2 = -0.5 * c * e * ((e - 1.0) * xi ** (e - 2.0) * xip**2
                         + xi ** (e - 1.0) * xipp)
    b0 = -(n - 2) / 8.0 * xi + 0.25 * xip
    b1 = -(n - 2) / 8.0 * xip + 0.25 * xipp
    b2 = -(n - 2) / 8.0 * xipp + 0.25 * xippp

    v0 = q - e * c * xi ** (e - 1.0)

    def conjugated(f0, f1, f2, lam):
        # e^{2t} L_lam (f e^{-2t}) for f with explicit derivatives
        return -f2 + 4.0 * f1 - 4.0 * f0 + (v0 + lam) * f0

    lam2 = spheres.eigenvalue(2, n)
    c2_part, c0_part = spheres.degree1_square_split(n)
    w = n - 1.0
    lc22 = w * (conjugated(a0, a1, a2, lam2) / n
                - 2.0 * conjugated(b0, b1, b2, lam2))
    lc20 = conjugated(a0, a1, a2, 0.0) / n

    p_plus = (n - 2) / 2.0 * xi - xip
    rhs = 2.0 * (n + 2) / (n - 2) ** 2 * c * xi ** ((6.0 - n) / (n - 2)) * p_plus**2
    defect2 = lc22 - c2_part * rhs
    defect0 = lc20 - c0_part * rhs

    s = np.linspace(-1.0, 1.0, 101)
    z2 = spheres.eval_zonal(spheres.HarmonicMode(2, n), s)
    field = (np.outer(defect2, z2) + defect0[:, None]) * np.exp(-2.0 * t)[:, None]
    return float(np.max(np.abs(field)))


def fourier_diff_matrix(num: int, period: float, order: int = 1) -> np.ndarray:
    """Dense spectral differentiation matrix on the uniform grid over [0, T)."""
    k = np.fft.fftfreq(num, d=period / num) * 2.0 * np.pi
    mult = (1j * k) ** order
    if order % 2 == 1 and num % 2 == 0:
        mult[num // 2] = 0.0  # odd derivative of the Nyquist mode
    return np.real(np.fft.ifft(mult[:, None] * np.fft.fft(np.eye(num), axis=0), axis=0))


@dataclass
class ResonantSolution:
    """Particular solution e^{-mu t} sum_j t^j r_j(t) with periodic r_j."""

    mu: float
    coefficients: list      # PeriodicFunction per power j = 0..max_power
    max_power: int
    resonant: bool
    residual: float
    oscillatory: bool = False

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        acc = np.zeros_like(t)
        for j, r in enumerate(self.coefficients):
            acc = acc + r(t) * t**j
        return acc * np.exp(-self.mu * t)


def _as_node_values(a_coeff, nodes, period):
    if isinstance(a_coeff, PeriodicFunction):
        return a_coeff(nodes)
    if callable(a_coeff):
        return np.asarray(a_coeff(nodes), dtype=float)
    arr = np.asarray(a_coeff, dtype=float)
    if arr.shape == nodes.shape:
        return arr
    return PeriodicFunction(arr, period)(nodes)


def solve_resonant_mode(a_coeff, mu: float, op: floquet.ModeOperator,
                        t_power: int = 0, num: int = COLLOCATION_SIZE,
                        resonance_tol: float = RESONANCE_TOL) -> ResonantSolution:
    """Solve L_i(e^{-mu t} sum t^j r_j) = a(t) t^m e^{-mu t} with periodic r_j.

    Off resonance the powers run to m; at resonance (mu equal to the mode's
    hyperbolic exponent within `resonance_tol`) to m + 1, with the top
    coefficient a kernel-factor multiple fixed by solvability and the j = 0
    coefficient gauged to zero projection onto the kernel factor.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    orbit = op.orbit
    T = orbit.period
    nodes = np.arange(num) * (T / num)
    a_nodes = _as_node_values(a_coeff, nodes, T)

    datum = floquet.mode_datum(orbit, 0, op.lam, 0, with_factors=True)
    resonant = datum.type == floquet.TYPE_III and abs(mu - datum.sigma) <= resonance_tol
    oscillatory = datum.type != floquet.TYPE_III

    d1 = fourier_diff_matrix(num, T, 1)
    d2 = fourier_diff_matrix(num, T, 2)
    v_nodes = op.potential(nodes)
    a_mat = -d2 + 2.0 * mu * d1 + np.diag(v_nodes - mu * mu)

    def cascade_rhs(k, r_next, r_next2):
        rhs = a_nodes if k == t_power else np.zeros(num)
        if r_next is not None:
            rhs = rhs - (k + 1) * (-2.0 * (d1 @ r_next) + 2.0 * mu * r_next)
        if r_next2 is not None:
            rhs = rhs + (k + 1) * (k + 2) * r_next2
        return rhs

    if not resonant:
        rs = [None] * (t_power + 1)
        if oscillatory and np.linalg.cond(a_mat) > 1e12:
            solve = lambda b: np.linalg.lstsq(a_mat, b, rcond=None)[0]
        else:
            solve = lambda b: np.linalg.solve(a_mat, b)
        for k in range(t_power, -1, -1):
            r_next = rs[k + 1] if k + 1 <= t_power else None
            r_next2 = rs[k + 2] if k + 2 <= t_power else None
            rs[k] = solve(cascade_rhs(k, r_next, r_next2))
        max_power = t_power
    else:
        # powers run to J = m + 1; the top coefficient is a pure kernel-factor
        # multiple, each lower gamma is fixed by solvability one level down,
        # and the j = 0 coefficient gets the zero-kernel-projection gauge.
        max_power = t_power + 1
        qk = datum.q_plus(nodes)
        qk = qk / np.linalg.norm(qk)
        gvec = -2.0 * (d1 @ qk) + 2.0 * mu * qk
        u_svd, _, _ = np.linalg.svd(a_mat)
        w_null = u_svd[:, -1]
        denom = float(w_null @ gvec)
        if abs(denom) < 1e-10:
            raise RuntimeError("degenerate solvability pairing in resonant solve")
        rs = [None] * (max_power + 1)
        rs[max_power] = np.zeros(num)  # kernel part filled in below
        for k in range(max_power - 1, -1, -1):
            r_next2 = rs[k + 2] if k + 2 <= max_power else None
            base = cascade_rhs(k, rs[k + 1], r_next2)
            gamma = float(w_null @ base) / ((k + 1) * denom)
            rs[k + 1] = rs[k + 1] + gamma * qk
            rhs = base - gamma * (k + 1) * gvec
            sol = np.linalg.lstsq(a_mat, rhs, rcond=None)[0]
            rs[k] = sol - (qk @ sol) * qk  # deterministic gauge

    # residual of the assembled ansatz, per power of t
    scale = max(1.0, float(np.max(np.abs(a_nodes))))
    res = 0.0
    full = rs + [np.zeros(num), np.zeros(num)]
    for k in range(max_power + 1):
        target = a_nodes if k == t_power else np.zeros(num)
        lhs = a_mat @ full[k]
        if k + 1 <= max_power:
            lhs = lhs + (k + 1) * (-2.0 * (d1 @ full[k + 1]) + 2.0 * mu * full[k + 1])
        if k + 2 <= max_power:
            lhs = lhs - (k + 1) * (k + 2) * full[k + 2]
        res = max(res, float(np.max(np.abs(lhs - target))))
    res /= scale
    if res > RESIDUAL_LIMIT:
        raise RuntimeError(f"resonant-mode solve residual {res:.3e} exceeds "
                           f"{RESIDUAL_LIMIT:g}")
    coeffs = [PeriodicFunction(r, T) for r in rs[:max_power + 1]]
    return ResonantSolution(mu=mu, coefficients=coeffs, max_power=max_power,
                            resonant=resonant, residual=res,
                            oscillatory=oscillatory)
