"""Mode-truncated solver for the half-cylinder equations.

Fields live on a uniform t-grid times a zonal harmonic basis; theta enters
only through s = <axis, theta>.  The nonlinear operators

    M(f) = -f_tt - Delta_theta f + q f - K f^e        (conformal, e = (n+2)/(n-2))
    N(f) = -f_tt - Delta_theta f + q f - f^{p-1}       (CKN)

are evaluated with 4th-order finite differences in t (biased stencils on the
outermost two rows) and pseudo-spectral handling of the fractional power:
pointwise on a Gauss-Jacobi cosine grid, then projected back onto the
retained modes.

The per-mode linear inverse realizes the bounded right inverse of
L_i = -d^2/dt^2 + V_i(t) on decaying functions through the variation-of-
parameters representation with Floquet-adapted kernel pairs.  For a mode with
hyperbolic exponent sigma and target decay rate nu:

    sigma > nu:  phi = [psi-  int_{t0}^t psi+ f  +  psi+ int_t^T psi- f] / W
    sigma < nu:  phi = [psi+  int_t^T  psi- f  -  psi-  int_t^T psi+ f] / W

(psi-/psi+ the decaying/growing kernel elements).  The first is the
exponential-dichotomy Green kernel, bounded by e^{-sigma|t-s|}; the second is
the unique representation decaying at the faster rate nu.  Truncated upper
tails are restored by one-period extrapolation: the integrands reproduce
themselves under t -> t + T_orbit up to the factor e^{+-sigma T} e^{-nu T},
so the missing integral is a geometric sum of the last computed period.
Mode 0 (no dichotomy) uses the same from-the-right representation with a
fundamental pair integrated across the window and a 2x2 quasi-periodicity
relation for the tails.  All cumulative integrals are sums of per-interval
4-point (O(h^4)) quadratures taken in the direction that keeps every partial
sum dominated by its leading term, so no exponential cancellation occurs.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from . import floquet, spheres
from .fowler import FowlerOrbit, IntegrationError

DEFAULT_H = 1.0 / 64.0
DEFAULT_WINDOW = 12.0
DEFAULT_T0 = 5.0
RESONANCE_GAP = 1e-6
QUADRATURE_OVERSAMPLE = 64
UNDERFLOW_FLOOR = 1e-14


class PositivityError(ValueError):
    """A field that must stay positive touched zero on the grid."""


class ResonanceError(ValueError):
    """Requested decay rate collides with a Floquet exponent."""


class ConstructionError(RuntimeError):
    """The fixed-point iteration failed to contract."""


# ---------------------------------------------------------------------------
# grids, fields, forcing profiles
# ---------------------------------------------------------------------------

def make_grid(t0: float = DEFAULT_T0, window: float = DEFAULT_WINDOW,
              h: float = DEFAULT_H) -> np.ndarray:
    """Uniform grid on [t0, t0 + window] with spacing (window rounded to h)."""
    num = int(round(window / h))
    if num < 8:
        raise ValueError("window too short for the stencil width")
    return t0 + h * np.arange(num + 1)


@dataclass
class CylinderField:
    """Zonal-mode coefficients on a uniform t-grid."""

    t: np.ndarray
    modes: tuple
    coeffs: np.ndarray  # shape (len(modes), len(t))
    params: object = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coeffs = np.atleast_2d(np.asarray(self.coeffs, dtype=float))
        if self.coeffs.shape != (len(self.modes), self.t.size):
            raise ValueError("coefficient array shape mismatch")

    @property
    def h(self) -> float:
        return float(self.t[1] - self.t[0])

    def evaluate(self, s) -> np.ndarray:
        """Values on the (t, s) tensor grid."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        basis = np.array([spheres.eval_zonal(m, s) for m in self.modes])
        return self.coeffs.T @ basis

    def sup_theta(self, num: int = 201) -> np.ndarray:
        """sup over theta of |field| per grid time (dense cosine sampling)."""
        s = np.linspace(-1.0, 1.0, num)
        return np.max(np.abs(self.evaluate(s)), axis=1)

    def weighted_norm(self, rate: float) -> float:
        """Discrete analogue of the exponentially weighted sup norm."""
        return float(np.max(np.exp(rate * self.t) * self.sup_theta()))

    def mode_coefficient(self, degree: int) -> np.ndarray:
        for m, c in zip(self.modes, self.coeffs):
            if m.degree == degree:
                return c
        raise KeyError(f"no retained mode of degree {degree}")

    def combination(self, other: "CylinderField", alpha: float, beta_: float):
        return replace(self, coeffs=alpha * self.coeffs + beta_ * other.coeffs,
                       meta={})

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"] + [f"degree_{m.degree}" for m in self.modes])
            for i, tv in enumerate(self.t):
                writer.writerow([repr(float(tv))]
                                + [repr(float(c[i])) for c in self.coeffs])


@dataclass(frozen=True)
class ForcingProfile:
    """K(t, theta) = k0 (1 + sum_j kappa_j e^{-beta_j t} Z_{k_j}(<axis, theta>))."""

    k0: float
    components: tuple = ()  # (degree, kappa, beta) triples

    def __post_init__(self):
        if self.k0 <= 0:
            raise ValueError("K(0) must be positive")
        for deg, kappa, beta_ in self.components:
            # flatness order at least 1; equality admits the resonant case
            # beta = sigma_1 = 1
            if beta_ < 1.0 - 1e-12:
                raise ValueError("forcing rates must be at least 1 "
                                 "(flatness order)")
            if deg < 0:
                raise ValueError("harmonic degree must be nonnegative")

    @property
    def is_flat(self) -> bool:
        return len(self.components) == 0 or all(k == 0 for _, k, _ in self.components)

    @property
    def min_rate(self) -> float:
        active = [b for _, k, b in self.components if k != 0.0]
        return min(active) if active else math.inf

    def deviation(self, t, s, n: int) -> np.ndarray:
        """K - K(0) on the (t, s) tensor grid, formed without cancellation."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.zeros((t.size, s.size))
        for deg, kappa, beta_ in self.components:
            if kappa == 0.0:
                continue
            z = spheres.eval_zonal(spheres.HarmonicMode(deg, n), s)
            out += kappa * np.outer(np.exp(-beta_ * t), z)
        return self.k0 * out

    def evaluate(self, t, s, n: int) -> np.ndarray:
        out = self.k0 + self.deviation(t, s, n)
        if np.min(out) <= 0:
            raise PositivityError("forcing profile K is not positive on the grid")
        return out


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def _fd_weights(offsets, order: int) -> np.ndarray:
    """Stencil weights for the `order`-th derivative on integer offsets."""
    offsets = np.asarray(offsets, dtype=float)
    a = np.vander(offsets, increasing=True).T
    b = np.zeros(offsets.size)
    b[order] = math.factorial(order)
    return np.linalg.solve(a, b)


_D2_INTERIOR = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_D2_EDGE0 = _fd_weights(range(6), 2)
_D2_EDGE1 = _fd_weights(range(-1, 5), 2)


def second_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """4th-order second derivative; biased stencils on the outer two rows."""
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    if n < 6:
        raise ValueError("need at least 6 grid points")
    out = np.empty_like(values)
    out[..., 2:-2] = sum(w * values[..., i:n - 4 + i]
                         for i, w in enumerate(_D2_INTERIOR))
    out[..., 0] = values[..., :6] @ _D2_EDGE0
    out[..., 1] = values[..., :6] @ _D2_EDGE1
    out[..., -1] = values[..., -6:] @ _D2_EDGE0[::-1]
    out[..., -2] = values[..., -6:] @ _D2_EDGE1[::-1]
    return out / (h * h)


def apply_mode_operator(potential: np.ndarray, values: np.ndarray,
                        h: float) -> np.ndarray:
    """Discrete L_i phi = -phi'' + V phi on the window grid."""
    return -second_derivative(values, h) + potential * values


# ---------------------------------------------------------------------------
# zonal projection of pointwise nonlinearities
# ---------------------------------------------------------------------------

class ZonalProjector:
    """Project pointwise (t, s) data onto retained zonal modes by quadrature."""

    def __init__(self, n: int, modes, num: int = QUADRATURE_OVERSAMPLE):
        self.n = n
        self.modes = tuple(modes)
        self.s, self.w = spheres.quadrature(n, num)
        self.basis = np.array([spheres.eval_zonal(m, self.s) for m in self.modes])
        self.norms = self.basis**2 @ self.w

    def project(self, values: np.ndarray) -> np.ndarray:
        """(nt, ns) pointwise values -> (nmodes, nt) coefficients."""
        return (self.basis * self.w) @ values.T / self.norms[:, None]


def _field_values(field: CylinderField, proj: ZonalProjector) -> np.ndarray:
    basis = proj.basis if field.modes == proj.modes else np.array(
        [spheres.eval_zonal(m, proj.s) for m in field.modes])
    return field.coeffs.T @ basis


# ---------------------------------------------------------------------------
# nonlinear residual operators
# ---------------------------------------------------------------------------

def _residual(field: CylinderField, k_eval) -> CylinderField:
    params = field.params
    if params is None:
        raise ValueError("field carries no problem parameters")
    proj = ZonalProjector(params.n, field.modes)
    vals = _field_values(field, proj)
    if np.min(vals) <= 0:
        raise PositivityError("field must be strictly positive on the grid "
                              "(fractional power undefined)")
    nonlin = k_eval(field.t, proj.s) * vals ** params.e
    nl_coeffs = proj.project(nonlin)
    lin = np.empty_like(field.coeffs)
    h = field.h
    for i, m in enumerate(field.modes):
        lam = float(m.eigenvalue)
        lin[i] = (-second_derivative(field.coeffs[i], h)
                  + (lam + params.q) * field.coeffs[i])
    out = lin - nl_coeffs
    return CylinderField(t=field.t, modes=field.modes, coeffs=out,
                         params=params,
                         meta={"one_sided_rows": [0, 1, field.t.size - 2,
                                                  field.t.size - 1]})


def residual_M(field: CylinderField, profile: ForcingProfile) -> CylinderField:
    """Conformal residual -f_tt - Delta_theta f + q f - K f^{(n+2)/(n-2)}."""
    if field.params.kind != "conformal":
        raise ValueError("residual_M requires conformal parameters")
    n = field.params.n
    return _residual(field, lambda t, s: profile.evaluate(t, s, n))


def residual_N(field: CylinderField) -> CylinderField:
    """CKN residual -f_tt - Delta_theta f + q f - f^{p-1}."""
    if field.params.kind != "ckn":
        raise ValueError("residual_N requires CKN parameters")
    return _residual(field, lambda t, s: 1.0)


def orbit_field(orbit: FowlerOrbit, tgrid, max_degree: int = 2) -> CylinderField:
    """The orbit lifted to the cylinder window (all content in mode 0)."""
    modes = tuple(spheres.HarmonicMode(k, orbit.params.n)
                  for k in range(max_degree + 1))
    coeffs = np.zeros((len(modes), len(tgrid)))
    coeffs[0] = orbit.value(tgrid)
    return CylinderField(t=np.asarray(tgrid, dtype=float), modes=modes,
                         coeffs=coeffs, params=orbit.params)


# ---------------------------------------------------------------------------
# per-interval quadrature and directional cumulatives
# ---------------------------------------------------------------------------

def _quadrature_weights(offsets, a: float, b: float) -> np.ndarray:
    """Weights w with sum w_i y(offset_i) = int_a^b y (exact for degree < len)."""
    offsets = np.asarray(offsets, dtype=float)
    vander = np.vander(offsets, increasing=True).T
    k = np.arange(offsets.size) + 1.0
    moments = (b**k - a**k) / k
    return np.linalg.solve(vander, moments)


# integral over one unit interval from 6 surrounding points (O(h^6) locally);
# the per-interval locality keeps directional cumulative sums free of
# exponential cancellation
_INT_CENTER = _quadrature_weights(range(-2, 4), 0.0, 1.0)   # interval [0, 1]
_INT_LEFT0 = _quadrature_weights(range(0, 6), 0.0, 1.0)     # first interval
_INT_LEFT1 = _quadrature_weights(range(-1, 5), 0.0, 1.0)    # second interval
_INT_RIGHT1 = _quadrature_weights(range(-3, 3), 0.0, 1.0)   # second to last
_INT_RIGHT0 = _quadrature_weights(range(-4, 2), 0.0, 1.0)   # last interval


def _interval_increments(y: np.ndarray, h: float) -> np.ndarray:
    """Integral over each grid interval via local quintic interpolation."""
    n = y.size
    inc = np.empty(n - 1)
    if n >= 8:
        windows = np.lib.stride_tricks.sliding_window_view(y, 6)
        # window starting at j - 2 integrates interval j, j = 2 .. n - 4
        inc[2:n - 3] = windows[:n - 5] @ _INT_CENTER
        inc[0] = _INT_LEFT0 @ y[:6]
        inc[1] = _INT_LEFT1 @ y[:6]
        inc[n - 3] = _INT_RIGHT1 @ y[-6:]
        inc[n - 2] = _INT_RIGHT0 @ y[-6:]
    else:
        inc[:] = 0.5 * (y[:-1] + y[1:])
    return inc * h


def _cum_from_left(y: np.ndarray, h: float) -> np.ndarray:
    inc = _interval_increments(y, h)
    return np.concatenate([[0.0], np.cumsum(inc)])


def _cum_from_right(y: np.ndarray, h: float) -> np.ndarray:
    inc = _interval_increments(y, h)
    return np.concatenate([np.cumsum(inc[::-1])[::-1], [0.0]])


def _last_period_integral(t, y, period):
    """int_{T-P}^{T} y dt from the window samples."""
    spline = CubicSpline(t, y)
    return float(spline.integrate(t[-1] - period, t[-1]))


# ---------------------------------------------------------------------------
# the per-mode bounded inverse
# ---------------------------------------------------------------------------

class ModeSolveContext:
    """Kernel data of one mode operator on a window, reused across solves."""

    def __init__(self, orbit: FowlerOrbit, lam: float, tgrid):
        self.orbit = orbit
        self.lam = float(lam)
        self.t = np.asarray(tgrid, dtype=float)
        self.h = float(self.t[1] - self.t[0])
        if orbit.period > self.t[-1] - self.t[0]:
            raise ValueError("window must cover at least one orbit period")
        self.op = floquet.ModeOperator(orbit, self.lam)
        self.potential = self.op.potential(self.t)
        self.datum = floquet.mode_datum(orbit, 0, self.lam, 0, with_factors=True)
        if self.datum.type == floquet.TYPE_III:
            self._setup_hyperbolic()
        else:
            self._setup_fundamental_pair()

    def _setup_hyperbolic(self):
        d = self.datum
        t, t0 = self.t, self.t[0]
        self.sigma = d.sigma
        self.qp = d.q_plus(t)
        self.qm = d.q_minus(t)
        self.qp_d = d.q_plus.derivative(t)
        self.qm_d = d.q_minus.derivative(t)
        # Wronskian of (q+ e^{-sigma(t-t0)}, q- e^{+sigma(t-t0)}) at t0
        self.wronskian = (self.qp[0] * (self.qm_d[0] + self.sigma * self.qm[0])
                          - (self.qp_d[0] - self.sigma * self.qp[0]) * self.qm[0])
        if abs(self.wronskian) < 1e-10:
            raise IntegrationError("degenerate Floquet kernel pair")

    def _setup_fundamental_pair(self):
        t, t0 = self.t, self.t[0]

        def rhs(s, y):
            v = self.op.potential(s)
            return [y[2], y[3], v * y[0], v * y[1]]

        sol = solve_ivp(rhs, (t0, t[-1]), [1.0, 0.0, 0.0, 1.0],
                        method="DOP853", rtol=1e-12, atol=1e-14,
                        dense_output=True)
        if not sol.success:
            raise IntegrationError("fundamental pair integration failed")
        vals = sol.sol(t)
        self.u = vals[0:2]       # u1, u2 values
        self.u_d = vals[2:4]
        # quasi-periodicity: u_j(s + P) = sum_k M[k, j] u_k(s)
        at = sol.sol(t0 + self.orbit.period)
        self.shift = np.array([[at[0], at[1]], [at[2], at[3]]])
        self.wronskian = 1.0

    # -- tail extrapolation -------------------------------------------------

    def _geometric_tail(self, integrand, log_ratio):
        """Missing int_T^inf of a self-similar integrand, via the last period."""
        if log_ratio >= -1e-9:
            raise ResonanceError("tail ratio not contracting; rate collides "
                                 "with the kernel exponent")
        r = math.exp(log_ratio)
        j = _last_period_integral(self.t, integrand, self.orbit.period)
        return r * j / (1.0 - r)

    def solve(self, rhs, nu: float, return_info: bool = False):
        """phi with L phi = rhs, decaying at rate nu, on the window grid."""
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape != self.t.shape:
            raise ValueError("rhs must live on the context grid")
        period = self.orbit.period
        if self.datum.type == floquet.TYPE_III:
            sigma = self.sigma
            if abs(sigma - nu) < RESONANCE_GAP:
                raise ResonanceError(
                    f"decay rate {nu!r} within {RESONANCE_GAP:g} of the mode "
                    f"exponent {sigma!r}; use the t-power (resonant) path")
            t0 = self.t[0]
            grow = np.exp(self.sigma * (self.t - t0))
            decay = np.exp(-self.sigma * (self.t - t0))
            psi_m = self.qp * decay
            psi_p = self.qm * grow
            g_minus = psi_m * rhs / self.wronskian
            g_plus = psi_p * rhs / self.wronskian
            tail_m = self._geometric_tail(g_minus, -(sigma + nu) * period)
            if sigma > nu:
                phi = (psi_m * _cum_from_left(g_plus, self.h)
                       + psi_p * (_cum_from_right(g_minus, self.h) + tail_m))
            else:
                tail_p = self._geometric_tail(g_plus, (sigma - nu) * period)
                phi = (psi_p * (_cum_from_right(g_minus, self.h) + tail_m)
                       - psi_m * (_cum_from_right(g_plus, self.h) + tail_p))
        else:
            g1 = self.u[0] * rhs
            g2 = self.u[1] * rhs
            j = np.array([_last_period_integral(self.t, g1, period),
                          _last_period_integral(self.t, g2, period)])
            r = math.exp(-nu * period)
            tails = np.linalg.solve(np.eye(2) - r * self.shift.T,
                                    r * self.shift.T @ j)
            phi = (self.u[1] * (_cum_from_right(g1, self.h) + tails[0])
                   - self.u[0] * (_cum_from_right(g2, self.h) + tails[1]))
        if not return_info:
            return phi
        wn = np.exp(nu * self.t)
        rhs_norm = float(np.max(wn * np.abs(rhs)))
        phi_norm = float(np.max(wn * np.abs(phi)))
        info = {"bound_constant": phi_norm / rhs_norm if rhs_norm > 0 else 0.0,
                "type": self.datum.type, "sigma": self.datum.sigma}
        return phi, info


def _context_cache(orbit, lam, tgrid) -> ModeSolveContext:
    key = ("bvp", float(lam), float(tgrid[0]), float(tgrid[-1]), len(tgrid))
    ctx = orbit._cache.get(key)
    if ctx is None:
        ctx = ModeSolveContext(orbit, lam, tgrid)
        orbit._cache[key] = ctx
    return ctx


def check_rhs_decay(tgrid, rhs, beta: float):
    """Fitted-decay precondition check; warns when the rhs decays slower."""
    mag = np.abs(np.asarray(rhs, dtype=float))
    mask = mag > UNDERFLOW_FLOOR
    if mask.sum() < 8 or np.max(mag) < 1e-12:
        return None
    slope = -np.polyfit(tgrid[mask], np.log(mag[mask]), 1)[0]
    if slope < beta - 0.2:
        warnings.warn(f"rhs decays at fitted rate {slope:.3f} < requested "
                      f"{beta:.3f}", stacklevel=3)
    return slope


def inverse_L(op: floquet.ModeOperator, rhs, beta: float, tgrid,
              return_info: bool = False):
    """Bounded right inverse of a mode operator on the window grid.

    `beta` is the decay class of the rhs (checked by fit) and the rate at
    which the returned solution decays; it must stay 1e-6 away from the
    mode's hyperbolic exponent.
    """
    tgrid = np.asarray(tgrid, dtype=float)
    check_rhs_decay(tgrid, rhs, beta)
    ctx = _context_cache(op.orbit, op.lam, tgrid)
    return ctx.solve(np.asarray(rhs, dtype=float), beta,
                     return_info=return_info)


# ---------------------------------------------------------------------------
# decay-rate fitting
# ---------------------------------------------------------------------------

@dataclass
class FitResult:
    slope: float
    log_corrected: bool
    r2: float
    slope_plain: float
    slope_log: float
    r2_plain: float
    r2_log: float
    n_points: int
    window: tuple
    warning: str | None = None

    def to_dict(self):
        return {k: getattr(self, k) for k in
                ("slope", "log_corrected", "r2", "slope_plain", "slope_log",
                 "r2_plain", "r2_log", "n_points", "window", "warning")}


def decay_rate_fit(arg, t_window=None, floor: float = UNDERFLOW_FLOOR) -> FitResult:
    """Fit sup_theta |diff| ~ C e^{-gamma t} and ~ C t e^{-gamma t}.

    `arg` is either a CylinderField or a (t, values) pair.  Points below
    `floor` are dropped (window shrunk, with a warning recorded).  Both
    two-parameter models are fit to log values; the better r^2 decides
    whether the t-prefactor (log correction) is preferred.
    """
    if isinstance(arg, CylinderField):
        t, vals = arg.t, arg.sup_theta()
    else:
        t, vals = np.asarray(arg[0], dtype=float), np.asarray(arg[1], dtype=float)
    mask = np.isfinite(vals) & (vals > 0) & (t > 0)  # t-prefactor model needs t > 0
    if t_window is not None:
        mask &= (t >= t_window[0]) & (t <= t_window[1])
    warning = None
    if np.any(mask & (vals <= floor)):
        warning = f"window shrunk: values at/below the {floor:g} floor dropped"
        mask &= vals > floor
    if mask.sum() < 4:
        raise ValueError("not enough usable points for a decay fit")
    tt, yy = t[mask], np.log(vals[mask])

    def lsq(target):
        a = np.column_stack([np.ones_like(tt), -tt])
        coef, *_ = np.linalg.lstsq(a, target, rcond=None)
        pred = a @ coef
        return coef[1], pred

    sst = float(np.sum((yy - np.mean(yy)) ** 2))
    slope_plain, pred_plain = lsq(yy)
    slope_log, pred_log_base = lsq(yy - np.log(tt))
    pred_log = pred_log_base + np.log(tt)

    def r2(pred):
        sse = float(np.sum((yy - pred) ** 2))
        return 1.0 - sse / sst if sst > 0 else 1.0

    r2_plain, r2_log = r2(pred_plain), r2(pred_log)
    # prefer the t-prefactor model only on a meaningful residual reduction;
    # ln t is nearly affine on short windows, so hairline r^2 gains are noise
    log_corrected = (r2_log - r2_plain) > 0.05 * (1.0 - r2_plain)
    return FitResult(
        slope=slope_log if log_corrected else slope_plain,
        log_corrected=log_corrected,
        r2=max(r2_plain, r2_log),
        slope_plain=slope_plain, slope_log=slope_log,
        r2_plain=r2_plain, r2_log=r2_log,
        n_points=int(mask.sum()),
        window=(float(tt[0]), float(tt[-1])),
        warning=warning)


# ---------------------------------------------------------------------------
# contraction constructions
# ---------------------------------------------------------------------------

@dataclass
class IterationTrace:
    norms: list
    factors: list
    t0: float
    nu: float
    converged: bool
    iterations: int
    escalations: int

    def to_dict(self):
        return {"norms": self.norms, "factors": self.factors, "t0": self.t0,
                "nu": self.nu, "converged": self.converged,
                "iterations": self.iterations, "escalations": self.escalations}


def _power_remainder(exponent: float, base, delta):
    """(base + delta)^e - base^e - e base^{e-1} delta without cancellation.

    For |delta/base| below 1e-3 the quadratic Taylor remainder is evaluated
    by its series, keeping the result accurate relative to its own (tiny)
    size; the direct form would leave absolute roundoff of the O(1) terms.
    """
    x = delta / base
    c2 = exponent * (exponent - 1.0) / 2.0
    series = (base**exponent * c2 * x * x
              * (1.0 + (exponent - 2.0) * x / 3.0
                 + (exponent - 2.0) * (exponent - 3.0) * x * x / 12.0))
    direct = ((base + delta) ** exponent - base**exponent
              - exponent * base ** (exponent - 1.0) * delta)
    return np.where(np.abs(x) < 1e-3, series, direct)


def _pick_off_resonant_rate(beta: float, sigmas) -> float:
    """Working decay rate for the iteration norm.

    Off resonance this is beta itself; if beta collides with an exponent the
    iteration runs at a slightly smaller non-colliding rate (the t e^{-beta t}
    growth then emerges from the causal Green kernel automatically).
    """
    sigmas = sorted(set(round(s, 12) for s in sigmas))
    if all(abs(beta - s) > RESONANCE_GAP for s in sigmas):
        return beta
    below = [s for s in sigmas if s < beta - RESONANCE_GAP]
    lo = max(below) if below else beta / 2.0
    nu = (lo + beta) / 2.0
    if any(abs(nu - s) <= 1e-3 for s in sigmas):
        nu = lo + 0.7 * (beta - lo)
    return nu


def _iterate(orbit, tgrid, modes, proj, rhs_fn, nu, tol, max_iter):
    """Generic fixed-point loop phi <- L^{-1} rhs(phi), mode by mode.

    Stops on a relative update below tol, or once updates stagnate at the
    weighted-norm roundoff floor (the e^{nu t} weight amplifies right-end
    rounding, so arbitrarily small tolerances are not reachable); reports
    non-contraction only while updates are still far above that floor.
    """
    contexts = [_context_cache(orbit, float(m.eigenvalue), tgrid) for m in modes]
    phi = np.zeros((len(modes), len(tgrid)))
    wn = np.exp(nu * tgrid)

    def norm(arr):
        return float(np.max(wn * np.sum(np.abs(arr), axis=0)))

    norms, factors, diffs = [], [], []
    converged = False
    for it in range(max_iter):
        rhs_coeffs = rhs_fn(phi)
        new = np.array([ctx.solve(rhs_coeffs[i], nu)
                        for i, ctx in enumerate(contexts)])
        diff = norm(new - phi)
        norms.append(norm(new))
        if diffs and diffs[-1] > 0:
            factors.append(diff / diffs[-1])
        diffs.append(diff)
        phi = new
        scale = max(1.0, norms[-1])
        if diff <= tol * scale:
            converged = True
            break
        if (len(diffs) >= 3 and all(d < 1e-5 * scale for d in diffs[-3:])
                and diffs[-1] > 0.1 * diffs[-3]):
            converged = True  # stagnation at the rounding floor
            break
        if (len(factors) >= 2 and min(factors[-2:]) >= 1.0
                and diff > 1e-4 * scale):
            break
    return phi, norms, factors, converged, it + 1


def contraction_construct(orbit: FowlerOrbit, profile: ForcingProfile,
                          t0: float = DEFAULT_T0, window: float = DEFAULT_WINDOW,
                          max_degree: int = 2, tol: float = 1e-10,
                          max_iter: int = 60, h: float = DEFAULT_H):
    """Fixed-point construction of a solution v = xi + phi of the conformal
    cylinder equation with curvature profile K.

    Iterates phi <- L^{-1}[(K - K0)(xi + phi)^e + K0((xi + phi)^e - xi^e
    - e xi^{e-1} phi)] in the discrete weighted norm; if the measured
    contraction factor stays >= 1 the window start t0 doubles (up to 4
    times) before giving up.
    """
    params = orbit.params
    if params.kind != "conformal":
        raise ValueError("contraction_construct requires conformal provenance")
    n, e, k0 = params.n, params.e, params.c
    beta = profile.min_rate
    modes = tuple(spheres.HarmonicMode(k, n) for k in range(max_degree + 1))
    sigmas = [d.sigma for d in floquet.exponent_sequence(
        orbit, spheres.index_of_last_degree(n, max_degree) + 1)]
    nu = beta if profile.is_flat else _pick_off_resonant_rate(beta, sigmas)
    if profile.is_flat:
        nu = 2.0  # arbitrary finite rate; the fixed point is phi = 0

    escalations = 0
    while True:
        tgrid = make_grid(t0, window, h)
        proj = ZonalProjector(n, modes)
        xi_t = orbit.value(tgrid)
        profile.evaluate(tgrid, proj.s, n)  # positivity check of K itself
        k_dev = profile.deviation(tgrid, proj.s, n)

        def rhs_fn(phi_coeffs):
            # (K - K0)(xi + phi)^e + K0 [(xi + phi)^e - xi^e - e xi^{e-1} phi],
            # each group formed without cancellation so the projected rhs is
            # accurate relative to its own exponentially small size
            phi_vals = phi_coeffs.T @ proj.basis
            vals = xi_t[:, None] + phi_vals
            if np.min(vals) <= 0:
                raise PositivityError("iterate lost positivity")
            pointwise = (k_dev * vals**e
                         + k0 * _power_remainder(e, xi_t[:, None], phi_vals))
            return proj.project(pointwise)

        phi, norms, factors, converged, iters = _iterate(
            orbit, tgrid, modes, proj, rhs_fn, nu, tol, max_iter)
        if converged or profile.is_flat:
            break
        if escalations >= 4:
            raise ConstructionError(
                f"no contraction after {escalations} window shifts; measured "
                f"factors {factors[-3:]}")
        t0 *= 2.0
        escalations += 1

    coeffs = phi.copy()
    coeffs[0] += orbit.value(tgrid)
    v = CylinderField(t=tgrid, modes=modes, coeffs=coeffs, params=params)
    if np.min(v.evaluate(np.linspace(-1, 1, 101))) <= 0:
        raise PositivityError("constructed field is not positive")
    trace = IterationTrace(norms=norms, factors=factors, t0=t0, nu=nu,
                           converged=converged, iterations=iters,
                           escalations=escalations)
    return v, trace


def ckn_construct(orbit: FowlerOrbit, nu: float, amplitude: float = 0.05,
                  degree: int = 1, t0: float = DEFAULT_T0,
                  window: float = DEFAULT_WINDOW, max_degree: int = 2,
                  tol: float = 1e-10, max_iter: int = 60, h: float = DEFAULT_H,
                  index_tol: float = RESONANCE_GAP):
    """Fixed-point solution w of the CKN cylinder equation near the approximate
    solution w_hat = zeta + amplitude e^{-nu t} Z_degree.

    Requires nu > sigma_1 and nu outside the exponent index set (checked up
    to the cutoff nu + 1).  Returns (w field, w_hat field, trace).
    """
    from . import index_set as iset_mod

    params = orbit.params
    if params.kind != "ckn":
        raise ValueError("ckn_construct requires CKN provenance")
    n, p = params.n, params.p
    count = spheres.index_of_last_degree(n, max_degree + 2) + 1
    data = floquet.exponent_sequence(orbit, count)
    sigmas = [d.sigma for d in data]
    degrees = [d.degree for d in data]
    if nu <= sigmas[0]:
        raise ValueError(f"nu must exceed sigma_1 = {sigmas[0]:.6g}")
    iset = iset_mod.generate(sigmas, max(nu + 1.0, sigmas[0] * 2 + 0.5),
                             tol=index_tol, degrees=degrees)
    if np.any(np.abs(iset.values - nu) <= index_tol * 100):
        raise ResonanceError(f"nu = {nu!r} lies in the exponent index set")

    modes = tuple(spheres.HarmonicMode(k, n) for k in range(max_degree + 1))
    escalations = 0
    while True:
        tgrid = make_grid(t0, window, h)
        proj = ZonalProjector(n, modes)
        zeta_t = orbit.value(tgrid)
        z_pert = spheres.eval_zonal(spheres.HarmonicMode(degree, n), proj.s)
        pert = amplitude * np.outer(np.exp(-nu * tgrid), z_pert)
        what_vals = zeta_t[:, None] + pert
        if np.min(what_vals) <= 0:
            raise PositivityError("approximate solution w_hat not positive")
        lam_pert = float(spheres.eigenvalue(degree, n))
        # N(w_hat) analytically: the zeta part solves the ODE and the
        # perturbation is an explicit exponential times a harmonic, so
        #   N(w_hat) = (lam + q - nu^2) pert - [w_hat^{p-1} - zeta^{p-1}],
        # with the power difference taken through expm1 for stability
        rel = pert / zeta_t[:, None]
        power_jump = (zeta_t ** (p - 1.0))[:, None] * np.expm1(
            (p - 1.0) * np.log1p(rel))
        n_what = (lam_pert + params.q - nu * nu) * pert - power_jump
        # (p-1)(w_hat^{p-2} - zeta^{p-2}), the linearization-offset factor
        lin_offset = (p - 1.0) * (zeta_t ** (p - 2.0))[:, None] * np.expm1(
            (p - 2.0) * np.log1p(rel))

        def rhs_fn(phi_coeffs):
            # -N(w_hat) + (w_hat+phi)^{p-1} - w_hat^{p-1} - (p-1) zeta^{p-2} phi
            phi_vals = phi_coeffs.T @ proj.basis
            wv = what_vals + phi_vals
            if np.min(wv) <= 0:
                raise PositivityError("iterate lost positivity")
            pointwise = (-n_what
                         + _power_remainder(p - 1.0, what_vals, phi_vals)
                         + lin_offset * phi_vals)
            return proj.project(pointwise)

        phi, norms, factors, converged, iters = _iterate(
            orbit, tgrid, modes, proj, rhs_fn, nu, tol, max_iter)
        if converged:
            break
        if escalations >= 4:
            raise ConstructionError(
                f"no contraction after {escalations} window shifts; measured "
                f"factors {factors[-3:]}")
        t0 *= 2.0
        escalations += 1

    what_coeffs = np.zeros((len(modes), len(tgrid)))
    what_coeffs[0] = zeta_t
    what_coeffs[[m.degree for m in modes].index(degree)] += \
        amplitude * np.exp(-nu * tgrid)
    w_hat = CylinderField(t=tgrid, modes=modes, coeffs=what_coeffs, params=params)
    w = CylinderField(t=tgrid, modes=modes, coeffs=what_coeffs + phi,
                      params=params)
    trace = IterationTrace(norms=norms, factors=factors, t0=t0, nu=nu,
                           converged=converged, iterations=iters,
                           escalations=escalations)
    return w, w_hat, trace


def fit_kernel_amplitude(field_diff: CylinderField, orbit: FowlerOrbit,
                         tail_periods: float = 2.0) -> float:
    """Amplitude of the first-order kernel term in a difference field.

    The degree-1 coefficient is regressed on e^{-t}((n-2)/2 xi - xi') over
    the trailing `tail_periods` orbit periods only: the kernel branch decays
    slowest, so genuine kernel content dominates the tail while any
    faster-decaying response contributes an exponentially small bias there.
    """
    n = orbit.params.n
    t = field_diff.t
    mask = t >= t[-1] - tail_periods * orbit.period
    c1 = field_diff.mode_coefficient(1)[mask]
    basis = np.exp(-t[mask]) * ((n - 2) / 2.0 * orbit.value(t[mask])
                                - orbit.derivative(t[mask]))
    denom = float(basis @ basis)
    return float(basis @ c1) / denom if denom > 0 else 0.0


# ---------------------------------------------------------------------------
# the dimension-4 pointwise example
# ---------------------------------------------------------------------------

def _example_u(x):
    """|x|^{-1} (1 + (x1+..+x4)(1 - ln|x|)/16) in dimension 4."""
    r = np.linalg.norm(x)
    s = float(np.sum(x))
    return (1.0 + s * (1.0 - math.log(r)) / 16.0) / r


def _example_k(x):
    r = np.linalg.norm(x)
    if r == 0.0:
        return 1.0
    s = float(np.sum(x))
    g = 1.0 + s * (1.0 - math.log(r)) / 16.0
    return (1.0 + 3.0 * s * (1.0 - math.log(r)) / 16.0 + s / 8.0) / g**3


_D2_CENTRAL = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


def _fd_laplacian(func, x, h):
    acc = 0.0
    for axis in range(x.size):
        vals = []
        for k in (-2, -1, 0, 1, 2):
            y = x.copy()
            y[axis] += k * h
            vals.append(func(y))
        acc += float(_D2_CENTRAL @ vals) / (h * h)
    return acc


def gradient_at_origin_estimate(radii=None):
    """Componentwise one-sided estimate of grad K at 0.

    The difference quotient carries t ln^2 t corrections; a least-squares fit
    against the matching slowly-varying basis extrapolates them away.
    """
    if radii is None:
        radii = np.geomspace(1e-2, 1e-5, 8)
    out = np.empty(4)
    for axis in range(4):
        g = []
        for r in radii:
            x = np.zeros(4)
            x[axis] = r
            g.append((_example_k(x) - 1.0) / r)
        l_ = np.log(radii)
        design = np.column_stack([
            np.ones_like(radii),
            radii * (1.0 - l_),
            radii * (1.0 - l_) ** 2,
            radii**2 * (1.0 - l_) ** 3,
            radii**2 * (1.0 - l_) ** 4,
        ])
        coef, *_ = np.linalg.lstsq(design, np.array(g), rcond=None)
        out[axis] = coef[0]
    return out


def remark_example_check(num_points: int = 24, h: float = 0.02,
                         seed: int = 20240801) -> dict:
    """Pointwise self-check of the explicit dimension-4 singular pair (u, K).

    Evaluates |-Delta u - K u^3| with the 4th-order stencil at sample points
    away from the origin at steps h and h/2; the residual ratio must sit near
    2^4 = 16.  Also extrapolates grad K(0).
    """
    rng = np.random.default_rng(seed)
    points = []
    while len(points) < num_points:
        x = rng.normal(size=4)
        x *= rng.uniform(0.3, 0.7) / np.linalg.norm(x)
        if np.linalg.norm(x) > 10.0 * h:
            points.append(x)

    def residual(step):
        worst = 0.0
        for x in points:
            lap = _fd_laplacian(_example_u, x, step)
            worst = max(worst, abs(-lap - _example_k(x) * _example_u(x) ** 3))
        return worst

    res_h = residual(h)
    res_h2 = residual(h / 2.0)
    grad = gradient_at_origin_estimate()
    return {
        "h": h,
        "residual_h": res_h,
        "residual_h_over_2": res_h2,
        "refinement_ratio": res_h / res_h2 if res_h2 > 0 else math.inf,
        "grad_k_origin": grad.tolist(),
        "grad_k_error": float(np.max(np.abs(grad - 0.125))),
        "num_points": len(points),
    }
