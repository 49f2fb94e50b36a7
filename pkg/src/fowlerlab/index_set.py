"""Index sets of Floquet exponents: all finite sums sum_i n_i rho_i <= cutoff.

The set splits into the singles (one n_i = 1, rest zero) and the multi-sums
(total count >= 2); a value realizable both ways is resonant and forces a
t-power in the matching expansion coefficient.  Exponents carrying numerical
error make the exact-arithmetic dichotomy "resonant or not" a tolerance
decision, so the tolerance is explicit everywhere and near-coincidences just
outside it are reported as warnings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import spheres

DEFAULT_TOL = 1e-8
NEAR_RESONANCE_FACTOR = 100.0


@dataclass(frozen=True)
class BaseExponent:
    """A distinct exponent value with its multiplicity and largest degree."""

    value: float
    multiplicity: int
    degree: int  # largest harmonic degree among the collapsed entries


@dataclass
class IndexSet:
    base: list            # distinct BaseExponent, increasing
    cutoff: float
    tol: float
    values: np.ndarray    # strictly increasing distinct sums <= cutoff
    combos: list          # per value: list of count-vectors over base
    single: np.ndarray    # bool: achievable with total count 1
    multi: np.ndarray     # bool: achievable with total count >= 2
    warnings: list = field(default_factory=list)

    @property
    def resonant(self) -> np.ndarray:
        return self.single & self.multi

    def to_dict(self) -> dict:
        return {
            "base": [{"value": b.value, "multiplicity": b.multiplicity,
                      "degree": b.degree} for b in self.base],
            "cutoff": self.cutoff,
            "tol": self.tol,
            "values": self.values.tolist(),
            "combos": [[list(map(int, c)) for c in cs] for cs in self.combos],
            "single": self.single.tolist(),
            "multi": self.multi.tolist(),
            "resonant": self.resonant.tolist(),
            "warnings": list(self.warnings),
        }


def _collapse(rho, degrees, tol):
    order = np.argsort(rho)
    base = []
    for idx in order:
        v, d = float(rho[idx]), int(degrees[idx])
        if base and abs(v - base[-1][0]) <= tol:
            base[-1][1] += 1
            base[-1][2] = max(base[-1][2], d)
        else:
            base.append([v, 1, d])
    return [BaseExponent(value=v, multiplicity=m, degree=d) for v, m, d in base]


def generate(rho, cutoff: float, tol: float = DEFAULT_TOL, degrees=None) -> IndexSet:
    """Enumerate all sums sum n_i rho_i in (0, cutoff], deduplicated at tol.

    `rho` may repeat values (multiplicities); equal values are collapsed for
    value generation and retained (with their largest degree) for the degree
    bookkeeping.  Enumeration is exhaustive: rho_i > 0 bounds every n_i by
    cutoff / rho_i.
    """
    rho = np.asarray(rho, dtype=float)
    if rho.size == 0:
        raise ValueError("exponent list must be nonempty")
    if np.any(rho <= 0):
        raise ValueError("all exponents must be positive")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if cutoff < np.min(rho):
        raise ValueError("cutoff must be at least the smallest exponent")
    if degrees is None:
        degrees = np.zeros(rho.size, dtype=int)
    degrees = np.asarray(degrees, dtype=int)
    if degrees.shape != rho.shape:
        raise ValueError("degrees must align with the exponent list")

    base = _collapse(rho, degrees, tol)
    vals = [b.value for b in base]
    found = {}  # rounded value -> [value, [combos]]

    def visit(i, total, counts):
        if i == len(base):
            if counts_sum := sum(counts):
                key = round(total / tol)
                # merge with an existing value within tol
                for k in (key - 1, key, key + 1):
                    if k in found and abs(found[k][0] - total) <= tol:
                        found[k][1].append(tuple(counts))
                        return
                found[key] = [total, [tuple(counts)]]
            return
        max_count = int(np.floor((cutoff - total) / vals[i] + tol))
        for c in range(max_count + 1):
            counts.append(c)
            visit(i + 1, total + c * vals[i], counts)
            counts.pop()

    visit(0, 0.0, [])
    entries = sorted(found.values(), key=lambda ent: ent[0])
    values = np.array([ent[0] for ent in entries])
    combos = [ent[1] for ent in entries]
    single = np.array([any(sum(c) == 1 for c in cs) for cs in combos])
    multi = np.array([any(sum(c) >= 2 for c in cs) for cs in combos])

    warnings = []
    gaps = np.diff(values)
    for i, g in enumerate(gaps):
        if tol < g <= NEAR_RESONANCE_FACTOR * tol:
            warnings.append(
                f"values {values[i]:.12g} and {values[i + 1]:.12g} differ by "
                f"{g:.3e}, within 100x the resonance tolerance {tol:g}")
    return IndexSet(base=base, cutoff=float(cutoff), tol=float(tol),
                    values=values, combos=combos, single=single, multi=multi,
                    warnings=warnings)


def split(iset: IndexSet):
    """(singles, multi-sums, resonances): the two sublists and their overlap."""
    s1 = iset.values[iset.single]
    s2 = iset.values[iset.multi]
    res = iset.values[iset.resonant]
    return s1, s2, res


def degree_caps(iset: IndexSet, target: float, n: int):
    """Degree bookkeeping for a multi-sum value.

    Over all stored combinations realizing `target` with total count >= 2,
    K is the maximum of sum_i n_i * degree_i; M is the last index (counting
    eigenfunctions of -Delta_theta from 0 in increasing order with
    multiplicity) whose harmonic degree is <= K.  Returns (K, M).
    """
    idx = np.where(np.abs(iset.values - target) <= iset.tol)[0]
    if idx.size == 0 or not iset.multi[idx[0]]:
        raise ValueError(f"target {target!r} is not a multi-sum value")
    combos = [c for c in iset.combos[idx[0]] if sum(c) >= 2]
    kmax = max(sum(c_i * b.degree for c_i, b in zip(c, iset.base))
               for c in combos)
    return int(kmax), spheres.index_of_last_degree(n, int(kmax))
