"""Loss landscapes for learning pole locations.

Objectives compare a candidate ordered parameter list against a ground-truth
parameter set, either in the time domain (finite data or an impulse input
summed to a negligible tail) or in the frequency domain (trapezoidal
quadrature on a uniform grid). Everything is a plain function of real
coordinate vectors so curvature can be probed with finite differences.

Coordinate maps (``coords``) lay entry ``k`` of an ordered parameter list
out as consecutive real numbers:

``"cartesian"``   (Re b, Im b, Re beta, Im beta)
``"polar"``       (|b|, arg b, |beta|, arg beta)
``"real"``        (Re b, Re beta), imaginary parts pinned to the base point
``"real_poles"``  (Re beta,), everything else pinned to the base point
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    DomainError,
    IdentityPermutation,
    NonFiniteValue,
    NotPSD,
    UnstableCandidate,
    UnstablePole,
    ZeroResponse,
)
from .signal_core import OrderedParams, ParamSet, as_sequence, convolve, dtft, impulse_response

N_QUAD = 4096
TAIL_TOL = 1e-14
MAX_TERMS = 100_000
STABILITY_MARGIN = 1e-9
PSD_RTOL = 1e-6

TIME_DOMAIN = "time_domain"
FREQ_MSE = "freq_mse"
EQUALIZATION_RATIO = "equalization_ratio"
WEIGHTED_FREQ = "weighted_freq"
TWO_POLE = "two_pole"

_COORD_WIDTH = {"cartesian": 4, "polar": 4, "real": 2, "real_poles": 1}


# --------------------------------------------------------------------------
# coordinate maps

def to_vector(params: OrderedParams, coords: str = "cartesian") -> np.ndarray:
    g, p = params.gains, params.poles
    if coords == "cartesian":
        cols = [g.real, g.imag, p.real, p.imag]
    elif coords == "polar":
        cols = [np.abs(g), np.angle(g), np.abs(p), np.angle(p)]
    elif coords == "real":
        cols = [g.real, p.real]
    elif coords == "real_poles":
        cols = [p.real]
    else:
        raise ValueError(f"unknown coordinate map {coords!r}")
    return np.stack(cols, axis=1).ravel()


def from_vector(vec, coords: str = "cartesian", base: OrderedParams | None = None) -> OrderedParams:
    width = _COORD_WIDTH.get(coords)
    if width is None:
        raise ValueError(f"unknown coordinate map {coords!r}")
    v = np.asarray(vec, dtype=float).reshape(-1, width)
    if coords == "cartesian":
        return OrderedParams(v[:, 0] + 1j * v[:, 1], v[:, 2] + 1j * v[:, 3])
    if coords == "polar":
        return OrderedParams(v[:, 0] * np.exp(1j * v[:, 1]), v[:, 2] * np.exp(1j * v[:, 3]))
    if base is None or len(base) != len(v):
        raise ValueError(f"coords {coords!r} need a base point with {len(v)} entries")
    if coords == "real":
        return OrderedParams(v[:, 0] + 1j * base.gains.imag, v[:, 1] + 1j * base.poles.imag)
    return OrderedParams(base.gains, v[:, 0] + 1j * base.poles.imag)


def coord_index(k: int, component: str, coords: str = "cartesian") -> int:
    """Position of ``component`` (e.g. ``"pole_re"``) of entry ``k`` in the flat vector."""
    names = {
        "cartesian": ("gain_re", "gain_im", "pole_re", "pole_im"),
        "polar": ("gain_abs", "gain_arg", "pole_abs", "pole_arg"),
        "real": ("gain_re", "pole_re"),
        "real_poles": ("pole_re",),
    }[coords]
    return k * len(names) + names.index(component)


# --------------------------------------------------------------------------
# objectives

def two_pole_f(x: float, y: float, c: float, d: float) -> float:
    """Closed form of ``sum_n (x^n + y^n - c^n - d^n)^2`` via ``S(a, b) = 1 / (1 - ab)``."""
    for name, v in (("x", x), ("y", y), ("c", c), ("d", d)):
        if not abs(v) < 1:
            raise DomainError(f"{name} = {v} must lie strictly inside (-1, 1)")

    def S(a, b):
        return 1.0 / (1.0 - a * b)

    return (
        S(x, x) + S(y, y) + S(c, c) + S(d, d) + 2 * S(x, y) + 2 * S(c, d)
        - 2 * S(x, c) - 2 * S(x, d) - 2 * S(y, c) - 2 * S(y, d)
    )


def _quad_grid(n=N_QUAD):
    return -np.pi + 2 * np.pi * np.arange(n) / n


def _series_length(gains, poles) -> int:
    # smallest M with A^2 r^(2(M+1)) / (1 - r^2) < TAIL_TOL
    r = float(np.max(np.abs(poles)))
    if r == 0:
        return 1
    amp = float(np.sum(np.abs(gains)))
    if amp == 0:
        return 1
    m = math.log(TAIL_TOL * (1 - r * r) / amp**2) / (2 * math.log(r)) - 1
    return int(min(MAX_TERMS, max(1, math.ceil(m) + 1)))


def infinite_sq_error(a: OrderedParams | ParamSet, b: OrderedParams | ParamSet) -> float:
    """``sum_{n>=0} |h_a[n] - h_b[n]|^2``, summed until the tail is below ``1e-14``."""
    gains = np.concatenate([a.gains, -b.gains])
    poles = np.concatenate([a.poles, b.poles])
    if np.any(np.abs(poles) >= 1 - STABILITY_MARGIN):
        raise UnstableCandidate("infinite-horizon objective needs poles inside the unit circle")
    m = _series_length(gains, poles)
    err = impulse_response(OrderedParams(gains, poles), m)
    return float(np.sum(err.real**2 + err.imag**2))


@dataclass(frozen=True)
class Objective:
    """A landscape objective over ordered candidates.

    Build one with the classmethods rather than directly.
    """

    kind: str
    truth: ParamSet
    x: np.ndarray | None = None
    y: np.ndarray | None = None
    weight: Callable | None = None
    c: float | None = None
    d: float | None = None
    _href: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def order(self) -> int:
        return self.truth.size

    @classmethod
    def time_domain(cls, truth: ParamSet, x=None, y=None, length: int | None = None) -> "Objective":
        """Squared-l2 misfit ``||y - h_candidate * x||^2``.

        With neither ``x`` nor ``length`` the input is a unit impulse and the
        sum runs to infinity (truncated at a ``1e-14`` tail bound). Without
        ``y`` the observations are generated from ``truth``.
        """
        if x is None and length is None:
            return cls(TIME_DOMAIN, truth)
        if x is None:
            x = np.zeros(length, dtype=complex)
            x[0] = 1
        x = as_sequence(x)
        if y is None:
            y = convolve(impulse_response(truth, len(x)), x)
        y = as_sequence(y)
        if len(y) != len(x):
            raise ValueError("x and y must have equal length")
        return cls(TIME_DOMAIN, truth, x=x, y=y)

    @classmethod
    def freq_mse(cls, truth: ParamSet) -> "Objective":
        return cls(FREQ_MSE, truth, _href=_stable_response(truth))

    @classmethod
    def equalization_ratio(cls, truth: ParamSet) -> "Objective":
        href = _stable_response(truth)
        mag = np.abs(href)
        if not mag.min() > 1e-12 * mag.max():
            raise ZeroResponse("|H(e^{iw})| vanishes on the quadrature grid; ratio objective undefined")
        return cls(EQUALIZATION_RATIO, truth, _href=href)

    @classmethod
    def weighted_freq(cls, truth: ParamSet, weight: Callable) -> "Objective":
        w = np.asarray(weight(_quad_grid()), dtype=float)
        if w.shape != (N_QUAD,) or not np.all(w > 0):
            raise ValueError("weight must be a positive function of omega")
        return cls(WEIGHTED_FREQ, truth, weight=weight, _href=_stable_response(truth))

    @classmethod
    def two_pole(cls, c: float, d: float) -> "Objective":
        """``f(x, y)`` with unit gains and real poles; reads only ``Re`` of candidate poles."""
        for name, v in (("c", c), ("d", d)):
            if not 0 < v < 1:
                raise DomainError(f"{name} = {v} must lie in (0, 1)")
        return cls(TWO_POLE, ParamSet([(1, c), (1, d)]), c=float(c), d=float(d))

    def __call__(self, candidate: OrderedParams) -> float:
        return eval_objective(self, candidate)


def _stable_response(truth: ParamSet) -> np.ndarray:
    if np.any(np.abs(truth.poles) >= 1):
        raise UnstablePole("frequency-domain objectives need ground-truth poles inside the unit circle")
    return dtft(truth, _quad_grid())


def eval_objective(obj: Objective, candidate: OrderedParams) -> float:
    """Value of ``obj`` at ``candidate``; zero exactly at orderings of the ground truth."""
    if len(candidate) != (2 if obj.kind == TWO_POLE else obj.order):
        raise ValueError(f"candidate has {len(candidate)} entries, objective expects {obj.order}")

    if obj.kind == TWO_POLE:
        x, y = candidate.poles.real
        return two_pole_f(x, y, obj.c, obj.d)

    if obj.kind == TIME_DOMAIN:
        if obj.x is None:
            return infinite_sq_error(candidate, obj.truth)
        resid = obj.y - convolve(impulse_response(candidate, len(obj.x)), obj.x)
        return float(np.sum(resid.real**2 + resid.imag**2))

    if np.any(np.abs(candidate.poles) >= 1 - STABILITY_MARGIN):
        raise UnstableCandidate(f"candidate poles {candidate.poles} are not strictly stable")
    omega = _quad_grid()
    # dtft directly; the pole check above is stricter than dtft's own
    hc = (candidate.gains / (1 - candidate.poles * np.exp(-1j * omega)[:, None])).sum(axis=1)
    if obj.kind == FREQ_MSE:
        integrand = np.abs(hc - obj._href) ** 2
    elif obj.kind == EQUALIZATION_RATIO:
        integrand = np.abs(1 - hc / obj._href) ** 2
    elif obj.kind == WEIGHTED_FREQ:
        integrand = obj.weight(omega) * np.abs(hc - obj._href) ** 2
    else:
        raise ValueError(f"unknown objective kind {obj.kind!r}")
    # periodic trapezoid rule == mean over the uniform grid
    return float(np.mean(integrand))


# --------------------------------------------------------------------------
# curvature

@dataclass
class HessianReport:
    matrix: np.ndarray
    eigen_min: float
    eigen_max: float
    condition: float
    gamma: float | None = None
    D: float | None = None
    T: float | None = None

    @property
    def condition_infinite(self) -> bool:
        return math.isinf(self.condition)

    @property
    def positive_definite(self) -> bool:
        return self.eigen_min > 0

    def to_json(self) -> dict:
        doc = {
            "matrix": np.asarray(self.matrix).tolist(),
            "eigen_min": self.eigen_min,
            "eigen_max": self.eigen_max,
            "condition": None if self.condition_infinite else self.condition,
            "condition_infinite": self.condition_infinite,
        }
        for key in ("gamma", "D", "T"):
            value = getattr(self, key)
            if value is not None:
                doc[key] = value
        return doc


def _report(matrix) -> HessianReport:
    eig = np.linalg.eigvalsh(matrix)
    lo, hi = float(eig[0]), float(eig[-1])
    cond = hi / lo if lo > 0 else math.inf
    return HessianReport(matrix=matrix, eigen_min=lo, eigen_max=hi, condition=cond)


def two_pole_hessian(c: float, d: float) -> HessianReport:
    """Closed-form Hessian of ``f`` at its optimum ``(c, d)``.

    ``H = 2 [[<u_c,u_c>, <u_c,u_d>], [<u_d,u_c>, <u_d,u_d>]]`` with
    ``<u_a, u_b> = (1 + ab) / (1 - ab)^3``. ``D`` and ``T`` are the determinant
    and trace of ``H / 2``; the condition number is ``(1 + gamma) / (1 - gamma)``,
    evaluated as ``(1 + gamma)^2 T^2 / (4 D)`` to avoid cancellation near ``c = d``.
    """
    for name, v in (("c", c), ("d", d)):
        if not 0 < v < 1:
            raise DomainError(f"{name} = {v} must lie in (0, 1)")

    def inner(a, b):
        return (1 + a * b) / (1 - a * b) ** 3

    a, b, m = inner(c, c), inner(d, d), inner(c, d)
    D = a * b - m * m
    T = a + b
    gamma = math.sqrt((a - b) ** 2 + 4 * m * m) / T
    matrix = 2 * np.array([[a, m], [m, b]])
    eig_max = T * (1 + gamma)
    if D > 0:
        eig_min = 4 * D / (T * (1 + gamma))
        cond = (1 + gamma) ** 2 * T * T / (4 * D)
    else:
        D = max(D, 0.0)
        eig_min, cond = 0.0, math.inf
    return HessianReport(matrix, eig_min, eig_max, cond, gamma=gamma, D=D, T=T)


def _as_function(fn, point, coords):
    if isinstance(fn, Objective):
        if not isinstance(point, OrderedParams):
            raise TypeError("an Objective needs an OrderedParams point")
        return (lambda v: eval_objective(fn, from_vector(v, coords, point))), to_vector(point, coords)
    return fn, np.asarray(point, dtype=float).ravel()


def numerical_hessian(fn, point, step: float = 1e-4, coords: str = "cartesian") -> HessianReport:
    """Central-difference Hessian, symmetrised.

    ``fn`` is either an :class:`Objective` (then ``point`` is an
    :class:`OrderedParams` mapped through ``coords``) or any callable of a
    real 1-D array (then ``point`` is that array).
    """
    f, v0 = _as_function(fn, point, coords)
    n = len(v0)
    cache = {}

    def at(*shifts):
        key = tuple(sorted(shifts))
        if key not in cache:
            v = v0.copy()
            for i, s in shifts:
                v[i] += s * step
            val = float(f(v))
            if not math.isfinite(val):
                raise NonFiniteValue(f"objective is {val} at {v}")
            cache[key] = val
        return cache[key]

    f0 = at()
    H = np.empty((n, n))
    for i in range(n):
        H[i, i] = (at((i, 1)) - 2 * f0 + at((i, -1))) / step**2
        for j in range(i + 1, n):
            H[i, j] = H[j, i] = (
                at((i, 1), (j, 1)) - at((i, 1), (j, -1)) - at((i, -1), (j, 1)) + at((i, -1), (j, -1))
            ) / (4 * step**2)
    return _report((H + H.T) / 2)


def restriction_condition_bound(fn, point, coord_subset, step: float = 1e-4, coords: str = "cartesian"):
    """Condition numbers of the full Hessian and of its restriction to ``coord_subset``.

    The restriction's Hessian is the principal submatrix. For a PSD full
    Hessian its condition number can never exceed the full one.

    Raises
    ------
    NotPSD
        If the full Hessian has an eigenvalue below ``-1e-6 * eigen_max``.
    """
    full = numerical_hessian(fn, point, step=step, coords=coords)
    if full.eigen_min < -PSD_RTOL * abs(full.eigen_max):
        raise NotPSD(f"Hessian eigenvalue {full.eigen_min:.3g} is negative")
    idx = np.asarray(sorted(set(coord_subset)), dtype=int)
    restricted = _report(full.matrix[np.ix_(idx, idx)])
    return full.condition, restricted.condition


# --------------------------------------------------------------------------
# permutation probes

def _check_perm(perm):
    perm = list(perm)
    if perm == list(range(len(perm))):
        raise IdentityPermutation("the probe needs a non-identity permutation")
    return perm


def midpoint_params(ordering: OrderedParams, perm, lam: float, coords: str = "cartesian") -> OrderedParams:
    """``lam * ordering + (1 - lam) * permuted(ordering)`` taken in ``coords``."""
    perm = _check_perm(perm)
    if not 0 <= lam <= 1:
        raise ValueError("lam must lie in [0, 1]")
    v = lam * to_vector(ordering, coords) + (1 - lam) * to_vector(ordering.permuted(perm), coords)
    return from_vector(v, coords, ordering)


def midpoint_gap(obj: Objective, ordering: OrderedParams, perm, lam: float = 0.5, coords: str = "cartesian") -> float:
    """Objective value on the segment between two optimal orderings."""
    return eval_objective(obj, midpoint_params(ordering, perm, lam, coords))


def midpoint_pole_norm(poles, perm, lam: float) -> float:
    """``sum_k |lam beta_k + (1 - lam) beta_perm(k)|^2``."""
    poles = np.asarray(poles, dtype=complex)
    perm = _check_perm(perm)
    mixed = lam * poles + (1 - lam) * poles[perm]
    return float(np.sum(np.abs(mixed) ** 2))


# --------------------------------------------------------------------------
# surfaces

@dataclass
class LossSurfaceGrid:
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray  # values[i, j] at (xs[i], ys[j]); NaN marks a failed cell
    optima: list = field(default_factory=list)

    def argmin(self):
        i, j = np.unravel_index(np.nanargmin(self.values), self.values.shape)
        return float(self.xs[i]), float(self.ys[j]), float(self.values[i, j])

    def local_minima(self, atol: float = 1e-10):
        """Grid points whose value is within ``atol`` of zero."""
        idx = np.argwhere(np.nan_to_num(self.values, nan=np.inf) <= atol)
        return [(float(self.xs[i]), float(self.ys[j])) for i, j in idx]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "f"])
            for i, x in enumerate(self.xs):
                for j, y in enumerate(self.ys):
                    v = self.values[i, j]
                    w.writerow([repr(float(x)), repr(float(y)), "" if np.isnan(v) else repr(float(v))])


def _axis(lo, hi, step):
    if step <= 0:
        raise ValueError("grid step must be positive")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(max(n, 1)), 12)


def surface_grid(obj: Objective, axes=(0, 1), xrange=(0.0, 0.95), yrange=(0.0, 0.95),
                 step=0.01, fixed: OrderedParams | None = None, coords: str | None = None) -> LossSurfaceGrid:
    """Evaluate ``obj`` on a 2-D slice through coordinate ``axes`` of ``fixed``.

    ``optima`` lists the orderings of the ground truth that lie on the slice
    and inside the plotted ranges.

    ``step`` may be a scalar or an ``(x_step, y_step)`` pair. Cells where the
    objective is undefined are recorded as NaN.
    """
    if coords is None:
        coords = "real_poles" if obj.kind == TWO_POLE else "cartesian"
    if fixed is None:
        fixed = obj.truth.ordered() if obj.kind != TWO_POLE else OrderedParams([1, 1], [obj.c, obj.d])
    sx, sy = (step, step) if np.isscalar(step) else step
    xs, ys = _axis(*xrange, sx), _axis(*yrange, sy)
    ax, ay = axes
    base = to_vector(fixed, coords)
    values = np.full((len(xs), len(ys)), np.nan)
    for i, xv in enumerate(xs):
        for j, yv in enumerate(ys):
            v = base.copy()
            v[ax], v[ay] = xv, yv
            try:
                val = eval_objective(obj, from_vector(v, coords, fixed))
            except (DomainError, UnstableCandidate, FloatingPointError, ZeroDivisionError):
                continue
            if math.isfinite(val):
                values[i, j] = val

    optima = []
    truth = obj.truth.ordered() if obj.kind != TWO_POLE else OrderedParams([1, 1], [obj.c, obj.d])
    others = [k for k in range(len(base)) if k not in (ax, ay)]
    for perm in itertools.permutations(range(len(truth))):
        tv = to_vector(truth.permuted(perm), coords)
        if np.allclose(tv[others], base[others], atol=1e-12):
            pt = (float(tv[ax]), float(tv[ay]))
            inside = xrange[0] <= pt[0] <= xrange[1] and yrange[0] <= pt[1] <= yrange[1]
            if inside and pt not in optima:
                optima.append(pt)
    return LossSurfaceGrid(xs, ys, values, optima)


def hessian_json(report: HessianReport, path):
    with open(path, "w") as fh:
        json.dump(report.to_json(), fh, indent=2)
