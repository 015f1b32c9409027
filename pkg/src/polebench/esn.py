"""Fixed-pole reservoirs with a least-squares readout.

Two ways to fix the recurrent dynamics: a random dense matrix rescaled to a
target spectral radius, and a block-diagonal matrix whose eigenvalues are
placed exactly at user-chosen poles. Only ``W_out`` is ever learned, by one
linear solve.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDraw, DuplicatePoles, PoleOutsideUnitCircle, UnpairedComplexPole
from .rnn_engine import ReservoirModel, forward, mse

RANDOM = "random"
CONFIGURED = "configured"
PINV_RCOND = 1e-12
MAX_REDRAWS = 8


@dataclass
class ReservoirSpec:
    kind: str = RANDOM
    n_hidden: int = 32
    spectral_radius: float = 0.9
    poles: list = field(default_factory=list)
    input_scale: float = 1.0
    seed: int = 0
    n_in: int = 1
    n_out: int = 1

    def __post_init__(self):
        if self.kind not in (RANDOM, CONFIGURED):
            raise ValueError(f"unknown reservoir kind {self.kind!r}")
        if self.n_hidden < 1:
            raise ValueError("n_hidden must be >= 1")
        if not 0 < self.spectral_radius < 1:
            raise ValueError("spectral_radius must lie in (0, 1)")
        if self.input_scale <= 0:
            raise ValueError("input_scale must be positive")
        self.poles = [complex(p) for p in self.poles]


def _input_weights(rng, spec):
    return rng.uniform(-spec.input_scale, spec.input_scale, size=(spec.n_hidden, spec.n_in))


def init_random_reservoir(spec: ReservoirSpec) -> ReservoirModel:
    """Gaussian ``W_rec`` rescaled to ``spec.spectral_radius``; uniform ``W_in``; zero ``W_out``.

    A draw whose spectral radius is numerically zero cannot be rescaled; it is
    redrawn with the next seed and a warning is issued.
    """
    if spec.kind != RANDOM:
        raise ValueError("init_random_reservoir needs a random spec")
    for attempt in range(MAX_REDRAWS):
        rng = np.random.default_rng(spec.seed + attempt)
        raw = rng.standard_normal((spec.n_hidden, spec.n_hidden))
        rho = np.max(np.abs(np.linalg.eigvals(raw)))
        if rho >= 1e-12:
            break
        warnings.warn(f"degenerate reservoir draw for seed {spec.seed + attempt}; redrawing")
    else:
        raise DegenerateDraw(f"{MAX_REDRAWS} consecutive draws had zero spectral radius")
    w_rec = raw * (spec.spectral_radius / rho)
    return ReservoirModel(_input_weights(rng, spec), w_rec, np.zeros((spec.n_out, spec.n_hidden)))


def realize_poles(poles) -> np.ndarray:
    """Real block-diagonal matrix with exactly ``poles`` as eigenvalues.

    Real poles become 1x1 blocks; each conjugate pair ``r e^{+-i theta}``
    becomes ``[[r cos, -r sin], [r sin, r cos]]``.
    """
    poles = [complex(p) for p in poles]
    for i, p in enumerate(poles):
        if abs(p) >= 1:
            raise PoleOutsideUnitCircle(f"pole {p} has magnitude {abs(p):.6g} >= 1")
        for q in poles[i + 1:]:
            if p == q:
                raise DuplicatePoles(f"pole {p} requested twice")
    upper = [p for p in poles if p.imag > 0]
    lower = [p for p in poles if p.imag < 0]
    for p in upper:
        if p.conjugate() not in lower:
            raise UnpairedComplexPole(f"pole {p} has no conjugate partner")
    if len(upper) != len(lower):
        raise UnpairedComplexPole("complex poles are not conjugate-closed")

    reals = [p.real for p in poles if p.imag == 0]
    size = len(reals) + 2 * len(upper)
    w = np.zeros((size, size))
    i = 0
    for r in reals:
        w[i, i] = r
        i += 1
    for p in upper:
        a, b = p.real, p.imag
        w[i:i + 2, i:i + 2] = [[a, -b], [b, a]]
        i += 2
    return w


def filler_poles(count: int, upper: float, avoid=()) -> np.ndarray:
    """``count`` distinct real poles evenly spaced in ``[0.1, upper]``, skipping ``avoid``."""
    if count <= 0:
        return np.zeros(0)
    avoid = [complex(a) for a in avoid]
    extra = 0
    while True:
        cand = np.linspace(0.1, upper, count + extra)
        keep = [c for c in cand if all(abs(c - a) > 1e-9 for a in avoid)]
        if len(keep) >= count:
            return np.array(keep[:count])
        extra += 1


def init_configured_reservoir(spec: ReservoirSpec) -> ReservoirModel:
    """Block-diagonal ``W_rec`` with eigenvalues at ``spec.poles``.

    Hidden units beyond those needed for the requested poles get filler real
    poles in ``[0.1, spec.spectral_radius]``.
    """
    if spec.kind != CONFIGURED:
        raise ValueError("init_configured_reservoir needs a configured spec")
    if len(spec.poles) > spec.n_hidden:
        raise ValueError(f"{len(spec.poles)} poles do not fit in {spec.n_hidden} hidden units")
    block = realize_poles(spec.poles)
    fill = filler_poles(spec.n_hidden - block.shape[0], spec.spectral_radius, spec.poles)
    w_rec = np.zeros((spec.n_hidden, spec.n_hidden))
    k = block.shape[0]
    w_rec[:k, :k] = block
    w_rec[k:, k:] = np.diag(fill)
    rng = np.random.default_rng(spec.seed)
    return ReservoirModel(_input_weights(rng, spec), w_rec, np.zeros((spec.n_out, spec.n_hidden)))


def init_reservoir(spec: ReservoirSpec) -> ReservoirModel:
    if spec.kind == RANDOM:
        return init_random_reservoir(spec)
    return init_configured_reservoir(spec)


def fit_readout(states, targets, ridge: float = 0.0) -> np.ndarray:
    """Least-squares ``W_out`` mapping ``states`` (N_h x T) onto ``targets`` (N_out x T).

    ``ridge == 0`` gives the minimum-norm solution ``Y H^+`` (singular values
    below ``1e-12 * sigma_max`` are truncated); ``ridge > 0`` gives
    ``Y H^T (H H^T + ridge I)^-1``.
    """
    H = np.array(states, dtype=float, ndmin=2)
    Y = np.array(targets, dtype=float, ndmin=2)
    if H.shape[1] != Y.shape[1]:
        raise ValueError(f"states cover {H.shape[1]} steps but targets cover {Y.shape[1]}")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    if ridge == 0:
        return Y @ np.linalg.pinv(H, rcond=PINV_RCOND)
    gram = H @ H.T + ridge * np.eye(H.shape[0])
    return np.linalg.solve(gram, H @ Y.T).T


def train_readout(model: ReservoirModel, inputs, targets, ridge: float = 0.0):
    """One-shot readout training; returns ``(fitted_model, training_loss)``."""
    states, _ = forward(model, inputs)
    fitted = model.copy()
    fitted.w_out = fit_readout(states, targets, ridge)
    return fitted, mse(fitted.w_out @ states, targets)


def esn_predict(model: ReservoirModel, inputs, strict: bool = True) -> np.ndarray:
    return forward(model, inputs, strict)[1]
