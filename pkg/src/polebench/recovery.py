"""Identifying exponential-sum systems from finitely many samples.

Three pieces compose into full input/output identification:

* :func:`deconvolve` recovers the first N impulse-response samples from an
  input/output pair whose input has a nonzero leading sample;
* :func:`solve_gains` solves the Vandermonde system for the gains once the
  poles are known;
* :func:`prony_recover` finds the poles from 2K samples by linear prediction.

:func:`brute_force_recover` is an exhaustive grid search over pole subsets,
kept deliberately naive so it can serve as an independent check on Prony.
"""

from __future__ import annotations

import itertools
from typing import NamedTuple

import numpy as np

from .errors import DuplicatePoles, RankDeficient, ZeroLeadingSample
from .signal_core import ParamSet, as_sequence, impulse_response

RANK_RTOL = 1e-10


class RecoveryResult(NamedTuple):
    params: ParamSet
    residual: float


def deconvolve(x, y) -> np.ndarray:
    """Solve the lower-triangular Toeplitz system ``L h = y`` by forward substitution.

    Only the first ``N = len(x) == len(y)`` samples are used, so ``h`` has
    length ``N`` and ``convolve(h, x) == y`` up to round-off.
    """
    x = as_sequence(x)
    y = as_sequence(y)
    if len(x) != len(y):
        raise ValueError(f"input and output lengths differ ({len(x)} vs {len(y)})")
    if x[0] == 0:
        raise ZeroLeadingSample("x[0] == 0 makes the convolution matrix singular")
    n = len(x)
    h = np.zeros(n, dtype=complex)
    for i in range(n):
        # x[i:0:-1] pairs h[0..i-1] with x[i..1]
        h[i] = (y[i] - np.dot(h[:i], x[i:0:-1])) / x[0]
    return h


def vandermonde(poles, n: int) -> np.ndarray:
    """``n x K`` matrix with entries ``poles[k] ** row``."""
    poles = np.asarray(poles, dtype=complex)
    return poles[None, :] ** np.arange(n)[:, None]


def _check_distinct(poles):
    poles = np.asarray(poles, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(poles)))) if poles.size else 1.0
    for i, j in itertools.combinations(range(len(poles)), 2):
        if abs(poles[i] - poles[j]) <= 16 * np.finfo(float).eps * scale:
            raise DuplicatePoles(f"poles {poles[i]} and {poles[j]} coincide")


def solve_gains(poles, samples, return_residual: bool = False):
    """Gains reproducing ``samples`` as ``sum_k b_k poles_k**n``.

    Exact when the samples are realizable by these poles, least squares
    otherwise. With ``return_residual`` the 2-norm misfit is returned too.
    """
    poles = np.atleast_1d(np.asarray(poles, dtype=complex))
    samples = as_sequence(samples)
    if len(samples) < len(poles):
        raise ValueError(f"need at least {len(poles)} samples, got {len(samples)}")
    _check_distinct(poles)
    V = vandermonde(poles, len(samples))
    gains = np.linalg.lstsq(V, samples, rcond=None)[0]
    if return_residual:
        return gains, float(np.linalg.norm(V @ gains - samples))
    return gains


def hankel_block(samples, order: int) -> np.ndarray:
    """``(N - K) x K`` linear-prediction matrix with entries ``samples[i + j]``."""
    samples = np.asarray(samples, dtype=complex)
    n = len(samples)
    idx = np.arange(n - order)[:, None] + np.arange(order)[None, :]
    return samples[idx]


def prony_recover(samples, order: int) -> RecoveryResult:
    """Recover a ``order``-term parameter set from ``N >= 2 * order`` samples.

    The linear-prediction coefficients are the least-squares solution of the
    Hankel system; the poles are the eigenvalues of the companion matrix of
    the prediction polynomial and the gains follow from :func:`solve_gains`.

    Raises
    ------
    RankDeficient
        If the Hankel block's singular values fall below ``1e-10`` relative to
        the largest, i.e. the samples come from a system of lower order.
    """
    samples = as_sequence(samples)
    if order < 1:
        raise ValueError("order must be >= 1")
    if len(samples) < 2 * order:
        raise ValueError(f"need N >= 2K = {2 * order} samples, got {len(samples)}")

    A = hankel_block(samples, order)
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[0] == 0 or sv[-1] < RANK_RTOL * sv[0]:
        raise RankDeficient(
            f"Hankel block has sigma_min/sigma_max = {sv[-1] / sv[0] if sv[0] else 0:.3g}; "
            f"the data look like a system of order < {order}"
        )
    coeffs = np.linalg.lstsq(A, -samples[order:], rcond=None)[0]

    companion = np.zeros((order, order), dtype=complex)
    companion[1:, :-1] = np.eye(order - 1)
    companion[:, -1] = -coeffs
    poles = np.linalg.eigvals(companion)

    gains = solve_gains(poles, samples)
    params = ParamSet.from_arrays(gains, poles)
    residual = float(np.linalg.norm(impulse_response(params, len(samples)) - samples))
    return RecoveryResult(params, residual)


def brute_force_recover(samples, order: int, grid) -> RecoveryResult:
    """Exhaustive search over ``order``-subsets of candidate ``grid`` poles.

    Gains for each subset come from :func:`solve_gains`; the subset with the
    smallest residual wins, ties going to the lexicographically first subset.
    Cost grows like ``len(grid) ** order``.
    """
    samples = as_sequence(samples)
    grid = np.unique(np.asarray(grid, dtype=complex))
    if order < 1 or order > len(grid):
        raise ValueError(f"order must be in [1, {len(grid)}]")
    if len(samples) < 2 * order:
        raise ValueError(f"need N >= 2K = {2 * order} samples, got {len(samples)}")

    best = None
    for subset in itertools.combinations(range(len(grid)), order):
        poles = grid[list(subset)]
        gains, res = solve_gains(poles, samples, return_residual=True)
        if best is None or res < best[0]:
            best = (res, gains, poles)
    res, gains, poles = best
    # exact-zero gains (pole unused by the data) are dropped by simplification
    return RecoveryResult(ParamSet.from_arrays(gains, poles), float(res))


def recover_from_io(x, y, order: int) -> RecoveryResult:
    """Deconvolve the input/output pair, then run :func:`prony_recover`."""
    return prony_recover(deconvolve(x, y), order)


def ambiguous_pair(poles_a, poles_b, n_samples: int) -> tuple[ParamSet, ParamSet]:
    """Two distinct parameter sets whose first ``n_samples`` responses agree.

    With ``2K`` distinct poles in total and ``n_samples < 2K`` rows, the
    ``n_samples x 2K`` Vandermonde matrix has a nontrivial null vector
    ``(b, -b_tilde)``; splitting it gives the pair.
    """
    poles_a = np.atleast_1d(np.asarray(poles_a, dtype=complex))
    poles_b = np.atleast_1d(np.asarray(poles_b, dtype=complex))
    allp = np.concatenate([poles_a, poles_b])
    _check_distinct(allp)
    if n_samples >= len(allp):
        raise ValueError("responses are unique once n_samples >= total number of poles")
    V = vandermonde(allp, n_samples)
    null = np.linalg.svd(V)[2].conj()[-1]
    k = len(poles_a)
    return ParamSet.from_arrays(null[:k], poles_a), ParamSet.from_arrays(-null[k:], poles_b)
