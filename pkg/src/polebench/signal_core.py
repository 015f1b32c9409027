"""Exponential-sum impulse responses and the elementary signal operations on them.

A system is described by an unordered set of (gain, pole) pairs and produces
the causal impulse response ``h[n] = sum_k gain_k * pole_k**n`` for ``n >= 0``.
Sequences are plain 1-D complex numpy arrays indexed from 0, with implicit
zeros before the first sample.
"""

from __future__ import annotations

from typing import Iterable, Sequence as _Seq

import numpy as np

from .errors import EmptyAfterSimplification, UnstablePole


def _freeze(arr):
    arr = np.array(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


class ParamSet:
    """Fully simplified, unordered set of ``(gain, pole)`` pairs.

    Construction merges pairs whose poles are equal (exactly, or within
    ``tol`` when given) by summing their gains and then drops zero gains.
    Pairs keep their insertion order internally; equality is set equality.

    Raises
    ------
    EmptyAfterSimplification
        If every term cancels.
    """

    __slots__ = ("gains", "poles")

    def __init__(self, pairs: Iterable[tuple[complex, complex]], tol: float = 0.0):
        pairs = [(complex(g), complex(p)) for g, p in pairs]
        if not pairs:
            raise ValueError("a parameter set needs at least one (gain, pole) pair")
        gains: list[complex] = []
        poles: list[complex] = []
        for g, p in pairs:
            for i, q in enumerate(poles):
                if (p == q) if tol == 0 else abs(p - q) <= tol:
                    gains[i] += g
                    break
            else:
                gains.append(g)
                poles.append(p)
        keep = [i for i, g in enumerate(gains) if g != 0]
        if not keep:
            raise EmptyAfterSimplification("all terms cancel; the zero system is not representable")
        object.__setattr__(self, "gains", _freeze([gains[i] for i in keep]))
        object.__setattr__(self, "poles", _freeze([poles[i] for i in keep]))

    def __setattr__(self, name, value):
        raise AttributeError("ParamSet is immutable")

    @classmethod
    def from_arrays(cls, gains, poles, tol: float = 0.0) -> "ParamSet":
        gains = np.atleast_1d(np.asarray(gains, dtype=complex))
        poles = np.atleast_1d(np.asarray(poles, dtype=complex))
        if gains.shape != poles.shape:
            raise ValueError(f"gains {gains.shape} and poles {poles.shape} differ in shape")
        return cls(zip(gains, poles), tol=tol)

    @property
    def size(self) -> int:
        return len(self.poles)

    def __len__(self):
        return self.size

    def pairs(self) -> list[tuple[complex, complex]]:
        return [(complex(g), complex(p)) for g, p in zip(self.gains, self.poles)]

    def ordered(self) -> "OrderedParams":
        return OrderedParams(self.gains, self.poles)

    def __eq__(self, other):
        if not isinstance(other, ParamSet):
            return NotImplemented
        return params_equal(self, other, 0.0)

    __hash__ = None

    def __repr__(self):
        body = ", ".join(f"({g:.6g}, {p:.6g})" for g, p in self.pairs())
        return f"ParamSet({{{body}}})"

    def to_json(self) -> dict:
        return {
            "pairs": [
                {"gain": [g.real, g.imag], "pole": [p.real, p.imag]} for g, p in self.pairs()
            ]
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ParamSet":
        try:
            return cls((complex(*d["gain"]), complex(*d["pole"])) for d in doc["pairs"])
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed ParamSet document: {exc}") from exc


class OrderedParams:
    """Ordered list of ``(gain, pole)`` entries, e.g. a gradient iterate.

    No distinctness or nonzero requirement: iterates may collide.
    """

    __slots__ = ("gains", "poles")

    def __init__(self, gains, poles):
        gains = np.atleast_1d(np.array(gains, dtype=complex))
        poles = np.atleast_1d(np.array(poles, dtype=complex))
        if gains.ndim != 1 or gains.shape != poles.shape or gains.size == 0:
            raise ValueError("gains and poles must be equal-length nonempty 1-D arrays")
        gains.setflags(write=False)
        poles.setflags(write=False)
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "poles", poles)

    def __setattr__(self, name, value):
        raise AttributeError("OrderedParams is immutable")

    def __len__(self):
        return len(self.poles)

    def __repr__(self):
        body = ", ".join(f"({g:.6g}, {p:.6g})" for g, p in zip(self.gains, self.poles))
        return f"OrderedParams([{body}])"

    def permuted(self, perm: _Seq[int]) -> "OrderedParams":
        """Entry ``k`` of the result is entry ``perm[k]`` of ``self``."""
        perm = np.asarray(perm, dtype=int)
        if sorted(perm.tolist()) != list(range(len(self))):
            raise ValueError(f"{perm.tolist()} is not a permutation of range({len(self)})")
        return OrderedParams(self.gains[perm], self.poles[perm])

    def to_set(self, tol: float = 0.0) -> ParamSet:
        return ParamSet(zip(self.gains, self.poles), tol=tol)


def simplify(raw: Iterable[tuple[complex, complex]], tol: float = 0.0) -> ParamSet:
    """Merge equal poles, drop zero gains. See :class:`ParamSet`."""
    return ParamSet(raw, tol=tol)


def as_sequence(x) -> np.ndarray:
    """Validate and coerce to a finite, nonempty 1-D complex array."""
    arr = np.asarray(x, dtype=complex)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("a sequence must be a nonempty 1-D array")
    if not np.all(np.isfinite(arr)):
        raise ValueError("sequence contains non-finite samples")
    return arr


def impulse_response(params: ParamSet | OrderedParams, length: int) -> np.ndarray:
    """First ``length`` samples of ``h[n] = sum_k b_k beta_k**n``."""
    if length < 1:
        raise ValueError("length must be >= 1")
    n = np.arange(length)
    terms = params.gains[None, :] * params.poles[None, :] ** n[:, None]
    return terms.sum(axis=1)


def convolve(h, x) -> np.ndarray:
    """Causal convolution truncated to the shorter of the two inputs."""
    h = as_sequence(h)
    x = as_sequence(x)
    n = min(len(h), len(x))
    return np.convolve(h[:n], x[:n])[:n]


def dtft(params: ParamSet | OrderedParams, omega):
    """Closed-form DTFT ``sum_k b_k / (1 - beta_k e^{-i omega})``; vectorised over ``omega``."""
    if np.any(np.abs(params.poles) >= 1):
        raise UnstablePole(f"DTFT needs all poles inside the unit circle, got {params.poles}")
    omega = np.asarray(omega, dtype=float)
    z = np.exp(-1j * omega)[..., None]
    out = (params.gains / (1 - params.poles * z)).sum(axis=-1)
    return out if out.ndim else complex(out)


def params_equal(a: ParamSet, b: ParamSet, tol: float = 1e-9) -> bool:
    """Set equality of two parameter sets within ``tol`` on poles and gains.

    Each pole of ``a`` is greedily matched to the nearest unused pole of ``b``;
    the matching is then checked pair by pair. Exact when poles are separated
    by more than ``2 * tol``.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    if a.size != b.size:
        return False
    free = list(range(b.size))
    for g, p in zip(a.gains, a.poles):
        j = min(free, key=lambda i: abs(b.poles[i] - p))
        if abs(b.poles[j] - p) > tol or abs(b.gains[j] - g) > tol:
            return False
        free.remove(j)
    return True


def sequence_to_json(x) -> dict:
    x = as_sequence(x)
    return {"samples": [[v.real, v.imag] for v in x]}


def sequence_from_json(doc: dict) -> np.ndarray:
    try:
        return as_sequence([complex(*s) for s in doc["samples"]])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed Sequence document: {exc}") from exc
