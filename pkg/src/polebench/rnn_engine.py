"""Linear recurrent networks: simulation, exact BPTT and gradient training.

The network is

    h[t] = W_rec h[t-1] + W_in x[t],   h[-1] = 0
    y_hat[t] = W_out h[t]

with identity activation throughout, and the training loss is the mean
squared error over every output sample.
"""

from __future__ import annotations

import copy
import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import Diverged, NonFiniteState

MATRICES = ("w_in", "w_rec", "w_out")


@dataclass
class ReservoirModel:
    w_in: np.ndarray
    w_rec: np.ndarray
    w_out: np.ndarray

    def __post_init__(self):
        self.w_in = np.array(self.w_in, dtype=float, ndmin=2)
        self.w_rec = np.array(self.w_rec, dtype=float, ndmin=2)
        self.w_out = np.array(self.w_out, dtype=float, ndmin=2)
        n_h = self.w_rec.shape[0]
        if self.w_rec.shape != (n_h, n_h):
            raise ValueError(f"w_rec must be square, got {self.w_rec.shape}")
        if self.w_in.shape[0] != n_h:
            raise ValueError(f"w_in has {self.w_in.shape[0]} rows, expected {n_h}")
        if self.w_out.shape[1] != n_h:
            raise ValueError(f"w_out has {self.w_out.shape[1]} columns, expected {n_h}")
        for name in MATRICES:
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} has non-finite entries")

    @property
    def n_in(self) -> int:
        return self.w_in.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.w_rec.shape[0]

    @property
    def n_out(self) -> int:
        return self.w_out.shape[0]

    def copy(self) -> "ReservoirModel":
        return copy.deepcopy(self)

    def to_json(self) -> dict:
        return {name: getattr(self, name).tolist() for name in MATRICES}

    @classmethod
    def from_json(cls, doc: dict) -> "ReservoirModel":
        return cls(**{name: doc[name] for name in MATRICES})


class Gradients(NamedTuple):
    w_in: np.ndarray
    w_rec: np.ndarray
    w_out: np.ndarray


def _as_inputs(model, inputs):
    inputs = np.array(inputs, dtype=float, ndmin=2)
    if inputs.shape[0] != model.n_in:
        raise ValueError(f"inputs have {inputs.shape[0]} channels, model expects {model.n_in}")
    return inputs


def run_states(model: ReservoirModel, inputs, strict: bool = True) -> np.ndarray:
    """Hidden states, shape ``(n_hidden, T)``.

    With ``strict=False`` an overflowing state is returned as-is (inf/NaN)
    instead of raising.
    """
    inputs = _as_inputs(model, inputs)
    drive = model.w_in @ inputs
    states = np.empty_like(drive)
    h = np.zeros(model.n_hidden)
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(drive.shape[1]):
            h = model.w_rec @ h + drive[:, t]
            states[:, t] = h
    if strict and not np.all(np.isfinite(states)):
        bad = int(np.argmax(~np.all(np.isfinite(states), axis=0)))
        raise NonFiniteState(f"state overflowed at t={bad}; spectral radius of w_rec too large?")
    return states


def forward(model: ReservoirModel, inputs, strict: bool = True):
    """Return ``(states, outputs)`` for an input block of shape ``(n_in, T)``."""
    states = run_states(model, inputs, strict)
    with np.errstate(over="ignore", invalid="ignore"):
        return states, model.w_out @ states


def mse(outputs, targets) -> float:
    return float(np.mean((np.asarray(outputs) - np.asarray(targets)) ** 2))


def loss_and_gradients(model: ReservoirModel, inputs, targets):
    """Loss and exact gradients with respect to all three matrices.

    The state adjoint runs backwards as ``a[t] = W_rec^T a[t+1] + W_out^T delta[t]``,
    which unrolls to ``sum_{k>=t} (W_rec^T)^(k-t) W_out^T delta[k]``.
    """
    inputs = _as_inputs(model, inputs)
    targets = np.array(targets, dtype=float, ndmin=2)
    states, outputs = forward(model, inputs)
    if targets.shape != outputs.shape:
        raise ValueError(f"targets {targets.shape} do not match outputs {outputs.shape}")
    err = outputs - targets
    with np.errstate(over="ignore", invalid="ignore"):
        loss = float(np.mean(err**2))
        delta = 2.0 * err / err.size

        injected = model.w_out.T @ delta
        adj = np.empty_like(states)
        a = np.zeros(model.n_hidden)
        w_rec_t = model.w_rec.T
        for t in range(states.shape[1] - 1, -1, -1):
            a = w_rec_t @ a + injected[:, t]
            adj[:, t] = a

        g_out = delta @ states.T
        g_rec = adj[:, 1:] @ states[:, :-1].T
        g_in = adj @ inputs.T
    return loss, Gradients(g_in, g_rec, g_out)


def bptt_gradients(model: ReservoirModel, inputs, targets) -> Gradients:
    return loss_and_gradients(model, inputs, targets)[1]


def pole_gradient_scale(lam: complex, horizon: int) -> float:
    """``|sum_{j<horizon} lam^j|``: how a pole amplifies back-propagated error."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    return float(abs(np.sum(np.complex128(lam) ** np.arange(horizon))))


def eigen_magnitudes(w_rec) -> np.ndarray:
    """Eigenvalue magnitudes of a square matrix, descending."""
    w_rec = np.asarray(w_rec, dtype=float)
    if w_rec.ndim != 2 or w_rec.shape[0] != w_rec.shape[1]:
        raise ValueError("matrix must be square")
    return np.sort(np.abs(np.linalg.eigvals(w_rec)))[::-1]


def condition_number(w) -> float:
    """``sigma_max / sigma_min``; infinite for singular matrices."""
    s = np.linalg.svd(np.asarray(w, dtype=float), compute_uv=False)
    return float(s[0] / s[-1]) if s[-1] > 0 else math.inf


@dataclass
class TrainConfig:
    epochs: int = 500
    learning_rate: float = 0.05
    optimizer: str = "gd"  # "gd", "momentum" or "adam"
    seed: int = 0
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float | None = None
    freeze: tuple = ()
    record_eigs: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.optimizer not in ("gd", "momentum", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        unknown = set(self.freeze) - set(MATRICES)
        if unknown:
            raise ValueError(f"cannot freeze unknown matrices {sorted(unknown)}")


@dataclass
class TrainingTrace:
    """Per-epoch diagnostics, recorded at the parameters each epoch starts from."""

    loss: list = field(default_factory=list)
    grad_norm_rec: list = field(default_factory=list)
    cond_w_rec: list = field(default_factory=list)
    eig_mags: list = field(default_factory=list)
    diverged_at: int | None = None

    def __len__(self):
        return len(self.loss)

    def append(self, loss, grad_norm_rec, cond, eigs):
        self.loss.append(float(loss))
        self.grad_norm_rec.append(float(grad_norm_rec))
        self.cond_w_rec.append(float(cond))
        self.eig_mags.append(eigs)

    def to_csv(self, path):
        """One row per epoch; ``diverged`` is 1 on the last row of a run that blew up."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "loss", "grad_norm_rec", "cond_w_rec", "diverged"])
            last = len(self) - 1
            for e in range(len(self)):
                flag = int(self.diverged_at is not None and e == last)
                w.writerow([e, repr(self.loss[e]), repr(self.grad_norm_rec[e]), repr(self.cond_w_rec[e]), flag])

    def eigs_to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "index", "magnitude"])
            for e, mags in enumerate(self.eig_mags):
                if mags is None:
                    continue
                for i, m in enumerate(mags):
                    w.writerow([e, i, repr(float(m))])


class _Optimizer:
    def __init__(self, config: TrainConfig):
        self.cfg = config
        self.state = {}
        self.t = 0

    def step(self, params: dict, grads: dict):
        cfg = self.cfg
        self.t += 1
        for name, g in grads.items():
            if cfg.optimizer == "gd":
                upd = g
            elif cfg.optimizer == "momentum":
                v = cfg.momentum * self.state.get(name, 0.0) + g
                self.state[name] = v
                upd = v
            else:
                m, s = self.state.get(name, (0.0, 0.0))
                m = cfg.beta1 * m + (1 - cfg.beta1) * g
                s = cfg.beta2 * s + (1 - cfg.beta2) * g * g
                self.state[name] = (m, s)
                m_hat = m / (1 - cfg.beta1**self.t)
                s_hat = s / (1 - cfg.beta2**self.t)
                upd = m_hat / (np.sqrt(s_hat) + cfg.eps)
            params[name] = params[name] - cfg.learning_rate * upd


def train(model: ReservoirModel, inputs, targets, config: TrainConfig):
    """Full-batch gradient training of all non-frozen matrices.

    Returns ``(trained_model, trace)``; ``model`` itself is not modified.

    Raises
    ------
    Diverged
        If the loss or state becomes non-finite. The trace so far, the last
        finite model and the lowest-loss checkpoint ride along on the exception.
    """
    model = model.copy()
    trace = TrainingTrace()
    opt = _Optimizer(config)
    trainable = [m for m in MATRICES if m not in config.freeze]
    best_loss, best = math.inf, model

    for epoch in range(config.epochs):
        try:
            loss, grads = loss_and_gradients(model, inputs, targets)
        except NonFiniteState as exc:
            trace.diverged_at = epoch
            raise Diverged(f"state overflow at epoch {epoch}: {exc}", trace, model, best) from exc
        if not math.isfinite(loss):
            trace.diverged_at = epoch
            raise Diverged(f"loss became {loss} at epoch {epoch}", trace, model, best)

        eigs = eigen_magnitudes(model.w_rec) if config.record_eigs else None
        trace.append(loss, np.linalg.norm(grads.w_rec), condition_number(model.w_rec), eigs)
        if loss < best_loss:
            best_loss, best = loss, model.copy()

        step = {m: getattr(grads, m) for m in trainable}
        if config.clip_norm is not None:
            total = math.sqrt(sum(float(np.sum(g * g)) for g in step.values()))
            if total > config.clip_norm:
                step = {m: g * (config.clip_norm / total) for m, g in step.items()}
        params = {m: getattr(model, m) for m in trainable}
        opt.step(params, step)
        if not all(np.all(np.isfinite(p)) for p in params.values()):
            trace.diverged_at = epoch + 1
            raise Diverged(f"parameters became non-finite after epoch {epoch}", trace, model, best)
        for m, p in params.items():
            setattr(model, m, p)

    return model, trace
