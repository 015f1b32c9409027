"""Experiment runners behind the ``polebench`` command line.

Each runner takes an :class:`ExperimentConfig`, writes CSV/JSON artifacts to
``config.out`` and returns a dict summary. CSV contents depend only on the
config, never on timing, so reruns reproduce them byte for byte.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import platform
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .channel import ChannelSpec, bit_error_rate, generate, inverse_channel_poles
from .errors import ConfigError, Diverged, InsufficientPilots
from .esn import CONFIGURED, RANDOM, ReservoirSpec, esn_predict, init_reservoir, train_readout
from .landscape import Objective, surface_grid, two_pole_hessian
from .recovery import brute_force_recover, recover_from_io
from .rnn_engine import TrainConfig, condition_number, eigen_magnitudes, train
from .signal_core import ParamSet, convolve, impulse_response, params_equal, sequence_from_json, sequence_to_json

EXPERIMENTS = ("landscape", "training_dynamics", "spectral_density", "symbol_detection", "recover", "fixtures")
CHANNEL_SEED_OFFSET = 10_000
MODELS = ("rnn", "esn_random", "esn_configured")


@dataclass
class ExperimentConfig:
    experiment: str = "landscape"
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    out: str = "polebench_out"
    # landscape
    c: float = 0.75
    d: float = 0.8
    grid_min: float = 0.0
    grid_max: float = 0.95
    grid_step: float = 0.01
    # reservoirs and training
    n_hidden: int = 32
    spectral_radius: float = 0.9
    input_scale: float = 1.0
    ridge: float = 1e-8
    configured_poles: list | None = None
    epochs: int = 500
    learning_rate: float = 0.05
    optimizer: str = "gd"
    clip_norm: float | None = None
    freeze: list = field(default_factory=list)
    eig_epochs: list | None = None
    hist_bins: int = 30
    hist_max: float = 1.5
    # channel
    taps: list = field(default_factory=lambda: [1.0, 0.6, 0.3])
    snr_db: float | None = 15.0
    modulation: str = "BPSK"
    n_train_symbols: int = 200
    n_test_symbols: int = 5000
    # recovery
    io: str | None = None
    order: int | None = None
    brute_grid_step: float | None = None

    def __post_init__(self):
        self.experiment = self.experiment.replace("-", "_")
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if isinstance(self.seeds, int):
            self.seeds = [self.seeds]
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if any(int(s) != s or s < 0 for s in self.seeds):
            raise ConfigError(f"seeds must be nonnegative integers, got {self.seeds}")
        self.seeds = [int(s) for s in self.seeds]
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be nonnegative")
        if self.grid_step <= 0:
            raise ConfigError("grid_step must be positive")
        if not -1 < self.grid_min <= self.grid_max < 1:
            raise ConfigError("grid range must satisfy -1 < grid_min <= grid_max < 1")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config keys {unknown}; valid keys are {sorted(known)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"config {path} must be a flat JSON object")
        doc.update(overrides)
        return cls.from_dict(doc)

    # derived specs ------------------------------------------------------

    def channel(self, seed: int) -> ChannelSpec:
        return ChannelSpec(
            taps=self.taps, snr_db=self.snr_db, modulation=self.modulation,
            n_train_symbols=self.n_train_symbols, n_test_symbols=self.n_test_symbols,
            seed=seed + CHANNEL_SEED_OFFSET,
        )

    def reservoir(self, kind: str, seed: int, ch: ChannelSpec) -> ReservoirSpec:
        poles = []
        if kind == CONFIGURED:
            poles = self.configured_poles
            poles = inverse_channel_poles(ch.taps) if poles is None else [_parse_complex(p) for p in poles]
        return ReservoirSpec(
            kind=kind, n_hidden=self.n_hidden, spectral_radius=self.spectral_radius, poles=poles,
            input_scale=self.input_scale, seed=seed, n_in=ch.n_in, n_out=ch.n_out,
        )

    def train_config(self, seed: int, record_eigs: bool = True) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs, learning_rate=self.learning_rate, optimizer=self.optimizer,
            seed=seed, clip_norm=self.clip_norm, freeze=tuple(self.freeze), record_eigs=record_eigs,
        )

    def logged_epochs(self) -> list:
        if self.eig_epochs is not None:
            return sorted({int(e) for e in self.eig_epochs if 0 <= int(e) < self.epochs})
        e = self.epochs
        return sorted({0, e // 4, e // 2, (3 * e) // 4, e - 1})


def _parse_complex(v):
    if isinstance(v, (list, tuple)):
        return complex(*v)
    return complex(v)


# ------------------------------------------------------------------------
# shared plumbing

def _threads(n_jobs: int) -> int:
    cap = os.environ.get("POLEBENCH_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(limit, n_jobs))


def _map_seeds(fn, seeds):
    with ThreadPoolExecutor(max_workers=_threads(len(seeds))) as pool:
        return list(pool.map(fn, seeds))


def _outdir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory {out} is not writable: {exc}") from exc
    return out


def _write_json(path: Path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def _finite_or_none(x):
    return x if x is not None and math.isfinite(x) else None


def _write_metadata(out: Path, cfg: ExperimentConfig, extra: dict | None = None):
    doc = {
        "experiment": cfg.experiment,
        "config": dataclasses.asdict(cfg),
        "seeds": cfg.seeds,
        "versions": {"polebench": __version__, "numpy": np.__version__, "python": platform.python_version()},
    }
    if extra:
        doc.update(extra)
    _write_json(out / "metadata.json", doc)


def plateau_stats(losses) -> dict:
    """Early relative drop (first 10% of epochs) and late relative drop (final half)."""
    L = np.asarray(losses, dtype=float)
    E = len(L)
    early = (L[0] - L[E // 10]) / L[0] if L[0] > 0 else 0.0
    late = (L[E // 2] - L[-1]) / L[E // 2] if L[E // 2] > 0 else 0.0
    return {
        "early_drop": float(early),
        "late_drop": float(late),
        "plateau": bool(early > 0.5 and late < 0.05),
        "plateau_loss": float(L[-1]),
    }


def _train_seed(cfg: ExperimentConfig, seed: int, record_eigs: bool = True) -> dict:
    ch = cfg.channel(seed)
    data = generate(ch)
    n = data.n_train
    X, Y = data.inputs, data.targets
    Xp, Yp = X[:, :n], Y[:, :n]

    res = {"seed": seed, "data": data}
    init = init_reservoir(cfg.reservoir(RANDOM, seed, ch))
    t0 = time.perf_counter()
    try:
        model, trace = train(init, Xp, Yp, cfg.train_config(seed, record_eigs))
    except Diverged as exc:
        # deploy the lowest-loss checkpoint; the trace keeps the divergence marker
        model, trace = exc.best_model, exc.trace
    res["rnn"] = {"model": model, "trace": trace, "init": init, "wall_time": time.perf_counter() - t0}

    for name, kind in (("esn_random", RANDOM), ("esn_configured", CONFIGURED)):
        base = init if kind == RANDOM else init_reservoir(cfg.reservoir(kind, seed, ch))
        t0 = time.perf_counter()
        fitted, loss = train_readout(base, Xp, Yp, cfg.ridge)
        res[name] = {
            "model": fitted, "loss": loss, "wall_time": time.perf_counter() - t0,
            "eigs": eigen_magnitudes(fitted.w_rec), "cond": condition_number(fitted.w_rec),
        }
    return res


# ------------------------------------------------------------------------
# runners

def run_landscape(cfg: ExperimentConfig) -> dict:
    out = _outdir(cfg)
    obj = Objective.two_pole(cfg.c, cfg.d)
    grid = surface_grid(obj, xrange=(cfg.grid_min, cfg.grid_max), yrange=(cfg.grid_min, cfg.grid_max),
                        step=cfg.grid_step)
    grid.to_csv(out / "surface.csv")
    hess = two_pole_hessian(cfg.c, cfg.d)
    x, y, fmin = grid.argmin()
    summary = {
        "c": cfg.c,
        "d": cfg.d,
        "grid_points": int(grid.values.size),
        "missing_cells": int(np.isnan(grid.values).sum()),
        "grid_min": {"x": x, "y": y, "f": fmin},
        "grid_zeros": grid.local_minima(),
        "known_optima": grid.optima,
        "hessian": hess.to_json(),
    }
    _write_json(out / "landscape_summary.json", summary)
    _write_metadata(out, cfg)
    return summary


def run_training_dynamics(cfg: ExperimentConfig) -> dict:
    out = _outdir(cfg)
    results = _map_seeds(lambda s: _train_seed(cfg, s), cfg.seeds)
    per_seed = []
    for res in results:
        seed, rnn = res["seed"], res["rnn"]
        trace = rnn["trace"]
        trace.to_csv(out / f"trace_rnn_seed{seed}.csv")
        trace.eigs_to_csv(out / f"eigs_rnn_seed{seed}.csv")
        stats = plateau_stats(trace.loss) if len(trace) else {}
        per_seed.append({
            "seed": seed,
            "diverged_at": trace.diverged_at,
            **stats,
            "esn_random_loss": res["esn_random"]["loss"],
            "esn_configured_loss": res["esn_configured"]["loss"],
            "esn_below_plateau": bool(len(trace) and res["esn_random"]["loss"] <= trace.loss[-1]),
            "cond_w_rec_first": _finite_or_none(trace.cond_w_rec[0]) if len(trace) else None,
            "cond_w_rec_last": _finite_or_none(trace.cond_w_rec[-1]) if len(trace) else None,
            "grad_norm_rec_last": trace.grad_norm_rec[-1] if len(trace) else None,
        })
    with open(out / "baselines.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "model", "loss", "cond_w_rec"])
        for res in results:
            for name in ("esn_random", "esn_configured"):
                w.writerow([res["seed"], name, repr(res[name]["loss"]), repr(res[name]["cond"])])
    summary = {"seeds": per_seed}
    _write_json(out / "training_summary.json", summary)
    _write_metadata(out, cfg, {"wall_times": _wall_times(results)})
    return summary


def _wall_times(results):
    return {str(r["seed"]): {m: r[m]["wall_time"] for m in MODELS} for r in results}


def _density_rows(model, seed, epoch, mags, bins):
    hist, _ = np.histogram(mags, bins=bins, density=True)
    return [[model, seed, epoch, repr(float(bins[i])), repr(float(bins[i + 1])), repr(float(hist[i]))]
            for i in range(len(hist))]


def run_spectral_density(cfg: ExperimentConfig) -> dict:
    out = _outdir(cfg)
    results = _map_seeds(lambda s: _train_seed(cfg, s), cfg.seeds)
    bins = np.linspace(0.0, cfg.hist_max, cfg.hist_bins + 1)
    epochs = cfg.logged_epochs()
    dens, disp, per_seed = [], [], []
    for res in results:
        seed = res["seed"]
        trace = res["rnn"]["trace"]
        logged = [e for e in epochs if e < len(trace)]
        for e in logged:
            mags = trace.eig_mags[e]
            dens += _density_rows("rnn", seed, e, mags, bins)
            disp.append(["rnn", seed, e, repr(float(np.std(mags))), repr(float(mags[0]))])
        for name in ("esn_random", "esn_configured"):
            mags = res[name]["eigs"]
            dens += _density_rows(name, seed, 0, mags, bins)
            disp.append([name, seed, 0, repr(float(np.std(mags))), repr(float(mags[0]))])
        first, last = trace.eig_mags[0], trace.eig_mags[len(trace) - 1]
        per_seed.append({
            "seed": seed,
            "diverged_at": trace.diverged_at,
            "std_first": float(np.std(first)),
            "std_last": float(np.std(last)),
            "spread_increased": bool(np.std(last) > np.std(first)),
            "max_abs_eig_last": float(last[0]),
        })
    with open(out / "density.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "seed", "epoch", "bin_lo", "bin_hi", "density"])
        w.writerows(dens)
    with open(out / "dispersion.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "seed", "epoch", "std_abs_eig", "max_abs_eig"])
        w.writerows(disp)
    summary = {"seeds": per_seed, "logged_epochs": epochs}
    _write_json(out / "spectral_summary.json", summary)
    _write_metadata(out, cfg, {"wall_times": _wall_times(results)})
    return summary


def symbol_detection_seed(cfg: ExperimentConfig, seed: int) -> dict:
    """BER of every model for one seed, evaluated on the post-pilot segment."""
    res = _train_seed(cfg, seed, record_eigs=False)
    data = res["data"]
    n = data.n_train
    X, Y = data.inputs, data.targets
    row = {"seed": seed}
    for name in MODELS:
        pred = esn_predict(res[name]["model"], X, strict=False)
        row[name] = {
            "ber": bit_error_rate(pred[:, n:], Y[:, n:]),
            "wall_time": res[name]["wall_time"],
            "n_train_symbols": n,
            "n_test_bits": int(Y[:, n:].size),
        }
    row["rnn"]["diverged_at"] = res["rnn"]["trace"].diverged_at
    return row


def run_symbol_detection(cfg: ExperimentConfig) -> dict:
    out = _outdir(cfg)
    if cfg.n_train_symbols < cfg.n_hidden:
        warnings.warn(
            f"{cfg.n_train_symbols} pilots for {cfg.n_hidden} hidden units: readout is underdetermined",
            InsufficientPilots,
        )
    rows = _map_seeds(lambda s: symbol_detection_seed(cfg, s), cfg.seeds)
    with open(out / "ber.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "model", "ber", "n_train_symbols", "n_test_bits"])
        for row in rows:
            for name in MODELS:
                r = row[name]
                w.writerow([row["seed"], name, repr(r["ber"]), r["n_train_symbols"], r["n_test_bits"]])
    aggregate = {}
    for name in MODELS:
        bers = np.array([row[name]["ber"] for row in rows])
        aggregate[name] = {
            "mean_ber": float(bers.mean()),
            "std_ber": float(bers.std()),
            "mean_wall_time": float(np.mean([row[name]["wall_time"] for row in rows])),
        }
    summary = {"aggregate": aggregate, "per_seed": rows}
    _write_json(out / "ber_summary.json", summary)
    _write_metadata(out, cfg)
    return summary


def load_io_pair(path):
    """Read ``{"x": Sequence, "y": Sequence, "order": K, "truth": ParamSet?}``."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
        x = sequence_from_json(doc["x"])
        y = sequence_from_json(doc["y"])
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read I/O pair {path}: {exc}") from exc
    truth = ParamSet.from_json(doc["truth"]) if doc.get("truth") else None
    return x, y, doc.get("order"), truth


def run_recover(cfg: ExperimentConfig) -> dict:
    if cfg.io is None:
        raise ConfigError("recover needs an I/O pair file (config key 'io' or --io)")
    out = _outdir(cfg)
    x, y, order, truth = load_io_pair(cfg.io)
    order = cfg.order if cfg.order is not None else order
    if order is None:
        raise ConfigError("recover needs a model order (config key 'order', --order, or in the I/O file)")
    result = recover_from_io(x, y, int(order))
    doc = {"order": int(order), "params": result.params.to_json(), "residual": result.residual}
    if truth is not None:
        doc["matches_truth"] = params_equal(result.params, truth, 1e-6)
    if cfg.brute_grid_step is not None:
        from .recovery import deconvolve

        grid = np.arange(cfg.grid_min, cfg.grid_max + cfg.brute_grid_step / 2, cfg.brute_grid_step)
        bf = brute_force_recover(deconvolve(x, y), int(order), np.round(grid, 12))
        doc["brute_force"] = {
            "params": bf.params.to_json(),
            "residual": bf.residual,
            "agrees": params_equal(result.params, bf.params, cfg.brute_grid_step),
        }
    _write_json(out / "recovered.json", doc)
    _write_metadata(out, cfg)
    return doc


FIXTURE_TRUTH = ParamSet([(1.0, 0.5), (1.0, 0.25)])
FIXTURE_INPUT = [1.0, 0.3, -0.2, 0.1]


def _io_doc(x, truth: ParamSet, order: int):
    x = np.asarray(x, dtype=complex)
    y = convolve(impulse_response(truth, len(x)), x)
    return {"x": sequence_to_json(x), "y": sequence_to_json(y), "order": order, "truth": truth.to_json()}


def run_fixtures(cfg: ExperimentConfig) -> dict:
    """Deterministic I/O-pair fixtures for the ``recover`` command."""
    out = _outdir(cfg)
    fixtures = {
        "io_roundtrip.json": _io_doc(FIXTURE_INPUT, FIXTURE_TRUTH, 2),
        "io_zero_leading.json": _io_doc([0.0, 1.0, 0.3, -0.2], FIXTURE_TRUTH, 2),
        "io_order_too_large.json": _io_doc(FIXTURE_INPUT, ParamSet([(1.0, 0.5)]), 2),
    }
    for name, doc in fixtures.items():
        _write_json(out / name, doc)
    _write_metadata(out, cfg)
    return {"written": sorted(fixtures)}


RUNNERS = {
    "landscape": run_landscape,
    "training_dynamics": run_training_dynamics,
    "spectral_density": run_spectral_density,
    "symbol_detection": run_symbol_detection,
    "recover": run_recover,
    "fixtures": run_fixtures,
}


def run(cfg: ExperimentConfig) -> dict:
    return RUNNERS[cfg.experiment](cfg)
