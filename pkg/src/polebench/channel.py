"""Synthetic ISI channel, modulation and hard-decision detection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

BPSK = "BPSK"
QPSK = "QPSK"


@dataclass
class ChannelSpec:
    taps: list = field(default_factory=lambda: [1.0, 0.6, 0.3])
    snr_db: float | None = 15.0  # None (or inf) means noise-free
    modulation: str = BPSK
    n_train_symbols: int = 200
    n_test_symbols: int = 5000
    seed: int = 0

    def __post_init__(self):
        self.taps = [complex(t) for t in self.taps]
        if not self.taps or self.taps[0] == 0:
            raise ConfigError("channel taps must be nonempty with taps[0] != 0")
        if self.modulation not in (BPSK, QPSK):
            raise ConfigError(f"modulation must be BPSK or QPSK, got {self.modulation!r}")
        if self.n_train_symbols < 1 or self.n_test_symbols < 1:
            raise ConfigError("symbol counts must be positive")

    @property
    def noise_free(self) -> bool:
        return self.snr_db is None or math.isinf(self.snr_db)

    @property
    def complex_valued(self) -> bool:
        return self.modulation == QPSK or any(t.imag != 0 for t in self.taps)

    @property
    def n_in(self) -> int:
        return 2 if self.complex_valued else 1

    @property
    def n_out(self) -> int:
        return 2 if self.modulation == QPSK else 1

    @property
    def bits_per_symbol(self) -> int:
        return 2 if self.modulation == QPSK else 1


def split(z, channels: int) -> np.ndarray:
    """Complex stream -> ``(channels, T)`` real block (real, imag)."""
    z = np.asarray(z)
    if channels == 1:
        return np.real(z)[None, :].astype(float)
    return np.stack([z.real, z.imag]).astype(float)


def draw_symbols(rng, n: int, modulation: str) -> np.ndarray:
    """Unit-energy BPSK or Gray-free QPSK symbols."""
    if modulation == BPSK:
        return rng.choice([-1.0, 1.0], size=n).astype(complex)
    re = rng.choice([-1.0, 1.0], size=n)
    im = rng.choice([-1.0, 1.0], size=n)
    return (re + 1j * im) / math.sqrt(2)


def transmit(spec: ChannelSpec, symbols, rng) -> np.ndarray:
    """FIR channel followed by AWGN at ``spec.snr_db`` relative to unit symbol energy."""
    symbols = np.asarray(symbols, dtype=complex)
    rx = np.convolve(np.asarray(spec.taps), symbols)[: len(symbols)]
    if spec.noise_free:
        return rx
    var = 10 ** (-spec.snr_db / 10)
    if spec.complex_valued:
        noise = (rng.standard_normal(len(rx)) + 1j * rng.standard_normal(len(rx))) * math.sqrt(var / 2)
    else:
        noise = rng.standard_normal(len(rx)) * math.sqrt(var)
    return rx + noise


@dataclass
class SymbolData:
    spec: ChannelSpec
    symbols: np.ndarray
    received: np.ndarray

    @property
    def gain(self) -> float:
        """AGC gain: unit average power over the pilot segment."""
        power = np.mean(np.abs(self.received[: self.n_train]) ** 2)
        return 1.0 / math.sqrt(power) if power > 0 else 1.0

    @property
    def inputs(self) -> np.ndarray:
        return split(self.received * self.gain, self.spec.n_in)

    @property
    def targets(self) -> np.ndarray:
        return split(self.symbols, self.spec.n_out)

    @property
    def n_train(self) -> int:
        return self.spec.n_train_symbols


def generate(spec: ChannelSpec) -> SymbolData:
    """One contiguous stream: pilots first, then test symbols."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n_train_symbols + spec.n_test_symbols
    symbols = draw_symbols(rng, n, spec.modulation)
    return SymbolData(spec, symbols, transmit(spec, symbols, rng))


def decide(outputs) -> np.ndarray:
    """Per-channel sign decision on a ``(channels, T)`` block, ties to +1."""
    return np.where(np.asarray(outputs) >= 0, 1.0, -1.0)


def bit_error_rate(outputs, targets) -> float:
    """Fraction of wrongly decided bits; each real channel carries one bit.

    A non-finite output sample (an overflowed detector) counts as an error.
    """
    outputs = np.asarray(outputs)
    wrong = (decide(outputs) != decide(targets)) | ~np.isfinite(outputs)
    return float(np.mean(wrong))


def inverse_channel_poles(taps) -> list:
    """Zeros of the FIR channel inside the unit circle, closed under conjugation.

    For a minimum-phase channel these are exactly the poles of its causal
    inverse, which is where a configured reservoir puts its eigenvalues.
    """
    taps = np.asarray(taps, dtype=complex)
    if len(taps) < 2:
        return []
    zeros = np.roots(taps)
    zeros = zeros[np.abs(zeros) < 1]
    out: list = []
    for z in zeros:
        z = complex(z)
        if abs(z.imag) < 1e-12:
            z = complex(z.real, 0.0)
        for cand in (z, z.conjugate()):
            if all(abs(cand - q) > 1e-9 for q in out):
                out.append(cand)
    # exact conjugate pairs so the real block realisation is well-defined
    fixed = []
    for z in out:
        if z.imag < 0:
            continue
        fixed.append(z)
        if z.imag > 0:
            fixed.append(z.conjugate())
    return fixed
