"""Pole placement and identifiability toolkit for linear recurrent models."""

__version__ = "0.1.0"

from .errors import PolebenchError
from .signal_core import OrderedParams, ParamSet, convolve, dtft, impulse_response, params_equal
from .recovery import brute_force_recover, deconvolve, prony_recover, recover_from_io, solve_gains
from .landscape import Objective, numerical_hessian, surface_grid, two_pole_f, two_pole_hessian
from .rnn_engine import ReservoirModel, TrainConfig, bptt_gradients, forward, train
from .esn import ReservoirSpec, fit_readout, init_reservoir
from .channel import ChannelSpec, bit_error_rate, generate

__all__ = [
    "PolebenchError",
    "OrderedParams", "ParamSet", "convolve", "dtft", "impulse_response", "params_equal",
    "brute_force_recover", "deconvolve", "prony_recover", "recover_from_io", "solve_gains",
    "Objective", "numerical_hessian", "surface_grid", "two_pole_f", "two_pole_hessian",
    "ReservoirModel", "TrainConfig", "bptt_gradients", "forward", "train",
    "ReservoirSpec", "fit_readout", "init_reservoir",
    "ChannelSpec", "bit_error_rate", "generate",
]
