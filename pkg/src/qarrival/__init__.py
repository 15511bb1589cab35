"""Arrival-time toolkit for a 1D particle meeting an absorbing step detector.

Subpackages by theme:

    core        grids, wave functions, Gaussian packets, transforms
    dynamics    split-step absorbing evolution and arrival observables
    classical   the classical absorbing analogue (closed forms)
    scattering  propagators, transmission/reflection, state decomposition
    histories   decoherent-histories class operators and diagnostics
    wigner      phase-space transforms and crossing integrals
    cli         scenario runner (configs in, CSV/JSON out)
"""

from .core import (Grid1D, WaveFunction, GaussianPacketSpec, TimeSeries,
                   make_gaussian, packet_amplitudes, superpose, norm2, overlap,
                   momentum_representation, position_representation,
                   theta_neg_weights, theta_pos_weights, energy_moments)
from .dynamics import (StepPotentialSpec, EvolutionConfig, evolve_step,
                       evolve_free, survival_series, arrival_series,
                       current_at_origin, current_series, kijowski_series,
                       resolution_kernel, convolved_current)
from . import classical, histories, scattering, wigner
from .errors import (QArrivalError, InvalidSpec, GridMismatch, SpillError,
                     StepError, PositiveMomentumError, ZeroTime, ZeroMomentum,
                     RegimeError, ConsistencyError, ParseError, ValidationError)

__version__ = "0.1.0"
