"""Grids, wave functions, Gaussian packets, and position/momentum transforms.

Conventions (used everywhere in this package):

    hbar = 1; the particle mass m is an explicit parameter, default 1.

    Position grid:  x_i = x_min + i dx,  i = 0 .. n-1,  dx = (x_max - x_min)/n.
    The origin must be interior to the grid since all the physics (absorption,
    crossing, currents) happens at x = 0.

    Momentum grid:  conjugate FFT frequencies p = 2 pi k/(n dx) spanning
    [-pi/dx, pi/dx) with spacing dp = 2 pi/(n dx).

    Fourier pair:   psi(x) = (2 pi)^(-1/2) int dp e^{+ipx} psi~(p)
                    psi~(p) = (2 pi)^(-1/2) int dx e^{-ipx} psi(x)
    so a plane wave e^{ipx} transforms to a peak at momentum p.

    Step function on the grid: theta(-x) has weight 1 for x < 0, 1/2 at a grid
    point lying exactly on x = 0, and 0 for x > 0 (midpoint rule for the
    discontinuity). theta(x) is its complement. All modules share this
    convention through ``theta_neg_weights`` / ``theta_pos_weights``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import GridMismatch, InvalidSpec, SpillError

__all__ = [
    "Grid1D",
    "WaveFunction",
    "GaussianPacketSpec",
    "TimeSeries",
    "make_gaussian",
    "packet_amplitudes",
    "superpose",
    "norm2",
    "overlap",
    "momentum_representation",
    "position_representation",
    "theta_neg_weights",
    "theta_pos_weights",
    "position_mean",
    "momentum_mean",
    "energy_moments",
]


@dataclass(frozen=True)
class Grid1D:
    """Uniform spatial grid with its conjugate momentum grid.

    ``n_points`` should preferably be a power of two (FFT efficiency); any
    even length works.
    """

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if not self.x_min < 0.0 < self.x_max:
            raise InvalidSpec(
                f"grid must contain the origin in its interior, got [{self.x_min}, {self.x_max}]"
            )
        if self.n_points < 2:
            raise InvalidSpec("n_points must be at least 2")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_points

    @property
    def dp(self) -> float:
        return 2.0 * np.pi / (self.n_points * self.dx)

    @cached_property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    @cached_property
    def p_fft(self) -> np.ndarray:
        """Momentum grid in FFT ordering (0, +, ..., -)."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.dx)

    @cached_property
    def p(self) -> np.ndarray:
        """Momentum grid in ascending order, spanning [-pi/dx, pi/dx)."""
        return np.fft.fftshift(self.p_fft)

    @cached_property
    def _theta_neg(self) -> np.ndarray:
        w = np.where(self.x < 0.0, 1.0, 0.0)
        on_zero = np.abs(self.x) < 1e-12 * max(self.dx, 1.0)
        w[on_zero] = 0.5
        w.setflags(write=False)
        return w


def theta_neg_weights(grid: Grid1D) -> np.ndarray:
    """Grid weights for theta(-x): 1 for x<0, 1/2 exactly at 0, 0 for x>0."""
    return grid._theta_neg


def theta_pos_weights(grid: Grid1D) -> np.ndarray:
    """Grid weights for theta(x), the complement of ``theta_neg_weights``."""
    return 1.0 - grid._theta_neg


@dataclass
class WaveFunction:
    """Complex amplitudes on a grid at a given time.

    ``space`` is "x" for position amplitudes on ``grid.x`` or "p" for momentum
    amplitudes on ``grid.p`` (ascending order). The squared norm uses the
    matching measure (dx or dp) and stays at or below 1 under absorption.
    """

    grid: Grid1D
    amplitudes: np.ndarray
    time: float = 0.0
    space: str = "x"

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (self.grid.n_points,):
            raise GridMismatch(
                f"amplitude array of length {self.amplitudes.shape} does not match "
                f"grid with {self.grid.n_points} points"
            )
        if self.space not in ("x", "p"):
            raise InvalidSpec(f"space must be 'x' or 'p', got {self.space!r}")

    @property
    def measure(self) -> float:
        return self.grid.dx if self.space == "x" else self.grid.dp

    def axis(self) -> np.ndarray:
        return self.grid.x if self.space == "x" else self.grid.p

    def copy(self) -> "WaveFunction":
        return WaveFunction(self.grid, self.amplitudes.copy(), self.time, self.space)

    def edge_amplitude(self) -> float:
        a = np.abs(self.amplitudes)
        return float(max(a[0], a[-1]))

    def check_spill(self, threshold: float):
        edge = self.edge_amplitude()
        if edge > threshold:
            raise SpillError(
                f"edge amplitude {edge:.3e} exceeds spill threshold {threshold:.3e} "
                f"at t={self.time:g}; enlarge the grid"
            )


@dataclass(frozen=True)
class GaussianPacketSpec:
    """Parameters of an incoming Gaussian packet: centre q0 > 0, mean momentum
    p0 < 0, spatial width sigma."""

    q0: float
    p0: float
    sigma: float
    mass: float = 1.0

    def __post_init__(self):
        problems = []
        if not self.q0 > 0:
            problems.append(f"q0 must be > 0 (got {self.q0})")
        if not self.p0 < 0:
            problems.append(f"p0 must be < 0 (got {self.p0})")
        if not self.sigma > 0:
            problems.append(f"sigma must be > 0 (got {self.sigma})")
        if not self.mass > 0:
            problems.append(f"mass must be > 0 (got {self.mass})")
        if problems:
            raise InvalidSpec("; ".join(problems))

    @property
    def arrival_time(self) -> float:
        """Classical arrival time of the packet centre, m q0 / |p0|."""
        return self.mass * self.q0 / abs(self.p0)

    @property
    def zeno_time(self) -> float:
        """Time to traverse one spatial width, m sigma / |p0| (the temporal
        imprint of the packet at the origin)."""
        return self.mass * self.sigma / abs(self.p0)

    @property
    def energy(self) -> float:
        return self.p0**2 / (2.0 * self.mass)


@dataclass
class TimeSeries:
    """Uniformly sampled time-dependent quantity."""

    t0: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if not self.dt > 0:
            raise InvalidSpec(f"dt must be > 0 (got {self.dt})")
        if len(self.values) < 2:
            raise InvalidSpec("a time series needs at least 2 samples")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.values))

    def __len__(self) -> int:
        return len(self.values)


def packet_amplitudes(grid: Grid1D, q0: float, p0: float, sigma: float) -> np.ndarray:
    """Sample (2 pi sigma^2)^(-1/4) exp(-(x-q0)^2/(4 sigma^2) + i p0 x) on the grid.

    No sign constraints; used both by ``make_gaussian`` and by tests that need
    stationary (p0 = 0) or otherwise unconstrained Gaussians.
    """
    x = grid.x
    return ((2.0 * np.pi * sigma**2) ** (-0.25)
            * np.exp(-((x - q0) ** 2) / (4.0 * sigma**2) + 1j * p0 * x))


def make_gaussian(spec: GaussianPacketSpec, grid: Grid1D,
                  edge_threshold: float = 1e-8) -> WaveFunction:
    """Construct the normalized Gaussian packet of ``spec`` at t = 0.

    Raises SpillError if the sampled amplitude at either grid edge exceeds
    ``edge_threshold`` (the grid is too narrow for this packet), and
    InvalidSpec if q0 lies outside the grid.
    """
    if not (grid.x_min < spec.q0 < grid.x_max):
        raise InvalidSpec(f"q0={spec.q0} lies outside the grid [{grid.x_min}, {grid.x_max}]")
    psi = WaveFunction(grid, packet_amplitudes(grid, spec.q0, spec.p0, spec.sigma), time=0.0)
    psi.check_spill(edge_threshold)
    return psi


def superpose(states, coefficients, renormalize: bool = True) -> WaveFunction:
    """Linear combination of states on a common grid, optionally renormalized."""
    states = list(states)
    first = states[0]
    out = np.zeros_like(first.amplitudes)
    for c, s in zip(coefficients, states):
        if s.grid is not first.grid and s.grid != first.grid:
            raise GridMismatch("superposition components live on different grids")
        if s.space != first.space or s.time != first.time:
            raise GridMismatch("superposition components differ in representation or time")
        out += c * s.amplitudes
    psi = WaveFunction(first.grid, out, first.time, first.space)
    if renormalize:
        n2 = norm2(psi)
        if n2 <= 0:
            raise InvalidSpec("cannot normalize the zero state")
        psi.amplitudes /= np.sqrt(n2)
    return psi


def norm2(psi: WaveFunction) -> float:
    """Squared norm sum |psi_i|^2 * measure."""
    return float(np.sum(np.abs(psi.amplitudes) ** 2) * psi.measure)


def overlap(a: WaveFunction, b: WaveFunction) -> complex:
    """Inner product <a|b> = sum conj(a_i) b_i * measure.

    Requires both states on the same grid, representation and timestamp.
    """
    if a.grid != b.grid:
        raise GridMismatch("states live on different grids")
    if a.space != b.space:
        raise GridMismatch(f"states in different representations ({a.space} vs {b.space})")
    if a.time != b.time:
        raise GridMismatch(f"states at different times ({a.time} vs {b.time})")
    return complex(np.vdot(a.amplitudes, b.amplitudes) * a.measure)


def momentum_representation(psi: WaveFunction) -> WaveFunction:
    """Unitary transform to momentum amplitudes on the ascending grid ``grid.p``.

    Parseval holds to machine precision: norm2 is preserved.
    """
    if psi.space == "p":
        return psi.copy()
    g = psi.grid
    ft = np.fft.fft(psi.amplitudes) * (g.dx / np.sqrt(2.0 * np.pi))
    ft *= np.exp(-1j * g.p_fft * g.x_min)
    return WaveFunction(g, np.fft.fftshift(ft), psi.time, space="p")


def position_representation(psi: WaveFunction) -> WaveFunction:
    """Inverse of ``momentum_representation``."""
    if psi.space == "x":
        return psi.copy()
    g = psi.grid
    ft = np.fft.ifftshift(psi.amplitudes) * np.exp(1j * g.p_fft * g.x_min)
    amps = np.fft.ifft(ft) * (g.dp * g.n_points / np.sqrt(2.0 * np.pi))
    return WaveFunction(g, amps, psi.time, space="x")


def position_mean(psi: WaveFunction) -> float:
    """<x> by grid quadrature (position representation required)."""
    if psi.space != "x":
        raise GridMismatch("position_mean needs a position-space state")
    w = np.abs(psi.amplitudes) ** 2
    return float(np.sum(psi.grid.x * w) * psi.grid.dx / max(np.sum(w) * psi.grid.dx, 1e-300))


def momentum_mean(psi: WaveFunction) -> float:
    """<p> by quadrature on the momentum grid."""
    phi = momentum_representation(psi)
    w = np.abs(phi.amplitudes) ** 2
    return float(np.sum(phi.grid.p * w) * phi.grid.dp / max(np.sum(w) * phi.grid.dp, 1e-300))


def energy_moments(psi: WaveFunction, mass: float = 1.0):
    """Mean and spread of the kinetic energy p^2/2m.

    Returns (mean, spread); the spread sets the short-time scale below which
    repeated sharp position measurements freeze the packet.
    """
    phi = momentum_representation(psi)
    w = np.abs(phi.amplitudes) ** 2 * phi.grid.dp
    n = np.sum(w)
    e = phi.grid.p**2 / (2.0 * mass)
    e1 = float(np.sum(e * w) / n)
    e2 = float(np.sum(e**2 * w) / n)
    return e1, float(np.sqrt(max(e2 - e1**2, 0.0)))
