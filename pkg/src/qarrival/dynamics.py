"""Time evolution under H = p^2/2m - i V0 theta(-x) and the arrival observables.

The non-Hermitian step potential -i V0 theta(-x) removes norm from x < 0, so
the surviving norm N(t) is the probability of not having crossed the origin up
to t, and the arrival density is its decay rate. Pi(t) is computed from the
instantaneous expectation

    Pi(t) = 2 V0 <psi_t| theta(-x) |psi_t>,

which is manifestly non-negative, rather than by differencing N(t).

The free current through the origin,

    J(t) = -(1/m) Im[ conj(psi_f)(0,t) d/dx psi_f(0,t) ],

is positive for a left-moving packet crossing x = 0 but can turn negative for
momentum superpositions (backflow). Convolving J with the exponential detector
kernel R(V0, t) = 2 V0 exp(-2 V0 t) theta(t) reproduces Pi in the weak-
absorption regime; ``convolved_current`` builds that prediction.
"""

from dataclasses import dataclass

import numpy as np

from .core import (Grid1D, TimeSeries, WaveFunction, momentum_representation,
                   norm2, theta_neg_weights)
from .errors import InvalidSpec, PositiveMomentumError, StepError

__all__ = [
    "StepPotentialSpec",
    "EvolutionConfig",
    "evolve_step",
    "evolve_free",
    "absorption_run",
    "survival_series",
    "arrival_series",
    "current_at_origin",
    "current_series",
    "kijowski_series",
    "resolution_kernel",
    "convolved_current",
]


@dataclass(frozen=True)
class StepPotentialSpec:
    """Absorbing step of strength V0 >= 0.

    ``profile`` is an extension point; only the sharp step is implemented.
    """

    v0: float
    profile: str = "sharp_step"

    def __post_init__(self):
        if self.v0 < 0:
            raise InvalidSpec(f"V0 must be >= 0 (got {self.v0})")
        if self.profile != "sharp_step":
            raise InvalidSpec(f"unsupported potential profile {self.profile!r}")


@dataclass(frozen=True)
class EvolutionConfig:
    """Time step and guards for the split-step propagator.

    The default dt suits the standard packet (E0 = 2, V0 <= 0.2). For other
    scales use ``for_scales``, which enforces dt * max(E, V0) <= 0.05.
    """

    dt: float = 0.005
    order: str = "strang"
    spill_threshold: float = 1e-3

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidSpec(f"dt must be > 0 (got {self.dt})")
        if self.order != "strang":
            raise InvalidSpec(f"unsupported splitting order {self.order!r}")

    @classmethod
    def for_scales(cls, energy: float, v0: float, dt_cap: float = 0.005,
                   spill_threshold: float = 1e-3) -> "EvolutionConfig":
        dt = min(dt_cap, 0.05 / max(energy, v0, 1e-12))
        return cls(dt=dt, spill_threshold=spill_threshold)


def _step_count(span: float, dt: float) -> int:
    n = span / dt
    n_round = round(n)
    if abs(n - n_round) > 1e-6 * max(1.0, abs(n)):
        raise StepError(f"dt={dt} does not divide the evolution span {span}")
    return int(n_round)


def absorption_run(psi: WaveFunction, pot: StepPotentialSpec, cfg: EvolutionConfig,
                   t_final: float, mass: float = 1.0):
    """Generator of (t, state) along the absorbing evolution, including t0.

    Second-order splitting: half kinetic step in momentum space, full
    potential factor exp(-V0 theta(-x) dt) in position space (a real decay),
    half kinetic step. Norm is non-increasing at every step for V0 >= 0.
    The yielded WaveFunctions share one work buffer copy per step.
    """
    if t_final < psi.time:
        raise StepError(f"t_final={t_final} precedes the state's time {psi.time}")
    g = psi.grid
    nsteps = _step_count(t_final - psi.time, cfg.dt)
    kin_half = np.exp(-1j * g.p_fft**2 / (2.0 * mass) * (cfg.dt / 2.0))
    decay = np.exp(-pot.v0 * theta_neg_weights(g) * cfg.dt)
    amps = psi.amplitudes.copy()
    t = psi.time
    state = WaveFunction(g, amps, t)
    state.check_spill(cfg.spill_threshold)
    yield t, state
    for i in range(nsteps):
        amps = np.fft.ifft(kin_half * np.fft.fft(amps))
        amps *= decay
        amps = np.fft.ifft(kin_half * np.fft.fft(amps))
        t = psi.time + (i + 1) * cfg.dt
        state = WaveFunction(g, amps, t)
        state.check_spill(cfg.spill_threshold)
        yield t, state


def evolve_step(psi: WaveFunction, pot: StepPotentialSpec, cfg: EvolutionConfig,
                t_final: float, mass: float = 1.0) -> WaveFunction:
    """Evolve to t_final under the absorbing Hamiltonian by split steps."""
    for _, state in absorption_run(psi, pot, cfg, t_final, mass):
        pass
    return state


def evolve_free(psi: WaveFunction, t_final: float, mass: float = 1.0,
                spill_threshold: float = 1e-3) -> WaveFunction:
    """Exact one-shot free evolution (diagonal in momentum space).

    Unitary to machine precision; t_final may precede psi.time (backward
    evolution is the inverse phase).
    """
    g = psi.grid
    dt = t_final - psi.time
    if dt == 0.0:
        return psi.copy()
    phase = np.exp(-1j * g.p_fft**2 / (2.0 * mass) * dt)
    out = WaveFunction(g, np.fft.ifft(phase * np.fft.fft(psi.amplitudes)), t_final)
    out.check_spill(spill_threshold)
    return out


def _require_incoming(psi: WaveFunction, left_tail_tol: float = 1e-6):
    g = psi.grid
    left = np.sum(theta_neg_weights(g) * np.abs(psi.amplitudes) ** 2) * g.dx
    if left > left_tail_tol:
        raise InvalidSpec(
            f"initial state has weight {left:.2e} in x<0 (must be < {left_tail_tol:.0e})"
        )


def survival_series(psi0: WaveFunction, pot: StepPotentialSpec, cfg: EvolutionConfig,
                    tau: float, mass: float = 1.0) -> TimeSeries:
    """N(t) = squared norm of the absorbing evolution, sampled every cfg.dt.

    N(0) = 1 for a normalized packet and N is non-increasing.
    """
    _require_incoming(psi0)
    vals = [norm2(s) for _, s in absorption_run(psi0, pot, cfg, tau, mass)]
    return TimeSeries(psi0.time, cfg.dt, np.array(vals))


def arrival_series(psi0: WaveFunction, pot: StepPotentialSpec, cfg: EvolutionConfig,
                   tau: float, mass: float = 1.0) -> TimeSeries:
    """Pi(t) = 2 V0 <theta(-x)> along the absorbing evolution, every cfg.dt.

    Every sample is >= 0 by construction (expectation of a positive operator
    in a positive weight), and int_0^tau Pi dt + N(tau) = 1 up to O(dt^2).
    """
    _require_incoming(psi0)
    g = psi0.grid
    thw = theta_neg_weights(g)
    vals = [2.0 * pot.v0 * float(np.sum(thw * np.abs(s.amplitudes) ** 2) * g.dx)
            for _, s in absorption_run(psi0, pot, cfg, tau, mass)]
    return TimeSeries(psi0.time, cfg.dt, np.array(vals))


def _origin_neighbours(grid: Grid1D):
    """Indices of the grid points straddling (or hitting) x = 0 and the
    linear interpolation weight of the right one."""
    i_hi = int(np.searchsorted(grid.x, 0.0))
    i_lo = max(i_hi - 1, 0)
    if abs(grid.x[i_hi]) < 1e-12 * grid.dx:
        return i_hi, i_hi, 0.0
    w = (0.0 - grid.x[i_lo]) / grid.dx
    return i_lo, i_hi, w


def current_series(psi0: WaveFunction, times: np.ndarray, mass: float = 1.0) -> np.ndarray:
    """J(t) of the freely evolved state for an array of times.

    The spatial derivative is spectral; the value at x = 0 is the linear
    interpolation of the current integrand between the two straddling grid
    points (which reduces to the on-grid value when 0 is a grid point).
    Positive J means flux crossing into x < 0.
    """
    g = psi0.grid
    ft = np.fft.fft(psi0.amplitudes)
    energies = g.p_fft**2 / (2.0 * mass)
    i_lo, i_hi, w = _origin_neighbours(g)
    # inverse-DFT phases at the two neighbour points (offsets from x_min)
    phases_x = np.exp(1j * np.outer(g.p_fft, g.x[[i_lo, i_hi]] - g.x_min))  # (n, 2)
    out = np.empty(len(times))
    shift = psi0.time
    # evaluate psi and psi' at the two neighbour points by direct mode sums
    for j, t in enumerate(np.asarray(times, dtype=float)):
        ph = ft * np.exp(-1j * energies * (t - shift))
        vals = ph @ phases_x / g.n_points
        dvals = (1j * g.p_fft * ph) @ phases_x / g.n_points
        jx = -np.imag(np.conj(vals) * dvals) / mass
        out[j] = (1.0 - w) * jx[0] + w * jx[1]
    return out


def current_at_origin(psi0: WaveFunction, t: float, mass: float = 1.0) -> float:
    """J(t) at a single time; see ``current_series``."""
    return float(current_series(psi0, np.array([t]), mass)[0])


def kijowski_series(psi0: WaveFunction, times: np.ndarray, mass: float = 1.0,
                    positive_tol: float = 1e-4) -> TimeSeries:
    """Kijowski's arrival density, the |p|^(1/2)-reordered current.

        Pi_K(t) = (1/m) | int dp |p|^(1/2) psi~(p) e^{-i p^2 t / 2m} / sqrt(2 pi) |^2

    Non-negative for every state and time. Requires negligible positive-
    momentum content (< positive_tol of the norm), since the reordering is an
    arrival density only for incoming states. A Gaussian with |p0| = 4 sigma_p
    carries ~3e-5 positive weight, which the default tolerance admits.
    """
    times = np.asarray(times, dtype=float)
    if len(times) < 2:
        raise InvalidSpec("kijowski_series needs at least two sample times")
    dt_arr = np.diff(times)
    if np.any(np.abs(dt_arr - dt_arr[0]) > 1e-9 * max(dt_arr[0], 1e-12)):
        raise InvalidSpec("kijowski_series needs uniformly spaced times")
    phi = momentum_representation(psi0)
    g = phi.grid
    pos = g.p > 0
    w_pos = float(np.sum(np.abs(phi.amplitudes[pos]) ** 2) * g.dp)
    if w_pos > positive_tol * norm2(phi):
        raise PositiveMomentumError(
            f"positive-momentum weight {w_pos:.2e} exceeds {positive_tol:.0e}"
        )
    root_p = np.sqrt(np.abs(g.p))
    energies = g.p**2 / (2.0 * mass)
    # amp(t) = dp/sqrt(2 pi) sum |p|^(1/2) psi~(p) e^{-iEt}
    phase = np.exp(-1j * np.outer(times - phi.time, energies))
    amps = phase @ (root_p * phi.amplitudes) * g.dp / np.sqrt(2.0 * np.pi)
    return TimeSeries(times[0], float(dt_arr[0]), np.abs(amps) ** 2 / mass)


def resolution_kernel(v0: float, t) -> np.ndarray:
    """Detector resolution kernel R(V0, t) = 2 V0 exp(-2 V0 t) for t >= 0.

    Normalized: int_0^inf R dt = 1.
    """
    t = np.asarray(t, dtype=float)
    return np.where(t >= 0.0, 2.0 * v0 * np.exp(-2.0 * v0 * np.clip(t, 0.0, None)), 0.0)


def convolved_current(psi0: WaveFunction, v0: float, tau: float, dt: float = 0.005,
                      mass: float = 1.0) -> TimeSeries:
    """Prediction int_0^tau' R(V0, tau'-t) J(t) dt on a uniform grid in tau'.

    Discrete convolution with trapezoid end corrections; the integration
    starts at t = 0 (the current is negligible before the packet is released).
    """
    n = _step_count(tau, dt)
    ts = dt * np.arange(n + 1)
    J = current_series(psi0, ts, mass)
    R = resolution_kernel(v0, ts)
    conv = np.convolve(J, R)[: n + 1] * dt
    conv -= 0.5 * dt * (R * J[0] + R[0] * J)
    return TimeSeries(0.0, dt, conv)
