"""Acceptance suite: one callable per criterion, shared by pytest and the CLI.

Each criterion returns a CriterionResult with named sub-checks carrying the
measured value and its bound, so failures localize. Two sub-checks are known
to fail at their pinned parameters and are kept as stated rather than
loosened; see the README notes:

  * criterion 5, interference measure at tau = 15: absorption of the crossed
    bulk is incomplete at that horizon for V0 = 0.2 (the measure reaches the
    0.05 bound only near tau ~ 30);
  * criterion 9, dm^2 against its quoted leading-order form: the defining
    integral evaluates to one half of that form (the tail integral of
    pi/2 - Si is exactly 1), so the 25% band cannot contain it.
"""

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import simpson

from . import classical, histories, scattering, wigner
from .core import (GaussianPacketSpec, Grid1D, WaveFunction, energy_moments,
                   make_gaussian, momentum_representation, overlap,
                   packet_amplitudes, superpose, theta_neg_weights,
                   theta_pos_weights)
from .dynamics import (EvolutionConfig, StepPotentialSpec, arrival_series,
                       convolved_current, current_series, evolve_free,
                       evolve_step)

__all__ = ["Check", "CriterionResult", "CRITERIA", "run_criterion", "run_all"]


@dataclass
class Check:
    name: str
    measured: float
    bound: float
    kind: str  # "le": measured <= bound; "ge": measured >= bound
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = (self.measured <= self.bound if self.kind == "le"
                       else self.measured >= self.bound)

    def __str__(self):
        op = "<=" if self.kind == "le" else ">="
        mark = "pass" if self.passed else "FAIL"
        return f"{self.name}: {self.measured:.6g} {op} {self.bound:.6g} [{mark}]"


@dataclass
class CriterionResult:
    cid: int
    title: str
    checks: list
    seconds: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


# --- shared fixtures (kept small; caches make reruns in one process cheap)

STANDARD = GaussianPacketSpec(10.0, -2.0, 1.0)
V0_STD = 0.2


@lru_cache(maxsize=None)
def _grid(x_min: float, x_max: float, n: int) -> Grid1D:
    return Grid1D(x_min, x_max, n)


@lru_cache(maxsize=None)
def _std_packet(x_min=-50.0, x_max=50.0, n=4096):
    return make_gaussian(STANDARD, _grid(x_min, x_max, n))


@lru_cache(maxsize=None)
def _backflow_state():
    """Two-momentum superposition with a negative-current window, found by a
    deterministic coefficient scan; returns (state, (t_lo, t_hi), min_J)."""
    g = _grid(-60.0, 60.0, 4096)
    a1 = packet_amplitudes(g, 10.0, -1.0, 2.0)
    a2 = packet_amplitudes(g, 10.0, -3.0, 2.0)
    base = WaveFunction(g, a1)
    other = WaveFunction(g, a2)
    ts = np.linspace(0.0, 12.0, 601)
    best = None
    for a in (0.4, 0.5, 0.6):
        for phase in np.linspace(0.0, 2.0 * np.pi, 8, endpoint=False):
            psi = superpose([base, other], [1.0, a * np.exp(1j * phase)])
            J = current_series(psi, ts)
            i = int(np.argmin(J))
            if best is None or J[i] < best[0]:
                best = (float(J[i]), a, float(phase), float(ts[i]))
    _, a, phase, t_dip = best
    psi = superpose([base, other], [1.0, a * np.exp(1j * phase)])
    fine = np.linspace(max(0.0, t_dip - 1.5), t_dip + 1.5, 3001)
    J = np.asarray(current_series(psi, fine))
    i = int(np.argmin(J))
    lo = i
    while lo > 0 and J[lo - 1] < 0:
        lo -= 1
    hi = i
    while hi < len(J) - 1 and J[hi + 1] < 0:
        hi += 1
    return psi, (float(fine[lo]), float(fine[hi])), float(J[i])


# --- criteria


def criterion_1():
    """Detector-kernel convolution law for the arrival density."""
    psi = _std_packet()
    pot, cfg = StepPotentialSpec(V0_STD), EvolutionConfig()
    tau = 15.0
    pi = arrival_series(psi, pot, cfg, tau)
    conv = convolved_current(psi, V0_STD, tau, dt=cfg.dt)
    l1 = float(np.sum(np.abs(pi.values - conv.values)) / np.sum(np.abs(pi.values)))
    return [Check("convolution_l1_rel", l1, 0.05, "le")]


def criterion_2():
    """Stationary scattering closed forms against the dynamics."""
    checks = []
    psi = _std_packet()
    g = psi.grid
    tau = 15.0
    final = evolve_step(psi, StepPotentialSpec(V0_STD), EvolutionConfig(), tau)
    dec = scattering.decompose_state(psi, V0_STD, tau)
    thw = theta_neg_weights(g)
    rho_dyn = np.abs(momentum_representation(
        WaveFunction(g, thw * final.amplitudes, tau)).amplitudes) ** 2
    rho_cf = np.abs(momentum_representation(dec.psi_tr).amplitudes) ** 2
    phi0 = momentum_representation(psi)
    support = np.abs(phi0.amplitudes) ** 2 > 1e-6 * np.max(np.abs(phi0.amplitudes) ** 2)
    l1 = float(np.sum(np.abs(rho_dyn - rho_cf)[support]) / np.sum(rho_dyn[support]))
    checks.append(Check("transmitted_momentum_density_l1", l1, 0.03, "le"))

    ratios = np.array([1e-3, 1e-2, 1e-1])
    e0 = STANDARD.energy
    mags = [abs(scattering.reflection_amplitude(STANDARD.p0, r * e0)) for r in ratios]
    slope = float(np.polyfit(np.log(ratios), np.log(mags), 1)[0])
    checks.append(Check("reflection_scaling_slope_low", slope, 0.9, "ge"))
    checks.append(Check("reflection_scaling_slope_high", slope, 1.1, "le"))
    return checks


def criterion_3():
    """Edge-kernel half-line Fourier integral against its closed form."""
    checks = []
    m = 1.0
    e = 2.0
    for v0 in (0.02, 0.2):
        def edge_profile(t, v0=v0):
            return scattering.edge_propagator(t, v0, m)

        etas = np.array([0.4, 0.2, 0.1, 0.05])
        vals = [scattering.regularized_halfline_integral(edge_profile, e, eta)
                for eta in etas]
        est = scattering.richardson_zero_limit(etas, vals)
        exact = math.sqrt(2.0 * m) / (np.sqrt(e + 1j * v0) + math.sqrt(e))
        rel = abs(est - exact) / abs(exact)
        checks.append(Check(f"laplace_identity_v0_{v0:g}", float(rel), 1e-4, "le"))
    return checks


def criterion_4():
    """Coarse-grained classical window probability loses its V0 dependence."""
    spec = classical.ClassicalPacketSpec(120.0, -2.0, 1.0, 0.1)
    t1, t2 = 50.0, 110.0
    checks = []
    exacts = []
    for v0 in (0.2, 0.5, 1.0):
        exact, simple = classical.classical_coarse_probability(spec, v0, t1, t2)
        exacts.append(exact)
        checks.append(Check(f"coarse_vs_current_v0_{v0:g}", abs(exact - simple),
                            0.01, "le"))
    checks.append(Check("coarse_v0_spread", max(exacts) - min(exacts), 0.01, "le"))
    return checks


def criterion_5():
    """Two-class interference at tau = 15 (see module note: the measure
    sub-check states the pinned bound and fails honestly)."""
    g = _grid(-80.0, 80.0, 8192)
    psi = make_gaussian(STANDARD, g)
    tau = 15.0
    cfg = EvolutionConfig(dt=0.0025)
    res = histories.two_class_analysis(psi, V0_STD, tau, cfg)
    measure = abs(res.d_cnc) ** 2 / (res.p_c * res.p_nc)
    sum_rule = abs(res.p_nc + res.p_c + 2.0 * res.d_cnc.real - 1.0)
    pi = arrival_series(psi, StepPotentialSpec(V0_STD), cfg, tau)
    absorbed = simpson(pi.values, x=pi.times)
    return [
        Check("two_class_measure", float(measure), 0.05, "le"),
        Check("sum_rule", float(sum_rule), 1e-10, "le"),
        Check("p_nc_vs_arrival_integral", float(abs(res.p_nc - (1.0 - absorbed))),
              1e-6, "le"),
    ]


def criterion_6():
    """Window class operators: absorbing construction vs absorber-free form."""
    g = _grid(-220.0, 260.0, 8192)
    psi = make_gaussian(STANDARD, g)
    tau = 50.0  # one window of size 10/V0
    part = histories.HistoryPartition(tau, 1)
    cfg = EvolutionConfig()
    exact_states, nc = histories.crossing_states_exact(psi, V0_STD, part, cfg)
    simpl = histories.crossing_class_apply(psi, 0.0, tau, tau)
    diff = exact_states[0].amplitudes - simpl.amplitudes
    l2 = float(np.sqrt(np.sum(np.abs(diff) ** 2) * g.dx))
    resid = nc.amplitudes + exact_states[0].amplitudes - psi.amplitudes
    ident = float(np.sqrt(np.sum(np.abs(resid) ** 2) * g.dx))
    return [
        Check("exact_vs_simplified_l2", l2, 0.1, "le"),
        Check("resolution_identity_l2", ident, 1e-3, "le"),
    ]


def criterion_7():
    """Window quasi-probability equals the integrated current."""
    g = _grid(-80.0, 80.0, 8192)
    psi = make_gaussian(STANDARD, g)
    t1, t2 = 0.5, 14.0
    q_current = histories.quasi_probability(psi, t1, t2)
    chi = histories.crossing_class_apply(psi, t1, t2, t2)
    q_sandwich = float(overlap(psi, chi).real)
    return [
        Check("full_window_quasi_low", q_current, 0.98, "ge"),
        Check("full_window_quasi_high", q_current, 1.02, "le"),
        Check("sandwich_vs_current", abs(q_sandwich - q_current), 1e-4, "le"),
    ]


def criterion_8():
    """Backflow forbids decoherence; single Gaussians never backflow."""
    psi, (t1, t2), min_j = _backflow_state()
    diag = histories.backflow_diagnostic(psi, t1, t2)
    checks = [
        Check("backflow_window_q_cross", diag.q_cross, -1e-4, "le"),
        Check("interference_exceeds_probability",
              abs(diag.d_value) - diag.p_cross, 0.0, "ge"),
    ]
    gauss = _std_packet(-80.0, 80.0, 8192)
    worst = np.inf
    edges = np.linspace(0.5, 14.0, 7)
    for i in range(len(edges) - 1):
        for j in range(i + 1, len(edges)):
            d = histories.backflow_diagnostic(gauss, float(edges[i]), float(edges[j]))
            worst = min(worst, d.q_cross)
    checks.append(Check("single_gaussian_no_backflow", float(worst), -1e-4, "ge"))
    return checks


def criterion_9():
    """Phase-space crossing pipeline (dm^2 leading-order sub-check is the
    known-red one; the defining integral is half the quoted form)."""
    checks = [Check("f_at_zero", abs(wigner.f_of_u(0.0) - np.pi / 2.0), 1e-10, "le")]

    spec_dm = GaussianPacketSpec(20.0, -2.0, 10.0)      # |p0| sigma = 20
    t1 = spec_dm.arrival_time
    t2 = t1 + 40.0 / spec_dm.energy                     # E0 dt = 40
    numeric, asym = wigner.dm_squared_asymptotic(spec_dm, t1, t2)
    checks.append(Check("dm2_vs_leading_order", abs(numeric - asym) / asym,
                        0.25, "le"))

    spec_p = GaussianPacketSpec(10.0, -2.0, 2.0)        # q_z / sigma = 10
    p12, regime = wigner.p12_regimes(spec_p, 5.0, 15.0)
    checks.append(Check("p12_broad_low", p12, 0.45, "ge"))
    checks.append(Check("p12_broad_high", p12, 0.55, "le"))

    # cross-representation: phase-space quadrature vs Hilbert-space sandwich
    g = _grid(-80.0, 80.0, 8192)
    spec_x = GaussianPacketSpec(10.0, -2.0, 1.0)
    psi = make_gaussian(spec_x, g)
    t1x, dtx = 5.0, 5.0
    p12_ps, dm2_ps = wigner.phase_space_crossing_moments(spec_x, t1x, t1x + dtx)
    psi1 = evolve_free(psi, t1x)
    thw, thp = theta_neg_weights(g), theta_pos_weights(g)
    chi = evolve_free(WaveFunction(g, thw * psi1.amplitudes, t1x), t1x + dtx,
                      spill_threshold=np.inf)
    dm2_hs = float(np.sum(thp * np.abs(chi.amplitudes) ** 2) * g.dx)
    phi = evolve_free(WaveFunction(g, thp * psi1.amplitudes, t1x), t1x + dtx,
                      spill_threshold=np.inf)
    p12_hs = float(np.sum(thw * np.abs(phi.amplitudes) ** 2) * g.dx)
    checks.append(Check("cross_representation_dm2", abs(dm2_ps - dm2_hs), 1e-3, "le"))
    checks.append(Check("cross_representation_p12", abs(p12_ps - p12_hs), 1e-3, "le"))
    return checks


def criterion_10():
    """Zeno trend of sharp pulses and the pulsed/absorber equivalence window."""
    psi = _std_packet(-60.0, 60.0, 4096)
    surv = [histories.zeno_survival(psi, 15.0, n) for n in (16, 64, 256)]
    checks = [
        Check("zeno_monotone_16_64", surv[1] - surv[0], 0.0, "ge"),
        Check("zeno_monotone_64_256", surv[2] - surv[1], 0.0, "ge"),
    ]

    g = _grid(-440.0, 540.0, 16384)
    spec = GaussianPacketSpec(200.0, -6.0, 40.0)
    broad = make_gaussian(spec, g)
    _, de = energy_moments(broad)
    v0 = 50.0 * de
    eps = 5.0 / v0
    tau = round(spec.arrival_time / eps) * eps
    ok = histories.pulsed_vs_potential(broad, v0, eps, tau)
    n_bad = round(tau / (0.1 / v0))
    bad = histories.pulsed_vs_potential(broad, v0, tau / n_bad, tau)
    checks.append(Check("pulsed_regime_discrepancy", ok.discrepancy, 0.1, "le"))
    checks.append(Check("pulsed_violation_ratio",
                        bad.discrepancy / ok.discrepancy, 3.0, "ge"))
    return checks


def criterion_11():
    """Integrated current of the backflow state turns non-negative past a few
    inverse energy spreads."""
    psi, _, _ = _backflow_state()
    t_grid = np.linspace(0.0, 12.0, 241)
    rep = wigner.positivity_timescale(psi, t_grid)
    t_min = 3.0 / rep.energy_spread
    late = rep.series.values[rep.series.times >= t_min]
    return [Check("integrated_current_floor", float(late.min()), -1e-3, "ge")]


CRITERIA = [
    (1, "arrival density equals kernel-smeared current", criterion_1),
    (2, "scattering closed forms against dynamics", criterion_2),
    (3, "edge-kernel Fourier identity", criterion_3),
    (4, "classical coarse-graining V0 independence", criterion_4),
    (5, "two-class decoherence at tau = 15", criterion_5),
    (6, "window class operators, absorbing vs simplified", criterion_6),
    (7, "quasi-probability equals integrated current", criterion_7),
    (8, "backflow forbids decoherence", criterion_8),
    (9, "phase-space crossing pipeline", criterion_9),
    (10, "Zeno trend and pulsed/absorber equivalence", criterion_10),
    (11, "integrated-current positivity timescale", criterion_11),
]


def run_criterion(cid: int) -> CriterionResult:
    for num, title, fn in CRITERIA:
        if num == cid:
            start = time.perf_counter()
            checks = fn()
            return CriterionResult(num, title, checks, time.perf_counter() - start)
    raise KeyError(f"no criterion {cid}")


def run_all(ids=None):
    wanted = set(ids) if ids else {num for num, _, _ in CRITERIA}
    return [run_criterion(num) for num, _, _ in CRITERIA if num in wanted]
