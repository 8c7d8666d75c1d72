"""Time evolution: nonlinear and linearized method-of-lines integration, the
mollified Picard iteration, conical energies and the dependence experiments.

Spatial derivatives are centered differences on a periodic grid, time
stepping is classic RK4, and an optional fourth-difference dissipation
``-(coef / h) * delta^4 V`` damps grid-scale noise.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import optimize

from .eos import EosSpec
from .errors import ConeTooSmall, CflViolated, EscapedBox, TubeExceeded
from .field import (
    Grid,
    MollifierSpec,
    MultiIndex,
    StateField,
    derivative,
    derivative_alpha,
    fourth_difference,
    mollify,
    norm,
    spectral_derivative,
)
from .energy import current_value
from .state import CANONICAL_EOS, AdmissibleBox, ConstantState, complete_state
from .system import InhomTerms, inhom_linearization, time_derivative_eov


@dataclass
class SolverConfig:
    T: float = 1.0
    cfl: float = 0.4
    dt: float | None = None
    N_d: int = 3
    Lambda: float | None = None
    dissipation: float = 0.01
    scheme: str = "order-2"
    kappa: float = 1.0
    eos: EosSpec = CANONICAL_EOS
    store_every: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.Lambda is not None and self.Lambda <= 0:
            raise ValueError("Lambda must be positive")
        if self.T < 0:
            raise ValueError("T must be non-negative")

    def step_size(self, grid: Grid) -> tuple[float, int]:
        """(dt, steps) with dt <= requested and steps * dt = T."""
        dt = self.dt if self.dt is not None else self.cfl * grid.h
        if dt <= 0 or dt / grid.h > 0.5:
            raise CflViolated(f"dt/h = {dt / grid.h:.3f} exceeds 0.5 (characteristic speed 1)")
        if self.T == 0:
            return dt, 0
        steps = max(1, math.ceil(self.T / dt - 1e-12))
        return self.T / steps, steps


@dataclass
class Trajectory:
    grid: Grid
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def append(self, t, V):
        self.times.append(float(t))
        self.snapshots.append(np.array(V, copy=True))

    @property
    def final(self) -> np.ndarray:
        return self.snapshots[-1]

    def at(self, t: float) -> np.ndarray:
        """Linear interpolation in time between stored snapshots."""
        ts = self.times
        if len(ts) == 1 or t <= ts[0]:
            return self.snapshots[0]
        if t >= ts[-1]:
            return self.snapshots[-1]
        i = int(np.searchsorted(ts, t, side="right")) - 1
        t0, t1 = ts[i], ts[i + 1]
        w = (t - t0) / (t1 - t0)
        if w < 1e-13:
            return self.snapshots[i]
        if w > 1 - 1e-13:
            return self.snapshots[i + 1]
        return (1.0 - w) * self.snapshots[i] + w * self.snapshots[i + 1]

    @classmethod
    def constant(cls, grid: Grid, V, T: float) -> "Trajectory":
        tr = cls(grid)
        tr.append(0.0, V)
        tr.append(T, V)
        return tr


@dataclass(frozen=True)
class ConeSpec:
    r: float
    center: tuple = (0.0, 0.0, 0.0)

    def mask(self, grid: Grid, t: float) -> np.ndarray:
        return grid.radius(self.center[: grid.dim]) <= self.r - t


# ---------------------------------------------------------------------------
# integration core

def spatial_gradient(V, grid: Grid, scheme: str) -> np.ndarray:
    """(3, 10, ...) array of d_k V; axes beyond grid.dim are zero."""
    out = np.zeros((3,) + V.shape)
    for k in range(grid.dim):
        out[k] = derivative(V, grid, k, scheme)
    return out


def _rk4(V, t, dt, rhs):
    k1 = rhs(t, V)
    k2 = rhs(t + 0.5 * dt, V + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, V + 0.5 * dt * k2)
    k4 = rhs(t + dt, V + dt * k3)
    return V + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _constraint_defect(V, grid: Grid) -> float:
    d = np.stack([V[7 + j] - spectral_derivative(V[5], grid, (0,) * j + (1,)) if j < grid.dim
                  else V[7 + j] for j in range(3)])
    return norm(d, grid, "L2")


def _evolve(V0, grid: Grid, config: SolverConfig, rhs, check=None) -> Trajectory:
    dt, steps = config.step_size(grid)
    traj = Trajectory(grid)
    traj.diagnostics["constraint_defect"] = []
    traj.diagnostics["dt"] = dt
    V = np.array(V0, dtype=float, copy=True)
    traj.append(0.0, V)
    traj.diagnostics["constraint_defect"].append(_constraint_defect(V, grid))
    coef = config.dissipation / grid.h

    def full_rhs(t, X):
        out = rhs(t, X)
        if coef:
            out -= coef * fourth_difference(X, grid)
        return out

    for n in range(steps):
        t = n * dt
        V = _rk4(V, t, dt, full_rhs)
        tn = (n + 1) * dt
        if not np.all(np.isfinite(V)):
            raise EscapedBox(f"non-finite state at t={tn:.6g}", tn)
        if check is not None:
            check(tn, V)
        if (n + 1) % config.store_every == 0 or n + 1 == steps:
            traj.append(tn, V)
            traj.diagnostics["constraint_defect"].append(_constraint_defect(V, grid))
    return traj


def default_box(V_bar, scale: float = 0.5) -> AdmissibleBox:
    return AdmissibleBox.default_for(V_bar, scale)


def default_lambda(V_bar, box: AdmissibleBox) -> float:
    """Half the sup-norm distance from the background to the box boundary."""
    return 0.5 * box.sup_distance(V_bar)


def _box_check(box: AdmissibleBox | None):
    if box is None:
        return None

    def check(t, V):
        if not box.contains(V):
            raise EscapedBox(f"state left the admissible box at t={t:.6g}", t)
    return check


def integrate_nonlinear(data: StateField, config: SolverConfig,
                        box: AdmissibleBox | None = None) -> Trajectory:
    """Evolve the full nonlinear system from ``data`` up to ``config.T``."""
    grid = data.grid
    if box is not None and not data.in_box(box):
        raise EscapedBox("initial data outside the admissible box", 0.0)
    if not data.admissible():
        raise EscapedBox("initial data not admissible", 0.0)

    def rhs(t, V):
        d = complete_state(V, config.eos)
        dVs = spatial_gradient(V, grid, config.scheme)
        return time_derivative_eov(V, dVs, inhom_linearization(V, config.kappa, derived=d),
                                   derived=d)

    return _evolve(data.data, grid, config, rhs, _box_check(box))


InhomSource = Callable[[float, np.ndarray], InhomTerms]


def solve_linearized(bgs, data: StateField, inhom, config: SolverConfig,
                     box: AdmissibleBox | None = None) -> Trajectory:
    """Evolve the EOV about a background trajectory.

    ``bgs`` is a Trajectory (interpolated linearly in time), a StateField or
    an array (constant in time).  ``inhom`` is None (no sources), an
    InhomTerms (time-independent) or a callable ``(t, V_bg) -> InhomTerms``.
    """
    grid = data.grid
    if isinstance(bgs, Trajectory):
        bg_at = bgs.at
        snaps = bgs.snapshots
    else:
        arr = bgs.data if isinstance(bgs, StateField) else np.asarray(bgs, dtype=float)
        if arr.shape == (10,):
            arr = StateField.constant(grid, arr).data
        bg_at = lambda t: arr  # noqa: E731
        snaps = [arr]
    for i, s in enumerate(snaps):
        if np.any(s[0] <= 0) or np.any(s[1] <= 0) or (box is not None and not box.contains(s)):
            raise EscapedBox("background left the admissible box", bgs.times[i] if isinstance(bgs, Trajectory) else 0.0)

    if inhom is None:
        zero = InhomTerms.zeros(grid.shape)
        source = lambda t, Vb: zero  # noqa: E731
    elif isinstance(inhom, InhomTerms):
        source = lambda t, Vb: inhom  # noqa: E731
    else:
        source = inhom

    cache = {}

    def rhs(t, X):
        key = round(t, 14)
        if key not in cache:
            Vb = bg_at(t)
            cache.clear()
            cache[key] = (Vb, complete_state(Vb, config.eos), source(t, Vb))
        Vb, d, src = cache[key]
        return time_derivative_eov(Vb, spatial_gradient(X, grid, config.scheme), src, derived=d)

    return _evolve(data.data, grid, config, rhs)


# ---------------------------------------------------------------------------
# Picard iteration

@dataclass
class PicardResult:
    iterates: list
    differences: list        # sup over (t, x) of successive iterate differences
    tube_norms: list         # max_t ||V^(m)(t) - V0||_{H^N}
    eps: list
    T: float
    Lambda: float

    @property
    def ratios(self) -> list:
        d = self.differences
        return [d[m - 1] / d[m] if d[m] > 0 else np.inf for m in range(1, len(d))]


def _tube_norm(traj: Trajectory, ref, grid: Grid, N: int) -> float:
    return max(norm(s - ref, grid, "sobolev", N) for s in traj.snapshots)


def picard_sequence(data: StateField, config: SolverConfig, m_max: int = 6, eps0: float = 0.25,
                    V_bar=None, box: AdmissibleBox | None = None) -> PicardResult:
    """Iterates V^(m+1) = solution of the system linearized about V^(m).

    Iterate m+1 starts from data mollified at eps_{m+1} = 2^{-(m+1)} eps0.
    """
    grid = data.grid
    spec = MollifierSpec(eps0, grid.dim)
    eps = [spec.eps(m) for m in range(m_max + 1)]
    V0 = mollify(data.data, grid, eps[0], spec)
    if V_bar is None:
        V_bar = data.data.reshape(10, -1)[:, 0]
    box = box or default_box(V_bar)
    Lam = config.Lambda if config.Lambda is not None else default_lambda(V_bar, box)

    cur = Trajectory.constant(grid, V0, config.T)
    iterates, diffs, tubes = [cur], [], [0.0]

    def source(t, Vb):
        return inhom_linearization(Vb, config.kappa, config.eos)

    for m in range(m_max):
        start = StateField(grid, mollify(data.data, grid, eps[m + 1], spec))
        nxt = solve_linearized(cur, start, source, config, box)
        if not all(box.contains(s) for s in nxt.snapshots):
            raise EscapedBox(f"iterate {m + 1} left the admissible box")
        tube = _tube_norm(nxt, V0, grid, config.N_d)
        tubes.append(tube)
        if tube > Lam:
            raise TubeExceeded(f"iterate {m + 1} left the Lambda-tube ({tube:.3g} > {Lam:.3g})", m + 1)
        diffs.append(max(float(np.max(np.abs(nxt.at(t) - cur.at(t)))) for t in nxt.times))
        iterates.append(nxt)
        cur = nxt
    return PicardResult(iterates, diffs, tubes, eps, config.T, Lam)


def select_eps0(data: StateField, Lam: float, N: int, m_max: int = 6, eps0: float = 0.25,
                max_halvings: int = 12) -> float:
    """Halve eps0 until every mollified datum lies within Lam/2 of the first in H^N."""
    grid = data.grid
    for _ in range(max_halvings + 1):
        spec = MollifierSpec(eps0, grid.dim)
        first = mollify(data.data, grid, spec.eps(0), spec)
        drift = max(norm(mollify(data.data, grid, spec.eps(m), spec) - first, grid, "sobolev", N)
                    for m in range(1, m_max + 1))
        if drift <= 0.5 * Lam:
            return eps0
        eps0 *= 0.5
    raise TubeExceeded(f"mollified data drift {drift:.3g} exceeds Lambda/2 = {0.5 * Lam:.3g}", 0)


def picard_select_T(data: StateField, config: SolverConfig, m_max: int = 6, eps0: float | None = None,
                    V_bar=None, box=None, T_start: float = 1.0, max_halvings: int = 8,
                    factor: float = 2.0) -> PicardResult:
    """Start at T_start and halve T until the tube condition and contraction hold.

    With ``eps0=None`` the mollifier scale comes from :func:`select_eps0`.
    """
    if eps0 is None:
        Vb = V_bar if V_bar is not None else data.data.reshape(10, -1)[:, 0]
        bx = box or default_box(Vb)
        Lam = config.Lambda if config.Lambda is not None else default_lambda(Vb, bx)
        eps0 = select_eps0(data, Lam, config.N_d, m_max)
    T = T_start
    last_err = None
    for _ in range(max_halvings + 1):
        try:
            res = picard_sequence(data, replace(config, T=T), m_max, eps0, V_bar, box)
            if all(r >= factor for r in res.ratios):
                return res
        except (TubeExceeded, EscapedBox) as exc:
            last_err = exc
        T *= 0.5
    if last_err is not None:
        raise last_err
    return res


# ---------------------------------------------------------------------------
# conical energies

@dataclass
class EnergySeries:
    times: np.ndarray
    E: np.ndarray
    sobolev_sq: np.ndarray      # sum_alpha ||d_alpha Vdot||^2 over the cone section
    gronwall_C: float
    sandwich: np.ndarray | None = None


def gronwall_fit(times, E) -> float:
    """Smallest C >= 0 with E(t) <= (E(0) + C t) exp(C t) at every sample."""
    times = np.asarray(times, dtype=float)
    E = np.asarray(E, dtype=float)
    E0 = E[0]
    best = 0.0
    for t, e in zip(times[1:], E[1:]):
        if e <= E0 or t <= 0:
            continue
        f = lambda C: (E0 + C * t) * math.exp(C * t) - e  # noqa: E731
        hi = 1.0
        while f(hi) < 0:
            hi *= 2.0
        best = max(best, optimize.brentq(f, 0.0, hi, xtol=1e-14, rtol=1e-12))
    return float(best)


def energy_monitor(bgs, variation: Trajectory, cone: ConeSpec, N_d: int = 3,
                   C_box: float | None = None, eos: EosSpec | None = None) -> EnergySeries:
    """E(t; r; N_d) over the shrinking sections of a truncated light cone."""
    grid = variation.grid
    T = variation.times[-1]
    if cone.r < T:
        raise ConeTooSmall(f"cone radius {cone.r} smaller than T = {T}")
    alphas = MultiIndex.up_to(N_d, grid.dim)
    E, sob = [], []
    for t, Vd in zip(variation.times, variation.snapshots):
        Vb = bgs.at(t) if isinstance(bgs, Trajectory) else (
            bgs.data if isinstance(bgs, StateField) else np.asarray(bgs))
        if Vb.shape == (10,):
            Vb = Vb.reshape((10,) + (1,) * grid.dim)
        mask = cone.mask(grid, t)
        e2 = s2 = 0.0
        for a in alphas:
            dV = derivative_alpha(Vd, grid, a, "spectral")
            e2 += float(np.sum(np.where(mask, current_value(Vb, dV, eos).J0, 0.0)))
            s2 += float(np.sum(np.where(mask, np.sum(dV * dV, axis=0), 0.0)))
        E.append(math.sqrt(max(e2, 0.0) * grid.cell_volume))
        sob.append(s2 * grid.cell_volume)
    E = np.array(E)
    sob = np.array(sob)
    sandwich = None
    if C_box is not None:
        E2 = E**2
        tol = 1e-12 * np.maximum(E2, 1e-300)
        sandwich = (C_box * E2 <= sob + tol) & (sob <= E2 / C_box + tol)
    return EnergySeries(np.array(variation.times), E, sob, gronwall_fit(variation.times, E), sandwich)


def difference_trajectory(a: Trajectory, ref) -> Trajectory:
    """a - ref, with ref a Trajectory on the same times or a constant state."""
    out = Trajectory(a.grid)
    for t, s in zip(a.times, a.snapshots):
        r = ref.at(t) if isinstance(ref, Trajectory) else np.asarray(ref).reshape((10,) + (1,) * a.grid.dim)
        out.append(t, s - r)
    return out


# ---------------------------------------------------------------------------
# refinement diagnostics

def entropy_defect(traj: Trajectory) -> float:
    """max |U^mu d_mu S| over interior stored times.

    Time derivatives are centered differences of the stored snapshots, space
    derivatives are spectral; both errors are O(h^2) at fixed CFL.
    """
    grid = traj.grid
    ts, snaps = traj.times, traj.snapshots
    worst = 0.0
    for i in range(1, len(ts) - 1):
        V = snaps[i]
        dS_dt = (snaps[i + 1][0] - snaps[i - 1][0]) / (ts[i + 1] - ts[i - 1])
        U0 = np.sqrt(1.0 + np.sum(V[2:5] ** 2, axis=0))
        adv = U0 * dS_dt
        for k in range(grid.dim):
            orders = (0,) * k + (1,)
            adv = adv + V[2 + k] * spectral_derivative(V[0], grid, orders)
        worst = max(worst, float(np.max(np.abs(adv))))
    return worst


def observed_order(e_coarse: float, e_fine: float, factor: float = 2.0) -> float:
    return float(math.log(e_coarse / e_fine) / math.log(factor))


def richardson_order(coarse: Trajectory, mid: Trajectory, fine: Trajectory) -> float:
    """Order from final states on grids h, h/2, h/4 (sampled at coarse points)."""
    a, b, c = coarse.final, mid.final, fine.final
    sl = (slice(None),) + (slice(None, None, 2),) * coarse.grid.dim
    return observed_order(float(np.max(np.abs(a - b[sl]))), float(np.max(np.abs(b - c[sl]))))


def time_derivative_bound(traj: Trajectory, N: int) -> float:
    """max over stored steps of ||(V(t+dt) - V(t)) / dt||_{H^N}; a measured stand-in
    for the a priori bounds on the time derivative."""
    ts, snaps = traj.times, traj.snapshots
    return max((norm((snaps[i + 1] - snaps[i]) / (ts[i + 1] - ts[i]), traj.grid, "sobolev", N)
                for i in range(len(ts) - 1)), default=0.0)


# ---------------------------------------------------------------------------
# causality and dependence

@dataclass
class CausalityReport:
    times: np.ndarray
    deviation: np.ndarray

    @property
    def max_deviation(self) -> float:
        return float(self.deviation.max()) if self.deviation.size else 0.0


def causality_report(traj: Trajectory, r0: float, V_bar, center=(0.0, 0.0, 0.0)) -> CausalityReport:
    """max |V(t, s) - V_bar| over |s| >= r0 + t at each stored time."""
    grid = traj.grid
    rad = grid.radius(np.asarray(center)[: grid.dim])
    ref = np.asarray(V_bar, dtype=float).reshape((10,) + (1,) * grid.dim)
    dev = []
    for t, s in zip(traj.times, traj.snapshots):
        outside = rad >= r0 + t
        dev.append(float(np.max(np.abs(s - ref)[:, outside])) if np.any(outside) else 0.0)
    return CausalityReport(np.array(traj.times), np.array(dev))


@dataclass
class DependenceReport:
    scales: list
    ratios: list
    exponent: float | None
    expected_exponent: float | None
    family_x: list = field(default_factory=list)
    family_y: list = field(default_factory=list)


def _sup_norm_over_time(a: Trajectory, b: Trajectory, grid: Grid, N: float) -> float:
    return max(norm(sa - sb, grid, "sobolev", N) for sa, sb in zip(a.snapshots, b.snapshots))


def frequency_family(grid: Grid, ks, N: int, size: float, window_radius: float = 2.0,
                     component: int = 1) -> list:
    """Windowed modes sin(k x) scaled to a common H^N norm ``size``."""
    x = grid.coords()[0]
    s = np.clip(np.abs(x) / window_radius, 0, 1)
    win = np.where(s < 1, np.exp(1.0 - 1.0 / np.maximum(1.0 - s * s, 1e-300)), 0.0)
    out = []
    for k in ks:
        p = np.zeros((10,) + grid.shape)
        p[component] = np.sin(k * x) * win
        p *= size / norm(p, grid, "sobolev", N)
        out.append(p)
    return out


def dependence_experiment(data: StateField, perturbation: StateField, scales, config: SolverConfig,
                          box: AdmissibleBox | None = None, N_prime: int | None = None,
                          family_ks=(2.0, 4.0, 8.0, 16.0), family_size: float = 1e-3) -> DependenceReport:
    """Lipschitz ratios in H^{N_d-1} and the H^{N'} interpolation exponent.

    The exponent is the log-log slope of max_t ||V_k - V||_{H^{N'}} against the
    L2 size of the initial difference, over a family of windowed modes of
    fixed H^{N_d} norm; interpolation predicts 1 - N'/N_d.
    """
    grid = data.grid
    N = config.N_d
    base = integrate_nonlinear(data, config, box)
    ratios = []
    for lam in scales:
        if lam == 0:
            ratios.append(0.0)
            continue
        pert = lam * perturbation.data
        run = integrate_nonlinear(StateField(grid, data.data + pert), config, box)
        ratios.append(_sup_norm_over_time(run, base, grid, N - 1) / norm(pert, grid, "sobolev", N - 1))
    exponent = expected = None
    xs, ys = [], []
    if N_prime is not None and family_ks:
        for p in frequency_family(grid, family_ks, N, family_size):
            run = integrate_nonlinear(StateField(grid, data.data + p), config, box)
            xs.append(norm(p, grid, "L2"))
            ys.append(_sup_norm_over_time(run, base, grid, N_prime))
        exponent = float(np.polyfit(np.log(xs), np.log(ys), 1)[0])
        expected = 1.0 - N_prime / N
    return DependenceReport(list(scales), ratios, exponent, expected, xs, ys)


# ---------------------------------------------------------------------------
# canonical data and diagnostics export

def bump(r, radius: float) -> np.ndarray:
    """C-infinity bump with peak 1 at r = 0 and support |r| < radius."""
    s = np.abs(np.asarray(r, dtype=float)) / radius
    out = np.zeros_like(s)
    inside = s < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def smooth_cutoff(r, inner: float, outer: float) -> np.ndarray:
    """C-infinity radial cutoff: 1 for |r| <= inner, 0 for |r| >= outer."""
    s = (np.abs(np.asarray(r, dtype=float)) - inner) / (outer - inner)

    def f(t):
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = np.exp(-1.0 / t[pos])
        return out

    a, b = f(1.0 - s), f(s)
    return a / (a + b)


@dataclass(frozen=True)
class PulseSpec:
    """Gaussian profile cut off smoothly between ``inner`` and ``support``."""

    amplitude: float = 0.1
    width: float = 0.7
    inner: float = 1.0
    support: float = 2.0
    entropy_amplitude: float | None = None

    def profile(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.exp(-(r / self.width) ** 2) * smooth_cutoff(r, self.inner, self.support)


def pulse_data(grid: Grid, background: ConstantState, pulse: PulseSpec | None = None) -> StateField:
    """Quiet background plus a compactly supported pulse in P and S (relative amplitudes)."""
    pulse = pulse or PulseSpec()
    V = StateField.constant(grid, background.V_bar).data
    b = pulse.profile(grid.radius())
    ent = pulse.amplitude if pulse.entropy_amplitude is None else pulse.entropy_amplitude
    V[1] = V[1] * (1.0 + pulse.amplitude * b)
    V[0] = V[0] * (1.0 + ent * b)
    return StateField(grid, V)


DIAGNOSTIC_COLUMNS = ("t", "L2", "HN", "sup", "E_cone", "constraint_defect", "cone_deviation")


def diagnostics_rows(traj: Trajectory, V_bar, N_d: int, E_cone=None, cone_deviation=None) -> list:
    grid = traj.grid
    ref = np.asarray(V_bar, dtype=float)
    rows = []
    for i, (t, s) in enumerate(zip(traj.times, traj.snapshots)):
        diff = s - ref.reshape((10,) + (1,) * grid.dim)
        rows.append((t, norm(diff, grid, "L2"), norm(diff, grid, "sobolev", N_d),
                     norm(diff, grid, "sup"),
                     float(E_cone[i]) if E_cone is not None else float("nan"),
                     traj.diagnostics["constraint_defect"][i],
                     float(cone_deviation[i]) if cone_deviation is not None else float("nan")))
    return rows


def write_diagnostics_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DIAGNOSTIC_COLUMNS)
        for r in rows:
            w.writerow([f"{v:.17g}" for v in r])
