"""Scenario runner.

``nordfluid run --config cfg.json [--out DIR] [--seed N]`` executes one built-in
scenario (or, when the config names none, all of them in turn) and writes CSV
payloads plus ``summary.json``.  ``nordfluid list`` prints the scenario ids.

Exit status: 0 when every check passes, 1 when a check fails, 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .energy import current_matrices, current_value, divergence_rhs, uniform_constant, write_uniform_csv
from .eos import EosSpec, energy_density, sound_speed_sq, weighted_energy_grad, weighted_sound_speed_sq
from .errors import InvalidConfig, NordfluidError, UnknownScenario
from .field import Grid, MultiIndex, StateField, appendix_inequality
from .geometry import (
    ETA_INV,
    acoustical_metrics,
    characteristic_form,
    hyperbolic_roots,
    symbol,
    write_sweep_csv,
)
from .solver import (
    ConeSpec,
    PulseSpec,
    SolverConfig,
    causality_report,
    default_box,
    dependence_experiment,
    diagnostics_rows,
    difference_trajectory,
    energy_monitor,
    entropy_defect,
    integrate_nonlinear,
    observed_order,
    picard_select_T,
    pulse_data,
    richardson_order,
    solve_linearized,
    time_derivative_bound,
    write_diagnostics_csv,
)
from .state import (
    CANONICAL_EOS,
    CANONICAL_STATE,
    ETA,
    AdmissibleBox,
    background_solve,
    four_velocity,
    stress_energy,
)
from .system import InhomTerms, coeff_matrices, det_a0, det_a0_short, residual_eov

# ---------------------------------------------------------------------------
# configuration

DEFAULTS = {
    "scenario": None,
    "seed": 0,
    "out": "nordfluid-out",
    "samples": 1000,
    "eos": {"gamma": 4.0 / 3.0, "coeff": "exp", "coeff_params": []},
    "background": {"S_bar": 1.0, "p_bar": 1.0, "kappa": 1.0},
    "grid": {"dim": 1, "points": 512, "extent": 8.0},
    "solver": {"T": 1.0, "cfl": 0.4, "dt": None, "N_d": 3, "Lambda": None,
               "dissipation": 0.01, "scheme": "order-2"},
    "pulse": {"amplitude": 0.1, "width": 0.7, "inner": 1.0, "support": 2.0},
    "picard": {"m_max": 6, "eps0": None, "T_start": 1.0, "max_halvings": 8},
    "dependence": {"scales": [1e-2, 1e-3, 1e-4], "N_prime": 2, "modes": [2.0, 4.0, 8.0, 16.0],
                   "mode_size": 1e-3},
    "energy": {"cone_r": None, "source": 0.5},
}

_NUMBER = (int, float)


def _merge(base: dict, over: dict, path: str) -> dict:
    if not isinstance(over, dict):
        raise InvalidConfig("expected an object", path or "<root>")
    out = copy.deepcopy(base)
    for key, val in over.items():
        sub = f"{path}.{key}" if path else key
        if key not in base:
            raise InvalidConfig("unknown field", sub)
        if isinstance(base[key], dict):
            out[key] = _merge(base[key], val, sub)
        else:
            out[key] = val
    return out


def _num(cfg: dict, path: str, positive: bool = False, allow_none: bool = False, integer: bool = False):
    node = cfg
    for part in path.split("."):
        node = node[part]
    if node is None and allow_none:
        return None
    if isinstance(node, bool) or not isinstance(node, _NUMBER):
        raise InvalidConfig(f"expected a number, got {node!r}", path)
    if integer and int(node) != node:
        raise InvalidConfig(f"expected an integer, got {node!r}", path)
    if positive and not node > 0:
        raise InvalidConfig(f"expected a positive number, got {node!r}", path)
    return int(node) if integer else float(node)


@dataclass
class ScenarioConfig:
    scenario: str | None
    eos: EosSpec
    background: dict
    grid: Grid
    solver: SolverConfig
    pulse: PulseSpec
    out: Path
    seed: int = 0
    samples: int = 1000
    picard: dict = field(default_factory=dict)
    dependence: dict = field(default_factory=dict)
    energy: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def canonical(self) -> bool:
        """Whether the physics parameters are the canonical desk values."""
        return (self.eos == CANONICAL_EOS
                and self.background == DEFAULTS["background"])


def parse_config(doc: dict, out: str | None = None, seed: int | None = None) -> ScenarioConfig:
    """Merge a JSON document over the embedded defaults and validate it."""
    cfg = _merge(DEFAULTS, doc, "")
    if out is not None:
        cfg["out"] = out
    if seed is not None:
        cfg["seed"] = seed
    sc = cfg["scenario"]
    if sc is not None and not isinstance(sc, str):
        raise InvalidConfig("expected a string or null", "scenario")
    if sc is not None and sc not in SCENARIOS:
        raise UnknownScenario(sc)
    seed_v = _num(cfg, "seed", integer=True)
    if seed_v < 0:
        raise InvalidConfig("seed must be non-negative", "seed")
    try:
        eos = EosSpec.from_record(cfg["eos"])
    except (ValueError, TypeError) as exc:
        raise InvalidConfig(str(exc), "eos") from exc
    bg = {k: _num(cfg, f"background.{k}", positive=True) for k in ("S_bar", "p_bar", "kappa")}
    try:
        grid = Grid(_num(cfg, "grid.dim", integer=True), _num(cfg, "grid.points", integer=True),
                    _num(cfg, "grid.extent", positive=True))
    except ValueError as exc:
        raise InvalidConfig(str(exc), "grid") from exc
    s = cfg["solver"]
    if s["scheme"] not in ("order-2", "order-4", "spectral"):
        raise InvalidConfig(f"unknown scheme {s['scheme']!r}", "solver.scheme")
    solver = SolverConfig(
        T=_num(cfg, "solver.T", positive=True), cfl=_num(cfg, "solver.cfl", positive=True),
        dt=_num(cfg, "solver.dt", positive=True, allow_none=True),
        N_d=_num(cfg, "solver.N_d", positive=True, integer=True),
        Lambda=_num(cfg, "solver.Lambda", positive=True, allow_none=True),
        dissipation=_num(cfg, "solver.dissipation"), scheme=s["scheme"],
        kappa=bg["kappa"], eos=eos, seed=seed_v)
    if solver.cfl > 0.5:
        raise InvalidConfig("cfl must not exceed 0.5", "solver.cfl")
    pulse = PulseSpec(_num(cfg, "pulse.amplitude"), _num(cfg, "pulse.width", positive=True),
                      _num(cfg, "pulse.inner", positive=True), _num(cfg, "pulse.support", positive=True))
    if pulse.inner >= pulse.support:
        raise InvalidConfig("inner must be smaller than support", "pulse.inner")
    if grid.extent < pulse.support + solver.T + 1.0:
        raise InvalidConfig("extent must be at least support + T + 1", "grid.extent")
    for key in ("m_max", "max_halvings"):
        _num(cfg, f"picard.{key}", positive=True, integer=True)
    _num(cfg, "picard.eps0", positive=True, allow_none=True)
    _num(cfg, "picard.T_start", positive=True)
    for i, lam in enumerate(cfg["dependence"]["scales"]):
        if isinstance(lam, bool) or not isinstance(lam, _NUMBER) or lam < 0:
            raise InvalidConfig("expected a non-negative number", f"dependence.scales[{i}]")
    _num(cfg, "dependence.N_prime", integer=True)
    _num(cfg, "energy.cone_r", positive=True, allow_none=True)
    _num(cfg, "energy.source")
    return ScenarioConfig(sc, eos, bg, grid, solver, pulse, Path(cfg["out"]), seed_v,
                          _num(cfg, "samples", positive=True, integer=True), cfg["picard"],
                          cfg["dependence"], cfg["energy"], cfg)


def load_config(path, out=None, seed=None) -> ScenarioConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InvalidConfig(f"cannot read config: {exc}", str(path)) from exc
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"invalid JSON: {exc}", str(path)) from exc
    return parse_config(doc, out, seed)


# ---------------------------------------------------------------------------
# report bundle

@dataclass
class Check:
    name: str
    value: float
    tolerance: str
    passed: bool

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: value={self.value:.6g} ({self.tolerance})"


@dataclass
class ReportBundle:
    scenario: str
    checks: list = field(default_factory=list)
    files: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, value, tolerance: str, passed) -> Check:
        if any(c.name == name for c in self.checks):
            raise ValueError(f"duplicate check {name!r}")
        c = Check(name, float(value), tolerance, bool(passed))
        self.checks.append(c)
        return c

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def merge(self, other: "ReportBundle") -> None:
        for c in other.checks:
            self.add(c.name, c.value, c.tolerance, c.passed)
        self.files.extend(other.files)
        self.info[other.scenario] = other.info

    def to_record(self) -> dict:
        return {"scenario": self.scenario, "passed": self.passed,
                "checks": [{"name": c.name, "value": c.value, "tolerance": c.tolerance,
                            "pass": c.passed} for c in self.checks],
                "files": [str(f) for f in self.files], "info": self.info}


def _csv(path: Path, header, rows, bundle: ReportBundle) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in r])
    bundle.files.append(path)


# ---------------------------------------------------------------------------
# sampling helpers

def random_states(rng, count: int) -> np.ndarray:
    """Admissible states spread over a wide range; shape (count, 10)."""
    V = np.empty((count, 10))
    V[:, 0] = rng.uniform(0.3, 3.0, count)
    V[:, 1] = rng.uniform(0.1, 3.0, count)
    V[:, 2:5] = rng.normal(0.0, 0.6, (count, 3))
    V[:, 5] = rng.uniform(-0.5, 0.5, count)
    V[:, 6:10] = rng.normal(0.0, 1.0, (count, 4))
    return V


def random_core_covectors(rng, count: int, rmax: float = 0.999) -> np.ndarray:
    """Covectors (1, r n) with |n| = 1, r < rmax: the positive interior of the light cone."""
    n = rng.normal(size=(count, 3))
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    r = rmax * rng.random((count, 1)) ** (1.0 / 3.0)
    return np.hstack([np.ones((count, 1)), r * n])


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


# ---------------------------------------------------------------------------
# thermodynamics and background

def richardson_fd(f, x, rel_step: float = 1e-3):
    """Central difference of f at x, Richardson-extrapolated over steps h and h/2."""
    h = rel_step * np.abs(x)
    d1 = (f(x + h) - f(x - h)) / (2.0 * h)
    d2 = (f(x + h / 2) - f(x - h / 2)) / h
    return (4.0 * d2 - d1) / 3.0


def check_eos_identity(bundle: ReportBundle, eos: EosSpec, rng, count: int) -> None:
    n = 10.0 ** rng.uniform(-3.0, 3.0, count)
    S = 10.0 ** rng.uniform(-2.0, 1.0, count)
    p = eos.A(S) * n**eos.gamma
    dRdp = richardson_fd(lambda q: energy_density(eos, S, q), p)
    err = float(np.max(np.abs(sound_speed_sq(eos, S, p) * dRdp - 1.0)))
    bundle.add("eos_identity", err, "max |sigma^2 dR/dp - 1| <= 1e-8", err <= 1e-8)
    s2c = float(weighted_sound_speed_sq(CANONICAL_EOS, 1.0, 1.0, 0.0))
    dc = float(weighted_energy_grad(CANONICAL_EOS, 1.0, 1.0, 0.0)[1])
    e = max(abs(s2c - 4.0 / 15.0), abs(dc - 15.0 / 4.0))
    bundle.add("eos_canonical", e, "sigma^2 = 4/15 and dR/dP = 15/4 to 1e-12", e <= 1e-12)


def scenario_background(cfg: ScenarioConfig, out: Path) -> ReportBundle:
    b = ReportBundle("background-residual")
    rng = np.random.default_rng(cfg.seed)
    check_eos_identity(b, cfg.eos, rng, cfg.samples)
    bg = background_solve(cfg.eos, cfg.background["kappa"], cfg.background["S_bar"],
                          cfg.background["p_bar"])
    b.add("background_residual", bg.residual, "< 1e-12", bg.residual < 1e-12)
    if cfg.canonical:
        b.add("phi_bar", bg.phi_bar, "-0.3005 +/- 0.0005", abs(bg.phi_bar + 0.3005) <= 5e-4)
        b.add("P_bar_relation", abs(bg.P_bar + bg.phi_bar), "|P_bar + phi_bar| <= 1e-10",
              abs(bg.P_bar + bg.phi_bar) <= 1e-10)
    se = stress_energy(bg.V_bar, bg.kappa, cfg.eos, seed=cfg.seed)
    b.info.update(phi_bar=bg.phi_bar, P_bar=bg.P_bar, monotone=bg.monotone,
                  weak=se.weak, strong=se.strong, dominant=se.dominant)
    _csv(out / "background.csv", ["S_bar", "p_bar", "kappa", "phi_bar", "P_bar", "residual", "monotone"],
         [(bg.S_bar, bg.p_bar, bg.kappa, bg.phi_bar, bg.P_bar, bg.residual, int(bg.monotone))], b)
    return b


# ---------------------------------------------------------------------------
# characteristic geometry

def check_det_a0(bundle: ReportBundle, states: np.ndarray, eos: EosSpec) -> None:
    num = np.array([np.linalg.det(coeff_matrices(V, eos).A0) for V in states])
    short = np.array([float(det_a0_short(V, eos)) for V in states])
    closed = np.array([float(det_a0(V, eos)) for V in states])
    err_r = float(np.max(np.abs(short - num) / np.abs(num)))
    err_c = float(np.max(np.abs(closed - num) / np.abs(num)))
    bundle.add("det_a0_short_formula", err_r, "relative <= 1e-10", err_r <= 1e-10)
    star = CANONICAL_STATE.to_array()
    d_star = float(np.linalg.det(coeff_matrices(star, CANONICAL_EOS).A0))
    bundle.add("det_a0_canonical", d_star, "-100/3 to relative 1e-10", _rel(d_star, -100.0 / 3.0) <= 1e-10)
    bundle.add("det_a0_expanded_formula", err_c, "relative <= 1e-10", err_c <= 1e-10)


def _factor_product(V, xi, eos):
    pair = acoustical_metrics(V, eos)
    Uup = four_velocity(V)
    ux = Uup @ xi
    hq = xi @ ETA_INV @ xi - (1.0 / pair.sigma2 - 1.0) * ux**2
    return xi[0] ** 3 * ux**3 * hq * (xi @ ETA_INV @ xi)


def check_characteristic_form(bundle: ReportBundle, states, rng, eos) -> list:
    rows = []
    worst = 0.0
    spread = 0.0
    for V in states:
        xis = rng.normal(size=(4, 4))
        ratios = []
        for xi in xis:
            dec = characteristic_form(V, xi, eos=eos)
            ref = _factor_product(V, xi, eos)
            worst = max(worst, _rel(dec.value, ref))
            ratios.append(np.linalg.det(symbol(V, xi, eos)) / dec.value)
        rows.append((V, xis[0], characteristic_form(V, xis[0], eos=eos), None))
        spread = max(spread, float(np.ptp(ratios) / np.max(np.abs(ratios))))
    bundle.add("char_form_factorization", worst, "relative <= 1e-12", worst <= 1e-12)
    bundle.add("symbol_det_proportional", spread, "det(symbol)/Q constant in xi to 1e-8", spread <= 1e-8)
    star = CANONICAL_STATE.to_array()
    q = characteristic_form(star, [1.0, 0, 0, 0], eos=CANONICAL_EOS).value
    bundle.add("char_form_canonical", q, "15/4 to 1e-12", abs(q - 15.0 / 4.0) <= 1e-12)
    qn = characteristic_form(star, [1.0, 1.0, 0, 0], eos=CANONICAL_EOS).value
    bundle.add("char_form_null", abs(qn), "|Q| <= 1e-12 on a null covector", abs(qn) <= 1e-12)
    planes = [[0, 1.0, 0, 0], [0, 0, 1.0, 0], [0, 0, 0, 1.0], [0, 0.3, 0.4, 0]]
    bad = sum(characteristic_form(star, xi, eos=CANONICAL_EOS).sheets != {"P_U", "P_0"} for xi in planes)
    bundle.add("sheets_plane_at_rest", bad, "all classify to {P_U, P_0}", bad == 0)
    return rows


def check_hyperbolicity(bundle: ReportBundle, states, rng, eos) -> list:
    xis = random_core_covectors(rng, len(states))
    ups = rng.normal(size=(len(states), 4))
    worst = 0.0
    reports = []
    for V, xi, up in zip(states, xis, ups):
        rep = hyperbolic_roots(V, xi, up, eos=eos)
        reports.append(rep)
        r = rep.roots
        worst = max(worst, float(np.max(np.abs(r.imag) / np.maximum(np.abs(r), 1e-300))))
    bundle.add("hyperbolic_roots_real", worst, "max |Im| relative < 1e-7", worst < 1e-7)
    star = CANONICAL_STATE.to_array()
    rep = hyperbolic_roots(star, [1.0, 0, 0, 0], [0, 1.0, 0, 0], eos=CANONICAL_EOS)
    s = math.sqrt(4.0 / 15.0)
    expect = np.sort([0.0] * 6 + [s, -s, 1.0, -1.0])
    err = float(np.max(np.abs(np.sort(rep.roots.real) - expect)) + np.max(np.abs(rep.roots.imag)))
    bundle.add("canonical_roots", err, "{0 x6, +-sigma, +-1} to 1e-12", err <= 1e-12)
    return list(zip(xis, reports))


def check_cone_inclusion(bundle: ReportBundle, states, rng, eos, per_state: int = 64) -> None:
    bad_vec = bad_cov = 0
    for V in states:
        pair = acoustical_metrics(V, eos)
        g_bar = math.exp(2.0 * V[5]) * ETA
        X = np.hstack([np.ones((per_state, 1)), rng.uniform(-3.0, 3.0, (per_state, 3))])
        hX = np.einsum("ia,ab,ib->i", X, pair.h, X)
        gX = np.einsum("ia,ab,ib->i", X, g_bar, X)
        bad_vec += int(np.sum((hX < 0) & ~(gX < 0)))
        xi = np.hstack([np.sign(rng.normal(size=(per_state, 1))), rng.uniform(-1.0, 1.0, (per_state, 3))])
        gx = np.einsum("ia,ab,ib->i", xi, ETA_INV, xi)
        hx = np.einsum("ia,ab,ib->i", xi, pair.h_inv, xi)
        bad_cov += int(np.sum((gx < 0) & ~(hx < 0)))
    bundle.add("cone_inclusion_vectors", bad_vec, "h-timelike implies g-timelike (0 violations)", bad_vec == 0)
    bundle.add("cone_inclusion_covectors", bad_cov, "g-cotimelike implies h-cotimelike (0 violations)",
               bad_cov == 0)


def scenario_char_geometry(cfg: ScenarioConfig, out: Path) -> ReportBundle:
    b = ReportBundle("char-geometry-sweep")
    rng = np.random.default_rng(cfg.seed)
    states = random_states(rng, cfg.samples)
    check_det_a0(b, states, cfg.eos)
    rows = check_characteristic_form(b, states, rng, cfg.eos)
    hyp = check_hyperbolicity(b, states, rng, cfg.eos)
    check_cone_inclusion(b, states, rng, cfg.eos)
    sweep = []
    for V, (xi, rep) in zip(states, hyp):
        sweep.append((V, xi, characteristic_form(V, xi, eos=cfg.eos), rep))
    path = out / "char_sweep.csv"
    write_sweep_csv(path, sweep)
    b.files.append(path)
    path = out / "char_forms.csv"
    write_sweep_csv(path, rows)
    b.files.append(path)
    return b


# ---------------------------------------------------------------------------
# energy currents

def check_current_positivity(bundle: ReportBundle, states, rng, eos, n_xi: int) -> None:
    lam_min = np.inf
    for V in states:
        B = current_matrices(V, eos)
        xis = random_core_covectors(rng, n_xi)
        M = np.einsum("km,mij->kij", xis, B)
        lam_min = min(lam_min, float(np.min(np.linalg.eigvalsh(M)[:, 0])))
    bundle.add("current_form_positive", lam_min, "min eigenvalue > 0", lam_min > 0)


def check_uniform_constant(bundle: ReportBundle, box: AdmissibleBox, rng, count, eos, seed):
    uc = uniform_constant(box, sampling=count, seed=seed, eos=eos)
    bundle.add("uniform_constant_in_unit_interval", uc.C_box, "0 < C < 1", 0.0 < uc.C_box < 1.0)
    V = box.lower + (box.upper - box.lower) * rng.random((count, 10))
    Vd = rng.normal(size=(count, 10))
    viol = 0
    for v, vd in zip(V, Vd):
        J0 = float(current_value(v, vd, eos).J0)
        n2 = float(vd @ vd)
        viol += int(not (uc.C_box * n2 <= J0 * (1 + 1e-12) and J0 <= n2 / uc.C_box * (1 + 1e-12)))
    bundle.add("uniform_sandwich", viol, "C|Vdot|^2 <= J0 <= |Vdot|^2/C (0 violations)", viol == 0)
    star = CANONICAL_STATE.to_array()
    c1 = uniform_constant(AdmissibleBox(star, star), eos=CANONICAL_EOS).C_box
    bundle.add("single_point_box", c1, "C = 1/5 to 1e-12", abs(c1 - 0.2) <= 1e-12)
    return uc


# manufactured fields c + a sin(x + w t + p) per component
_MANU_BG = np.array([
    [1.2, 0.2, 1.0, 0.3], [0.9, 0.15, -1.3, 1.1], [0.1, 0.2, 0.7, 0.4], [-0.2, 0.1, 0.4, 2.0],
    [0.05, 0.1, -0.5, 0.9], [-0.1, 0.05, 0.8, 1.7], [0.2, 0.1, 0.3, 0.2], [0.1, 0.2, -0.6, 0.8],
    [-0.1, 0.1, 1.2, 2.5], [0.0, 0.1, 0.9, 0.1]])
_MANU_VAR = np.array([
    [0.3, 0.5, -0.4, 1.0], [-0.2, 0.4, 1.1, 0.3], [0.1, 0.3, 0.6, 2.2], [0.2, 0.2, -0.9, 0.7],
    [0.0, 0.3, 0.5, 1.4], [0.1, 0.4, -0.7, 0.6], [0.3, 0.2, 1.3, 1.9], [-0.1, 0.5, 0.2, 0.4],
    [0.2, 0.3, -1.0, 2.8], [0.1, 0.2, 0.4, 1.2]])


def _manufactured(coefs, x, t):
    c, a, w, p = (coefs[:, i][:, None] for i in range(4))
    arg = x[None] + w * t + p
    val = c + a * np.sin(arg)
    d = np.zeros((4, 10, x.size))
    d[0] = a * w * np.cos(arg)
    d[1] = a * np.cos(arg)
    return val, d


def divergence_error(points: int, t: float = 0.3, eos=None) -> float:
    """Sup error of the finite-difference divergence of J against the closed form.

    The variation is an arbitrary smooth field; the EOV sources are chosen so
    that it solves the EOV exactly.  Time and space steps both equal h.
    """
    L = math.pi
    h = 2.0 * L / points
    x = -L + h * np.arange(points)

    def pieces(s):
        Vb, dVb = _manufactured(_MANU_BG, x, s)
        Vd, dVd = _manufactured(_MANU_VAR, x, s)
        lhs = residual_eov(Vb, dVd, InhomTerms.zeros((points,)), eos)
        inhom = InhomTerms(lhs[:5], np.concatenate([lhs[5:6], lhs[6:9], lhs[9:10]]))
        return Vb, dVb, Vd, inhom

    def J(s):
        Vb, _, Vd, _ = pieces(s)
        return current_value(Vb, Vd, eos)

    Vb, dVb, Vd, inhom = pieces(t)
    exact = divergence_rhs(Vb, dVb, Vd, inhom, eos)
    dt_J0 = (J(t + h).J0 - J(t - h).J0) / (2.0 * h)
    J1 = J(t).J[0]
    dx_J1 = (np.roll(J1, -1) - np.roll(J1, 1)) / (2.0 * h)
    return float(np.max(np.abs(dt_J0 + dx_J1 - exact)))


def check_divergence(bundle: ReportBundle, eos, points=(64, 128)) -> list:
    errs = [divergence_error(n, eos=eos) for n in points]
    ratio = errs[0] / errs[1]
    bundle.add("divergence_richardson_ratio", ratio, "4 +/- 0.5", abs(ratio - 4.0) <= 0.5)
    return list(zip(points, errs))


def scenario_energy(cfg: ScenarioConfig, out: Path) -> ReportBundle:
    b = ReportBundle("energy-positivity-sweep")
    rng = np.random.default_rng(cfg.seed)
    states = random_states(rng, cfg.samples)
    check_current_positivity(b, states, rng, cfg.eos, cfg.samples)
    bg = background_solve(cfg.eos, cfg.background["kappa"], cfg.background["S_bar"],
                          cfg.background["p_bar"])
    box = default_box(bg.V_bar)
    uc = check_uniform_constant(b, box, rng, cfg.samples, cfg.eos, cfg.seed)
    path = out / "uniform_constant.csv"
    write_uniform_csv(path, [(box, uc)])
    b.files.append(path)
    errs = check_divergence(b, cfg.eos)
    _csv(out / "divergence.csv", ["points", "sup_error"], [(n, e) for n, e in errs], b)
    b.info.update(C_box=uc.C_box)
    return b


# ---------------------------------------------------------------------------
# evolution scenarios

def _setup(cfg: ScenarioConfig, grid: Grid | None = None):
    grid = grid or cfg.grid
    bg = background_solve(cfg.eos, cfg.background["kappa"], cfg.background["S_bar"],
                          cfg.background["p_bar"])
    box = default_box(bg.V_bar)
    return grid, bg, box, pulse_data(grid, bg, cfg.pulse)


def check_equilibrium(bundle: ReportBundle, cfg: ScenarioConfig, steps: int = 1000) -> None:
    grid, bg, box, _ = _setup(cfg)
    dt, _ = cfg.solver.step_size(grid)
    conf = replace(cfg.solver, T=steps * dt, dt=dt)
    tr = integrate_nonlinear(StateField.constant(grid, bg.V_bar), conf, box)
    S = np.array(tr.snapshots)
    per_step = float(np.max(np.abs(np.diff(S, axis=0))))
    bundle.add("equilibrium_drift_per_step", per_step, f"sup change per step < 1e-12 over {steps} steps",
               per_step < 1e-12)


def check_refinement(bundle: ReportBundle, cfg: ScenarioConfig) -> dict:
    trs = []
    for n in (cfg.grid.points // 2, cfg.grid.points, cfg.grid.points * 2):
        grid, bg, box, data = _setup(cfg, Grid(cfg.grid.dim, n, cfg.grid.extent))
        trs.append(integrate_nonlinear(data, cfg.solver, box))
    order = richardson_order(*trs)
    bundle.add("richardson_order", order, "2 +/- 0.3", abs(order - 2.0) <= 0.3)
    ed = [entropy_defect(t) for t in trs]
    cd = [t.diagnostics["constraint_defect"][-1] for t in trs]
    ed_order = min(observed_order(ed[0], ed[1]), observed_order(ed[1], ed[2]))
    cd_order = min(observed_order(cd[0], cd[1]), observed_order(cd[1], cd[2]))
    bundle.add("entropy_defect_order", ed_order, "O(h^2): observed order >= 1.7", ed_order >= 1.7)
    bundle.add("constraint_defect_order", cd_order, "O(h^2): observed order >= 1.7", cd_order >= 1.7)
    return {"entropy_defect": ed, "constraint_defect": cd, "order": order}


def _cone_radius(cfg: ScenarioConfig) -> float:
    r = cfg.energy.get("cone_r")
    return float(r) if r is not None else cfg.pulse.support + 2.0 * cfg.solver.T


def driven_energy(cfg: ScenarioConfig, cfl: float, C_box: float | None = None):
    """Energy series of an EOV variation about the canonical pulse run, driven by
    a pulse-shaped source in the pressure equation."""
    grid, bg, box, data = _setup(cfg)
    conf = replace(cfg.solver, cfl=cfl, dt=None)
    tr = integrate_nonlinear(data, conf, box)
    src = InhomTerms.zeros(grid.shape)
    src.b[1] = float(cfg.energy["source"]) * cfg.pulse.profile(grid.radius())
    Vb = bg.V_bar.reshape((10,) + (1,) * grid.dim)
    var = solve_linearized(tr, StateField(grid, data.data - Vb), src, conf)
    return energy_monitor(tr, var, ConeSpec(_cone_radius(cfg)), conf.N_d, C_box, conf.eos)


def check_energy(bundle: ReportBundle, cfg: ScenarioConfig, C_box: float):
    grid, bg, box, data = _setup(cfg)
    tr = integrate_nonlinear(data, cfg.solver, box)
    cone = ConeSpec(_cone_radius(cfg))
    own = energy_monitor(tr, difference_trajectory(tr, bg.V_bar), cone, cfg.solver.N_d, C_box, cfg.eos)
    bad = int(np.sum(~own.sandwich))
    bundle.add("energy_sandwich", bad, "holds at every stored t (0 violations)", bad == 0)
    base = cfg.solver.step_size(grid)[0] / grid.h
    c1 = driven_energy(cfg, base).gronwall_C
    c2 = driven_energy(cfg, 0.5 * base).gronwall_C
    stable = math.isfinite(c1) and math.isfinite(c2) and abs(c2 - c1) <= 0.2 * max(abs(c1), 1e-300)
    bundle.add("gronwall_C_stability", abs(c2 - c1) / max(abs(c1), 1e-300),
               "finite and |C(dt/2) - C(dt)| <= 0.2 C(dt)", stable)
    Vb = bg.V_bar.reshape((10,) + (1,) * grid.dim)
    var = solve_linearized(bg.V_bar, StateField(grid, data.data - Vb), None, cfg.solver)
    zero = energy_monitor(bg.V_bar, var, cone, cfg.solver.N_d, eos=cfg.eos)
    rise = float(np.max(np.diff(zero.E))) if len(zero.E) > 1 else 0.0
    bundle.add("zero_source_monotone", rise, "max increase of E <= 1e-8", rise <= 1e-8)
    bundle.info.update(gronwall_C=[c1, c2])
    return tr, own


def scenario_pulse(cfg: ScenarioConfig, out: Path) -> ReportBundle:
    b = ReportBundle("gaussian-pulse-1d")
    grid, bg, box, _ = _setup(cfg)
    check_equilibrium(b, cfg)
    b.info.update(check_refinement(b, cfg))
    C_box = uniform_constant(box, sampling=cfg.samples, seed=cfg.seed, eos=cfg.eos).C_box
    tr, own = check_energy(b, cfg, C_box)
    cz = causality_report(tr, cfg.pulse.support, bg.V_bar)
    rows = diagnostics_rows(tr, bg.V_bar, cfg.solver.N_d, own.E, cz.deviation)
    path = out / "diagnostics.csv"
    write_diagnostics_csv(path, rows)
    b.files.append(path)
    b.info.update(time_derivative_bound=time_derivative_bound(tr, cfg.solver.N_d - 1))
    return b


def scenario_picard(cfg: ScenarioConfig, out: Path) -> ReportBundle:
    b = ReportBundle("picard-contraction")
    grid, bg, box, data = _setup(cfg)
    p = cfg.picard
    res = picard_select_T(data, cfg.solver, int(p["m_max"]), p["eps0"], bg.V_bar, box,
                          T_start=float(p["T_start"]), max_halvings=int(p["max_halvings"]))
    ratios = res.ratios[:5]
    worst = min(ratios)
    b.add("picard_contraction", worst, "successive sup-differences shrink >= 2x for m = 1..5",
          len(ratios) == 5 and worst >= 2.0)
    tube = max(res.tube_norms)
    b.add("picard_tube", tube, f"max_m ||V^(m) - V0||_H^N <= Lambda = {res.Lambda:.6g}", tube <= res.Lambda)
    b.info.update(T=res.T, eps0=res.eps[0], Lambda=res.Lambda)
    _csv(out / "picard.csv", ["m", "eps", "difference", "tube_norm"],
         [(m, res.eps[m], res.differences[m - 1] if m else float("nan"), res.tube_norms[m])
          for m in range(len(res.tube_norms))], b)
    return b


def scenario_causality(cfg: ScenarioConfig, out: Path) -> ReportBundle:
    b = ReportBundle("causality")
    devs, reports = [], []
    pts = (cfg.grid.points // 2, cfg.grid.points, cfg.grid.points * 2)
    for n in pts:
        grid, bg, box, data = _setup(cfg, Grid(cfg.grid.dim, n, cfg.grid.extent))
        rep = causality_report(integrate_nonlinear(data, cfg.solver, box), cfg.pulse.support, bg.V_bar)
        reports.append(rep)
        devs.append(rep.max_deviation)
    b.add("causality_bound", devs[1], "max deviation outside r0 + t <= 1e-6", devs[1] <= 1e-6)
    b.add("causality_refinement", devs[2] / devs[1] if devs[1] else 0.0,
          "deviation strictly decreases under h -> h/2", devs[0] > devs[1] > devs[2])
    rows = []
    for n, rep in zip(pts, reports):
        rows += [(n, t, d) for t, d in zip(rep.times, rep.deviation)]
    _csv(out / "causality.csv", ["points", "t", "deviation"], rows, b)
    return b


def scenario_dependence(cfg: ScenarioConfig, out: Path) -> ReportBundle:
    b = ReportBundle("dependence")
    grid, bg, box, data = _setup(cfg)
    pert = np.zeros_like(data.data)
    shape = PulseSpec(1.0, 0.5, cfg.pulse.inner, cfg.pulse.support)
    pert[1] = bg.V_bar[1] * shape.profile(grid.radius(np.full(grid.dim, 0.3)))
    d = cfg.dependence
    rep = dependence_experiment(data, StateField(grid, pert), d["scales"], cfg.solver, box,
                                int(d["N_prime"]), tuple(d["modes"]), float(d["mode_size"]))
    pos = [r for r in rep.ratios if r > 0]
    spread = max(pos) / min(pos)
    b.add("lipschitz_plateau", spread, "max/min ratio <= 2", spread <= 2.0)
    b.add("interpolation_exponent", rep.exponent, f"{rep.expected_exponent:.6g} +/- 0.25",
          abs(rep.exponent - rep.expected_exponent) <= 0.25)
    _csv(out / "dependence.csv", ["kind", "x", "y"],
         [("lipschitz", float(s), float(r)) for s, r in zip(rep.scales, rep.ratios)]
         + [("interpolation", float(x), float(y)) for x, y in zip(rep.family_x, rep.family_y)], b)
    return b


# ---------------------------------------------------------------------------
# calculus inequalities

APPENDIX_FAMILY = tuple((w, a) for w in (0.4, 0.6, 0.8, 1.0, 1.2) for a in (0.25, 0.5, 1.0, 2.0))


def appendix_ratios(grid: Grid) -> dict:
    """Ratio lhs / rhs (without constant) per case over a 20-member width/amplitude family."""
    jet = [np.exp] * 6
    x = grid.x
    out = {k: [] for k in ("gagliardo_nirenberg", "product", "composition", "commutator",
                           "interpolation", "interpolation_identity")}
    for w, a in APPENDIX_FAMILY:
        bump = a * np.exp(-(x / w) ** 2)
        V = 1.0 + bump
        G = a * np.sin(2.0 * x / w) * np.exp(-(x**2))
        Vt = V + 0.1 * a * np.exp(-(((x - 0.3) / w) ** 2))
        out["gagliardo_nirenberg"].append(appendix_inequality("GN", grid, V=bump, i=1, k=2).ratio)
        out["product"].append(appendix_inequality("product", grid, V=V, G=G, jet=jet, j=1, vbar=1.0).ratio)
        out["composition"].append(appendix_inequality("composition_diff", grid, V=V, Vt=Vt, jet=jet, j=1).ratio)
        out["commutator"].append(appendix_inequality("commutator", grid, V=V, G=G, jet=jet, j=2,
                                                     alpha=MultiIndex((1,)), vbar=1.0).ratio)
        out["interpolation"].append(appendix_inequality("interpolation", grid, F=G, Np=1, N=3).ratio)
        out["interpolation_identity"].append(appendix_inequality("interpolation", grid, F=G, Np=0, N=3).ratio)
    return out


def scenario_appendix(cfg: ScenarioConfig, out: Path) -> ReportBundle:
    b = ReportBundle("appendix-inequalities")
    g1 = Grid(1, cfg.grid.points, cfg.grid.extent)
    r1, r2 = appendix_ratios(g1), appendix_ratios(g1.refine())
    rows = []
    for case in r1:
        rows += [(case, w, a, g1.points, v) for (w, a), v in zip(APPENDIX_FAMILY, r1[case])]
        rows += [(case, w, a, g1.points * 2, v) for (w, a), v in zip(APPENDIX_FAMILY, r2[case])]
        if case == "interpolation_identity":
            continue
        c1, c2 = max(r1[case]), max(r2[case])
        ok = all(math.isfinite(v) and v > 0 for v in r1[case] + r2[case]) and abs(c1 - c2) <= 0.05 * c1
        b.add(f"appendix_{case}", c1, "finite, positive, stable to 5% under refinement", ok)
    dev = max(abs(v - 1.0) for v in r1["interpolation_identity"])
    b.add("interpolation_identity", dev, "|ratio - 1| <= 1e-10 for N' = 0", dev <= 1e-10)
    _csv(out / "appendix.csv", ["case", "width", "amplitude", "points", "ratio"], rows, b)
    return b


# ---------------------------------------------------------------------------
# dispatch

SCENARIOS: dict[str, Callable[[ScenarioConfig, Path], ReportBundle]] = {
    "background-residual": scenario_background,
    "char-geometry-sweep": scenario_char_geometry,
    "energy-positivity-sweep": scenario_energy,
    "gaussian-pulse-1d": scenario_pulse,
    "picard-contraction": scenario_picard,
    "causality": scenario_causality,
    "dependence": scenario_dependence,
    "appendix-inequalities": scenario_appendix,
}


def _run_one(name: str, cfg: ScenarioConfig, out: Path) -> ReportBundle:
    out.mkdir(parents=True, exist_ok=True)
    try:
        bundle = SCENARIOS[name](cfg, out)
    except NordfluidError as exc:
        bundle = ReportBundle(name)
        bundle.add(f"{name}_completed", float("nan"), f"raised {type(exc).__name__}: {exc}", False)
    with open(out / "summary.json", "w") as fh:
        json.dump(bundle.to_record(), fh, indent=2, default=str)
        fh.write("\n")
    bundle.files.append(out / "summary.json")
    return bundle


def run_scenario(cfg: ScenarioConfig) -> ReportBundle:
    """Run the configured scenario, or every scenario when none is named."""
    if cfg.scenario is not None:
        if cfg.scenario not in SCENARIOS:
            raise UnknownScenario(cfg.scenario)
        return _run_one(cfg.scenario, cfg, cfg.out)
    suite = ReportBundle("suite")
    for name in SCENARIOS:
        suite.merge(_run_one(name, cfg, cfg.out / name))
    cfg.out.mkdir(parents=True, exist_ok=True)
    with open(cfg.out / "summary.json", "w") as fh:
        json.dump(suite.to_record(), fh, indent=2, default=str)
        fh.write("\n")
    return suite


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="nordfluid", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario")
    run.add_argument("--config", required=True, help="JSON config ({} runs every scenario)")
    run.add_argument("--out", default=None, help="output directory")
    run.add_argument("--seed", type=int, default=None, help="random seed")
    sub.add_parser("list", help="print scenario ids")
    args = parser.parse_args(argv)

    if args.command == "list":
        for name in SCENARIOS:
            print(name)
        return 0
    try:
        cfg = load_config(args.config, args.out, args.seed)
    except UnknownScenario as exc:
        print(f"config error: unknown scenario {exc.args[0]!r}", file=sys.stderr)
        return 2
    except InvalidConfig as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    bundle = run_scenario(cfg)
    for c in bundle.checks:
        print(c.line())
    print(f"{'PASS' if bundle.passed else 'FAIL'} {bundle.scenario} -> {cfg.out}")
    return 0 if bundle.passed else 1


if __name__ == "__main__":
    sys.exit(main())
