"""The 10-component state, its derived quantities and the constant background.

Component order is ``(S, P, U1, U2, U3, phi, psi0, psi1, psi2, psi3)``.  Every
kernel here accepts either a :class:`StateVector` or a numpy array whose
leading axis has length 10; trailing axes are treated as grid points.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .eos import (
    EosSpec,
    energy_density,
    make_polytropic,
    weighted_energy,
    weighted_stiffness,
)
from .errors import InadmissibleState, NoBracket, NormalizationViolated

S_, P_, PHI_ = 0, 1, 5
U_ = slice(2, 5)
PSI_ = slice(6, 10)
NAMES = ("S", "P", "U1", "U2", "U3", "phi", "psi0", "psi1", "psi2", "psi3")

ETA = np.diag([-1.0, 1.0, 1.0, 1.0])

CANONICAL_EOS = make_polytropic(4.0 / 3.0, "exp")


@dataclass(frozen=True)
class StateVector:
    S: float
    P: float
    U1: float = 0.0
    U2: float = 0.0
    U3: float = 0.0
    phi: float = 0.0
    psi0: float = 0.0
    psi1: float = 0.0
    psi2: float = 0.0
    psi3: float = 0.0

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=float)

    @classmethod
    def from_array(cls, a) -> "StateVector":
        a = np.asarray(a, dtype=float)
        if a.shape != (10,):
            raise ValueError(f"expected 10 components, got shape {a.shape}")
        return cls(*(float(x) for x in a))

    @property
    def U0(self) -> float:
        return float(np.sqrt(1.0 + self.U1**2 + self.U2**2 + self.U3**2))


CANONICAL_STATE = StateVector(S=1.0, P=1.0)


def as_array(V) -> np.ndarray:
    if isinstance(V, StateVector):
        return V.to_array()
    V = np.asarray(V, dtype=float)
    if V.shape[0] != 10:
        raise ValueError(f"leading axis must have 10 components, got {V.shape}")
    return V


def _eos(eos):
    return CANONICAL_EOS if eos is None else eos


def check_admissible(V) -> None:
    V = as_array(V)
    if np.any(V[S_] <= 0) or np.any(V[P_] <= 0):
        raise InadmissibleState("state requires S > 0 and P > 0")


def time_component(U):
    """U^0 = sqrt(1 + U_k U^k) from the spatial components (leading axis 3)."""
    U = np.asarray(U, dtype=float)
    return np.sqrt(1.0 + np.sum(U * U, axis=0))


def four_velocity(V) -> np.ndarray:
    """Contravariant (U^0, U^1, U^2, U^3)."""
    V = as_array(V)
    return np.concatenate([time_component(V[U_])[None], V[U_]], axis=0)


def projection(Uup) -> np.ndarray:
    """Pi^{mu nu} = U^mu U^nu + eta^{mu nu}; shape (4, 4, ...)."""
    Uup = np.asarray(Uup)
    eta = ETA.reshape(ETA.shape + (1,) * (Uup.ndim - 1))
    return Uup[:, None] * Uup[None, :] + eta


@dataclass
class DerivedFluid:
    U0: np.ndarray
    Pi: np.ndarray
    R: np.ndarray
    Q: np.ndarray


def complete_state(V, eos: EosSpec | None = None) -> DerivedFluid:
    """Return (U^0, Pi, R, Q) for an admissible state or state field."""
    V = as_array(V)
    check_admissible(V)
    eos = _eos(eos)
    Uup = four_velocity(V)
    R = weighted_energy(eos, V[S_], V[P_], V[PHI_])
    Q = weighted_stiffness(eos, V[S_], V[P_], V[PHI_])
    return DerivedFluid(U0=Uup[0], Pi=projection(Uup), R=R, Q=Q)


@dataclass
class OriginalFluid:
    u: np.ndarray  # contravariant 4-velocity, g(u, u) = -1
    rho: float
    p: float
    S: float
    phi: float
    psi: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def normalization_defect(self) -> float:
        u = np.asarray(self.u, dtype=float)
        return float(np.exp(2.0 * self.phi) * (u @ ETA @ u) + 1.0)


def to_weighted(x: OriginalFluid) -> StateVector:
    if abs(x.normalization_defect()) > 1e-8:
        raise NormalizationViolated(f"g(u,u) + 1 = {x.normalization_defect():.3e}")
    ephi = np.exp(x.phi)
    U = ephi * np.asarray(x.u, dtype=float)
    P = np.exp(4.0 * x.phi) * x.p
    return StateVector(x.S, P, *U[1:], x.phi, *np.asarray(x.psi, dtype=float))


def to_original(V, eos: EosSpec | None = None) -> OriginalFluid:
    V = as_array(V)
    eos = _eos(eos)
    phi = float(V[PHI_])
    p = float(np.exp(-4.0 * phi) * V[P_])
    u = np.exp(-phi) * four_velocity(V)
    rho = float(energy_density(eos, V[S_], p))
    return OriginalFluid(u=u, rho=rho, p=p, S=float(V[S_]), phi=phi, psi=V[PSI_].copy())


def change_of_variables(direction: str, x, eos: EosSpec | None = None):
    """Map between original (u, rho, p) and weighted (U, R, P) variables."""
    if direction == "to-weighted":
        return to_weighted(x)
    if direction == "to-original":
        return to_original(x, eos)
    raise ValueError(f"unknown direction {direction!r}")


# ---------------------------------------------------------------------------
# constant background

@dataclass(frozen=True)
class ConstantState:
    S_bar: float
    p_bar: float
    kappa: float
    phi_bar: float
    P_bar: float
    V_bar: np.ndarray
    residual: float
    monotone: bool

    @property
    def state(self) -> StateVector:
        return StateVector.from_array(self.V_bar)


def background_residual(phi, kappa, rho_bar, p_bar):
    return kappa**2 * phi + np.exp(4.0 * phi) * (rho_bar - 3.0 * p_bar)


def background_solve(eos: EosSpec | None, kappa: float, S_bar: float, p_bar: float,
                     newton_steps: int = 10) -> ConstantState:
    """Solve kappa^2 phi + e^{4 phi} (rho(p, S) - 3 p) = 0 for the potential.

    Bisection on a bracket grown by doubling from [-1, 1] (up to [-50, 50]),
    then Newton polishing.
    """
    eos = _eos(eos)
    if kappa**2 <= 0 or S_bar <= 0 or p_bar <= 0:
        raise InadmissibleState("background requires kappa^2 > 0, S_bar > 0, p_bar > 0")
    k2 = float(kappa) ** 2
    src = float(energy_density(eos, S_bar, p_bar)) - 3.0 * p_bar

    def f(x):
        return k2 * x + np.exp(4.0 * x) * src

    def df(x):
        return k2 + 4.0 * np.exp(4.0 * x) * src

    if src == 0.0:
        phi = 0.0
        monotone = True
    else:
        half = 1.0
        while f(-half) * f(half) > 0:
            half *= 2.0
            if half > 50.0:
                raise NoBracket("no sign change of the background equation in [-50, 50]")
        a, b = -half, half
        probe = f(np.linspace(a, b, 2001))
        monotone = bool(np.all(np.diff(probe) > 0) or np.all(np.diff(probe) < 0))
        fa = f(a)
        for _ in range(200):
            m = 0.5 * (a + b)
            fm = f(m)
            if fm == 0.0 or b - a < 1e-15 * max(1.0, abs(m)):
                break
            if np.sign(fm) == np.sign(fa):
                a, fa = m, fm
            else:
                b = m
        phi = 0.5 * (a + b)
        for _ in range(newton_steps):
            d = df(phi)
            if d == 0.0:
                break
            step = f(phi) / d
            phi -= step
            if abs(step) < 1e-17:
                break
    P_bar = float(np.exp(4.0 * phi) * p_bar)
    V_bar = np.array([S_bar, P_bar, 0, 0, 0, phi, 0, 0, 0, 0], dtype=float)
    return ConstantState(float(S_bar), float(p_bar), float(kappa), float(phi), P_bar, V_bar,
                         float(abs(f(phi))), monotone)


# ---------------------------------------------------------------------------
# admissible boxes

@dataclass
class AdmissibleBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float).reshape(10)
        self.upper = np.asarray(self.upper, dtype=float).reshape(10)
        if np.any(self.lower > self.upper):
            raise ValueError("box lower bound exceeds upper bound")

    @classmethod
    def around(cls, center, halfwidth) -> "AdmissibleBox":
        c = as_array(center)
        w = np.broadcast_to(np.asarray(halfwidth, dtype=float), (10,))
        return cls(c - w, c + w)

    @classmethod
    def default_for(cls, V_bar, scale: float = 0.5) -> "AdmissibleBox":
        """Box around a background: relative margins on S, P, absolute elsewhere."""
        V_bar = as_array(V_bar)
        w = np.full(10, scale)
        w[S_] = scale * V_bar[S_]
        w[P_] = scale * V_bar[P_]
        return cls.around(V_bar, w)

    @property
    def admissible(self) -> bool:
        return bool(self.lower[S_] > 0 and self.lower[P_] > 0)

    def contains(self, V) -> bool:
        V = as_array(V)
        shape = (10,) + (1,) * (V.ndim - 1)
        return bool(np.all(V >= self.lower.reshape(shape)) and np.all(V <= self.upper.reshape(shape)))

    def sup_distance(self, V) -> float:
        """Sup-norm distance from an interior point to the box boundary."""
        V = as_array(V)
        return float(min(np.min(V - self.lower), np.min(self.upper - V)))

    def to_record(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}

    @classmethod
    def from_record(cls, rec) -> "AdmissibleBox":
        return cls(rec["lower"], rec["upper"])


def in_box(V, box: AdmissibleBox) -> bool:
    return box.contains(V)


# ---------------------------------------------------------------------------
# stress-energy

@dataclass
class StressEnergy:
    T: np.ndarray
    T_aux: np.ndarray
    Theta: np.ndarray
    weak: bool = True
    strong: bool = True
    dominant: bool = True


def theta_tensor(V, kappa: float, eos: EosSpec | None = None) -> np.ndarray:
    """Minkowski-space conserved tensor Theta^{mu nu}; shape (4, 4, ...)."""
    V = as_array(V)
    d = complete_state(V, eos)
    Uup = four_velocity(V)
    psi_low = V[PSI_]
    psi_up = psi_low.copy()
    psi_up[0] = -psi_up[0]
    extra = (1,) * (V.ndim - 1)
    eta = ETA.reshape(ETA.shape + extra)
    psi_sq = np.sum(psi_up * psi_low, axis=0)
    return ((d.R + V[P_]) * Uup[:, None] * Uup[None, :] + V[P_] * eta
            + psi_up[:, None] * psi_up[None, :]
            - 0.5 * eta * psi_sq - 0.5 * eta * kappa**2 * V[PHI_] ** 2)


def _future_causal_samples(rng, count):
    d = rng.normal(size=(count, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = rng.uniform(0.0, 1.0, size=(count, 1))
    r[: count // 10] = 1.0  # include null directions
    return np.concatenate([np.ones((count, 1)), r * d], axis=1)


def stress_energy(V, kappa: float, eos: EosSpec | None = None, samples: int = 1000,
                  seed: int = 0, tol: float = 1e-12) -> StressEnergy:
    """Fluid, auxiliary and Minkowski stress tensors plus sampled energy conditions."""
    V = as_array(V)
    check_admissible(V)
    orig = to_original(V, eos)
    e2 = np.exp(2.0 * orig.phi)
    g = e2 * ETA
    g_inv = ETA / e2
    u = orig.u
    T = (orig.rho + orig.p) * np.outer(u, u) + orig.p * g_inv
    T_aux = np.exp(6.0 * orig.phi) * T
    Theta = theta_tensor(V, kappa, eos)

    X = _future_causal_samples(np.random.default_rng(seed), samples)
    T_low = g @ T @ g
    trace = np.einsum("ab,ab", g, T)
    scale = tol * (1.0 + abs(orig.rho) + abs(orig.p))
    weak = np.einsum("ia,ab,ib->i", X, T_low, X)
    strong = weak - 0.5 * trace * np.einsum("ia,ab,ib->i", X, g, X)
    Y = -np.einsum("ab,bc,ic->ia", T, g, X)  # -T^mu_nu X^nu
    y_norm = np.einsum("ia,ab,ib->i", Y, g, Y)
    return StressEnergy(
        T=T, T_aux=T_aux, Theta=Theta,
        weak=bool(np.all(weak >= -scale)),
        strong=bool(np.all(strong >= -scale)),
        dominant=bool(np.all(Y[:, 0] >= -scale) and np.all(y_norm <= scale)),
    )
