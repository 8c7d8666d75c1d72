"""Polytropic equation of state.

The fluid is closed by

    rho = n + A(S) / (gamma - 1) * n**gamma,    p = A(S) * n**gamma,

with ``1 < gamma < 2`` and ``A`` positive and increasing.  Besides the
pointwise :class:`ThermoPoint` API this module exposes vectorized kernels for
the weighted energy density ``R(S, P, phi)`` and the weighted stiffness
``Q(S, P, phi)`` used by the evolution equations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    GammaOutOfRange,
    NegativeDensity,
    NegativePressure,
    NonIncreasingCoefficient,
)

# entropy-coefficient families: name -> (A, dA/dS, default params)
_FAMILIES = {
    "exp": (
        lambda S, c, a: c * np.exp(a * (S - 1.0)),
        lambda S, c, a: a * c * np.exp(a * (S - 1.0)),
        (1.0, 1.0),
    ),
    "power": (
        lambda S, c, a: c * np.power(S, a),
        lambda S, c, a: a * c * np.power(S, a - 1.0),
        (1.0, 1.0),
    ),
    "linear": (
        lambda S, c0, c1: c0 + c1 * S,
        lambda S, c0, c1: c1 + 0.0 * S,
        (0.0, 1.0),
    ),
    "const": (
        lambda S, c: c + 0.0 * S,
        lambda S, c: 0.0 * S,
        (1.0,),
    ),
}

_S_PROBE = np.geomspace(1e-3, 1e2, 257)


@dataclass(frozen=True)
class EosSpec:
    """Validated polytropic equation of state."""

    gamma: float
    coeff: str = "exp"
    coeff_params: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if not (1.0 < self.gamma < 2.0):
            raise GammaOutOfRange(f"gamma={self.gamma} not in the open interval (1, 2)")
        if self.coeff not in _FAMILIES:
            raise ValueError(f"unknown entropy coefficient family {self.coeff!r}")
        params = tuple(float(x) for x in self.coeff_params) or _FAMILIES[self.coeff][2]
        if len(params) != len(_FAMILIES[self.coeff][2]):
            raise ValueError(f"family {self.coeff!r} takes {len(_FAMILIES[self.coeff][2])} params")
        object.__setattr__(self, "coeff_params", params)
        a = self.A(_S_PROBE)
        da = self.dA(_S_PROBE)
        if not np.all(np.isfinite(a)) or np.any(a <= 0.0):
            raise NonIncreasingCoefficient("A(S) must be positive for S > 0")
        if np.any(da <= 0.0):
            raise NonIncreasingCoefficient("A(S) must be strictly increasing for S > 0")

    def A(self, S):
        return _FAMILIES[self.coeff][0](np.asarray(S, dtype=float), *self.coeff_params)

    def dA(self, S):
        return _FAMILIES[self.coeff][1](np.asarray(S, dtype=float), *self.coeff_params)

    def to_record(self) -> dict:
        return {"gamma": self.gamma, "coeff": self.coeff, "coeff_params": list(self.coeff_params)}

    @classmethod
    def from_record(cls, rec: dict) -> "EosSpec":
        return cls(float(rec.get("gamma", 4.0 / 3.0)), rec.get("coeff", "exp"),
                   tuple(rec.get("coeff_params", ())))


@dataclass(frozen=True)
class ThermoPoint:
    n: float
    S: float
    rho: float
    p: float
    sigma: float

    @property
    def sigma2(self) -> float:
        return self.sigma**2


def make_polytropic(gamma: float, entropy_coeff: str = "exp", params=()) -> EosSpec:
    """Build a polytropic EOS; ``entropy_coeff`` names the family for A(S)."""
    return EosSpec(float(gamma), entropy_coeff, tuple(params))


def _sigma2_from_n(eos: EosSpec, n, S):
    g = eos.gamma
    an = eos.A(S) * np.power(n, g - 1.0)
    return g * an / (1.0 + g / (g - 1.0) * an)


def thermo_from_n(eos: EosSpec, n: float, S: float) -> ThermoPoint:
    if n < 0:
        raise NegativeDensity(f"n={n} < 0")
    g = eos.gamma
    A = float(eos.A(S))
    p = A * n**g
    rho = n + A / (g - 1.0) * n**g
    sigma = float(np.sqrt(_sigma2_from_n(eos, n, S)))
    return ThermoPoint(float(n), float(S), float(rho), float(p), sigma)


def density_from_p(eos: EosSpec, S, p):
    """Number density n = (p / A(S))**(1/gamma), vectorized."""
    return np.power(np.asarray(p, dtype=float) / eos.A(S), 1.0 / eos.gamma)


def energy_density(eos: EosSpec, S, p):
    """The energy density as a function of (S, p), vectorized."""
    p = np.asarray(p, dtype=float)
    return density_from_p(eos, S, p) + p / (eos.gamma - 1.0)


def sound_speed_sq(eos: EosSpec, S, p):
    """Squared sound speed as a function of (S, p), vectorized."""
    return _sigma2_from_n(eos, density_from_p(eos, S, p), S)


def drho_dp(eos: EosSpec, S, p):
    """Closed-form derivative of the energy density in p at fixed S."""
    n = density_from_p(eos, S, p)
    return n / (eos.gamma * np.asarray(p, dtype=float)) + 1.0 / (eos.gamma - 1.0)


def thermo_from_p(eos: EosSpec, S: float, p: float) -> ThermoPoint:
    if p < 0:
        raise NegativePressure(f"p={p} < 0")
    n = float(density_from_p(eos, S, p))
    return thermo_from_n(eos, n, S)


@dataclass(frozen=True)
class Admissibility:
    entropy_positive: bool
    pressure_positive: bool
    drho_dn_positive: bool
    dp_dn_positive: bool
    drho_dS_nonnegative: bool
    causal_sound_speed: bool
    # closed form vs finite difference discrepancies, for the record
    fd_discrepancy: dict

    @property
    def admissible(self) -> bool:
        return all((self.entropy_positive, self.pressure_positive, self.drho_dn_positive,
                    self.dp_dn_positive, self.drho_dS_nonnegative, self.causal_sound_speed))


def admissibility_check(eos: EosSpec, S: float, p: float) -> Admissibility:
    """Evaluate the thermodynamic postulates at (S, p).

    Each derivative is taken in closed form; a central finite difference is
    recorded alongside as a cross-check.
    """
    g = eos.gamma
    S = float(S)
    p = float(p)
    n = float(density_from_p(eos, S, max(p, 0.0))) if S > 0 else 0.0
    A, dA = float(eos.A(S)), float(eos.dA(S))

    drho_dn = 1.0 + g / (g - 1.0) * A * n ** (g - 1.0)
    dp_dn = g * A * n ** (g - 1.0)
    drho_dS = dA * n**g / (g - 1.0)
    sigma2 = dp_dn / drho_dn

    def rho(nn, SS):
        return nn + float(eos.A(SS)) / (g - 1.0) * nn**g

    def pres(nn, SS):
        return float(eos.A(SS)) * nn**g

    fd = {}
    if n > 0 and S > 0:
        dn = 1e-6 * n
        dS = 1e-6 * S
        fd["drho_dn"] = abs((rho(n + dn, S) - rho(n - dn, S)) / (2 * dn) - drho_dn)
        fd["dp_dn"] = abs((pres(n + dn, S) - pres(n - dn, S)) / (2 * dn) - dp_dn)
        fd["drho_dS"] = abs((rho(n, S + dS) - rho(n, S - dS)) / (2 * dS) - drho_dS)

    return Admissibility(
        entropy_positive=S > 0,
        pressure_positive=p > 0,
        drho_dn_positive=drho_dn > 0,
        dp_dn_positive=dp_dn > 0,
        # equality allowed only at S = 0
        drho_dS_nonnegative=(drho_dS > 0) if S > 0 else (drho_dS >= 0),
        causal_sound_speed=0.0 < sigma2 < 1.0,
        fd_discrepancy=fd,
    )


# ---------------------------------------------------------------------------
# weighted quantities R(S, P, phi) = e^{4 phi} rho(S, e^{-4 phi} P) and
# Q(S, P, phi) = sigma^2 (R + P); all vectorized over numpy arrays

def weighted_energy(eos: EosSpec, S, P, phi):
    e4 = np.exp(4.0 * np.asarray(phi, dtype=float))
    return e4 * energy_density(eos, S, np.asarray(P, dtype=float) / e4)


def weighted_stiffness(eos: EosSpec, S, P, phi):
    p = np.asarray(P, dtype=float) * np.exp(-4.0 * np.asarray(phi, dtype=float))
    return sound_speed_sq(eos, S, p) * (weighted_energy(eos, S, P, phi) + P)


def weighted_sound_speed_sq(eos: EosSpec, S, P, phi):
    return sound_speed_sq(eos, S, np.asarray(P, dtype=float) * np.exp(-4.0 * np.asarray(phi)))


def weighted_energy_grad(eos: EosSpec, S, P, phi):
    """Partials of R(S, P, phi) in (S, P, phi)."""
    g = eos.gamma
    S = np.asarray(S, dtype=float)
    P = np.asarray(P, dtype=float)
    e4 = np.exp(4.0 * np.asarray(phi, dtype=float))
    n = density_from_p(eos, S, P / e4)
    dS = -e4 * n * eos.dA(S) / (g * eos.A(S))
    dP = e4 * n / (g * P) + 1.0 / (g - 1.0)
    dphi = 4.0 * e4 * n * (1.0 - 1.0 / g)
    return dS, dP, dphi


def weighted_stiffness_grad(eos: EosSpec, S, P, phi):
    """Partials of Q(S, P, phi); for the polytropic family Q = gamma * P."""
    P = np.asarray(P, dtype=float)
    z = np.zeros(np.broadcast(S, P, phi).shape)
    return z, z + eos.gamma, z
