"""Discrete calculus on periodic grids.

Fields are numpy arrays whose trailing ``grid.dim`` axes are spatial; any
leading axes (components, tensor indices) are carried along untouched.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import (
    GridMismatch,
    HypothesisViolated,
    NonPeriodicUnsupported,
    OrderTooHigh,
    RadiusTooLarge,
)
from .state import NAMES, AdmissibleBox, as_array


@dataclass(frozen=True)
class Grid:
    dim: int = 1
    points: int = 512
    extent: float = 8.0
    periodic: bool = True

    def __post_init__(self):
        if self.dim not in (1, 3):
            raise ValueError("dim must be 1 or 3")
        if self.points < 8 or self.points % 2:
            raise ValueError("points must be even and at least 8")
        if self.extent <= 0:
            raise ValueError("extent must be positive")

    @property
    def h(self) -> float:
        return 2.0 * self.extent / self.points

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def x(self) -> np.ndarray:
        return -self.extent + self.h * np.arange(self.points)

    def coords(self) -> list[np.ndarray]:
        """Coordinate arrays (broadcast to the full grid) for each axis."""
        return list(np.meshgrid(*([self.x] * self.dim), indexing="ij"))

    def radius(self, center=None) -> np.ndarray:
        c = np.zeros(self.dim) if center is None else np.asarray(center, dtype=float)
        return np.sqrt(sum((X - c[i]) ** 2 for i, X in enumerate(self.coords())))

    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.points, d=self.h)

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.dim, self.points * factor, self.extent, self.periodic)

    def to_record(self) -> dict:
        return {"dim": self.dim, "points": self.points, "extent": self.extent,
                "periodic": self.periodic}

    @classmethod
    def from_record(cls, rec: dict) -> "Grid":
        return cls(int(rec.get("dim", 1)), int(rec.get("points", 512)),
                   float(rec.get("extent", 8.0)), bool(rec.get("periodic", True)))


def _spatial_axes(grid: Grid, f: np.ndarray) -> tuple[int, ...]:
    if f.shape[f.ndim - grid.dim:] != grid.shape:
        raise GridMismatch(f"field shape {f.shape} does not end in grid shape {grid.shape}")
    return tuple(range(f.ndim - grid.dim, f.ndim))


def _require_periodic(grid: Grid):
    if not grid.periodic:
        raise NonPeriodicUnsupported("only periodic grids are supported")


@dataclass
class StateField:
    grid: Grid
    data: np.ndarray  # shape (10, *grid.shape)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != (10,) + self.grid.shape:
            raise GridMismatch(f"state data shape {self.data.shape} != {(10,) + self.grid.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("state field has non-finite samples")

    @classmethod
    def constant(cls, grid: Grid, V) -> "StateField":
        V = as_array(V)
        return cls(grid, np.broadcast_to(V.reshape((10,) + (1,) * grid.dim),
                                         (10,) + grid.shape).copy())

    def copy(self) -> "StateField":
        return StateField(self.grid, self.data.copy())

    def admissible(self) -> bool:
        return bool(np.all(self.data[0] > 0) and np.all(self.data[1] > 0))

    def in_box(self, box: AdmissibleBox) -> bool:
        return box.contains(self.data)


@dataclass(frozen=True)
class MultiIndex:
    orders: tuple[int, int, int] = (0, 0, 0)

    def __post_init__(self):
        o = tuple(int(x) for x in self.orders) + (0,) * (3 - len(self.orders))
        if len(o) != 3 or min(o) < 0:
            raise ValueError("multi-index needs three non-negative orders")
        object.__setattr__(self, "orders", o)

    @property
    def order(self) -> int:
        return sum(self.orders)

    def check(self, N_d: int) -> "MultiIndex":
        if self.order > N_d:
            raise OrderTooHigh(f"|alpha| = {self.order} exceeds N_d = {N_d}")
        return self

    @staticmethod
    def up_to(N: int, dim: int = 1) -> list["MultiIndex"]:
        out = []
        for o in itertools.product(range(N + 1), repeat=dim):
            if sum(o) <= N:
                out.append(MultiIndex(tuple(o) + (0,) * (3 - dim)))
        return sorted(out, key=lambda a: (a.order, a.orders))


# ---------------------------------------------------------------------------
# derivatives

_STENCILS = {
    "order-2": ((1, 0.5), (-1, -0.5)),
    "order-4": ((2, -1.0 / 12.0), (1, 8.0 / 12.0), (-1, -8.0 / 12.0), (-2, 1.0 / 12.0)),
}


def derivative(f, grid: Grid, axis: int, scheme: str = "order-2") -> np.ndarray:
    """Centered difference (or spectral) derivative along spatial ``axis``.

    Axes beyond ``grid.dim`` are directions in which fields are constant, so
    the derivative there is zero.
    """
    _require_periodic(grid)
    f = np.asarray(f, dtype=float)
    axes = _spatial_axes(grid, f)
    if axis >= grid.dim:
        return np.zeros_like(f)
    ax = axes[axis]
    if scheme == "spectral":
        return spectral_derivative(f, grid, (0,) * axis + (1,))
    try:
        stencil = _STENCILS[scheme]
    except KeyError:
        raise ValueError(f"unknown scheme {scheme!r}") from None
    out = np.zeros_like(f)
    for shift, w in stencil:
        out += w * np.roll(f, -shift, axis=ax)
    return out / grid.h


def spectral_derivative(f, grid: Grid, orders) -> np.ndarray:
    """Fourier derivative with per-axis orders; odd orders zero the Nyquist mode."""
    _require_periodic(grid)
    f = np.asarray(f, dtype=float)
    axes = _spatial_axes(grid, f)
    orders = tuple(orders) + (0,) * (3 - len(tuple(orders)))
    if any(orders[i] for i in range(grid.dim, 3)):
        return np.zeros_like(f)
    if not any(orders):
        return f.copy()
    F = np.fft.fftn(f, axes=axes)
    k = grid.wavenumbers()
    for i, o in enumerate(orders[: grid.dim]):
        if o == 0:
            continue
        mult = (1j * k) ** o
        if o % 2:
            mult[grid.points // 2] = 0.0
        shape = [1] * f.ndim
        shape[axes[i]] = grid.points
        F = F * mult.reshape(shape)
    return np.real(np.fft.ifftn(F, axes=axes))


def derivative_alpha(f, grid: Grid, alpha: MultiIndex, scheme: str = "spectral") -> np.ndarray:
    if scheme == "spectral":
        return spectral_derivative(f, grid, alpha.orders)
    out = np.asarray(f, dtype=float)
    for axis, o in enumerate(alpha.orders):
        for _ in range(o):
            out = derivative(out, grid, axis, scheme)
    return out


def fourth_difference(f, grid: Grid) -> np.ndarray:
    """Undivided fourth difference summed over the spatial axes."""
    f = np.asarray(f, dtype=float)
    out = np.zeros_like(f)
    for ax in _spatial_axes(grid, f):
        out += (np.roll(f, 2, ax) + np.roll(f, -2, ax)) - 4.0 * (np.roll(f, 1, ax) + np.roll(f, -1, ax)) + 6.0 * f
    return out


# ---------------------------------------------------------------------------
# mollification

def _bump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


@lru_cache(maxsize=None)
def bump_mass(dim: int) -> float:
    """Integral of the unnormalized bump over the unit ball in R^dim."""
    if dim == 1:
        return integrate.quad(lambda s: float(_bump(s)), -1.0, 1.0, epsabs=1e-14, epsrel=1e-13)[0]
    if dim == 3:
        return 4.0 * np.pi * integrate.quad(lambda r: r * r * float(_bump(r)), 0.0, 1.0,
                                            epsabs=1e-14, epsrel=1e-13)[0]
    raise ValueError("dim must be 1 or 3")


@dataclass(frozen=True)
class MollifierSpec:
    eps0: float = 0.25
    dim: int = 1

    def eps(self, m: int) -> float:
        return self.eps0 * 2.0 ** (-m)

    def profile(self, s) -> np.ndarray:
        """Unit-mass bump on the unit ball."""
        return _bump(s) / bump_mass(self.dim)

    def kernel(self, grid: Grid, eps: float) -> np.ndarray:
        """Psi_eps sampled at periodic grid offsets, renormalized to unit discrete mass."""
        offsets = np.minimum(np.abs(grid.x + grid.extent), 2 * grid.extent - np.abs(grid.x + grid.extent))
        grids = np.meshgrid(*([offsets] * grid.dim), indexing="ij")
        r = np.sqrt(sum(g * g for g in grids))
        k = eps ** (-grid.dim) * self.profile(r / eps)
        mass = k.sum() * grid.cell_volume
        if mass == 0.0:  # eps below resolution: the identity
            k = np.zeros(grid.shape)
            k[(0,) * grid.dim] = 1.0 / grid.cell_volume
            return k
        return k / mass


def mollify(f, grid: Grid, eps: float, spec: MollifierSpec | None = None) -> np.ndarray:
    """Periodic convolution with Psi_eps over the spatial axes."""
    _require_periodic(grid)
    if eps >= grid.extent / 4.0:
        raise RadiusTooLarge(f"eps={eps} must be below extent/4 = {grid.extent / 4}")
    f = np.asarray(f, dtype=float)
    axes = _spatial_axes(grid, f)
    spec = spec or MollifierSpec(dim=grid.dim)
    if eps <= 0:
        return f.copy()
    K = np.fft.fftn(spec.kernel(grid, eps)) * grid.cell_volume
    F = np.fft.fftn(f, axes=axes)
    return np.real(np.fft.ifftn(F * K.reshape((1,) * (f.ndim - grid.dim) + grid.shape), axes=axes))


def mollify_state(field_: StateField, eps: float) -> StateField:
    return StateField(field_.grid, mollify(field_.data, field_.grid, eps))


# ---------------------------------------------------------------------------
# norms

def _sobolev_sq(f, grid: Grid, N: float) -> float:
    _require_periodic(grid)
    axes = _spatial_axes(grid, f)
    F = np.fft.fftn(f, axes=axes)
    k2 = sum(K * K for K in np.meshgrid(*([grid.wavenumbers()] * grid.dim), indexing="ij"))
    w = (1.0 + k2) ** N
    total = np.sum(np.abs(F) ** 2 * w.reshape((1,) * (f.ndim - grid.dim) + grid.shape))
    return float(total * grid.cell_volume / np.prod(grid.shape))


def norm(f, grid: Grid, kind: str = "L2", N: float = 3, ref=None) -> float:
    """Discrete L2, sup, H^N or H^N relative to a constant state.

    ``f`` may carry leading component axes; norms sum over components.
    """
    f = np.asarray(f, dtype=float)
    _spatial_axes(grid, f)
    if kind == "sobolev_rel":
        if ref is None:
            raise ValueError("sobolev_rel needs a reference constant state")
        ref = np.asarray(ref, dtype=float)
        f = f - ref.reshape(ref.shape + (1,) * grid.dim)
        kind = "sobolev"
    if kind == "L2":
        return float(np.sqrt(np.sum(f * f) * grid.cell_volume))
    if kind == "sup":
        return float(np.max(np.abs(f))) if f.size else 0.0
    if kind == "sobolev":
        return float(np.sqrt(_sobolev_sq(f, grid, N)))
    raise ValueError(f"unknown norm kind {kind!r}")


def fd_seminorm_h1(f, grid: Grid, scheme: str = "order-4") -> float:
    """Homogeneous H^1 seminorm from finite differences."""
    tot = 0.0
    for a in range(grid.dim):
        d = derivative(f, grid, a, scheme)
        tot += np.sum(d * d)
    return float(np.sqrt(tot * grid.cell_volume))


def spectral_seminorm_h1(f, grid: Grid) -> float:
    tot = 0.0
    for a in range(grid.dim):
        d = spectral_derivative(f, grid, (0,) * a + (1,))
        tot += np.sum(d * d)
    return float(np.sqrt(tot * grid.cell_volume))


# ---------------------------------------------------------------------------
# appendix inequalities

@dataclass(frozen=True)
class RatioRecord:
    lhs: float
    rhs_without_constant: float
    ratio: float


def _record(lhs, rhs) -> RatioRecord:
    return RatioRecord(float(lhs), float(rhs), float(lhs / rhs) if rhs > 0 else float("inf"))


def _lp(f, grid: Grid, p: float) -> float:
    if np.isinf(p):
        return float(np.max(np.abs(f)))
    return float((np.sum(np.abs(f) ** p) * grid.cell_volume) ** (1.0 / p))


def _grad_power(f, grid: Grid, i: int) -> np.ndarray:
    """Pointwise |nabla^i f| (Euclidean norm over all i-th partials)."""
    tot = np.zeros(np.asarray(f).shape)
    for combo in itertools.product(range(grid.dim), repeat=i):
        orders = [0, 0, 0]
        for a in combo:
            orders[a] += 1
        d = spectral_derivative(f, grid, orders)
        tot = tot + d * d
    return np.sqrt(tot)


def _jet_sup(jet, lo, hi, upto: int, start: int = 0) -> float:
    """max_{start<=i<=upto} sup_{[lo,hi]} |F^(i)| from a derivative list (finite differences past its end)."""
    v = np.linspace(lo, hi, 4001) if hi > lo else np.array([lo])
    best = 0.0
    for i in range(start, upto + 1):
        if i < len(jet):
            vals = np.asarray(jet[i](v), dtype=float) + 0.0 * v
        else:
            vals = np.asarray(jet[-1](v), dtype=float) + 0.0 * v
            for _ in range(i - len(jet) + 1):
                vals = np.gradient(vals, v) if v.size > 1 else 0.0 * vals
        best = max(best, float(np.max(np.abs(vals))))
    return best


def appendix_inequality(case: str, grid: Grid, **kw) -> RatioRecord:
    """Evaluate one calculus inequality without its constant.

    Cases and keyword inputs (scalar fields ``V``, ``G``, ``F`` sampled on
    ``grid``; ``jet`` is ``[F, F', F'', ...]`` as callables):

    ``GN``: ``V``, ``i``, ``k``.
    ``product``: ``V``, ``G``, ``jet``, ``j``, optional ``vbar``.
    ``composition_diff``: ``V``, ``Vt``, ``jet``, ``j``.
    ``commutator``: ``V``, ``G``, ``jet``, ``j``, ``alpha`` (MultiIndex), optional ``vbar``.
    ``interpolation``: ``F``, ``Np``, ``N``.
    """
    d = grid.dim
    if case == "GN":
        V, i, k = kw["V"], int(kw["i"]), int(kw["k"])
        if not (0 <= i <= k and k >= 1):
            raise HypothesisViolated("GN needs 0 <= i <= k, k >= 1")
        p = np.inf if i == 0 else 2.0 * k / i
        lhs = _lp(_grad_power(V, grid, i), grid, p)
        rhs = np.max(np.abs(V)) ** (1 - i / k) * _lp(_grad_power(V, grid, k), grid, 2.0) ** (i / k)
        return _record(lhs, rhs)

    if case == "interpolation":
        F, Np, N = kw["F"], float(kw["Np"]), float(kw["N"])
        if not (0 <= Np <= N and N > 0):
            raise HypothesisViolated("interpolation needs 0 <= N' <= N, N > 0")
        lhs = norm(F, grid, "sobolev", Np)
        rhs = norm(F, grid, "L2") ** (1 - Np / N) * norm(F, grid, "sobolev", N) ** (Np / N)
        return _record(lhs, rhs)

    V = np.asarray(kw["V"], dtype=float)
    jet = list(kw["jet"])
    j = int(kw["j"])
    vbar = kw.get("vbar")
    vnorm = norm(V, grid, "sobolev_rel", j, ref=vbar) if vbar is not None else norm(V, grid, "sobolev", j)

    if case == "product":
        if not j > d / 2:
            raise HypothesisViolated(f"product estimate needs j > d/2 (j={j}, d={d})")
        G = kw["G"]
        lhs = norm(jet[0](V) * G, grid, "sobolev", j)
        rhs = _jet_sup(jet, V.min(), V.max(), j) * (1 + vnorm**j) * norm(G, grid, "sobolev", j)
        return _record(lhs, rhs)

    if case == "composition_diff":
        if not j > d / 2:
            raise HypothesisViolated(f"composition estimate needs j > d/2 (j={j}, d={d})")
        Vt = np.asarray(kw["Vt"], dtype=float)
        lo, hi = min(V.min(), Vt.min()), max(V.max(), Vt.max())
        lhs = norm(jet[0](V) - jet[0](Vt), grid, "sobolev", j)
        rhs = _jet_sup(jet, lo, hi, j + 1) * norm(V - Vt, grid, "sobolev", j)
        return _record(lhs, rhs)

    if case == "commutator":
        if not j > d / 2 + 1:
            raise HypothesisViolated(f"commutator estimate needs j > d/2 + 1 (j={j}, d={d})")
        alpha = kw["alpha"]
        if not 1 <= alpha.order <= j:
            raise HypothesisViolated("commutator needs 1 <= |alpha| <= j")
        G = kw["G"]
        FV = jet[0](V)
        lhs = norm(spectral_derivative(FV * G, grid, alpha.orders)
                   - FV * spectral_derivative(G, grid, alpha.orders), grid, "L2")
        rhs = (_jet_sup(jet, V.min(), V.max(), j, start=1) * (vnorm + vnorm**j)
               * norm(G, grid, "sobolev", j - 1))
        return _record(lhs, rhs)

    raise ValueError(f"unknown case {case!r}")


# ---------------------------------------------------------------------------
# IO

def write_csv(path, grid: Grid, data, names=None) -> None:
    data = np.asarray(data, dtype=float)
    comps = data.reshape((-1,) + grid.shape) if data.ndim > grid.dim else data[None]
    names = list(names) if names is not None else (
        list(NAMES) if comps.shape[0] == 10 else [f"c{i}" for i in range(comps.shape[0])])
    coord_names = ["x", "y", "z"][: grid.dim]
    coords = [c.ravel() for c in grid.coords()]
    cols = coords + [c.ravel() for c in comps]
    with open(path, "w") as fh:
        fh.write(",".join(coord_names + names) + "\n")
        for row in zip(*cols):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_csv(path, grid: Grid) -> np.ndarray:
    arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    comps = arr[:, grid.dim:].T
    return comps.reshape((comps.shape[0],) + grid.shape)


def write_raw(path, grid: Grid, data) -> None:
    data = np.asarray(data, dtype="<f8")
    comps = 1 if data.ndim == grid.dim else int(np.prod(data.shape[: data.ndim - grid.dim]))
    header = {"dim": grid.dim, "points": grid.points, "extent": grid.extent, "components": comps}
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode())
        fh.write(np.ascontiguousarray(data).tobytes())


def read_raw(path) -> tuple[Grid, np.ndarray]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        payload = fh.read()
    grid = Grid(header["dim"], header["points"], header["extent"])
    data = np.frombuffer(payload, dtype="<f8").reshape((header["components"],) + grid.shape)
    return grid, data.copy()
