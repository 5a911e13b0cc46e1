"""Domain types shared by the spectral services, the solver and the lab."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Callable

import numpy as np
import pandas as pd
import scipy.fft as sfft

from .errors import GridError, GridMismatchError, NormParameterError

INF = math.inf


class Integrator(Enum):
    RK4 = "rk4"


class Component(Enum):
    THETA = "theta"
    R = "r"


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-L/2, L/2)^d, sampled at cell centres.

    Points sit half a cell off the faces, so the symmetry axis r = 0 is
    never sampled and x -> -x maps the grid onto itself.
    """

    n_points_per_axis: int
    box_length: float = 2.0 * math.pi
    dim: int = 3

    def __post_init__(self):
        n = self.n_points_per_axis
        if n < 16 or n & (n - 1):
            raise GridError(f"n_points_per_axis must be a power of two >= 16, got {n}")
        if not self.box_length > 0:
            raise GridError(f"box_length must be positive, got {self.box_length}")
        if self.dim not in (2, 3):
            raise GridError(f"dim must be 2 or 3, got {self.dim}")

    @property
    def n(self) -> int:
        return self.n_points_per_axis

    @property
    def spacing(self) -> float:
        return self.box_length / self.n

    @property
    def cell_measure(self) -> float:
        return self.spacing ** self.dim

    @property
    def volume(self) -> float:
        return self.box_length ** self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        return (self.n,) * (self.dim - 1) + (self.n // 2 + 1,)

    @property
    def q_max(self) -> int:
        return int(round(math.log2(self.n))) - 2

    @property
    def fundamental(self) -> float:
        return 2.0 * math.pi / self.box_length

    @cached_property
    def axis(self) -> np.ndarray:
        h = self.spacing
        return -0.5 * self.box_length + (np.arange(self.n) + 0.5) * h

    @cached_property
    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def index_wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Integer wavenumbers per axis, shaped to broadcast over the rfft layout."""
        n, d = self.n, self.dim
        out = []
        for ax in range(d):
            k = sfft.rfftfreq(n, 1.0 / n) if ax == d - 1 else sfft.fftfreq(n, 1.0 / n)
            shape = [1] * d
            shape[ax] = k.size
            out.append(k.reshape(shape))
        return tuple(out)

    @cached_property
    def wavevector(self) -> tuple[np.ndarray, ...]:
        return tuple(self.fundamental * k for k in self.index_wavenumbers)

    @cached_property
    def derivative_wavevector(self) -> tuple[np.ndarray, ...]:
        # Nyquist row has no real derivative; zero it for every odd-order operator
        out = []
        for k, xi in zip(self.index_wavenumbers, self.wavevector):
            out.append(np.where(np.abs(k) == self.n // 2, 0.0, xi))
        return tuple(out)

    @cached_property
    def frequency_magnitude(self) -> np.ndarray:
        sq = sum(xi ** 2 for xi in self.wavevector)
        return np.sqrt(np.broadcast_to(sq, self.spectral_shape))

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        keep = np.ones(self.spectral_shape, dtype=bool)
        for k in self.index_wavenumbers:
            keep = keep & (np.abs(k) < self.n / 3.0)
        return keep

    def rfft(self, samples: np.ndarray) -> np.ndarray:
        return sfft.rfftn(samples, s=self.shape, axes=tuple(range(self.dim)))

    def irfft(self, coefficients: np.ndarray) -> np.ndarray:
        return sfft.irfftn(coefficients, s=self.shape, axes=tuple(range(self.dim)))


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


class SpectralField:
    """Real scalar field on a Grid, held as samples or rfft coefficients.

    Whichever representation is given is canonical; the other one is
    computed on first access. Both are read-only.
    """

    __slots__ = ("grid", "_samples", "_coefficients")

    def __init__(self, grid: Grid, samples=None, coefficients=None):
        if (samples is None) == (coefficients is None):
            raise ValueError("give exactly one of samples or coefficients")
        self.grid = grid
        self._samples = None
        self._coefficients = None
        if samples is not None:
            samples = np.asarray(samples, dtype=float)
            if samples.shape != grid.shape:
                raise GridMismatchError(f"samples shape {samples.shape} != grid {grid.shape}")
            self._samples = _frozen(samples)
        else:
            coefficients = np.asarray(coefficients, dtype=complex)
            if coefficients.shape != grid.spectral_shape:
                raise GridMismatchError(
                    f"coefficient shape {coefficients.shape} != {grid.spectral_shape}"
                )
            self._coefficients = _frozen(coefficients)

    @classmethod
    def from_samples(cls, grid: Grid, samples) -> "SpectralField":
        return cls(grid, samples=samples)

    @classmethod
    def from_coefficients(cls, grid: Grid, coefficients) -> "SpectralField":
        return cls(grid, coefficients=coefficients)

    @classmethod
    def zeros(cls, grid: Grid) -> "SpectralField":
        return cls(grid, samples=np.zeros(grid.shape))

    @property
    def samples(self) -> np.ndarray:
        if self._samples is None:
            self._samples = _frozen(self.grid.irfft(self._coefficients))
        return self._samples

    @property
    def coefficients(self) -> np.ndarray:
        if self._coefficients is None:
            self._coefficients = _frozen(self.grid.rfft(self._samples))
        return self._coefficients

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.samples)))

    def mean(self) -> float:
        return float(self.coefficients.flat[0].real / np.prod(self.grid.shape))

    def _check(self, other: "SpectralField"):
        if other.grid != self.grid:
            raise GridMismatchError(f"{other.grid} != {self.grid}")

    def _combine(self, other, op):
        if isinstance(other, SpectralField):
            self._check(other)
            if self._coefficients is not None and other._coefficients is not None:
                return SpectralField.from_coefficients(
                    self.grid, op(self._coefficients, other._coefficients)
                )
            return SpectralField.from_samples(self.grid, op(self.samples, other.samples))
        return NotImplemented

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, other):
        if isinstance(other, SpectralField):
            # raw grid product, aliased; services dealias it
            self._check(other)
            return SpectralField.from_samples(self.grid, self.samples * other.samples)
        if np.isscalar(other):
            if self._coefficients is not None:
                return SpectralField.from_coefficients(self.grid, self._coefficients * other)
            return SpectralField.from_samples(self.grid, self._samples * other)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __repr__(self):
        return f"SpectralField(n={self.grid.n}, dim={self.grid.dim})"


@dataclass(frozen=True)
class VectorField:
    components: tuple[SpectralField, ...]
    divergence_free: bool = False

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValueError("a vector field needs at least one component")
        g = comps[0].grid
        if len(comps) != g.dim:
            raise GridMismatchError(f"{len(comps)} components on a {g.dim}-d grid")
        for c in comps[1:]:
            if c.grid != g:
                raise GridMismatchError("components live on different grids")

    @classmethod
    def from_arrays(cls, grid: Grid, arrays, divergence_free: bool = False) -> "VectorField":
        return cls(tuple(SpectralField.from_samples(grid, a) for a in arrays), divergence_free)

    @property
    def grid(self) -> Grid:
        return self.components[0].grid

    def __getitem__(self, i: int) -> SpectralField:
        return self.components[i]

    def __iter__(self):
        return iter(self.components)

    def __len__(self):
        return len(self.components)

    def magnitude(self) -> np.ndarray:
        return np.sqrt(sum(c.samples ** 2 for c in self.components))

    def max_abs(self) -> float:
        return float(np.max(self.magnitude()))

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(
            tuple(a + b for a, b in zip(self, other)),
            self.divergence_free and other.divergence_free,
        )

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(
            tuple(a - b for a, b in zip(self, other)),
            self.divergence_free and other.divergence_free,
        )

    def scale(self, factor: float) -> "VectorField":
        return VectorField(tuple(c * factor for c in self), self.divergence_free)


def _glue(x: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, built from exp(-1/x)."""
    x = np.clip(x, 0.0, 1.0)
    left = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
    right = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return left / (left + right)


@dataclass(frozen=True)
class PartitionOfUnity:
    """Radial dyadic partition chi + sum_q phi(2^-q .) = 1.

    chi is 1 on [0, a] and vanishes from b = a(1 + w) on;
    phi(rho) = chi(rho / 2) - chi(rho) is supported in [a, 2b].
    """

    inner_radius: float = 0.75
    transition_width: float = 7.0 / 9.0

    @property
    def outer_radius(self) -> float:
        return self.inner_radius * (1.0 + self.transition_width)

    @property
    def phi_support(self) -> tuple[float, float]:
        return self.inner_radius, 2.0 * self.outer_radius

    def theta(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        a, b = self.inner_radius, self.outer_radius
        val = 1.0 - _glue((rho - a) / (b - a))
        # exact plateaus keep products of non-adjacent annuli at exactly zero
        return np.where(rho <= a, 1.0, np.where(rho >= b, 0.0, val))

    def chi(self, rho) -> np.ndarray:
        return self.theta(rho)

    def phi(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        return self.theta(0.5 * rho) - self.theta(rho)


@dataclass
class DyadicDecomposition:
    blocks: dict[int, SpectralField]
    q_min: int
    q_max: int
    homogeneous: bool
    residual: float
    low_truncation: int | None = None

    def total(self) -> SpectralField:
        it = iter(self.blocks.values())
        acc = next(it)
        for b in it:
            acc = acc + b
        return acc


def _check_exponent(name: str, value: float, lo: float = 1.0):
    if not (value >= lo or value == INF):
        raise NormParameterError(f"{name} must lie in [{lo}, inf], got {value}")


@dataclass(frozen=True)
class LorentzParams:
    p: float
    q: float

    def __post_init__(self):
        _check_exponent("p", self.p)
        _check_exponent("q", self.q)
        if self.p == INF and self.q != INF:
            raise NormParameterError("L^{inf,q} with finite q is not a normed space")


@dataclass(frozen=True)
class BesovParams:
    s: float
    p: float
    r: float

    def __post_init__(self):
        if not math.isfinite(self.s):
            raise NormParameterError(f"smoothness must be finite, got {self.s}")
        _check_exponent("p", self.p)
        _check_exponent("r", self.r)


@dataclass(frozen=True)
class Rearrangement:
    thresholds: np.ndarray
    measures: np.ndarray


@dataclass
class BonySplit:
    para_uv: SpectralField
    para_vu: SpectralField
    remainder: SpectralField
    residual: float


@dataclass(frozen=True)
class AxisymProfile:
    """Swirl-free axisymmetric velocity given by u_r(r, z) and u_z(r, z)."""

    name: str
    u_r: Callable[[np.ndarray, np.ndarray], np.ndarray]
    u_z: Callable[[np.ndarray, np.ndarray], np.ndarray]
    support_radius: float
    params: dict = field(default_factory=dict)

    def shifted(self, dz: float) -> "AxisymProfile":
        return AxisymProfile(
            f"{self.name}+dz",
            lambda r, z: self.u_r(r, z - dz),
            lambda r, z: self.u_z(r, z - dz),
            self.support_radius + abs(dz),
            {**self.params, "dz": dz},
        )


@dataclass(frozen=True)
class SolverConfig:
    dt: float | None = None
    t_end: float = 1.0
    dealias: bool = True
    integrator: Integrator = Integrator.RK4
    cfl_max: float = 0.5
    snapshot_every: int = 1
    besov_p: float = 2.0

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= 0:
            raise ValueError(f"t_end must be non-negative, got {self.t_end}")
        if not self.cfl_max > 0:
            raise ValueError(f"cfl_max must be positive, got {self.cfl_max}")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")


DIAGNOSTIC_CHANNELS = (
    "alpha_L1",
    "alpha_L2",
    "alpha_Linf",
    "alpha_L31",
    "omega_inf",
    "omega_Binf1",
    "u_B1inf1",
    "u_Bp1",
    "u_inf",
    "grad_u_inf",
    "ur_over_r_inf",
    "energy",
)


@dataclass
class DiagnosticsSeries:
    times: list[float] = field(default_factory=list)
    channels: dict[str, list[float]] = field(default_factory=dict)

    def append(self, t: float, values: dict[str, float]):
        if self.times and set(values) != set(self.channels):
            raise ValueError(f"channel set changed: {sorted(values)}")
        self.times.append(float(t))
        for k, v in values.items():
            self.channels.setdefault(k, []).append(float(v))

    def __len__(self):
        return len(self.times)

    def channel(self, name: str) -> np.ndarray:
        return np.asarray(self.channels[name])

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.channels)
        df.insert(0, "t", self.times)
        return df


@dataclass(frozen=True)
class EulerState:
    t: float
    step: int
    alpha: SpectralField
    u: VectorField
    diagnostics: DiagnosticsSeries


@dataclass
class TildeFamily:
    t: float
    blocks: dict[int, VectorField]
    skipped: list[int] = field(default_factory=list)

    def total(self) -> VectorField:
        it = iter(self.blocks.values())
        acc = next(it)
        for b in it:
            acc = acc + b
        return acc


@dataclass
class ExperimentReport:
    key: str
    fitted_constants: dict[str, float] = field(default_factory=dict)
    pass_flags: dict[str, bool] = field(default_factory=dict)
    artifact_paths: list[str] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.pass_flags.values())
