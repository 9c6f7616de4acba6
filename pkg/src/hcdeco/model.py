"""Physical constants, couplings, environment states and body amplitudes.

Everything here is immutable after construction. Construction never raises
on physically invalid parameters; instead every object can list the
invariants it violates (``problems()``) and :func:`validate` collects them.
The engines call :func:`ensure_valid` before doing any work.

Unit system: nothing is fixed, but every default is 1 (hbar = alpha = k = 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence, Union

import numpy as np

from .errors import DeltaUnsupported, ValidationError

NORM_TOL = 1e-10


@dataclass(frozen=True)
class PhysConsts:
    hbar: float = 1.0
    alpha: float = 1.0
    n: int = 1

    def problems(self) -> list[str]:
        out = []
        if not (math.isfinite(self.hbar) and self.hbar > 0):
            out.append("hbar > 0")
        if int(self.n) != self.n or self.n < 1:
            out.append("n ≥ 1")
        if not math.isfinite(self.alpha):
            out.append("alpha finite")
        return out


class CouplingKind(str, Enum):
    SC = "sc"    # k X Σ x_i
    MC = "mc"    # γ P Σ x_i
    HC = "hc"    # -k/2 Σ (X - x_i)^2
    MHC = "mhc"  # -μ/2 Σ (P - ν x_i)^2, γ = ν/μ


_REQUIRED = {
    CouplingKind.SC: ("k",),
    CouplingKind.HC: ("k",),
    CouplingKind.MC: ("gamma",),
    CouplingKind.MHC: ("gamma", "mu", "nu"),
}


@dataclass(frozen=True)
class Coupling:
    kind: CouplingKind
    k: float | None = None
    gamma: float | None = None
    mu: float | None = None
    nu: float | None = None

    @classmethod
    def sc(cls, k: float = 1.0) -> "Coupling":
        return cls(CouplingKind.SC, k=k)

    @classmethod
    def hc(cls, k: float = 1.0) -> "Coupling":
        return cls(CouplingKind.HC, k=k)

    @classmethod
    def mc(cls, gamma: float = 1.0) -> "Coupling":
        return cls(CouplingKind.MC, gamma=gamma)

    @classmethod
    def mhc(cls, mu: float = 1.0, nu: float = 1.0) -> "Coupling":
        return cls(CouplingKind.MHC, gamma=nu / mu, mu=mu, nu=nu)

    @property
    def strength(self) -> float:
        """Coefficient multiplying the body variable in front of Σ x_i."""
        return self.k if self.kind in (CouplingKind.SC, CouplingKind.HC) else self.gamma

    @property
    def pointer_basis(self) -> str:
        return "position" if self.kind in (CouplingKind.SC, CouplingKind.HC) else "momentum"

    def problems(self) -> list[str]:
        out = []
        try:
            kind = CouplingKind(self.kind)
        except ValueError:
            return [f"unknown coupling kind {self.kind!r}"]
        need = _REQUIRED[kind]
        for name in ("k", "gamma", "mu", "nu"):
            val = getattr(self, name)
            if name in need:
                if val is None:
                    out.append(f"{kind.value} coupling requires {name}")
                elif not math.isfinite(val):
                    out.append(f"{name} finite")
            elif val is not None:
                out.append(f"{kind.value} coupling takes no {name}")
        if kind is CouplingKind.MHC and not out:
            if self.mu == 0:
                out.append("mu ≠ 0")
            elif abs(self.gamma - self.nu / self.mu) > 4 * np.finfo(float).eps * abs(self.gamma):
                out.append("gamma = nu/mu")
        return out


# --- one-particle density families --------------------------------------------------


@dataclass(frozen=True)
class Gaussian:
    mean: float = 0.0
    std: float = 1.0

    finite_variance = True

    def problems(self) -> list[str]:
        return [] if self.std > 0 else ["std > 0"]

    @property
    def variance(self) -> float:
        return self.std**2

    @property
    def center(self) -> float:
        return self.mean

    def characteristic(self, u):
        u = np.asarray(u, dtype=float)
        return np.exp(1j * u * self.mean - 0.5 * (self.std * u) ** 2)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-0.5 * ((x - self.mean) / self.std) ** 2) / (self.std * math.sqrt(2 * math.pi))

    def cdf(self, x):
        from scipy.special import ndtr

        return ndtr((np.asarray(x, dtype=float) - self.mean) / self.std)


@dataclass(frozen=True)
class Box:
    """Uniform density of half-width ``halfwidth`` around ``center``.

    At the two edges the density takes half its interior value, the value a
    Fourier inversion of the sinc converges to.
    """

    center: float = 0.0
    halfwidth: float = 1.0

    finite_variance = True

    def problems(self) -> list[str]:
        return [] if self.halfwidth > 0 else ["L > 0"]

    @property
    def mean(self) -> float:
        return self.center

    @property
    def variance(self) -> float:
        return self.halfwidth**2 / 3.0

    def characteristic(self, u):
        u = np.asarray(u, dtype=float)
        return np.exp(1j * u * self.center) * np.sinc(u * self.halfwidth / np.pi)

    def pdf(self, x):
        d = np.abs(np.asarray(x, dtype=float) - self.center)
        h = 1.0 / (2 * self.halfwidth)
        return np.where(d < self.halfwidth, h, np.where(d == self.halfwidth, 0.5 * h, 0.0))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip((x - self.center + self.halfwidth) / (2 * self.halfwidth), 0.0, 1.0)


@dataclass(frozen=True)
class Cauchy:
    """Lorentz density; no finite moments."""

    location: float = 0.0
    scale: float = 1.0

    finite_variance = False

    def problems(self) -> list[str]:
        return [] if self.scale > 0 else ["scale > 0"]

    @property
    def center(self) -> float:
        return self.location

    mean = center
    variance = float("nan")

    def characteristic(self, u):
        u = np.asarray(u, dtype=float)
        return np.exp(1j * u * self.location - self.scale * np.abs(u))

    def pdf(self, x):
        r = (np.asarray(x, dtype=float) - self.location) / self.scale
        return 1.0 / (math.pi * self.scale * (1.0 + r * r))

    def cdf(self, x):
        r = (np.asarray(x, dtype=float) - self.location) / self.scale
        return 0.5 + np.arctan(r) / math.pi


@dataclass(frozen=True)
class Delta:
    """Point mass. Symbolic only: there is no grid representation."""

    location: float = 0.0

    finite_variance = True
    variance = 0.0

    def problems(self) -> list[str]:
        return [] if math.isfinite(self.location) else ["location finite"]

    @property
    def mean(self) -> float:
        return self.location

    center = mean

    def characteristic(self, u):
        u = np.asarray(u, dtype=float)
        return np.exp(1j * u * self.location)

    def pdf(self, x):
        raise DeltaUnsupported("Delta family has no pointwise density")

    def cdf(self, x):
        return np.where(np.asarray(x, dtype=float) >= self.location, 1.0, 0.0)


Family = Union[Gaussian, Box, Cauchy, Delta]


@dataclass(frozen=True)
class ProductEnv:
    """Environment prepared as a product of one-particle states.

    Only the one-particle position densities |φ_i|² matter to the reduced
    density matrix, so the families describe densities, not amplitudes.
    """

    particles: tuple

    @classmethod
    def identical(cls, family: Family, n: int) -> "ProductEnv":
        return cls(tuple([family] * n))

    @property
    def n(self) -> int:
        return len(self.particles)

    @property
    def has_delta(self) -> bool:
        return any(isinstance(p, Delta) for p in self.particles)

    @property
    def finite_variance(self) -> bool:
        return all(p.finite_variance for p in self.particles)

    def problems(self) -> list[str]:
        if not self.particles:
            return ["n ≥ 1"]
        out = []
        for i, p in enumerate(self.particles):
            out += [f"particle {i}: {msg}" for msg in p.problems()]
        return out


@dataclass(frozen=True, eq=False)
class GridWave:
    """Sampled environment amplitude on a uniform d-dimensional grid.

    Node j along every axis sits at ``origin + j * spacing``.
    """

    amplitudes: np.ndarray
    spacing: float
    origin: float

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex)
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def n(self) -> int:
        return self.amplitudes.ndim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.n

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.cell_volume)

    def axis(self, i: int = 0) -> np.ndarray:
        return self.origin + self.spacing * np.arange(self.amplitudes.shape[i])

    def problems(self) -> list[str]:
        out = []
        if not self.spacing > 0:
            out.append("spacing > 0")
            return out
        if abs(self.norm2() - 1.0) > NORM_TOL:
            out.append("GridWave square-normalized to 1")
        return out


EnvState = Union[ProductEnv, GridWave]


@dataclass(frozen=True, eq=False)
class EntangledState:
    """Body-environment state Φ(X, x_1..x_n) supported on finitely many X.

    ``slices[a]`` is the environment amplitude Φ(X_a, ·) on a grid shared by
    all slices; slice weights are carried by the slice norms.
    """

    positions: tuple
    slices: np.ndarray
    spacing: float
    origin: float

    def __post_init__(self):
        s = np.array(self.slices, dtype=complex)
        s.setflags(write=False)
        object.__setattr__(self, "slices", s)
        object.__setattr__(self, "positions", tuple(float(x) for x in self.positions))

    @classmethod
    def product(cls, psi: "BodyAmplitude", positions: Sequence[float], env: GridWave) -> "EntangledState":
        """Factorized Φ = ψ(X) φ(x) restricted to ``positions``."""
        amps = np.array([complex(psi(x)) for x in positions])
        slices = amps.reshape((-1,) + (1,) * env.n) * env.amplitudes[None]
        return cls(tuple(positions), slices, env.spacing, env.origin)

    @property
    def n(self) -> int:
        return self.slices.ndim - 1

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.n

    def index(self, x: float) -> int:
        from .errors import PositionNotInSupport

        for i, p in enumerate(self.positions):
            if p == x:
                return i
        raise PositionNotInSupport(f"X = {x} not among {self.positions}")

    def slice(self, x: float) -> np.ndarray:
        return self.slices[self.index(x)]

    def total_norm2(self) -> float:
        return float(np.sum(np.abs(self.slices) ** 2) * self.cell_volume)

    def problems(self) -> list[str]:
        out = []
        if len(self.positions) != self.slices.shape[0]:
            out.append("one slice per body position")
        if len(set(self.positions)) != len(self.positions):
            out.append("body positions distinct")
        if abs(self.total_norm2() - 1.0) > NORM_TOL:
            out.append("total norm Σ‖Φ(X_a,·)‖² = 1")
        return out


# --- body amplitudes ----------------------------------------------------------------


class BodyAmplitude:
    """Map from a body coordinate (X, or P in momentum space) to an amplitude."""

    def __call__(self, x):
        raise NotImplementedError

    def problems(self) -> list[str]:
        return []


@dataclass(frozen=True)
class GaussianPacket(BodyAmplitude):
    """Normalized packet exp(-(X-c)²/4w² + i p0 X/ħ) in position space."""

    center: float = 0.0
    width: float = 1.0
    p0: float = 0.0
    hbar: float = 1.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        norm = (2 * math.pi * self.width**2) ** -0.25
        return norm * np.exp(-((x - self.center) ** 2) / (4 * self.width**2) + 1j * self.p0 * x / self.hbar)

    def fourier(self) -> "MomentumGaussian":
        """Momentum-space amplitude (2πħ)^{-1/2} ∫ ψ(X) e^{-iPX/ħ} dX."""
        return MomentumGaussian(self.center, self.width, self.p0, self.hbar)

    def problems(self) -> list[str]:
        return [] if self.width > 0 else ["width > 0"]


@dataclass(frozen=True)
class MomentumGaussian(BodyAmplitude):
    center: float = 0.0
    width: float = 1.0
    p0: float = 0.0
    hbar: float = 1.0

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        sp = self.hbar / (2 * self.width)
        norm = (2 * math.pi * sp**2) ** -0.25
        dp = p - self.p0
        return norm * np.exp(-(dp**2) / (4 * sp**2) - 1j * dp * self.center / self.hbar)

    def problems(self) -> list[str]:
        return [] if self.width > 0 else ["width > 0"]


@dataclass(frozen=True)
class TwoPoint(BodyAmplitude):
    """Superposition Σ c_j |X_j⟩; amplitude c_j at X_j and zero elsewhere."""

    positions: tuple
    weights: tuple

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        for xj, cj in zip(self.positions, self.weights):
            out = np.where(x == xj, complex(cj), out)
        return out if out.ndim else complex(out)

    def problems(self) -> list[str]:
        out = []
        if len(self.positions) != len(self.weights):
            out.append("one weight per position")
        if abs(sum(abs(complex(c)) ** 2 for c in self.weights) - 1.0) > NORM_TOL:
            out.append("Σ|c_j|² = 1")
        return out


@dataclass(frozen=True, eq=False)
class SampledAmplitude(BodyAmplitude):
    """Tabulated amplitude, linearly interpolated, zero outside the table."""

    points: np.ndarray
    values: np.ndarray

    def __call__(self, x):
        xp = np.asarray(self.points, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        re = np.interp(x, xp, v.real, left=0.0, right=0.0)
        im = np.interp(x, xp, v.imag, left=0.0, right=0.0)
        return re + 1j * im


# --- validation ---------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate(consts: PhysConsts, coupling: Coupling | None = None, env=None, body=None) -> ValidationReport:
    """Collect every violated invariant of the inputs without touching them."""
    out = list(consts.problems())
    if coupling is not None:
        out += coupling.problems()
    if env is not None:
        out += env.problems()
        if not consts.problems() and env.n != consts.n:
            out.append(f"environment has {env.n} particles but n = {consts.n}")
    if body is not None:
        out += body.problems()
    return ValidationReport(tuple(out))


def ensure_valid(consts: PhysConsts, coupling: Coupling | None = None, env=None, body=None) -> None:
    report = validate(consts, coupling, env, body)
    if not report.ok:
        raise ValidationError(report.violations)


# --- grid sampling ------------------------------------------------------------------


def centered_origin(points: int, spacing: float) -> float:
    """Origin putting grid nodes at half-integer multiples of ``spacing``.

    Box edges at integer multiples of the spacing then fall between nodes,
    so a sampled box carries exactly its nominal mass.
    """
    return -(points // 2) * spacing + 0.5 * spacing


def one_particle_amplitude(family: Family, x: np.ndarray) -> np.ndarray:
    if isinstance(family, Delta):
        raise DeltaUnsupported("Delta environment cannot be sampled on a grid")
    return np.sqrt(family.pdf(x)).astype(complex)


def sample_product(env: ProductEnv, points: int, spacing: float, origin: float | None = None,
                   normalize: bool = True) -> GridWave:
    """Product amplitude Π_i sqrt(w_i(x_i)) on an n-dimensional grid."""
    if origin is None:
        origin = centered_origin(points, spacing)
    x = origin + spacing * np.arange(points)
    amp = np.ones((), dtype=complex)
    for p in env.particles:
        a = one_particle_amplitude(p, x)
        amp = np.multiply.outer(amp, a)
    if normalize:
        amp = amp / math.sqrt(np.sum(np.abs(amp) ** 2) * spacing**env.n)
    return GridWave(amp, spacing, origin)


PotentialFn = Callable[[np.ndarray], np.ndarray]
