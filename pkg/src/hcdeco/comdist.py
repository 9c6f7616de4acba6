"""Centre-of-mass statistics of the environment.

η = Σ x_i / n is the only environment coordinate the decoherence factor
sees. This module provides its density w(η), its moments and its
characteristic function

    f(z) = ∫ dη e^{+izη} w(η),

with the ``+`` sign used everywhere in the package (the analytic engine and
the grid oracle share it; flipping it silently conjugates ρ).

Naming note: ``variance`` is the mean square deviation of η. The short-time
law 1 - variance·z²/2 needs the variance, not the standard deviation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .errors import DeltaUnsupported, GridTooNarrow, TailError
from .model import Box, Cauchy, EntangledState, Gaussian, GridWave, ProductEnv

TAIL_MASS = 1e-4
END_DECAY = 1e-8


@dataclass(frozen=True)
class ComMoments:
    mean: float
    variance: float
    finite: bool

    @property
    def width(self) -> float:
        """Δη, the standard deviation of η."""
        return math.sqrt(self.variance) if self.finite else float("inf")


@dataclass(frozen=True, eq=False)
class OverlapDensity:
    eta: np.ndarray
    values: np.ndarray
    diag_a: np.ndarray
    diag_b: np.ndarray

    @property
    def step(self) -> float:
        return float(self.eta[1] - self.eta[0])

    def schwarz_slack(self) -> np.ndarray:
        """√(w_aa w_bb) - |w_ab| at every node; never below -1e-10."""
        return np.sqrt(self.diag_a * self.diag_b) - np.abs(self.values)


# --- grid marginals -----------------------------------------------------------------


def _check_uniform(eta: np.ndarray) -> float:
    if eta.ndim != 1 or eta.size < 2:
        raise ValueError("eta grid needs at least two nodes")
    d = np.diff(eta)
    step = float(d[0])
    if step <= 0 or np.max(np.abs(d - step)) > 1e-9 * abs(step) * eta.size:
        raise ValueError("eta grid must be uniform and increasing")
    return step


def natural_lattice(points: int, ndim: int, spacing: float, origin: float) -> np.ndarray:
    """η values reachable from an n-dimensional grid: origin + m·spacing/n."""
    m = np.arange(ndim * (points - 1) + 1)
    return origin + m * spacing / ndim


def _lattice_masses(weights: np.ndarray, spacing: float) -> np.ndarray:
    """Sum per-node masses over all nodes sharing Σ j_i (hence the same η)."""
    d = weights.ndim
    idx = sum(np.indices(weights.shape))
    cell = spacing**d
    re = np.bincount(idx.ravel(), weights=weights.real.ravel()) * cell
    im = np.bincount(idx.ravel(), weights=weights.imag.ravel()) * cell
    return re + 1j * im


def _bin_linear(eta_src: np.ndarray, mass: np.ndarray, eta: np.ndarray) -> tuple[np.ndarray, float]:
    """Linear (cloud-in-cell) binning of point masses onto a uniform grid.

    Returns the per-node masses and the absolute mass that fell outside.
    """
    step = _check_uniform(eta)
    pos = (eta_src - eta[0]) / step
    lo = np.floor(pos).astype(np.int64)
    frac = pos - lo
    out = np.zeros(eta.size, dtype=complex)
    lost = 0.0
    for idx, w in ((lo, 1.0 - frac), (lo + 1, frac)):
        m = mass * w
        inside = (idx >= 0) & (idx < eta.size)
        np.add.at(out, idx[inside], m[inside])
        lost += float(np.sum(np.abs(m[~inside])))
    return out, lost


def _weights_density(weights: np.ndarray, spacing: float, origin: float, eta_grid=None):
    """Marginal density over η of per-node weights (|Φ|² or Φ_a Φ_b*).

    Every node of the n-dimensional grid is assigned its η = Σ x_i / n. On
    the natural lattice the binning is exact; the Jacobian n of the
    change of variables appears as the lattice step spacing/n.
    """
    d = weights.ndim
    lattice = natural_lattice(weights.shape[0], d, spacing, origin)
    mass = _lattice_masses(weights, spacing)
    if eta_grid is None:
        return lattice, mass / (spacing / d), 0.0
    eta = np.asarray(eta_grid, dtype=float)
    binned, lost = _bin_linear(lattice, mass, eta)
    return eta, binned / (eta[1] - eta[0]), lost


def marginal(wave: GridWave, eta_grid=None) -> tuple[np.ndarray, np.ndarray]:
    """(η, w(η)) for a gridded environment state."""
    eta, w, lost = _weights_density(np.abs(wave.amplitudes) ** 2, wave.spacing, wave.origin, eta_grid)
    if lost > TAIL_MASS:
        raise GridTooNarrow(f"η grid truncates mass {lost:.3g}")
    return eta, w.real


# --- density ------------------------------------------------------------------------


def _scaled_cell_density(family, n: int, h: float, lo: float, size: int) -> np.ndarray:
    """Cell-averaged density of x/n on the grid lo + j*h."""
    edges = lo + h * (np.arange(size + 1) - 0.5)
    c = family.cdf(edges * n)
    return np.diff(c) / h


def _support(family, n: int) -> tuple[float, float]:
    if isinstance(family, Box):
        a, b = family.center - family.halfwidth, family.center + family.halfwidth
    elif isinstance(family, Gaussian):
        a, b = family.mean - 12 * family.std, family.mean + 12 * family.std
    else:
        a, b = family.location - 1e4 * family.scale, family.location + 1e4 * family.scale
    return a / n, b / n


def _convolved_density(env: ProductEnv, step: float) -> tuple[np.ndarray, np.ndarray]:
    """Numerical n-fold convolution of the densities of x_i/n.

    Returns (grid, density) on an auxiliary grid finer than ``step``.
    """
    n = env.n
    supports = [_support(p, n) for p in env.particles]
    widths = [b - a for a, b in supports]
    h = min(min(widths) / 2000.0, step / 4.0)
    h = max(h, sum(widths) / 2**22)
    dens = None
    for (a, _), w, p in zip(supports, widths, env.particles):
        part = _scaled_cell_density(p, n, h, a - h, int(math.ceil(w / h)) + 3)
        dens = part if dens is None else fftconvolve(dens, part) * h
    lo_total = sum(a for a, _ in supports) - n * h
    return lo_total + h * np.arange(dens.size), np.clip(dens, 0.0, None)


def com_density(env, eta_grid) -> np.ndarray:
    """Density w(η) of the centre of mass, sampled at ``eta_grid``.

    Single-particle, all-Gaussian and all-Cauchy products have exact closed
    forms; other products are convolved numerically. Raises GridTooNarrow if
    more than 1e-4 of the probability lies outside the grid.
    """
    eta = np.asarray(eta_grid, dtype=float)
    step = _check_uniform(eta)
    if isinstance(env, GridWave):
        return marginal(env, eta)[1]
    if env.has_delta:
        raise DeltaUnsupported("Delta environment has no density")
    n = env.n
    parts = env.particles
    if n == 1:
        fam = parts[0]
    elif all(isinstance(p, Gaussian) for p in parts):
        fam = Gaussian(sum(p.mean for p in parts) / n, math.sqrt(sum(p.variance for p in parts)) / n)
    elif all(isinstance(p, Cauchy) for p in parts):
        fam = Cauchy(sum(p.location for p in parts) / n, sum(p.scale for p in parts) / n)
    else:
        fam = None
    lo, hi = eta[0] - 0.5 * step, eta[-1] + 0.5 * step
    if fam is not None:
        lost = float(fam.cdf(lo) + 1.0 - fam.cdf(hi))
        w = fam.pdf(eta)
    else:
        grid, dens = _convolved_density(env, step)
        h = grid[1] - grid[0]
        outside = (grid < lo) | (grid > hi)
        lost = float(np.sum(dens[outside]) * h)
        w = np.interp(eta, grid, dens, left=0.0, right=0.0)
    if lost > TAIL_MASS:
        raise GridTooNarrow(f"η grid truncates mass {lost:.3g}")
    return w


# --- characteristic function ----------------------------------------------------------


def fourier_quadrature(eta, values, z):
    """Trapezoid rule for ∫ dη e^{izη} values(η) on a uniform grid.

    Refuses (TailError) when the integrand has not decayed to 1e-8 of its
    peak at either end; truncated oscillatory integrals are unreliable.
    """
    eta = np.asarray(eta, dtype=float)
    v = np.asarray(values, dtype=complex)
    step = _check_uniform(eta)
    peak = float(np.max(np.abs(v))) if v.size else 0.0
    if peak > 0 and max(abs(v[0]), abs(v[-1])) > END_DECAY * peak:
        raise TailError("integrand does not decay at the ends of the η grid")
    wts = v.copy()
    wts[0] *= 0.5
    wts[-1] *= 0.5
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.empty(z_arr.shape, dtype=complex)
    # shift to the grid centre to keep the phases small
    c = 0.5 * (eta[0] + eta[-1])
    rel = eta - c
    chunk = max(1, 2**22 // max(eta.size, 1))
    flat = z_arr.ravel()
    res = np.empty(flat.size, dtype=complex)
    for s in range(0, flat.size, chunk):
        zz = flat[s:s + chunk]
        res[s:s + chunk] = np.exp(1j * np.outer(zz, rel)) @ wts * step * np.exp(1j * zz * c)
    out = res.reshape(z_arr.shape)
    return out if np.ndim(z) else complex(out[0])


def particle_characteristic(family, u):
    return family.characteristic(u)


def characteristic(env, z):
    """f(z) = E[exp(izη)].

    Products use the exact factorization Π_i φ_i(z/n) of the one-particle
    transforms; gridded states are marginalized and integrated.
    """
    z_arr = np.asarray(z, dtype=float)
    if isinstance(env, GridWave):
        eta, w = marginal(env)
        out = fourier_quadrature(eta, w, z_arr)
        # normalization: f(0) = 1 exactly
        total = float(np.sum(w) * (eta[1] - eta[0]))
        out = np.asarray(out) / total
        out = np.where(z_arr == 0, 1.0 + 0j, out)
    else:
        n = env.n
        out = np.ones(z_arr.shape, dtype=complex)
        for p in env.particles:
            out = out * p.characteristic(z_arr / n)
    return out if out.ndim else complex(out)


def moments(env) -> ComMoments:
    if isinstance(env, GridWave):
        eta, w = marginal(env)
        step = eta[1] - eta[0]
        mass = np.sum(w) * step
        mean = float(np.sum(eta * w) * step / mass)
        var = float(np.sum((eta - mean) ** 2 * w) * step / mass)
        return ComMoments(mean, var, True)
    n = env.n
    mean = sum(p.center for p in env.particles) / n
    if not env.finite_variance:
        return ComMoments(mean, float("nan"), False)
    var = sum(p.variance for p in env.particles) / n**2
    return ComMoments(mean, var, True)


# --- entangled overlap --------------------------------------------------------------


def overlap_density(state: EntangledState, xa: float, xb: float, eta_grid=None) -> OverlapDensity:
    """w_{X_a X_b}(η) = ∫ dS Φ(X_a, η+ξ) Φ*(X_b, η+ξ) and its two diagonals."""
    pa = state.slice(xa)
    pb = state.slice(xb)
    eta, wab, lost = _weights_density(pa * np.conj(pb), state.spacing, state.origin, eta_grid)
    _, waa, lost_a = _weights_density(np.abs(pa) ** 2 + 0j, state.spacing, state.origin, eta_grid)
    _, wbb, lost_b = _weights_density(np.abs(pb) ** 2 + 0j, state.spacing, state.origin, eta_grid)
    if max(lost_a, lost_b) > TAIL_MASS:
        raise GridTooNarrow("η grid truncates slice mass")
    return OverlapDensity(eta, wab, np.clip(waa.real, 0.0, None), np.clip(wbb.real, 0.0, None))


def triangular(halfwidth: float = 1.0, center: float = 0.0) -> ProductEnv:
    """Two-particle box product; η = (x_1+x_2)/2 has a triangular density
    of half-width ``halfwidth`` (each box has that same half-width)."""
    return ProductEnv((Box(center, halfwidth), Box(center, halfwidth)))


def box_limit_first_zero(halfwidth: float, n: int, coupling_strength: float, separation: float,
                         hbar: float = 1.0) -> float:
    """First zero of the sinc decoherence factor, πħ/(n c |ΔX| L); → 0 as L → ∞."""
    return math.pi * hbar / (n * abs(coupling_strength) * abs(separation) * halfwidth)
