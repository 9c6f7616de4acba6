"""Closed-form reduced density matrix of the macroscopic body.

For the linear coupling (position basis) an off-diagonal element is

    ρ_{X'X''}(t) = ψ(X') ψ*(X'') · exp(i θ) · f(z),
    z = n k (X'-X'') t / ħ,
    θ = n α k (X'-X'') t² / (2ħ),

with f the centre-of-mass characteristic function (see :mod:`comdist`).
The momentum coupling replaces (X, k, ψ) by (P, γ, ψ̃). The harmonic
couplings multiply these by a pure phase.

The ½ħ in θ is what the exact factorization of exp(-it(H_e + W)/ħ) gives,
since the commutator of the two terms is the c-number -iħ n α k X. The
grid oracle reproduces it by direct time stepping. Orientation: the
environment conditioned on X evolves under H_e - k X Σ x_i, so it picks up
exp(+i t k X Σ x_i / ħ); that is the orientation in which f carries e^{+izη}.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import find_peaks

from . import comdist
from .errors import (DecoherenceError, InsufficientSamples, NonFiniteVariance, ZeroSeparation,
                     ZeroWidth)
from .model import Coupling, CouplingKind, EntangledState, PhysConsts, ensure_valid


@dataclass(frozen=True)
class RdmElement:
    value: complex
    modulus: float
    phase_exponent: float
    z_or_y: float


@dataclass(frozen=True, eq=False)
class DecoherenceCurve:
    times: np.ndarray
    elements: tuple
    metadata: dict = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.elements])

    @property
    def moduli(self) -> np.ndarray:
        return np.array([e.modulus for e in self.elements])

    @property
    def args(self) -> np.ndarray:
        """Transform argument z (or y) of every sample."""
        return np.array([e.z_or_y for e in self.elements])

    @property
    def phases(self) -> np.ndarray:
        return np.array([e.phase_exponent for e in self.elements])


@dataclass(frozen=True)
class TimescaleReport:
    tau: float
    n: int
    strength: float
    separation: float
    delta_eta: float
    hbar: float
    kind: str


@dataclass(frozen=True)
class DecayFit:
    model: str
    order: float
    log_slope: float
    residuals: dict
    points: int


def transform_arg(coupling: Coupling, sep_a: float, sep_b: float, t, consts: PhysConsts):
    """z = n k (X'-X'') t/ħ, or y = n γ (P'-P'') t/ħ for momentum couplings."""
    return consts.n * coupling.strength * (sep_a - sep_b) * np.asarray(t, dtype=float) / consts.hbar


def phase_exponent(coupling: Coupling, a: float, b: float, t, consts: PhysConsts):
    t = np.asarray(t, dtype=float)
    return consts.n * consts.alpha * coupling.strength * (a - b) * t * t / (2 * consts.hbar)


def body_phase(coupling: Coupling, a: float, b: float, t, consts: PhysConsts):
    """Phase from the body-only term of the quadratic couplings."""
    t = np.asarray(t, dtype=float)
    if coupling.kind is CouplingKind.HC:
        return -coupling.k * consts.n * (a * a - b * b) * t / (2 * consts.hbar)
    if coupling.kind is CouplingKind.MHC:
        return -consts.n * (a * a - b * b) * t / (2 * coupling.mu * consts.hbar)
    return np.zeros_like(t)


def _elements(amp_a, amp_b, env, a, b, times, consts, coupling) -> list[RdmElement]:
    pref = complex(amp_a) * complex(amp_b).conjugate()
    z = transform_arg(coupling, a, b, times, consts)
    f = np.atleast_1d(comdist.characteristic(env, z))
    theta = np.atleast_1d(phase_exponent(coupling, a, b, times, consts) + body_phase(coupling, a, b, times, consts))
    mod = abs(pref) * np.abs(f)
    val = pref * np.exp(1j * theta) * f
    z = np.atleast_1d(z)
    return [RdmElement(complex(v), float(m), float(th), float(zz)) for v, m, th, zz in zip(val, mod, theta, z)]


def _element(psi, env, a, b, t, consts, coupling, allowed) -> RdmElement:
    ensure_valid(consts, coupling, env)
    if coupling.kind not in allowed:
        raise DecoherenceError(f"{coupling.kind.value} coupling is not handled here")
    return _elements(psi(a), psi(b), env, a, b, np.array([t], dtype=float), consts, coupling)[0]


def rdm_sc(psi, env, x1: float, x2: float, t: float, consts: PhysConsts, coupling: Coupling) -> RdmElement:
    """ρ_{X'X''}(t) for the linear position coupling."""
    return _element(psi, env, x1, x2, t, consts, coupling, (CouplingKind.SC,))


def rdm_mc(psi_tilde, env, p1: float, p2: float, t: float, consts: PhysConsts,
           coupling: Coupling) -> RdmElement:
    """ρ_{P'P''}(t) for the momentum coupling; ``psi_tilde`` is the momentum amplitude."""
    return _element(psi_tilde, env, p1, p2, t, consts, coupling, (CouplingKind.MC,))


def rdm_hc(psi, env, x1, x2, t, consts, coupling) -> RdmElement:
    return _element(psi, env, x1, x2, t, consts, coupling, (CouplingKind.HC,))


def rdm_mhc(psi_tilde, env, p1, p2, t, consts, coupling) -> RdmElement:
    return _element(psi_tilde, env, p1, p2, t, consts, coupling, (CouplingKind.MHC,))


def rdm_element(psi, env, a, b, t, consts, coupling) -> RdmElement:
    """Dispatch on the coupling kind."""
    return _element(psi, env, a, b, t, consts, coupling, tuple(CouplingKind))


def rdm_entangled(state: EntangledState, x1: float, x2: float, t: float, consts: PhysConsts,
                  coupling: Coupling, eta_grid=None) -> RdmElement:
    """ρ_{X'X''}(t) = exp(iθ) ∫ dη e^{izη} w_{X'X''}(η) for an entangled initial state."""
    ensure_valid(consts, coupling, state)
    if coupling.kind is not CouplingKind.SC:
        raise DecoherenceError("entangled initial states are handled for the sc coupling only")
    ov = comdist.overlap_density(state, x1, x2, eta_grid)
    z = float(transform_arg(coupling, x1, x2, t, consts))
    theta = float(phase_exponent(coupling, x1, x2, t, consts))
    bound = np.sqrt(ov.diag_a * ov.diag_b)
    peak = float(np.max(bound))
    if peak > 0 and max(bound[0], bound[-1]) > comdist.END_DECAY * peak:
        raise comdist.TailError("overlap density does not decay at the ends of the η grid")
    g = _quad_no_check(ov.eta, ov.values, z)
    return RdmElement(cmath.exp(1j * theta) * g, abs(g), theta, z)


def _quad_no_check(eta, values, z) -> complex:
    step = eta[1] - eta[0]
    w = np.array(values, dtype=complex)
    w[0] *= 0.5
    w[-1] *= 0.5
    c = 0.5 * (eta[0] + eta[-1])
    return complex(np.sum(w * np.exp(1j * z * (eta - c))) * step * cmath.exp(1j * z * c))


def short_time_modulus(env, z) -> float:
    """1 - variance·z²/2, the leading behaviour of |f(z)|.

    Valid only while variance·z² ≪ 1; outside that range the value is
    returned unclamped and can go negative.
    """
    m = comdist.moments(env)
    if not m.finite:
        raise NonFiniteVariance("environment centre of mass has no finite variance")
    out = 1.0 - m.variance * np.asarray(z, dtype=float) ** 2 / 2.0
    return float(out) if out.ndim == 0 else out


def decoherence_time(coupling: Coupling, separation: float, env, consts: PhysConsts) -> TimescaleReport:
    """τ = ħ / (n · c · |separation| · Δη), c = k or γ."""
    ensure_valid(consts, coupling, env)
    if separation == 0:
        raise ZeroSeparation("ZeroSeparation: X' - X'' (or P' - P'') must be nonzero")
    m = comdist.moments(env)
    if not m.finite:
        raise NonFiniteVariance("NonFiniteVariance: Δη is undefined for this environment")
    if m.variance == 0:
        raise ZeroWidth("ZeroWidth: Δη = 0, the modulus is a constant of motion")
    if coupling.strength == 0:
        raise ZeroSeparation("coupling constant is zero, no decoherence")
    width = math.sqrt(m.variance)
    tau = timescale(consts.n, coupling.strength, separation, width, consts.hbar)
    return TimescaleReport(tau, consts.n, coupling.strength, separation, width, consts.hbar,
                           coupling.kind.value)


def timescale(n: int, strength: float, separation: float, delta_eta: float, hbar: float = 1.0) -> float:
    return hbar / (n * abs(strength) * abs(separation) * delta_eta)


def curve(psi, env, a: float, b: float, times: Sequence[float], consts: PhysConsts,
          coupling: Coupling) -> DecoherenceCurve:
    """Sample ρ_{ab}(t) on a strictly increasing time grid.

    ``env`` may also be an :class:`EntangledState`, in which case ``psi`` is
    ignored and the element comes from the overlap density.
    """
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("time grid must be a nonempty 1-d sequence")
    if np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be strictly increasing")
    meta = {"coupling": coupling, "env": env, "a": a, "b": b, "consts": consts}
    if isinstance(env, EntangledState):
        elems = tuple(rdm_entangled(env, a, b, tt, consts, coupling) for tt in t)
    else:
        ensure_valid(consts, coupling, env)
        elems = tuple(_elements(psi(a), psi(b), env, a, b, t, consts, coupling))
    return DecoherenceCurve(t, elems, meta)


# --- decay-order fits ---------------------------------------------------------------

MIN_FIT_POINTS = 8


def envelope(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lobe maxima of y(x) if the data oscillate, else the data themselves.

    A lobe maximum must stand at least half its height above the minima on
    either side, which rejects rounding-level wiggles on monotone data.
    """
    idx, props = find_peaks(y, prominence=0.0)
    idx = idx[props["prominences"] >= 0.5 * y[idx]]
    if idx.size >= 2:
        return x[idx], y[idx]
    return x, y


def decay_fit(crv: DecoherenceCurve, window: tuple[float, float]) -> DecayFit:
    """Classify how the modulus falls off with |z| inside ``window``.

    log|ρ| is fitted by least squares against log|z| (power law), |z|
    (exponential) and z² (Gaussian); the model with the smallest residual
    wins. ``order`` is the power-law exponent, the exponential rate, or the
    Gaussian coefficient, all as positive decay numbers.
    """
    zmin, zmax = window
    x_all = np.abs(crv.args)
    y_all = crv.moduli
    order = np.argsort(x_all, kind="stable")
    x_all, y_all = x_all[order], y_all[order]
    # samples at ±t share |z|; merge them so duplicates cannot fake a local maximum
    scale = float(np.max(x_all)) or 1.0
    _, first, inv = np.unique(np.round(x_all / scale * 1e12), return_index=True, return_inverse=True)
    x_all = x_all[first]
    y_all = np.bincount(inv, weights=y_all) / np.bincount(inv)
    sel = (x_all >= zmin) & (x_all <= zmax)
    if np.count_nonzero(sel) < MIN_FIT_POINTS:
        raise InsufficientSamples(f"only {np.count_nonzero(sel)} samples in window {window}")
    x, y = envelope(x_all[sel], y_all[sel])
    keep = y > 0
    x, y = x[keep], y[keep]
    if x.size < MIN_FIT_POINTS:
        raise InsufficientSamples(f"only {x.size} envelope points in window {window}")
    ly = np.log(y)
    fits = {}
    for name, feat in (("power", np.log(x) if np.all(x > 0) else None), ("exponential", x), ("gaussian", x * x)):
        if feat is None:
            continue
        A = np.vstack([feat, np.ones_like(feat)]).T
        coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
        resid = float(np.sqrt(np.mean((A @ coef - ly) ** 2)))
        fits[name] = (float(coef[0]), resid)
    best = min(fits, key=lambda k: fits[k][1])
    slope = fits[best][0]
    return DecayFit(best, -slope, slope, {k: v[1] for k, v in fits.items()}, int(x.size))
