import math

import numpy as np
import pytest
from scipy import integrate

from hcdeco.errors import DeltaUnsupported, ValidationError
from hcdeco.model import (Box, Cauchy, Coupling, CouplingKind, Delta, EntangledState, Gaussian,
                          GaussianPacket, GridWave, PhysConsts, ProductEnv, TwoPoint, ensure_valid,
                          sample_product, validate)


def test_validate_passes_for_sane_inputs():
    rep = validate(PhysConsts(hbar=1, n=2), Coupling.sc(), ProductEnv.identical(Gaussian(0, 1), 2))
    assert rep.ok and rep.violations == ()


def test_validate_rejects_zero_particles():
    rep = validate(PhysConsts(n=0))
    assert not rep.ok
    assert "n ≥ 1" in rep.violations


def test_validate_rejects_negative_box():
    rep = validate(PhysConsts(), Coupling.sc(), ProductEnv((Box(0, -1),)))
    assert any("L > 0" in v for v in rep.violations)


@pytest.mark.parametrize("env, msg", [
    (ProductEnv((Gaussian(0, 0),)), "std > 0"),
    (ProductEnv((Cauchy(0, -2),)), "scale > 0"),
])
def test_family_invariants(env, msg):
    assert any(msg in v for v in validate(PhysConsts(), None, env).violations)


def test_validate_is_idempotent_and_pure():
    consts, coup, env = PhysConsts(2.0, 0.5, 2), Coupling.hc(3.0), ProductEnv.identical(Box(0, 1), 2)
    before = (consts, coup, env)
    assert validate(consts, coup, env).ok
    assert validate(consts, coup, env).ok
    assert (consts, coup, env) == before


def test_particle_count_must_match_n():
    rep = validate(PhysConsts(n=3), Coupling.sc(), ProductEnv.identical(Gaussian(), 2))
    assert not rep.ok


@pytest.mark.parametrize("coupling, ok", [
    (Coupling.sc(2.0), True),
    (Coupling.mc(0.5), True),
    (Coupling.mhc(2.0, 3.0), True),
    (Coupling(CouplingKind.SC), False),
    (Coupling(CouplingKind.SC, k=1.0, gamma=1.0), False),
    (Coupling(CouplingKind.MHC, gamma=1.0, mu=2.0, nu=3.0), False),
    (Coupling(CouplingKind.MC, gamma=float("inf")), False),
])
def test_coupling_requires_exactly_its_constants(coupling, ok):
    assert (not coupling.problems()) == ok


def test_mhc_gamma_is_ratio():
    c = Coupling.mhc(mu=4.0, nu=2.0)
    assert c.gamma == 0.5 and c.strength == 0.5


def test_gridwave_normalization_check():
    x = np.linspace(-10, 10, 201)
    amp = np.exp(-x**2 / 4)
    wave = GridWave(amp, 0.1, -10)
    assert "GridWave square-normalized to 1" in wave.problems()
    wave = GridWave(amp / math.sqrt(np.sum(amp**2) * 0.1), 0.1, -10)
    assert wave.problems() == []


def test_gridwave_is_read_only():
    wave = sample_product(ProductEnv((Gaussian(),)), 128, 0.1)
    with pytest.raises(ValueError):
        wave.amplitudes[0] = 1.0


def test_sample_product_box_has_exact_mass():
    wave = sample_product(ProductEnv((Box(0, 1),)), 256, 1 / 32, normalize=False)
    assert wave.norm2() == pytest.approx(1.0, abs=1e-14)


def test_sample_delta_refused():
    with pytest.raises(DeltaUnsupported):
        sample_product(ProductEnv((Delta(0.0),)), 64, 0.1)


def test_two_point_weights():
    good = TwoPoint((1.0, -1.0), (0.6, 0.8j))
    assert good.problems() == []
    assert good(1.0) == 0.6 and good(-1.0) == 0.8j and good(0.3) == 0
    assert TwoPoint((1.0, -1.0), (0.6, 0.6)).problems() == ["Σ|c_j|² = 1"]


def test_gaussian_packet_normalized_and_fourier_pair():
    pk = GaussianPacket(center=0.4, width=0.7, p0=1.3, hbar=1.0)
    norm, _ = integrate.quad(lambda x: abs(pk(x)) ** 2, -20, 20)
    assert norm == pytest.approx(1.0, abs=1e-12)
    ft = pk.fourier()
    for p in (-1.0, 0.5, 2.2):
        re, _ = integrate.quad(lambda x: (pk(x) * np.exp(-1j * p * x)).real, -20, 20, limit=200)
        im, _ = integrate.quad(lambda x: (pk(x) * np.exp(-1j * p * x)).imag, -20, 20, limit=200)
        expected = (re + 1j * im) / math.sqrt(2 * math.pi)
        assert abs(ft(p) - expected) < 1e-10


def test_entangled_state_norm_and_support():
    wave = sample_product(ProductEnv((Gaussian(0, 1),)), 256, 0.1)
    psi = TwoPoint((1.0, -1.0), (2**-0.5, 2**-0.5))
    st = EntangledState.product(psi, (1.0, -1.0), wave)
    assert st.problems() == []
    assert st.total_norm2() == pytest.approx(1.0, abs=1e-12)
    bad = EntangledState((1.0,), 2 * st.slices[:1], st.spacing, st.origin)
    assert bad.problems()


def test_ensure_valid_raises_with_named_invariant():
    with pytest.raises(ValidationError, match="hbar > 0"):
        ensure_valid(PhysConsts(hbar=-1.0))
