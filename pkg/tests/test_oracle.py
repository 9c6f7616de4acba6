import cmath

import numpy as np
import pytest

from hcdeco import oracle, rdm
from hcdeco.errors import CourantViolation, DecoherenceError, GridError
from hcdeco.model import (Box, Coupling, EntangledState, Gaussian, GaussianPacket, PhysConsts,
                          ProductEnv, TwoPoint, sample_product)

PSI = TwoPoint((1.0, -1.0), (2**-0.5, 2**-0.5))


@pytest.mark.parametrize("kw", [
    dict(points=100, spacing=0.1),
    dict(points=32, spacing=0.1),
    dict(points=64, spacing=0.0),
    dict(points=64, spacing=0.1, ndim=4),
    dict(points=8192, spacing=0.1, ndim=2),
])
def test_gridspec_rejects(kw):
    with pytest.raises(GridError):
        oracle.GridSpec(**kw)


def test_gridspec_centered():
    g = oracle.GridSpec(128, 0.5)
    assert g.x[0] == pytest.approx(-31.75) and g.x[-1] == pytest.approx(31.75)


def _wave(std=0.7, points=1024, spacing=0.02, n=1):
    return sample_product(ProductEnv.identical(Gaussian(0.0, std), n), points, spacing)


def test_closed_form_equals_stepping_without_potential():
    phi = oracle.ConditionedWave.from_wave(_wave(), conditioning=1.3)
    c = PhysConsts(alpha=0.8)
    a = oracle.evolve_conditioned(phi, 1.1, c, Coupling.sc(0.9))
    b = oracle.evolve_conditioned(phi, 1.1, c, Coupling.sc(0.9), steps=5)
    assert np.max(np.abs(a.amplitudes - b.amplitudes)) < 1e-11
    assert a.time == pytest.approx(1.1)


def test_evolution_preserves_norm():
    phi = oracle.ConditionedWave.from_wave(_wave(), conditioning=-0.4)
    out = oracle.evolve_conditioned(phi, 2.0, PhysConsts(alpha=1.0), Coupling.sc(),
                                    potential=lambda x: 0.5 * x * x, steps=200)
    assert out.norm2() == pytest.approx(1.0, abs=1e-12)


def test_translation_off_grid_is_courant_violation():
    with pytest.raises(CourantViolation):
        oracle.rdm_element_oracle(PSI, _wave(), 1.0, -1.0, 8.0, PhysConsts(alpha=1.0), Coupling.sc())


def test_mhc_not_modelled():
    phi = oracle.ConditionedWave.from_wave(_wave())
    with pytest.raises(DecoherenceError):
        oracle.evolve_conditioned(phi, 1.0, PhysConsts(), Coupling.mhc(1.0, 1.0))


def test_product_env_needs_grid():
    with pytest.raises(GridError):
        oracle.rdm_element_oracle(PSI, ProductEnv((Gaussian(),)), 1, -1, 1, PhysConsts(), Coupling.sc())


@pytest.mark.parametrize("coupling", [Coupling.sc(0.8), Coupling.hc(0.8)])
def test_oracle_matches_analytic_with_phase(coupling):
    env = ProductEnv((Gaussian(0.0, 0.7),))
    c = PhysConsts(alpha=0.6)
    got = oracle.rdm_element_oracle(PSI, env, 1.0, -1.0, 1.5, c, coupling,
                                    grid=oracle.GridSpec(1024, 0.02), steps=64)
    ref = rdm.rdm_element(PSI, env, 1.0, -1.0, 1.5, c, coupling).value
    assert abs(got - ref) < 1e-9


def test_oracle_momentum_coupling():
    pk = GaussianPacket(0.0, 0.8).fourier()
    env = ProductEnv((Box(0.0, 1.0),))
    c = PhysConsts(alpha=0.5)
    got = oracle.rdm_element_oracle(pk, env, 0.7, -0.2, 1.2, c, Coupling.mc(1.4),
                                    grid=oracle.GridSpec(2048, 1 / 256))
    ref = rdm.rdm_mc(pk, env, 0.7, -0.2, 1.2, c, Coupling.mc(1.4))
    assert abs(abs(got) - ref.modulus) / ref.modulus < 1e-4
    assert abs(cmath.phase(got / ref.value)) < 1e-8


def test_entangled_oracle_on_product_state():
    w = _wave(points=512, spacing=0.025)
    st = EntangledState.product(PSI, (1.0, -1.0), w)
    c = PhysConsts(alpha=0.5)
    got = oracle.rdm_element_oracle_entangled(st, 1.0, -1.0, 1.0, c)
    ref = oracle.rdm_element_oracle(PSI, w, 1.0, -1.0, 1.0, c, Coupling.sc())
    assert abs(got - ref) < 1e-13


def test_v_independence_smooth_well():
    well = lambda x: 2.0 * (np.tanh(4 * (x - 2)) - np.tanh(4 * (x + 2))) / 2  # noqa: E731
    chk = oracle.v_independence_check(PSI, _wave(), 1.0, -1.0, 1.0, PhysConsts(alpha=0.5), Coupling.sc(),
                                      well, steps=400)
    assert chk.delta < 1e-5


def test_richardson_second_order():
    phi = oracle.ConditionedWave.from_wave(_wave(), conditioning=1.0)
    r = oracle.richardson_ratio(phi, 1.0, PhysConsts(alpha=0.5), Coupling.sc(),
                                lambda x: 0.5 * x * x, steps=16)
    assert 3.5 <= r <= 4.5
