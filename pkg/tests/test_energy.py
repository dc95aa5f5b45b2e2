import numpy as np
import pytest

from qnldiff.dynamics import TimeStepper, run, sample
from qnldiff.energy import (discrete_energy, energy_delta, energy_gr,
                            energy_qnl, first_variation_oracle,
                            quadratic_form)
from qnldiff.grid import GridField, build_grid
from qnldiff.kernels import get_kernel
from qnldiff.operators import apply, assemble_nonlocal, assemble_qnl


def hump(x):
    return np.where(np.abs(x) <= 1, x * x * (1 - x * x), 0.0)


def smooth_bump(x):
    return np.where(np.abs(x) < 1, (1 - x**2) ** 3 * np.sin(3 * x), 0.0)


def qnl_operator(n_half=50, r1=6, r2=2):
    g = build_grid(n_half, r1, r2)
    base = get_kernel("2-over-s")
    return g, assemble_qnl(g, base.scaled(g.delta1), base.scaled(g.delta2))


def test_energy_of_zero_is_zero():
    for fn in (energy_delta, ):
        assert fn(lambda x: np.zeros_like(x), 0.12, cells=64).value == 0.0
    assert energy_gr(lambda x: np.zeros_like(x), 0.12, 3, cells=64).value == 0.0
    assert energy_qnl(lambda x: np.zeros_like(x), 0.12, 3, cells=64).value == 0.0


def test_energy_quadratic_scaling():
    base = energy_delta(hump, 0.12, cells=128).value
    scaled = energy_delta(lambda x: 3.0 * hump(x), 0.12, cells=128).value
    assert scaled == pytest.approx(9.0 * base, rel=1e-12)


def test_energy_matches_discrete_form_on_benchmark_hump():
    g, _ = qnl_operator(50, 6, 2)
    op1 = assemble_nonlocal(g, 6, get_kernel("2-over-s").scaled(g.delta1))
    u = sample(hump, g).constrained()
    e_disc = discrete_energy(u, op1)
    e_cont = energy_delta(hump, 0.12, cells=512)
    assert e_disc == pytest.approx(e_cont.value, rel=0.02)


@pytest.mark.parametrize("M", [2, 3, 5])
def test_reconstruction_energy_equivalence(M):
    delta1 = 0.1 * M
    for u in (smooth_bump, lambda x: np.where(np.abs(x) < 1, (1 - x**2) ** 3, 0.0)):
        gr = energy_gr(u, delta1, M, cells=128)
        d2 = energy_delta(u, delta1 / M, cells=128)
        tol = max(1e-8, 3 * (gr.error_estimate + d2.error_estimate))
        assert abs(gr.value - d2.value) <= tol


def test_reconstruction_with_m1_is_plain_energy():
    gr = energy_gr(smooth_bump, 0.1, 1, cells=96)
    d1 = energy_delta(smooth_bump, 0.1, cells=96)
    assert gr.value == pytest.approx(d1.value, rel=1e-12)


def test_qnl_energy_left_supported_equals_wide():
    def u(x):
        return np.where((x > -0.9) & (x < -0.3), np.sin(np.pi * (x + 0.6) / 0.3) ** 3, 0.0)

    eq = energy_qnl(u, 0.12, 3, cells=128)
    e1 = energy_delta(u, 0.12, cells=128)
    assert eq.value == pytest.approx(e1.value, rel=1e-10)


def test_qnl_energy_right_supported_equals_narrow():
    def u(x):
        return np.where((x > 0.3) & (x < 0.9), np.sin(np.pi * (x - 0.3) / 0.6) ** 3, 0.0)

    eq = energy_qnl(u, 0.12, 3, cells=192)
    e2 = energy_delta(u, 0.04, cells=192)
    tol = max(1e-8, 3 * (eq.error_estimate + e2.error_estimate))
    assert abs(eq.value - e2.value) <= tol


def test_qnl_energy_dominates_wide_horizon():
    rng = np.random.default_rng(17)
    for _ in range(5):
        a, b, c = rng.uniform(0.5, 2), rng.uniform(1, 6), rng.uniform(0, np.pi)

        def u(x, a=a, b=b, c=c):
            return np.where(np.abs(x) < 1,
                            a * (1 - x**2) ** 3 * np.sin(b * x + c), 0.0)

        eq = energy_qnl(u, 0.12, 3, cells=128)
        e1 = energy_delta(u, 0.12, cells=128)
        slack = 3 * (eq.error_estimate + e1.error_estimate) + 1e-12
        assert eq.value >= e1.value - slack


def test_discrete_energy_zero_and_scaling():
    g, op = qnl_operator(20, 4, 2)
    assert discrete_energy(GridField.zeros(g), op) == 0.0
    u = sample(hump, g).constrained()
    e1 = discrete_energy(u, op)
    u2 = GridField(g, 2.5 * u.values)
    assert discrete_energy(u2, op) == pytest.approx(2.5**2 * e1, rel=1e-13)


def test_discrete_dominance_random_fields():
    g, op = qnl_operator(50, 6, 2)
    wide = assemble_nonlocal(g, 6, get_kernel("2-over-s").scaled(g.delta1))
    rng = np.random.default_rng(23)
    for _ in range(100):
        v = rng.standard_normal(g.n_nodes)
        v[g.constrained_mask()] = 0.0
        assert quadratic_form(v, op) >= quadratic_form(v, wide) - 1e-10


def test_first_variation_matches_operator():
    g, op = qnl_operator(50, 6, 2)
    rng = np.random.default_rng(4)
    u = GridField(g, np.sin(2.1 * g.coords())
                  + 0.2 * rng.standard_normal(g.n_nodes)).constrained()
    oracle = first_variation_oracle(u, op, eps=1e-5).values[g.interior]
    direct = apply(op, u).values[g.interior]
    assert np.abs(oracle - direct).max() <= 1e-6 * np.abs(direct).max() + 1e-8


def test_first_variation_zero_and_affine():
    g, op = qnl_operator(20, 4, 2)
    zero = first_variation_oracle(GridField.zeros(g), op)
    assert np.abs(zero.values).max() <= 1e-9
    aff = GridField(g, 0.7 * g.coords() + 0.1)
    orc = first_variation_oracle(aff, op).values[g.interior]
    # affine consistency up to the finite-difference round-off floor
    assert np.abs(orc).max() <= 1e-4


def test_first_variation_eps_range():
    g, op = qnl_operator(20, 4, 2)
    with pytest.raises(ValueError):
        first_variation_oracle(GridField.zeros(g), op, eps=1e-2)


def test_energy_decay_along_source_free_run():
    g, op = qnl_operator(30, 6, 2)
    u0 = sample(lambda x: np.sin(np.pi * x) * (1 - x * x), g).constrained()
    energies = []
    run(u0, TimeStepper(op=op, t_final=0.03),
        observer=lambda u, t, k: energies.append(discrete_energy(u, op)))
    diffs = np.diff(energies)
    assert diffs.max() <= 0.0


def test_quad_cells_validation():
    with pytest.raises(ValueError):
        energy_delta(hump, 0.12, cells=8)
