import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thinend.errors import ConventionError, MediumError, SolverError, SweepError
from thinend.fields import plane_wave
from thinend.scattering import (LSOperator, MediumGrid, born_disk_far_field, boundedness_check,
                                compare_far_fields, far_field, l2_ratio_on_ball,
                                optical_theorem_defect, phi_kernel_3d, point_source, radiated_check,
                                self_cell, solve_ls, thin_rectangle_medium, visibility_sweep,
                                write_medium_csv)


def disk(contrast, R=0.3):
    return lambda x, y: np.where(x * x + y * y < R * R, 1 + contrast, 1.0)


def disk_medium(contrast, n=64, k=2.0, R=0.3, half=0.5):
    return MediumGrid.from_function(disk(contrast, R), k, half, n, subsample=8)


def unit_dir(t):
    return np.array([math.cos(t), math.sin(t)])


def test_zero_contrast_short_circuit():
    med = MediumGrid.from_function(lambda x, y: np.ones_like(x), 2.0, 0.5, 32)
    sol = solve_ls(med)
    assert np.array_equal(sol.w, sol.incident) and sol.iterations == 0
    ff = far_field(med, sol, 64)
    assert np.all(ff.values == 0) and ff.l2_norm == 0
    assert l2_ratio_on_ball(sol, 0.5) == 1.0


def test_medium_validation():
    q = np.ones((8, 8), complex)
    q[3, 3] = -1
    with pytest.raises(MediumError):
        MediumGrid((0, 0), 0.1, 8, 8, q, 1.0)
    q[3, 3] = 2 - 0.1j
    with pytest.raises(MediumError):
        MediumGrid((0, 0), 0.1, 8, 8, q, 1.0)
    q[3, 3] = 1
    q[0, 4] = 2
    with pytest.raises(MediumError):
        MediumGrid((0, 0), 0.1, 8, 8, q, 1.0)
    with pytest.raises(MediumError):
        MediumGrid((0, 0), 0.1, 8, 8, np.ones((8, 7)), 1.0)
    med = disk_medium(0.5, 32)
    assert 0.3 <= med.radius <= 0.3 + 2 * med.h


def test_self_cell_small_argument():
    # k^2 ∫_disk Φ → a^2 k^2 / 2 (i π/4 ... ) ~ (k a)^2 (log) → 0 as a → 0
    assert abs(self_cell(2.0, 1e-6)) < 1e-10
    a = 0.01 / math.sqrt(math.pi)
    from scipy import integrate
    from scipy.special import hankel1
    # radial quadrature of 2π r Φ(k r) over the equivalent disk
    re = integrate.quad(lambda r: 2 * math.pi * r * (0.25j * hankel1(0, 2.0 * r)).real, 0, a, limit=200, epsabs=1e-18, epsrel=1e-13)[0]
    im = integrate.quad(lambda r: 2 * math.pi * r * (0.25j * hankel1(0, 2.0 * r)).imag, 0, a, limit=200, epsabs=1e-18, epsrel=1e-13)[0]
    assert self_cell(2.0, 0.01) == pytest.approx(4.0 * (re + 1j * im), rel=1e-8)


@settings(max_examples=15)
@given(n=st.integers(3, 12), k=st.floats(0.5, 8.0), seed=st.integers(0, 1000))
def test_fft_matches_direct_summation(n, k, seed):
    q = np.ones((n, n), complex)
    q[1:-1, 1:-1] = 1.5
    med = MediumGrid((0.0, 0.0), 0.05, n, n, q, k)
    op = LSOperator(med)
    rng = np.random.default_rng(seed)
    s = rng.standard_normal(n * n) + 1j * rng.standard_normal(n * n)
    a, b = op.convolve(s), op.convolve_direct(s)
    assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, np.max(np.abs(b)))


def test_born_agreement_small_contrast():
    med = disk_medium(0.01)
    sol = solve_ls(med)
    op = LSOperator(med)
    wb = sol.incident + op.convolve((med.q.ravel() - 1) * sol.incident)
    assert np.linalg.norm(sol.w - wb) / np.linalg.norm(sol.incident) < 1e-3
    assert sol.residual < 1e-8


def test_born_disk_far_field():
    med = disk_medium(0.01)
    ff = far_field(med, solve_ls(med), 64)
    an = born_disk_far_field(2.0, 0.3, 0.01, ff.theta)
    assert np.linalg.norm(ff.values - an) / np.linalg.norm(an) < 0.01


def test_grid_self_convergence():
    norms = []
    for n in (64, 128):
        med = disk_medium(0.5, n)
        norms.append(np.sqrt(np.sum(np.abs(solve_ls(med).w) ** 2)) * med.h)
    assert abs(norms[1] - norms[0]) / norms[1] < 0.02


def test_radiated_field_matches_far_field():
    med = disk_medium(0.5)
    sol = solve_ls(med)
    th = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    e1 = radiated_check(sol, th, 50 / 2.0)
    e2 = radiated_check(sol, th, 100 / 2.0)
    # w^s sqrt(r) - w_inf = O(1/r): doubling r halves the defect
    assert e1 < 2 / 50 and e2 < e1 * 0.6


def test_symmetric_scatterer_symmetric_far_field():
    def q(x, y):
        return np.where((np.abs(x) < 0.3) & (np.abs(y) < 0.1 + 0.2 * (x > 0) * np.abs(x)), 1.7, 1.0)
    med = MediumGrid.from_function(q, 2.0, 0.5, 64)
    ff = far_field(med, solve_ls(med, direction=(1.0, 0.0)), 64)
    mirror = ff.values[(-np.arange(64)) % 64]
    assert np.max(np.abs(np.abs(ff.values) - np.abs(mirror))) < 1e-8


def test_reciprocity_eight_pairs():
    med = MediumGrid.from_function(lambda x, y: np.where((x - 0.1) ** 2 + 2 * y * y < 0.09, 1.8, 1.0),
                                   2.0, 0.5, 64, subsample=4)
    rng = np.random.default_rng(42)
    for a, b in rng.uniform(0, 2 * np.pi, (8, 2)):
        f1 = far_field(med, solve_ls(med, direction=unit_dir(a)), theta=np.array([b])).values[0]
        f2 = far_field(med, solve_ls(med, direction=-unit_dir(b)), theta=np.array([a + np.pi])).values[0]
        assert abs(f1 - f2) / abs(f1) < 1e-6


def test_optical_theorem():
    assert optical_theorem_defect(disk_medium(0.5, 96), (0.6, 0.8)) < 0.01


def test_point_source_incidence():
    ps = point_source(2.0, (3.0, 0.0))
    med = disk_medium(0.5)
    sol = solve_ls(med, ps)
    assert np.all(np.isfinite(sol.w)) and sol.residual < 1e-8
    with pytest.raises(MediumError):
        solve_ls(med, point_source(2.0, (0.0, 0.0) + med.centers[med.q.ravel() != 1][0]))


def test_solver_error_on_iteration_cap():
    with pytest.raises(SolverError):
        solve_ls(disk_medium(3.0, 32, k=6.0), maxiter=1, restart=2)


def test_visibility_sweep():
    rec = visibility_sweep([0.2, 0.1, 0.05, 0.025], q0=2.0, k=2.0)
    assert all(y > 0 for y in rec.y) and rec.extra["visible"]
    assert rec.extra["spread"] < 3


def test_visibility_vanishes_with_contrast():
    norms = [visibility_sweep([0.1], q0=q0, k=2.0, n=64).y[0] for q0 in (1.1, 1.01, 1.001)]
    assert norms[0] > norms[1] > norms[2] and norms[2] < 0.02 * norms[0]


def test_boundedness_flat_and_bounded():
    eps = [0.2, 0.1, 0.05, 0.025]
    rec = boundedness_check(eps, q0=2.0, k=2.0)
    assert abs(rec.tau_hat) <= 0.1
    assert min(rec.y) >= 0.8 and max(rec.y) <= rec.extra["C_fit"]
    rec2 = boundedness_check(eps, q0=2.0, k=4.0)
    assert abs(rec2.tau_hat) <= 0.1
    with pytest.raises(SweepError):
        boundedness_check([0.1, 0.05, 0.025])


def test_compare_far_fields():
    k, n = 2.0, 64
    base = disk(1.0)
    med_a = MediumGrid.from_function(base, k, 0.7, n, subsample=4)
    ff_a = far_field(med_a, solve_ls(med_a), 64)
    assert compare_far_fields(ff_a, ff_a) == 0

    def noop(x, y):
        far = x * x + y * y > 0.5
        return np.where(far, 1.0, base(x, y))
    med_c = MediumGrid.from_function(noop, k, 0.7, n, subsample=4)
    assert compare_far_fields(ff_a, far_field(med_c, solve_ls(med_c), 64)) == 0

    def with_end(x, y):
        return np.where((x > 0) & (x < 0.6) & (np.abs(y) < 0.05), 2.0, base(x, y))
    med_b = MediumGrid.from_function(with_end, k, 0.7, n, subsample=4)
    assert compare_far_fields(ff_a, far_field(med_b, solve_ls(med_b), 64)) > 1e-3


def test_compare_convention_errors():
    med = disk_medium(0.5, 32)
    sol = solve_ls(med)
    a = far_field(med, sol, 64)
    b = far_field(med, sol, 64)
    b.convention = "c2=1"
    with pytest.raises(ConventionError):
        compare_far_fields(a, b)
    with pytest.raises(ConventionError):
        compare_far_fields(a, far_field(med, sol, 32))
    with pytest.raises(ValueError):
        far_field(med, sol, 16)


def test_csv_dumps():
    med = disk_medium(0.5, 16)
    buf = io.StringIO()
    far_field(med, solve_ls(med), 32).write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "theta,re,im" and len(lines) == 33
    buf = io.StringIO()
    write_medium_csv(med, buf)
    assert buf.getvalue().startswith("origin_x origin_y h nx ny k\n")


def test_kernel_3d():
    assert phi_kernel_3d(1.0, 1.0) == pytest.approx(np.exp(1j) / (4 * np.pi))


def test_thin_rectangle_partial_volume():
    med = thin_rectangle_medium(0.01, 2.0, 2.0, n=64)
    area = np.sum(med.q.real - 1) * med.h**2
    assert area == pytest.approx(0.01 * 1.0, rel=1e-12)
