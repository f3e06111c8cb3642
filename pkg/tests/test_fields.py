import io
import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from thinend.errors import DomainError, TagError
from thinend.fields import (X1, X2, CoefficientSet, NodalField, SymbolicField, bottom_offset,
                            c1_alpha_estimate, cauchy_trace, constant, coordinate,
                            holder_norm_estimate, liouville_transform, make_tbc_partner,
                            make_zero_cauchy_family, plane_wave, top_offset, write_field_csv,
                            write_trace_csv)
from thinend.geometry import mesh_rectangle, mesh_subregion
from thinend.identity import check_tbc

from conftest import make_setup

ALPHA1 = 5 / 6


def zero_cauchy(eps, amp=0.0, order=2, h_ratio=8):
    end, sub, mesh = make_setup(eps, amp, h_ratio)
    se = sub.shifted_end()
    return make_zero_cauchy_family(se, eps, ALPHA1, order=order), sub, mesh


def test_plane_wave_examples(rng):
    v = plane_wave(1.0, (1.0, 0.0))
    assert complex(v.value([[math.pi, 0.0]])[0]) == pytest.approx(-1 + 0j, abs=1e-15)
    w = plane_wave(2.5, (0.6, 0.8))
    x = rng.uniform(-1, 1, (50, 2))
    assert np.allclose(np.abs(w.value(x)), 1.0)
    h = 1e-3
    lap = sum(w.value(x + e) + w.value(x - e) for e in (np.array([h, 0]), np.array([0, h])))
    lap = (lap - 4 * w.value(x)) / h**2
    assert np.max(np.abs(lap + 2.5**2 * w.value(x))) / 2.5**2 < 1e-6
    assert np.allclose(w.gradient(x), 2.5j * np.outer(w.value(x), [0.6, 0.8]))
    with pytest.raises(DomainError):
        plane_wave(0.0, (1, 0))


def test_offsets_vanish_on_graphs():
    _, sub, mesh = make_setup(0.1, amp=0.5)
    se = sub.shifted_end()
    t = np.linspace(sub.x_lo, sub.x_hi, 9)
    top = np.column_stack([t, sub.g(t)])
    assert np.allclose(top_offset(se).value(top), 0, atol=1e-15)
    assert np.allclose(bottom_offset(se).value(top - [0, 0.1]), 0, atol=1e-15)


@pytest.mark.parametrize("eps", [0.2, 0.1, 0.05])
def test_zero_cauchy_flat_sup(eps):
    w, sub, _ = zero_cauchy(eps)
    # 1D oracle: max over t of 4 eps^(a-3) (t (eps - t))^2 on a fine grid
    t = np.linspace(0, eps, 100001)
    oracle = np.max(4 * eps ** (ALPHA1 - 3) * (t * (eps - t)) ** 2)
    x1 = 0.5 * (sub.x_lo + sub.x_hi)
    vals = np.abs(w.value(np.column_stack([np.full_like(t, x1), -t])))
    assert vals.max() == pytest.approx(oracle, rel=1e-9)
    assert oracle == pytest.approx(eps ** (1 + ALPHA1) / 4, rel=1e-9)
    assert abs(w.value([[x1, -eps / 2]])[0]) == pytest.approx(eps ** (1 + ALPHA1) / 4, rel=1e-12)


@pytest.mark.parametrize("amp", [0.0, 0.5])
def test_zero_cauchy_traces_vanish(amp):
    w, sub, mesh = zero_cauchy(0.1, amp)
    for tag in ("Γ3", "Γ4"):
        tr = cauchy_trace(w, tag, mesh)
        assert np.max(np.abs(tr.dirichlet)) <= 1e-10
        assert np.max(np.abs(tr.neumann)) <= 1e-10


def test_first_order_family_has_zero_trace_only():
    w, sub, mesh = zero_cauchy(0.1, 0.5, order=1)
    tr = cauchy_trace(w, "Γ3", mesh)
    assert np.max(np.abs(tr.dirichlet)) <= 1e-12
    # d+ d- has a nonzero normal derivative on the graphs
    assert np.max(np.abs(tr.neumann)) > 1e-3


def test_zero_cauchy_rates_and_uniformity():
    eps_list = [0.2, 0.1, 0.05, 0.025]
    from thinend.estimates import fit_decay_exponent
    sups, grads, c1 = [], [], []
    for eps in eps_list:
        w, sub, mesh = zero_cauchy(eps, 0.5)
        p = mesh.nodes
        sups.append(np.max(np.abs(w.value(p))))
        grads.append(np.max(np.linalg.norm(w.gradient(p), axis=1)))
        c1.append(c1_alpha_estimate(w, ALPHA1, 10_000, 42, mesh))
    fs, fg = fit_decay_exponent(eps_list, sups), fit_decay_exponent(eps_list, grads)
    assert fs.tau_hat >= 1 + ALPHA1 - 0.05 and fs.r2 >= 0.999
    assert fg.tau_hat >= ALPHA1 - 0.05 and fg.r2 >= 0.999
    assert max(c1) / min(c1) < 1.2


def test_holder_examples():
    mesh = mesh_rectangle(0, 1, 0, 0.1, 0.025)
    assert holder_norm_estimate(constant(3.0), 0.5, 1000, 42, mesh).seminorm == 0
    assert holder_norm_estimate(coordinate(0), 1.0, 10_000, 42, mesh).seminorm == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(DomainError):
        holder_norm_estimate(constant(1.0), 0.0, 10, 42, mesh)
    with pytest.raises(DomainError):
        holder_norm_estimate(constant(1.0), 0.5, 0, 42, mesh)


def test_holder_sqrt_profile_approaches_one():
    mesh = mesh_rectangle(0, 1, 0, 0.1, 0.025)
    f = SymbolicField(sp.sqrt(X2 + sp.Rational(1, 10**12)))
    est = [holder_norm_estimate(f, 0.5, n, 42, mesh).seminorm for n in (100, 1000, 10_000, 100_000)]
    assert all(a <= b for a, b in zip(est, est[1:]))
    assert 0.98 < est[-1] <= 1 + 1e-12


def test_holder_deterministic():
    _, sub, mesh = make_setup(0.1, 0.5)
    f = plane_wave(3.0, (0.6, 0.8))
    a = holder_norm_estimate(f, 0.5, 500, 7, mesh)
    b = holder_norm_estimate(f, 0.5, 500, 7, mesh)
    assert a == b


@given(n=st.integers(1, 2000), extra=st.integers(0, 2000), seed=st.integers(0, 2**31))
def test_holder_nested_monotone(n, extra, seed):
    mesh = mesh_rectangle(0, 1, 0, 0.1, 0.025)
    f = SymbolicField(sp.sin(7 * X1) * sp.exp(X2) + sp.sqrt(X2 + 1))
    a = holder_norm_estimate(f, 0.7, n, seed, mesh).seminorm
    b = holder_norm_estimate(f, 0.7, n + extra, seed, mesh).seminorm
    assert 0 <= a <= b


def test_plane_wave_trace_on_flat_top():
    _, sub, mesh = make_setup(0.1)
    v = plane_wave(2.0, (0.6, 0.8))
    tr = cauchy_trace(v, "Γ3", mesh)
    assert np.allclose(tr.normals, [0, 1])
    assert np.allclose(tr.neumann, 2.0j * 0.8 * tr.dirichlet, atol=1e-14)
    assert np.all(np.diff(tr.s) > 0)
    with pytest.raises(TagError):
        cauchy_trace(v, "Γ7", mesh)


def test_nodal_trace_convergence():
    f = SymbolicField(sp.exp(X1) * sp.cos(3 * X2))
    errs_d, errs_n = [], []
    hs = [0.05, 0.025, 0.0125]
    for h in hs:
        mesh = mesh_rectangle(0, 1, 0, 0.2, h)
        nf = NodalField.from_field(f, mesh)
        a, b = cauchy_trace(f, "Γ3", mesh), cauchy_trace(nf, "Γ3", mesh)
        errs_d.append(np.max(np.abs(a.dirichlet - b.dirichlet)))
        errs_n.append(np.max(np.abs(a.neumann - b.neumann)))
    od = [math.log2(errs_d[i] / errs_d[i + 1]) for i in range(2)]
    on = [math.log2(errs_n[i] / errs_n[i + 1]) for i in range(2)]
    assert min(od) > 1.8
    assert min(on) > 0.9


def test_nodal_analytic_mismatch_rejected():
    mesh = mesh_rectangle(0, 1, 0, 0.2, 0.05)
    f = coordinate(0)
    with pytest.raises(DomainError):
        NodalField(mesh, f.value(mesh.nodes) + 1e-6, analytic=f)
    with pytest.raises(DomainError):
        NodalField(mesh, np.zeros(3))


def test_liouville_trivial_cases():
    u = plane_wave(1.0, (1, 0))
    v = plane_wave(1.0, (0, 1))
    one = constant(1)
    lt = liouville_transform(u, v, CoefficientSet(one, one))
    pts = np.random.default_rng(1).uniform(0, 1, (20, 2))
    assert np.allclose(lt.w_t.value(pts), u.value(pts) - v.value(pts))
    assert np.allclose(lt.A.value(pts), 0) and np.allclose(lt.B.value(pts), 0)
    c = constant(2.5)
    lt = liouville_transform(u, v, CoefficientSet(c, c))
    assert np.allclose(lt.u_t.value(pts), math.sqrt(2.5) * u.value(pts))
    assert np.allclose(lt.A.value(pts), 0)
    with pytest.raises(DomainError):
        liouville_transform(u, v, CoefficientSet(constant(-1), one))


def test_liouville_exponential_coefficient():
    h = SymbolicField(sp.exp(X1))
    lt = liouville_transform(constant(1), constant(1), CoefficientSet(h, h))
    pts = np.random.default_rng(2).uniform(-1, 1, (20, 2))
    assert np.allclose(lt.B.value(pts), -0.25, atol=1e-14)


@pytest.mark.parametrize("eps", [0.1, 0.05])
def test_liouville_boundary_identity_with_tbc(eps):
    _, sub, mesh = make_setup(eps, 0.5)
    se = sub.shifted_end()
    v = plane_wave(1.0, (0.6, 0.8))
    h1 = constant(1)
    h2 = 1 + eps**2 * SymbolicField(1 + sp.sin(3 * X1 + X2) / 2)
    u = make_tbc_partner(se, v, h1, h2)
    cs = CoefficientSet(h1, h2)
    check_tbc(u, v, cs, mesh)
    lt = liouville_transform(u, v, cs)
    bp, nu, _, _ = mesh.boundary_quadrature(["Γ3", "Γ4"])
    a, b = h1.value(bp), h2.value(bp)
    closed = (a - b) / (np.sqrt(a) * np.sqrt(b) + b) * lt.v_t.value(bp)
    assert np.max(np.abs(lt.w_t.value(bp) - closed)) < 1e-9


def test_csv_dumps():
    mesh = mesh_rectangle(0, 1, 0, 0.2, 0.1)
    buf = io.StringIO()
    write_field_csv(plane_wave(1.0, (1, 0)), mesh, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "x,y,re,im" and len(lines) == mesh.n_nodes + 1
    buf = io.StringIO()
    write_trace_csv(cauchy_trace(plane_wave(1.0, (1, 0)), "Γ3", mesh), buf)
    assert buf.getvalue().startswith("s,re_d,im_d,re_n,im_n\n")


def test_fields_pickle_without_compiled_functions():
    import pickle
    w, sub, mesh = zero_cauchy(0.1, 0.5)
    w.value(mesh.nodes[:3])
    back = pickle.loads(pickle.dumps(w))
    assert np.allclose(back.value(mesh.nodes[:3]), w.value(mesh.nodes[:3]))
