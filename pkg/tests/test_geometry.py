import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from hardylab.flow import tangent_frame
from hardylab.geometry import (
    DefiningFunction,
    GeometryError,
    OutOfCollarError,
    ShiftedDomain,
    eval_geometry,
    from_spec,
    leray_levi_coefficients,
    leray_levi_density,
    min_levi_eigenvalue,
    to_real,
)
from hardylab.mesh import build_mesh

FAMILIES = [
    DefiningFunction("ball"),
    DefiningFunction("complex-ellipsoid", a=(2.0, 1.0)),
    DefiningFunction("real-ellipsoid", a=(1.0, 1.0), b=(0.5, 1.0)),
    DefiningFunction("perturbed-ball", eps=0.1),
]


def _sympy_rho(df):
    """rho as a sympy expression in real coordinates, built from the family formulas."""
    x1, y1, x2, y2 = sp.symbols("x1 y1 x2 y2", real=True)
    X, Y = (x1, x2), (y1, y2)
    if df.kind == "ball":
        rho = sum(X[j] ** 2 + Y[j] ** 2 for j in range(2)) - 1
    elif df.kind == "complex-ellipsoid":
        rho = sum((X[j] ** 2 + Y[j] ** 2) / sp.Rational(df.a[j]) ** 2 for j in range(2)) - 1
    elif df.kind == "real-ellipsoid":
        rho = sum(X[j] ** 2 / sp.nsimplify(df.a[j]) ** 2 + Y[j] ** 2 / sp.nsimplify(df.b[j]) ** 2 for j in range(2)) - 1
    else:
        rho = sum(X[j] ** 2 + Y[j] ** 2 for j in range(2)) + sp.nsimplify(df.eps) * (x1**2 - y1**2) - 1
    return rho, X, Y


def _wirtinger(expr, x, y, conj=False):
    return (sp.diff(expr, x) + (1 if conj else -1) * sp.I * sp.diff(expr, y)) / 2


@pytest.mark.parametrize("df", FAMILIES, ids=lambda d: d.kind)
def test_derivatives_match_symbolic_oracle(df):
    rho, X, Y = _sympy_rho(df)
    d = [_wirtinger(rho, X[j], Y[j]) for j in range(2)]
    H = [[_wirtinger(d[j], X[k], Y[k]) for k in range(2)] for j in range(2)]
    L = [[_wirtinger(d[j], X[k], Y[k], conj=True) for k in range(2)] for j in range(2)]
    f_rho = sp.lambdify((*X, *Y), rho)
    f_d = sp.lambdify((*X, *Y), d)
    rng = np.random.default_rng(0)
    for _ in range(5):
        z = rng.normal(size=2) + 1j * rng.normal(size=2)
        args = (z[0].real, z[1].real, z[0].imag, z[1].imag)
        np.testing.assert_allclose(df.rho(z), f_rho(*args), atol=1e-13)
        np.testing.assert_allclose(df.drho(z), np.array(f_d(*args), dtype=complex), atol=1e-13)
    np.testing.assert_allclose(df.hessian, np.array(H, dtype=complex), atol=1e-15)
    np.testing.assert_allclose(df.levi, np.array(L, dtype=complex), atol=1e-15)


def test_real_ellipsoid_example():
    df = DefiningFunction("real-ellipsoid", a=(1.0, 1.0), b=(0.5, 1.0))
    rec = eval_geometry(df, np.array([1.0, 0.0, 0.0, 0.0]))
    np.testing.assert_allclose(rec.rho, 0.0, atol=1e-15)
    np.testing.assert_allclose(rec.drho, [1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(rec.hessian[0, 0], -1.5)
    np.testing.assert_allclose(min_levi_eigenvalue(df, np.zeros((1, 4))), 1.0)


def test_ball_geometry_examples():
    df = DefiningFunction("ball")
    rec = eval_geometry(df, np.array([1.0, 0, 0, 0]))
    assert rec.rho == 0.0
    np.testing.assert_allclose(rec.drho, [1.0, 0.0])
    np.testing.assert_allclose(rec.levi, np.eye(2))
    centre = eval_geometry(df, np.zeros(4))
    assert centre.rho == -1.0
    np.testing.assert_allclose(centre.drho, [0.0, 0.0])
    with pytest.raises(OutOfCollarError):
        eval_geometry(df, np.array([2.0, 0, 0, 0]))


def test_min_levi_eigenvalue_examples():
    pts = np.random.default_rng(1).normal(size=(10, 4)) * 0.3
    assert min_levi_eigenvalue(DefiningFunction("ball"), pts) == 1.0
    np.testing.assert_allclose(min_levi_eigenvalue(DefiningFunction("complex-ellipsoid", a=(2.0, 1.0)), pts), 0.25)


def test_invalid_parameters():
    with pytest.raises(GeometryError):
        DefiningFunction("torus")
    with pytest.raises(GeometryError):
        DefiningFunction("perturbed-ball", eps=0.3)
    with pytest.raises(GeometryError):
        DefiningFunction("complex-ellipsoid", a=(1.0, -1.0))
    with pytest.raises(GeometryError):
        ShiftedDomain(DefiningFunction("perturbed-ball", eps=0.1), 0.2)
    assert from_spec({"kind": "perturbed-ball", "eps": 0.05}).beta[0] == 0.05


def test_shifted_domain_nesting():
    df = DefiningFunction("ball")
    w = build_mesh(df, (4, 8, 8)).nodes
    assert ShiftedDomain(df, 0.1).check_nesting(w)
    assert ShiftedDomain(df, -0.1).check_nesting(w)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 3), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_ray_hit_lands_on_boundary(k, a, b, c, d):
    theta = np.array([a + 1j * b, c + 1j * d])
    if np.linalg.norm(theta) < 1e-3:
        return
    df = FAMILIES[k]
    c0 = np.array([0.05, -0.02j])
    R = df.ray_hit(c0, theta[None, :])
    assert R[0] > 0
    np.testing.assert_allclose(df.rho(c0 + R[:, None] * theta), 0.0, atol=1e-13)


def _form_density(df, w):
    """(2 pi i)^-2 d rho ^ dbar d rho on an oriented orthonormal frame of bD, by 3x3 wedge determinants."""
    E = tangent_frame(df, w[None, :])[0]
    N = df.normal(w[None, :])[0]
    M = np.stack([to_real(v) for v in (N, *E)])
    if np.linalg.det(M) < 0:
        E = E.copy()
        E[0] = -E[0]
    d = df.drho(w)
    total = 0j
    for j in range(2):
        for k in range(2):
            for l in range(2):
                c = d[j] * df.levi[l, k]
                if c == 0:
                    continue
                rows = [[e[j] for e in E], [np.conj(e[k]) for e in E], [e[l] for e in E]]
                total += c * np.linalg.det(np.array(rows))
    return total / (2j * np.pi) ** 2


@pytest.mark.parametrize("df", FAMILIES, ids=lambda d: d.kind)
def test_leray_levi_density_matches_form_evaluation(df):
    mesh = build_mesh(df, (4, 8, 8))
    for i in range(0, mesh.N, 37):
        w = mesh.nodes[i]
        np.testing.assert_allclose(leray_levi_density(df, w[None, :])[0], _form_density(df, w).real, rtol=1e-12)
        np.testing.assert_allclose(_form_density(df, w).imag, 0.0, atol=1e-14)


def test_leray_levi_density_closed_values():
    ball = DefiningFunction("ball")
    mesh = build_mesh(ball, (4, 8, 8))
    np.testing.assert_allclose(leray_levi_density(ball, mesh.nodes), 1 / (2 * np.pi**2), rtol=1e-13)
    circle = DefiningFunction("ball", n=1)
    w = np.exp(1j * np.linspace(0, 6, 7))[:, None]
    np.testing.assert_allclose(leray_levi_density(circle, w), 1 / (2 * np.pi), rtol=1e-14)


def test_leray_levi_mass_on_complex_ellipsoid():
    # g(w, 0) = <d rho(w), w> = 1 on bD, so reproducing f = 1 at z = 0 gives total Leray-Levi mass 1
    df = DefiningFunction("complex-ellipsoid", a=(2.0, 1.0))
    mesh = build_mesh(df, (16, 32, 32))
    np.testing.assert_allclose(np.sum(leray_levi_density(df, mesh.nodes) * mesh.mu), 1.0, rtol=1e-10)


def test_leray_levi_coefficients_shape():
    df = FAMILIES[2]
    w = build_mesh(df, (4, 8, 8)).nodes
    assert leray_levi_coefficients(df, w).shape == w.shape
