import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hardylab.geometry import DefiningFunction
from hardylab.mesh import (
    BoundaryFunction,
    InvalidDensityError,
    MeshError,
    build_mesh,
    quasi_ball,
    weighted_measure,
)


def test_circle_mesh_is_uniform(circle_mesh):
    assert circle_mesh.N == 256
    np.testing.assert_allclose(np.abs(circle_mesh.nodes[:, 0]), 1.0, atol=1e-15)
    np.testing.assert_allclose(circle_mesh.mu, 2 * np.pi / 256)


def test_sphere_area_at_reference():
    mesh = build_mesh(DefiningFunction("ball"))
    assert mesh.resolution == (16, 32, 32)
    assert abs(mesh.area() - 2 * np.pi**2) / (2 * np.pi**2) < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 6), st.integers(0, 6))
def test_sphere_moments_exact(a, b):
    # int_{S^3} |z1|^2a |z2|^2b dsigma = 2 pi^2 a! b! / (a + b + 1)!
    mesh = build_mesh(DefiningFunction("ball"), (8, 16, 16))
    z = mesh.nodes
    val = np.sum(np.abs(z[:, 0]) ** (2 * a) * np.abs(z[:, 1]) ** (2 * b) * mesh.mu)
    exact = 2 * np.pi**2 * math.factorial(a) * math.factorial(b) / math.factorial(a + b + 1)
    np.testing.assert_allclose(val, exact, rtol=1e-12)


def test_ellipsoid_area_converges():
    df = DefiningFunction("complex-ellipsoid", a=(2.0, 1.0))
    ref = build_mesh(df).area()
    fine = build_mesh(df, (32, 64, 64)).area()
    assert abs(ref - fine) / fine < 1e-6


def test_nodes_on_boundary():
    for df in (DefiningFunction("perturbed-ball", eps=0.1), DefiningFunction("real-ellipsoid", a=(1.0, 1.0), b=(0.5, 1.0))):
        mesh = build_mesh(df, (8, 16, 16))
        assert np.max(np.abs(df.rho(mesh.nodes))) < 1e-13
        assert np.all(mesh.mu > 0)


def test_resolution_errors():
    with pytest.raises(MeshError):
        build_mesh(DefiningFunction("ball"), (8, 4, 16))
    with pytest.raises(MeshError):
        build_mesh(DefiningFunction("ball"), (8, 16))


def test_weighted_measures(ball_mesh, perturbed_mesh):
    np.testing.assert_array_equal(weighted_measure(ball_mesh, "lebesgue"), ball_mesh.mu)
    r = weighted_measure(ball_mesh, "leray-levi") / ball_mesh.mu
    np.testing.assert_allclose(r, 1 / (2 * np.pi**2), rtol=1e-13)
    r = weighted_measure(perturbed_mesh, "leray-levi") / perturbed_mesh.mu
    assert r.min() > 0 and r.max() - r.min() > 1e-3
    with pytest.raises(InvalidDensityError):
        weighted_measure(ball_mesh, lambda w: w[:, 0].real)


def test_leray_levi_constant_matches_reproducing_constant(ball_op):
    # on the ball C(w, 0) is the density against dsigma and reproduces f = 1 at the centre
    from hardylab.kernels import kernel_density

    k = kernel_density(ball_op.spec, ball_op.mesh.nodes, np.zeros(2))
    np.testing.assert_allclose(weighted_measure(ball_op.mesh, "leray-levi") / ball_op.mesh.mu, k.real, rtol=1e-13)


def test_quasi_ball_examples():
    mesh = build_mesh(DefiningFunction("ball"), (4, 8, 8))
    z = int(np.argmin(np.abs(mesh.nodes[:, 0] - 1)))        # node nearest to (1, 0)
    assert quasi_ball(mesh, z, 10.0).size == mesh.N
    assert quasi_ball(mesh, z, 0.0).size == 0
    # on the ball delta(w, z) = |1 - <w, zbar>|^(1/2)
    delta = np.sqrt(np.abs(1 - mesh.nodes @ np.conj(mesh.nodes[z])))
    for r in (0.3, 0.7, 1.0):
        np.testing.assert_array_equal(quasi_ball(mesh, z, r), np.flatnonzero(delta < r))


def test_boundary_function_roundtrip(tmp_path, ball_mesh):
    f = BoundaryFunction.from_callable(ball_mesh, lambda z: z[..., 0] * z[..., 1])
    p = tmp_path / "f.csv"
    idx = np.arange(ball_mesh.N)[::-1]
    rows = np.column_stack([idx, f.values.real[idx], f.values.imag[idx]])
    np.savetxt(p, rows, delimiter=",", header="i,re,im", comments="")
    g = BoundaryFunction.from_csv(ball_mesh, p)
    np.testing.assert_array_equal(g.values, f.values)
    with pytest.raises(ValueError):
        BoundaryFunction(ball_mesh, np.full(ball_mesh.N, np.nan))
    np.testing.assert_allclose(BoundaryFunction.from_callable(ball_mesh, lambda z: z[..., 0]).lp_norm(2), np.pi, rtol=1e-12)
