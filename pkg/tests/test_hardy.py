import csv

import numpy as np
import pytest

from hardylab.geometry import DefiningFunction
from hardylab.hardy import (
    ConeParams,
    ConfigurationError,
    density_experiment,
    exhaustion_norm,
    exhaustion_table,
    holder_seminorm,
    nontangential_max,
    norm_equivalence_report,
    target_slice,
)
from hardylab.mesh import BoundaryFunction, build_mesh
from hardylab.quadrature import RuleParams
from hardylab.transforms import CauchyOperator

ONE = lambda z: np.ones(z.shape[:-1], dtype=complex)
Z1 = lambda z: z[..., 0]
T_GRID = [0.01, 0.02, 0.05]


def test_cone_parameters():
    with pytest.raises(ConfigurationError):
        ConeParams(beta=0.5)
    with pytest.raises(ConfigurationError):
        ConeParams(beta=1.0)
    with pytest.raises(ConfigurationError):
        ConeParams(r_min=0.6)


def test_cone_samples_lie_in_the_cone(perturbed_mesh):
    from hardylab.transforms import boundary_distance

    cones = ConeParams(beta=2.0)
    pts, mask = cones.sample(perturbed_mesh)
    assert np.all(mask.any(axis=1))
    inside = pts[mask]
    w = np.broadcast_to(perturbed_mesh.nodes[:, None, :], pts.shape)[mask]
    assert np.all(perturbed_mesh.df.rho(inside) < 0)
    # |z - w| recomputed from coordinates of size 1 carries ~1e-16 absolute rounding; the ray with
    # cos(theta) = 1/2 runs along the edge of the aperture-2 cone
    assert np.all(np.linalg.norm(inside - w, axis=-1) < 2.0 * boundary_distance(perturbed_mesh.df, inside) + 1e-15)
    assert np.sum(mask) < mask.size


def test_nontangential_max_examples(ball_mesh):
    NF = nontangential_max(ONE, ConeParams(), ball_mesh)
    np.testing.assert_allclose(NF.values, 1.0, rtol=0, atol=0)
    # |z1| is plurisubharmonic, its trace is dominated by the cone maximum up to the innermost sample
    NZ = nontangential_max(Z1, ConeParams(), ball_mesh).values.real
    assert np.all(NZ >= np.abs(ball_mesh.nodes[:, 0]) - 1e-9)
    assert np.all(NZ <= np.abs(ball_mesh.nodes[:, 0]) + 0.5 + 1e-12)


def test_nontangential_max_is_monotone_in_aperture(perturbed_mesh):
    F = lambda z: 1 / (z[..., 0] - 1.2)
    N = [nontangential_max(F, ConeParams(beta=b), perturbed_mesh).values.real for b in (1.5, 2.0, 4.0)]
    assert np.all(N[1] >= N[0] - 1e-12) and np.all(N[2] >= N[1] - 1e-12)


def test_exhaustion_examples(ball_mesh):
    # bD_t of the ball is the sphere of radius (1 - t)^(1/2), of area 2 pi^2 (1 - t)^(3/2)
    rows = exhaustion_table(ONE, 2.0, T_GRID, ball_mesh)
    for t, v in rows:
        np.testing.assert_allclose(v, np.sqrt(2 * np.pi**2 * (1 - t) ** 1.5), rtol=1e-10)
    np.testing.assert_allclose(exhaustion_norm(ONE, 2.0, T_GRID, ball_mesh), rows[0][1])
    assert exhaustion_norm(lambda z: 0 * z[..., 0], 2.0, T_GRID, ball_mesh) == 0.0
    # int_{|z| = r} |z1|^2 dsigma = pi^2 r^5
    for t, v in exhaustion_table(Z1, 2.0, T_GRID, ball_mesh):
        np.testing.assert_allclose(v, np.pi * (1 - t) ** 1.25, rtol=1e-10)
    with pytest.raises(ConfigurationError):
        exhaustion_table(ONE, 2.0, [-0.01], ball_mesh)
    with pytest.raises(ConfigurationError):
        exhaustion_table(ONE, 2.0, [0.3], ball_mesh)


@pytest.mark.parametrize("F", [ONE, Z1, lambda z: 1 / (z[..., 0] - 1.1)], ids=["one", "z1", "pole"])
def test_norm_equivalence_report(perturbed_mesh, F):
    rep = norm_equivalence_report(F, 2.0, perturbed_mesh, ConeParams(), T_GRID)
    assert rep.band <= 10
    assert rep.pointwise_excess <= 1e-8
    assert rep.maximal >= rep.trace - 1e-8


def test_report_ratio_for_z1_on_ball(ball_mesh):
    rep = norm_equivalence_report(Z1, 2.0, ball_mesh, ConeParams(), T_GRID)
    np.testing.assert_allclose(rep.trace, np.pi, rtol=1e-12)
    for r in rep.ratios.values():
        assert 0.95 <= r <= 1.05
    with pytest.raises(ConfigurationError):
        norm_equivalence_report(lambda z: 0 * z[..., 0], 2.0, ball_mesh, ConeParams(), T_GRID)


def test_holder_seminorm_examples(ball_mesh):
    one = BoundaryFunction.from_callable(ball_mesh, ONE)
    assert holder_seminorm(one, 0.5) == 0.0
    # |w1 - z1|^2 <= |w - z|^2 = 2 Re(1 - <w, z>) <= 2 delta^2 on the sphere, with equality at antipodes
    z1 = BoundaryFunction.from_callable(ball_mesh, Z1)
    np.testing.assert_allclose(holder_seminorm(z1, 1.0), np.sqrt(2), rtol=1e-12)
    assert holder_seminorm(z1, 0.5) >= holder_seminorm(z1, 1.0) / np.sqrt(2) ** 0.5
    with pytest.raises(ValueError):
        holder_seminorm(z1, 1.5)


def test_target_slices(ball_mesh, perturbed_mesh):
    assert target_slice(ball_mesh).size == ball_mesh.N
    assert target_slice(ball_mesh, "phi1-phi2").size == 8
    assert target_slice(ball_mesh, "phi2").size == 8 * 16
    with pytest.raises(ConfigurationError):
        target_slice(perturbed_mesh, "phi1-phi2")
    with pytest.raises(ConfigurationError):
        target_slice(perturbed_mesh, "diagonal")
    re = build_mesh(DefiningFunction("real-ellipsoid", a=(1.0, 1.0), b=(1.0, 0.5)), (4, 8, 8))
    with pytest.raises(ConfigurationError):
        target_slice(re, "phi2")


def test_density_constant_is_exact(perturbed_op):
    one = BoundaryFunction.from_callable(perturbed_op.mesh, ONE)
    tab = density_experiment(perturbed_op, one, [-0.1, -0.05], targets="phi2-conj", rule=RuleParams(8, 8, 8, 24, 16))
    assert tab.sup_err == (0.0, 0.0)
    with pytest.raises(ConfigurationError):
        density_experiment(perturbed_op, one, [0.05])


def test_density_slice_sup_equals_full_sup(tmp_path):
    mesh = build_mesh(DefiningFunction("perturbed-ball", eps=0.1), (4, 8, 8))
    op = CauchyOperator(mesh)
    f = BoundaryFunction.from_callable(mesh, lambda z: 1 / (z[..., 0] - 1.3))
    rule = RuleParams(8, 8, 8, 24, 16)
    full = density_experiment(op, f, [-0.1], rule=rule)
    part = density_experiment(op, f, [-0.1], targets="phi2-conj", rule=rule)
    assert part.targets < full.targets
    np.testing.assert_allclose(part.sup_err, full.sup_err, rtol=1e-12)
    np.testing.assert_allclose(part.I_term, full.I_term, rtol=1e-12)
    p = tmp_path / "density.csv"
    full.to_csv(p)
    with open(p) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "sup_err", "I_term", "II_term"]
    assert float(rows[1][1]) == full.sup_err[0]


def test_density_error_decreases_for_z1(ball_op):
    f = BoundaryFunction.from_callable(ball_op.mesh, Z1)
    tab = density_experiment(ball_op, f, [-0.1, -0.05], targets="phi1-phi2", rule=RuleParams(12, 10, 12, 36, 32))
    assert tab.strictly_decreasing
    assert tab.sup_err[1] < 0.05
