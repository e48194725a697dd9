"""The normal field nu = grad rho/|grad rho|^2, its flow Phi_t and the surface Jacobian J_t.

Phi_t solves dx/dt = nu(x), so rho(Phi_t(x)) = rho(x) + t; it maps bD onto the
level set {rho = t}.  Classical RK4 with a fixed number of steps per unit time.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import DefiningFunction, GeometryError, to_complex, to_real, t_max
from .mesh import BoundaryMesh, build_mesh

STEPS_PER_UNIT = 64
FLOW_TOL = 1e-9
FRAME_STEP = 1e-5


class FlowEscapeError(GeometryError):
    """The integration path left the collar."""


class StiffnessError(RuntimeError):
    """Step size underflow."""


class FrameError(RuntimeError):
    """Degenerate tangent frame."""


def _nu_complex(df, z):
    d = df.drho(z)
    n2 = 4.0 * np.sum(np.abs(d) ** 2, axis=-1, keepdims=True)
    if np.any(n2 < 1e-24):
        raise GeometryError("degenerate gradient: |grad rho| below 1e-12")
    return 2.0 * np.conj(d) / n2


def nu_field(df: DefiningFunction, x):
    """nu(x) = grad rho/|grad rho|^2 for real points x (..., 2n)."""
    return to_real(_nu_complex(df, to_complex(x)))


def flow_points(df: DefiningFunction, z, t, steps_per_unit=STEPS_PER_UNIT, collar=None):
    """Phi_t for complex points z (..., n) by RK4; Phi_0 is the identity."""
    z = np.array(z, dtype=complex)
    if t == 0:
        return z
    if abs(t) > t_max(df) + 1e-15:
        raise GeometryError(f"|t| exceeds t_max = {t_max(df)}")
    collar = df.collar if collar is None else collar
    m = max(1, math.ceil(steps_per_unit * abs(t) - 1e-12))
    h = t / m
    if abs(h) < 1e-14:
        raise StiffnessError("step size underflow")
    for _ in range(m):
        k1 = _nu_complex(df, z)
        k2 = _nu_complex(df, z + 0.5 * h * k1)
        k3 = _nu_complex(df, z + 0.5 * h * k2)
        k4 = _nu_complex(df, z + h * k3)
        z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if np.any(np.abs(df.rho(z)) > collar):
            raise FlowEscapeError("flow path left the collar")
    return z


def flow(df: DefiningFunction, x, t, steps_per_unit=STEPS_PER_UNIT):
    """Phi_t(x) for real points x (..., 2n)."""
    if t == 0:
        return np.array(x, dtype=float)
    return to_real(flow_points(df, to_complex(x), t, steps_per_unit))


def tangent_frame(df: DefiningFunction, z):
    """Orthonormal real tangent frame of the level set through z, as complex vectors (..., 2n-1, n)."""
    nh = df.normal(z)
    if df.n == 1:
        return (1j * nh)[..., None, :]
    hh = np.stack([-np.conj(nh[..., 1]), np.conj(nh[..., 0])], -1)
    return np.stack([1j * nh, hh, 1j * hh], -2)


def jacobian_points(df: DefiningFunction, z, t, h=FRAME_STEP, steps_per_unit=STEPS_PER_UNIT):
    """J_t at points z: sqrt of the Gram determinant of centred differences of the flowed frame."""
    z = np.asarray(z, dtype=complex)
    if t == 0:
        return np.ones(z.shape[:-1])
    E = tangent_frame(df, z)
    k = E.shape[-2]
    pts = np.concatenate([z[..., None, :] + h * E, z[..., None, :] - h * E], -2)
    img = flow_points(df, pts, t, steps_per_unit)
    V = to_real((img[..., :k, :] - img[..., k:, :]) / (2 * h))
    G = V @ np.swapaxes(V, -1, -2)
    det = np.linalg.det(G)
    if np.any(det <= 0):
        raise FrameError("flowed tangent frame is degenerate")
    return np.sqrt(det)


def jacobian(df: DefiningFunction, w, t, h=FRAME_STEP):
    """J_t(w) for a real boundary point w (..., 2n)."""
    return jacobian_points(df, to_complex(w), t, h)


@dataclass(frozen=True, eq=False)
class FlowMap:
    mesh: BoundaryMesh
    t: float
    images: np.ndarray
    jacobian: np.ndarray
    steps: int
    max_defect: float


def flow_map(mesh: BoundaryMesh, t, steps_per_unit=STEPS_PER_UNIT, tol=FLOW_TOL) -> FlowMap:
    df = mesh.df
    img = flow_points(df, mesh.nodes, t, steps_per_unit)
    defect = float(np.max(np.abs(df.rho(img) - df.rho(mesh.nodes) - t)))
    if defect > tol:
        warnings.warn(f"flow defect {defect:.3g} exceeds {tol:.1g}")
    J = jacobian_points(df, mesh.nodes, t, steps_per_unit=steps_per_unit)
    steps = 0 if t == 0 else max(1, math.ceil(steps_per_unit * abs(t) - 1e-12))
    return FlowMap(mesh, float(t), img, J, steps, defect)


def level_set_scale(df: DefiningFunction, t):
    """{rho = t} equals r bD with r = sqrt(1 + t) (rho + 1 is quadratic homogeneous)."""
    return math.sqrt(1.0 + t)


def change_of_vars_check(mesh: BoundaryMesh, t, ftilde, fmap: FlowMap = None, oracle_resolution=None):
    """|sum_i ftilde(Phi_t w_i) J_t(w_i) mu_i - int_{rho = t} ftilde dsigma_t|.

    The oracle integrates over the level set directly, parametrized as the
    scaled copy r bD on an independent finer mesh.
    """
    fmap = flow_map(mesh, t) if fmap is None else fmap
    lhs = np.sum(np.asarray(ftilde(fmap.images)) * fmap.jacobian * mesh.mu)
    res = oracle_resolution or tuple(2 * r for r in mesh.resolution)
    fine = build_mesh(mesh.df, res)
    r = level_set_scale(mesh.df, t)
    oracle = r ** (2 * mesh.n - 1) * np.sum(np.asarray(ftilde(r * fine.nodes)) * fine.mu)
    return float(abs(lhs - oracle)), complex(lhs), complex(oracle)
