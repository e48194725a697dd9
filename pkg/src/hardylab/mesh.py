"""Quadrature meshes on bD and discretized boundary data.

n = 2: the unit sphere is parametrized by (s, phi1, phi2) with
u = (sqrt(1-s) e^{i phi1}, sqrt(s) e^{i phi2}), s = sin^2(eta), for which
dsigma(S^3) = ds dphi1 dphi2 / 2.  Gauss-Legendre in s and the trapezoidal
rule in both angles integrate polynomials in (z, zbar) of moderate degree exactly.
n = 1: equispaced angles on the circle.

Other domains are meshed by radial projection of the sphere nodes, u -> R(u) u
with rho(R u) = 0, whose surface element is R^(2n-1) |grad rho| / <grad rho, u> dsigma(u).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import DefiningFunction, GeometryError, leray_levi_density, min_levi_eigenvalue

MIN_ANGULAR = 8
REFERENCE_RESOLUTION = {1: (1024,), 2: (16, 32, 32)}


class MeshError(GeometryError):
    """Mesh construction failed."""


class InvalidDensityError(ValueError):
    """A measure density is not strictly positive on the mesh."""


def sphere_grid(resolution):
    """Sphere directions u (N, n) and sphere weights for a resolution tuple."""
    resolution = tuple(int(r) for r in np.atleast_1d(resolution))
    if len(resolution) == 1:
        (m,) = resolution
        if m < MIN_ANGULAR:
            raise MeshError(f"need at least {MIN_ANGULAR} nodes per angular direction")
        th = 2 * np.pi * np.arange(m) / m
        return np.exp(1j * th)[:, None], np.full(m, 2 * np.pi / m), {"theta": th}
    if len(resolution) != 3:
        raise MeshError("n = 2 resolution is (n_s, n_phi1, n_phi2)")
    ns, n1, n2 = resolution
    if n1 < MIN_ANGULAR or n2 < MIN_ANGULAR or ns < MIN_ANGULAR // 2:
        raise MeshError(f"need at least {MIN_ANGULAR} nodes per angular direction and {MIN_ANGULAR // 2} in s")
    x, wx = np.polynomial.legendre.leggauss(ns)
    s, ws = (x + 1) / 2, wx / 2
    p1 = 2 * np.pi * np.arange(n1) / n1
    p2 = 2 * np.pi * np.arange(n2) / n2
    S, P1, P2 = np.meshgrid(s, p1, p2, indexing="ij")
    W = np.broadcast_to(ws[:, None, None] * (np.pi / n1) * (2 * np.pi / n2), S.shape)
    u = np.stack([np.sqrt(1 - S) * np.exp(1j * P1), np.sqrt(S) * np.exp(1j * P2)], -1)
    params = {"s": S.ravel(), "phi1": P1.ravel(), "phi2": P2.ravel()}
    return u.reshape(-1, 2), W.ravel().copy(), params


def radial_projection(df: DefiningFunction, u, center=None):
    """Project unit directions u onto bD along rays from ``center``; returns (w, R, jacobian)."""
    c0 = np.zeros(df.n, dtype=complex) if center is None else np.asarray(center, dtype=complex)
    R = df.ray_hit(c0, u)
    w = c0 + R[..., None] * u
    d = df.drho(w)
    gn = 2.0 * np.linalg.norm(d, axis=-1)
    radial = 2.0 * np.sum(d * u, axis=-1).real
    if np.any(radial <= 0):
        raise MeshError("rays are not transversal to bD")
    return w, R, R ** (2 * df.n - 1) * gn / radial


@dataclass(frozen=True, eq=False)
class BoundaryMesh:
    """Quadrature nodes w_i on bD with sigma-weights mu_i and normal data."""

    df: DefiningFunction
    resolution: tuple
    nodes: np.ndarray          # (N, n) complex
    mu: np.ndarray             # (N,)
    directions: np.ndarray     # sphere directions the nodes were projected from
    params: dict = field(repr=False)

    @property
    def N(self):
        return self.nodes.shape[0]

    @property
    def n(self):
        return self.df.n

    @property
    def drho(self):
        return self.df.drho(self.nodes)

    @property
    def grad_norm(self):
        return self.df.grad_norm(self.nodes)

    @property
    def normal(self):
        """Outward unit normal (complex vector)."""
        return self.df.normal(self.nodes)

    @property
    def inner_normal(self):
        return -self.normal

    def area(self):
        return math.fsum(self.mu)

    def grid_shape(self):
        return tuple(self.resolution)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            head = ["i"]
            for j in range(self.n):
                head += [f"re(w{j + 1})", f"im(w{j + 1})"]
            head += ["mu"] + [f"nu_{k}" for k in range(2 * self.n)]
            wr.writerow(head)
            nu = self.inner_normal
            for i in range(self.N):
                row = [i]
                for j in range(self.n):
                    row += [repr(self.nodes[i, j].real), repr(self.nodes[i, j].imag)]
                row += [repr(self.mu[i])]
                for j in range(self.n):
                    row += [repr(nu[i, j].real), repr(nu[i, j].imag)]
                wr.writerow(row)


def build_mesh(df: DefiningFunction, resolution=None) -> BoundaryMesh:
    """Deterministic tensor-product mesh of bD (see module docstring)."""
    if resolution is None:
        resolution = REFERENCE_RESOLUTION[df.n]
    resolution = tuple(int(r) for r in np.atleast_1d(resolution))
    if len(resolution) != (1 if df.n == 1 else 3):
        raise MeshError(f"resolution {resolution} does not match n = {df.n}")
    u, wsph, params = sphere_grid(resolution)
    w, _, jac = radial_projection(df, u)
    defect = np.abs(df.rho(w))
    if np.max(defect) >= 1e-10:
        raise MeshError(f"node {int(np.argmax(defect))} misses bD by {np.max(defect):.3g}")
    lam = min_levi_eigenvalue(df, w, complex_input=True)
    if lam <= 1e-6:
        raise MeshError(f"Levi form degenerate on the mesh (min eigenvalue {lam:.3g})")
    mu = wsph * jac
    for a in (w, mu, u):
        a.setflags(write=False)
    return BoundaryMesh(df=df, resolution=resolution, nodes=w, mu=mu, directions=u, params=params)


def weighted_measure(mesh: BoundaryMesh, weight="lebesgue"):
    """Per-node weights lambda_i = omega(w_i) mu_i for 'lebesgue', 'leray-levi' or a callable omega."""
    if isinstance(weight, str):
        if weight == "lebesgue":
            return np.array(mesh.mu)
        if weight == "leray-levi":
            omega = leray_levi_density(mesh.df, mesh.nodes)
        else:
            raise ValueError(f"unknown measure {weight!r}")
    elif callable(weight):
        omega = np.asarray(weight(mesh.nodes), dtype=float)
    else:
        raise ValueError("weight must be 'lebesgue', 'leray-levi' or a callable density")
    omega = np.broadcast_to(omega, mesh.mu.shape)
    if not np.all(np.isfinite(omega)) or np.any(omega <= 0):
        raise InvalidDensityError("measure density must be strictly positive at every node")
    return omega * mesh.mu


def quasi_ball(mesh: BoundaryMesh, z: int, r: float, denominator="leray"):
    """Indices of nodes w_i with delta(w_i, w_z) < r."""
    from .kernels import DenominatorSpec, quasi_distance

    if not r >= 0:
        raise ValueError("radius must be nonnegative")
    d = quasi_distance(DenominatorSpec(denominator, mesh.df), mesh.nodes, mesh.nodes[z])
    return np.flatnonzero(d < r)


@dataclass(frozen=True)
class BoundaryFunction:
    """Complex samples on a mesh, optionally tagged with the analytic formula they came from."""

    mesh: BoundaryMesh
    values: np.ndarray
    tag: str = "samples"
    exact: Optional[Callable] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.mesh.N,):
            raise ValueError("sample vector length must equal the node count")
        if not np.all(np.isfinite(v)):
            raise ValueError("boundary samples must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, mesh, func, tag=None):
        vals = np.broadcast_to(np.asarray(func(mesh.nodes), dtype=complex), (mesh.N,))
        return cls(mesh, vals, tag or getattr(func, "__name__", "analytic"), func)

    @classmethod
    def from_csv(cls, mesh, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        order = np.argsort(data[:, 0])
        return cls(mesh, data[order, 1] + 1j * data[order, 2], "csv")

    def with_values(self, values, tag=None):
        return BoundaryFunction(self.mesh, values, tag or f"derived:{self.tag}")

    def lp_norm(self, p=2, weights=None):
        w = self.mesh.mu if weights is None else weights
        return float(np.sum(np.abs(self.values) ** p * w) ** (1.0 / p))
