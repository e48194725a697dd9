"""Hardy-space measurements: exhaustion norms, nontangential maximal functions,
norm-equivalence reports, Hoelder seminorms and the approximant density experiment.

Functions F on D are plain callables on complex points (..., n).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .flow import flow_map, tangent_frame
from .geometry import t_max
from .kernels import DenominatorSpec, pairwise_delta
from .mesh import BoundaryFunction, BoundaryMesh
from .transforms import CauchyOperator, boundary_distance, shifted_cauchy_approximant


class ConfigurationError(ValueError):
    """Invalid measurement configuration."""


# ------------------------------------------------------------------------ cones
@dataclass(frozen=True)
class ConeParams:
    """Sampling of the approach regions Gamma(w) = {z in D : |z - w| < beta dist(z, bD)}.

    Ray k leaves w at angle theta_k from the inner normal, cos(theta_k) = 1 - k/n_rays,
    tilted toward a tangent direction cycling through the signed real tangent frame.
    Candidate points sit at geometric distances r_min .. r_max along each ray and
    are kept only if they lie in D and in the cone.  The candidates do not depend
    on beta, so the samples are nested in the aperture.
    """

    beta: float = 2.0
    n_rays: int = 8
    n_radial: int = 16
    r_min: float = 1e-10
    r_max: float = 0.5

    def __post_init__(self):
        if not self.beta > 1:
            raise ConfigurationError("aperture must exceed 1")
        if self.n_rays < 1 or self.n_radial < 1 or not 0 < self.r_min < self.r_max:
            raise ConfigurationError("need n_rays, n_radial >= 1 and 0 < r_min < r_max")

    def candidates(self, mesh: BoundaryMesh):
        """Candidate points (N, n_rays * n_radial, n) and their distances r from the vertex."""
        w = mesh.nodes
        nu = -mesh.normal
        E = tangent_frame(mesh.df, w)                      # (N, 2n-1, n)
        dirs = []
        for k in range(self.n_rays):
            c = 1.0 - k / self.n_rays
            if k == 0:
                dirs.append(nu)
                continue
            j = (k - 1) // 2 % E.shape[1]
            sgn = 1.0 if (k - 1) % 2 == 0 else -1.0
            dirs.append(c * nu + np.sqrt(1 - c * c) * sgn * E[:, j])
        D = np.stack(dirs, 1)                               # (N, rays, n)
        r = np.geomspace(self.r_min, self.r_max, self.n_radial)
        pts = w[:, None, None, :] + r[None, None, :, None] * D[:, :, None, :]
        R = np.broadcast_to(r[None, None, :], pts.shape[:-1])
        return pts.reshape(mesh.N, -1, mesh.n), R.reshape(mesh.N, -1)

    def sample(self, mesh: BoundaryMesh):
        """(points, mask): mask marks candidates verified to lie in D and in Gamma(w)."""
        pts, r = self.candidates(mesh)
        inside = mesh.df.rho(pts) < 0
        dist = np.zeros(r.shape)
        dist[inside] = boundary_distance(mesh.df, pts[inside])
        mask = inside & (r < self.beta * dist)
        if not np.all(mask.any(axis=1)):
            raise ConfigurationError(f"empty cone sample at node {int(np.argmin(mask.any(axis=1)))}")
        return pts, mask


def nontangential_max(F, cones: ConeParams, mesh: BoundaryMesh) -> BoundaryFunction:
    """N(F)(w_i) = max of |F| over the verified cone samples at w_i."""
    pts, mask = cones.sample(mesh)
    vals = np.zeros(mask.shape)
    vals[mask] = np.abs(np.asarray(F(pts[mask]), dtype=complex))
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("F is not finite on the cone samples")
    return BoundaryFunction(mesh, np.max(np.where(mask, vals, -np.inf), axis=1), f"N_beta={cones.beta}")


# ------------------------------------------------------------------- exhaustion
def exhaustion_table(F, p, t_grid, mesh: BoundaryMesh, flows=None):
    """Rows (t, (int_{rho = -t} |F|^p dsigma_t)^(1/p)) computed on Phi(bD) with weights J mu.

    D_t = {rho + t < 0} for t > 0; its boundary is reached by the inward flow (time -t).
    """
    t_grid = [float(t) for t in t_grid]
    if not t_grid or any(not 0 < t <= t_max(mesh.df) for t in t_grid):
        raise ConfigurationError("exhaustion t-grid must lie in (0, t_max]")
    rows = []
    for k, t in enumerate(t_grid):
        fm = flows[k] if flows is not None else flow_map(mesh, -t)
        if not np.isclose(fm.t, -t, rtol=0, atol=1e-15):
            raise ConfigurationError("flow maps must be the inward flows for the t-grid")
        v = np.abs(np.asarray(F(fm.images), dtype=complex))
        if not np.all(np.isfinite(v)):
            raise FloatingPointError(f"F is not finite on bD_t for t = {t}")
        rows.append((t, float(np.sum(v**p * fm.jacobian * mesh.mu) ** (1 / p))))
    return rows


def exhaustion_norm(F, p, t_grid, mesh: BoundaryMesh, flows=None):
    """max over the t-grid of the L^p(bD_t) norms of F."""
    return max(v for _, v in exhaustion_table(F, p, t_grid, mesh, flows))


# ------------------------------------------------------------------ equivalence
@dataclass(frozen=True)
class HardyReport:
    exhaustion: float
    trace: float
    maximal: float
    t_grid: tuple
    p: float
    pointwise_excess: float      # max_i (|F(w_i)| - N(F)(w_i)); <= 0 when the trace is dominated
    exhaustion_rows: tuple = field(default=(), repr=False)

    @property
    def ratios(self):
        return {
            "exhaustion/trace": self.exhaustion / self.trace,
            "maximal/trace": self.maximal / self.trace,
            "maximal/exhaustion": self.maximal / self.exhaustion,
        }

    @property
    def band(self):
        """Smallest B with every ratio in [1/B, B]."""
        return max(max(r, 1 / r) for r in self.ratios.values())


def norm_equivalence_report(F, p, mesh: BoundaryMesh, cones: ConeParams, t_grid) -> HardyReport:
    rows = exhaustion_table(F, p, t_grid, mesh)
    tr = np.abs(np.asarray(F(mesh.nodes), dtype=complex))
    NF = nontangential_max(F, cones, mesh).values.real
    trace = float(np.sum(tr**p * mesh.mu) ** (1 / p))
    maximal = float(np.sum(NF**p * mesh.mu) ** (1 / p))
    exh = max(v for _, v in rows)
    if min(trace, maximal, exh) <= 0:
        raise ConfigurationError("norms vanish: F must be nonzero")
    return HardyReport(exh, trace, maximal, tuple(t_grid), float(p), float(np.max(tr - NF)), tuple(rows))


# ---------------------------------------------------------------------- Hoelder
def holder_seminorm(f: BoundaryFunction, alpha, spec: DenominatorSpec = None, block=256):
    """sup over node pairs i != j of |f_i - f_j| / delta(w_i, w_j)^alpha."""
    if not 0 < alpha <= 1:
        raise ValueError("need 0 < alpha <= 1")
    mesh = f.mesh
    spec = spec or DenominatorSpec("leray", mesh.df)
    v = f.values
    best = 0.0
    for a in range(0, mesh.N, block):
        d = pairwise_delta(spec, mesh.nodes, mesh.nodes[a:a + block])
        diff = np.abs(v[a:a + block, None] - v[None, :])
        ok = d > 0
        if np.any(ok):
            best = max(best, float(np.max(diff[ok] / d[ok] ** alpha)))
    return best


# ---------------------------------------------------------------------- density
def target_slice(mesh: BoundaryMesh, kind="all"):
    """Node indices on a symmetry slice of an n = 2 tensor mesh.

    'phi2': phi2 = 0, valid when rho and |F_t - f| are invariant under z2 -> e^{i s} z2;
    'phi2-conj': additionally 0 <= phi1 <= pi, valid when also invariant under z -> zbar;
    'phi1-phi2': phi1 = phi2 = 0, valid under both rotations.
    """
    if kind == "all":
        return np.arange(mesh.N)
    if mesh.n != 2:
        raise ConfigurationError("symmetry slices need an n = 2 mesh")
    beta = mesh.df.beta
    p1, p2 = mesh.params["phi1"], mesh.params["phi2"]
    if kind == "phi2":
        need, sel = (1,), p2 == 0
    elif kind == "phi2-conj":
        need, sel = (1,), (p2 == 0) & (p1 <= np.pi + 1e-12)
    elif kind == "phi1-phi2":
        need, sel = (0, 1), (p1 == 0) & (p2 == 0)
    else:
        raise ConfigurationError(f"unknown target slice {kind!r}")
    if any(beta[j] != 0 for j in need):
        raise ConfigurationError(f"slice {kind!r} needs rho invariant under the rotations it removes")
    return np.flatnonzero(sel)


@dataclass(frozen=True)
class DensityTable:
    t: tuple
    sup_err: tuple
    I_term: tuple
    II_term: tuple
    cf_term: tuple
    targets: int

    @property
    def strictly_decreasing(self):
        """Errors strictly decrease as |t| decreases (t-grid sorted by |t| descending)."""
        order = np.argsort(-np.abs(self.t))
        e = np.asarray(self.sup_err)[order]
        return bool(np.all(np.diff(e) < 0))

    def rows(self):
        return [(t, e, a, b) for t, e, a, b in zip(self.t, self.sup_err, self.I_term, self.II_term)]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "sup_err", "I_term", "II_term"])
            for row in self.rows():
                wr.writerow([repr(float(x)) for x in row])


def density_experiment(op: CauchyOperator, f: BoundaryFunction, t_grid, targets="all", rule=None, holder_alpha=None):
    """Table (t, sup_z |F_t(z) - f(z)|) with the sup of |I_t| and |II_t| over the targets.

    I_t is the effect of moving the kernel to bD_t and II_t that of the
    Jacobian; (Cf - f) + I_t + II_t = F_t - f holds term by term.
    """
    t_grid = [float(t) for t in t_grid]
    if not t_grid or any(not t < 0 for t in t_grid):
        raise ConfigurationError("density requires t < 0")
    if holder_alpha is not None and not np.isfinite(holder_seminorm(f, holder_alpha)):
        raise ConfigurationError("boundary data are not Hoelder on the mesh")
    idx = target_slice(op.mesh, targets) if isinstance(targets, str) else np.asarray(targets)
    sup, I, II, cf = [], [], [], []
    for t in t_grid:
        vals, parts = shifted_cauchy_approximant(op, f, t, flow_map(op.mesh, -t), targets=idx, split=True, rule=rule)
        sup.append(float(np.max(np.abs(vals - f.values[idx]))))
        cf.append(float(np.max(np.abs(parts[:, 0]))))
        I.append(float(np.max(np.abs(parts[:, 1]))))
        II.append(float(np.max(np.abs(parts[:, 2]))))
    return DensityTable(tuple(t_grid), tuple(sup), tuple(I), tuple(II), tuple(cf), int(idx.size))
