"""Cauchy-Fantappie denominators, kernel densities and the quasi-distance.

leray:  g(w, z) = <d rho(w), w - z> = sum_j rho_j(w) (w_j - z_j)
levi:   g(w, z) = <d rho(w), w - z> - 1/2 sum_jk rho_jk (w_j - z_j)(w_k - z_k)

With generating form G_j = dg/dw_j-part (rho_j for leray, rho_j - 1/2 sum_k rho_jk
(w_k - z_k) for levi) the kernel density against dsigma(w) is
sum_j G_j(w, z) c_j(w) / g(w, z)^n, c_j the Leray-Levi coefficients.  For quadrics
Re g_levi = (L(w - z) - rho(z)) / 2 exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import DefiningFunction, leray_levi_coefficients


class NearSingularityError(ValueError):
    """Kernel evaluated where |g| is too small for direct evaluation."""


class EstimateViolation(RuntimeError):
    """A kernel estimate failed on a shipped domain."""


@dataclass(frozen=True)
class DenominatorSpec:
    kind: str
    df: DefiningFunction

    def __post_init__(self):
        if self.kind not in ("leray", "levi"):
            raise ValueError(f"unknown denominator {self.kind!r}")


def eval_g(spec: DenominatorSpec, w, z):
    """Denominator g(w, z); w and z broadcast over leading axes."""
    w = np.asarray(w, dtype=complex)
    u = w - np.asarray(z, dtype=complex)
    g = np.sum(spec.df.drho(w) * u, axis=-1)
    if spec.kind == "levi":
        g = g - 0.5 * np.sum(spec.df.beta * u * u, axis=-1)
    return g


def generating_form(spec: DenominatorSpec, w, z):
    w = np.asarray(w, dtype=complex)
    G = spec.df.drho(w)
    if spec.kind == "levi":
        G = G - 0.5 * spec.df.beta * (w - np.asarray(z, dtype=complex))
    return G


def quasi_distance(spec: DenominatorSpec, w, z):
    """delta(w, z) = max(|g(w, z)|, |g(z, w)|)^(1/2)."""
    a = np.abs(eval_g(spec, w, z))
    b = np.abs(eval_g(spec, z, w))
    return np.sqrt(np.maximum(a, b))


def kernel_density(spec: DenominatorSpec, w, z, coeffs=None, guard=1e-14):
    """Density of C^1(w, z) against dsigma(w).  ``coeffs`` caches leray_levi_coefficients(w)."""
    w = np.asarray(w, dtype=complex)
    c = leray_levi_coefficients(spec.df, w) if coeffs is None else coeffs
    g = eval_g(spec, w, z)
    if guard is not None and np.any(np.abs(g) < guard):
        raise NearSingularityError("|g| below 1e-14; use the subtraction formula")
    G = generating_form(spec, w, z)
    return np.sum(G * c, axis=-1) / g ** spec.df.n


def check_lower_bound(spec: DenominatorSpec, w, zs, min_sep=1e-8):
    """min over pairs of Re g(w, z) / (rho(w) - rho(z) + |w - z|^2), pairs with |w - z| < min_sep dropped."""
    w = np.asarray(w, dtype=complex)[:, None, :]
    zs = np.asarray(zs, dtype=complex)[None, :, :]
    df = spec.df
    sep = np.sum(np.abs(w - zs) ** 2, axis=-1)
    den = df.rho(w) - df.rho(zs) + sep
    keep = np.broadcast_to(sep >= min_sep**2, den.shape)
    ratio = np.broadcast_to(eval_g(spec, w, zs).real, den.shape)[keep] / den[keep]
    worst = float(np.min(ratio))
    if worst <= 0:
        raise EstimateViolation(f"lower bound violated: worst ratio {worst:.3g}")
    return worst


def pairwise_g(spec: DenominatorSpec, w, z):
    """Matrix g(w_k, z_i) (rows: targets z, columns: sources w) via its bilinear expansion.

    leray: g = a(w) - sum_j z_j rho_j(w), a(w) = sum_j rho_j(w) w_j
    levi:  additionally - 1/2 sum_j beta_j (w_j - z_j)^2
    """
    w = np.asarray(w, dtype=complex)
    z = np.asarray(z, dtype=complex)
    beta = spec.df.beta
    d = spec.df.drho(w)
    a = np.sum(d * w, axis=-1)
    if spec.kind == "levi":
        a = a - 0.5 * np.sum(beta * w * w, axis=-1)
        d = d - beta * w
        return a[None, :] - z @ d.T - 0.5 * np.sum(beta * z * z, axis=-1)[:, None]
    return a[None, :] - z @ d.T


def pairwise_delta(spec: DenominatorSpec, w, z):
    """Matrix delta(w_k, z_i) of the quasi-distance."""
    return np.sqrt(np.maximum(np.abs(pairwise_g(spec, w, z)), np.abs(pairwise_g(spec, z, w)).T))


@dataclass(frozen=True)
class IntegrabilityProfile:
    """Ratios r^-beta int_{B_r} delta^(-2n+beta) and r^beta int_{bD - B_r} delta^(-2n-beta)."""

    r: np.ndarray
    inner: np.ndarray          # raw integrals over B_r(z)
    outer: np.ndarray          # raw integrals over the complement
    beta: float
    excluded: int              # nodes dropped by the r_cut filter (mesh method only)

    @property
    def inner_ratio(self):
        return self.inner / self.r**self.beta

    @property
    def outer_ratio(self):
        return self.outer * self.r**self.beta

    @property
    def c_beta(self):
        return float(max(np.max(self.inner_ratio), np.max(self.outer_ratio)))

    def band(self, column="inner"):
        """max/min of a ratio column over the r-grid."""
        v = self.inner_ratio if column == "inner" else self.outer_ratio
        return float(np.max(v) / np.min(v))


def integrability_profile(mesh, spec: DenominatorSpec, z: int, beta: float, r_grid, method="rule", r_cut=None, rule=None):
    """Quasi-ball integrals of delta^(-2n +- beta) around the node z.

    method='rule' integrates with the target-centred rule of
    :mod:`hardylab.quadrature` with radial grading power 2/beta, which makes the
    integrable singularity of delta^(-2n+beta) at z smooth in the quadrature
    variable (n = 2 only).  method='mesh' sums over mesh nodes and drops nodes
    with delta < r_cut (default: the smallest positive internode delta at z).
    """
    from .quadrature import RuleParams, target_rule

    if not 0 < beta <= 1:
        raise ValueError("need 0 < beta <= 1")
    r = np.asarray(r_grid, dtype=float)
    if np.any(r <= 0) or np.any(r >= 1):
        raise ValueError("r-grid must lie in (0, 1)")
    n = mesh.n
    zp = mesh.nodes[z]
    if method == "rule":
        if n != 2:
            raise ValueError("rule method is for n = 2; use method='mesh'")
        params = rule or RuleParams(nv=24, ntau=24, nsf=16, nphi1=48, nphi2=32)
        params = RuleParams(params.nv, params.ntau, params.nsf, params.nphi1, params.nphi2, params.s0, 2.0 / beta)
        q = target_rule(mesh.df, zp, params, on_boundary=True)
        d, wts, excluded = quasi_distance(spec, q.points, zp), q.weights, 0
    elif method == "mesh":
        d = quasi_distance(spec, mesh.nodes, zp)
        cut = np.min(d[d > 0]) if r_cut is None else r_cut
        keep = d >= cut
        excluded = int(np.sum(~keep))
        d, wts = d[keep], mesh.mu[keep]
    else:
        raise ValueError(f"unknown method {method!r}")
    inner = np.array([np.sum(np.where(d < rr, d ** (-2 * n + beta), 0.0) * wts) for rr in r])
    outer = np.array([np.sum(np.where(d >= rr, d ** (-2 * n - beta), 0.0) * wts) for rr in r])
    return IntegrabilityProfile(r, inner, outer, float(beta), excluded)


def flow_comparability(mesh, spec: DenominatorSpec, t: float, pairs=None, sample=64, band=(0.1, 10.0)):
    """Band [m, M] of |g(Phi(w), z)| / (|g(w, z)| + |t|) for t < 0.

    Phi maps bD onto bD_t = {rho = -t} (the outward normal flow for time -t).
    ``pairs`` is an (P, 2) array of node indices (w, z); by default all pairs
    among ``sample`` evenly spaced nodes, diagonal included.
    """
    from .flow import flow_points
    from .geometry import t_max

    if not t < 0 or abs(t) > t_max(mesh.df):
        raise ValueError("need -t_max <= t < 0")
    if pairs is None:
        idx = np.unique(np.linspace(0, mesh.N - 1, min(sample, mesh.N)).astype(int))
        I, J = np.meshgrid(idx, idx, indexing="ij")
        pairs = np.stack([I.ravel(), J.ravel()], -1)
    pairs = np.asarray(pairs, dtype=int)
    w, z = mesh.nodes[pairs[:, 0]], mesh.nodes[pairs[:, 1]]
    phi = flow_points(mesh.df, w, -t)
    ratio = np.abs(eval_g(spec, phi, z)) / (np.abs(eval_g(spec, w, z)) + abs(t))
    lo, hi = float(np.min(ratio)), float(np.max(ratio))
    if band is not None and not (lo >= band[0] and hi <= band[1]):
        raise EstimateViolation(f"comparability band [{lo:.3g}, {hi:.3g}] outside [{band[0]}, {band[1]}]")
    return lo, hi
