"""Target-centred quadrature on bD for singular and near-singular Cauchy-type integrals.

For a target z near or on bD (n = 2) the boundary is re-parametrized by the
unit sphere through a radial map centred inside D, after a unitary rotation
taking e_1 to the outward complex normal at the foot point p of z.  In the
sphere coordinates (s, phi1, phi2) of :mod:`hardylab.mesh` the kernel
singularity sits at the corner s = 0, phi1 = 0.  The strip s < s0 is split into
four Duffy triangles with vertex at that corner; the radial Duffy variable is
graded (R = tau^p, plus geometric panels when z is off the boundary), the
remaining strip s > s0 uses Gauss-Legendre times trapezoid, and phi2 is always
trapezoidal.  The parabolic singularity 1/g^2 ~ 1/|(s, phi1)|^2 becomes bounded
and smooth in the Duffy variables.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import DefiningFunction, GeometryError


@dataclass(frozen=True)
class RuleParams:
    """Orders of the target-centred rule."""

    nv: int = 16          # Gauss points along the far edge of each Duffy triangle
    ntau: int = 16        # Gauss points per radial panel
    nsf: int = 16         # Gauss points in s on [s0, 1]
    nphi1: int = 48       # trapezoid points in phi1 on the far strip
    nphi2: int = 32       # trapezoid points in phi2
    s0: float = 0.5
    power: float = 2.0    # radial grading R = R_max tau^power

    def scaled(self, factor):
        r = lambda k: max(4, int(round(k * factor)))
        return RuleParams(r(self.nv), r(self.ntau), r(self.nsf), r(self.nphi1), r(self.nphi2), self.s0, self.power)


def _gauss(a, b, m):
    x, w = np.polynomial.legendre.leggauss(m)
    return (a + b) / 2 + (b - a) / 2 * x, (b - a) / 2 * w


def radial_breaks(depth, power, ratio=4.0):
    """Panel breaks in tau for a target at distance ``depth`` from the corner."""
    if depth <= 0:
        return (0.0, 1.0)
    r, out = depth / ratio, [0.0]
    while r < 0.5:
        out.append(r ** (1.0 / power))
        r *= ratio
    out.append(1.0)
    return tuple(out)


@lru_cache(maxsize=64)
def duffy_sphere_rule(params: RuleParams, breaks=(0.0, 1.0)):
    """Points u on S^3 (singular corner at e_1) and weights for dsigma(S^3)."""
    p, s0 = params.power, params.s0
    S, P, W = [], [], []
    v, wv = _gauss(0.0, 1.0, params.nv)
    for sg in (1.0, -1.0):
        for far in ("s", "phi"):
            es, ep = (s0 * np.ones_like(v), np.pi * v) if far == "s" else (s0 * v, np.pi * np.ones_like(v))
            for ta, tb in zip(breaks[:-1], breaks[1:]):
                t, wt = _gauss(ta, tb, params.ntau)
                tau, dtau = t**p, p * t ** (p - 1)
                S.append((tau[None, :] * es[:, None]).ravel())
                P.append((sg * tau[None, :] * ep[:, None]).ravel())
                W.append((s0 * np.pi * tau[None, :] * dtau[None, :] * wt[None, :] * wv[:, None]).ravel())
    s, ws = _gauss(s0, 1.0, params.nsf)
    p1 = -np.pi + 2 * np.pi * (np.arange(params.nphi1) + 0.5) / params.nphi1
    S.append(np.repeat(s, params.nphi1))
    P.append(np.tile(p1, params.nsf))
    W.append(np.repeat(ws, params.nphi1) * (2 * np.pi / params.nphi1))
    s, p1, w = np.concatenate(S), np.concatenate(P), np.concatenate(W)
    m = params.nphi2
    p2 = 2 * np.pi * np.arange(m) / m
    u1 = np.repeat(np.sqrt(1 - s) * np.exp(1j * p1), m)
    u2 = np.sqrt(np.repeat(s, m)) * np.tile(np.exp(1j * p2), s.size)
    u = np.stack([u1, u2], -1)
    w = np.repeat(w, m) * (np.pi / m)
    u.setflags(write=False)
    w.setflags(write=False)
    return u, w


def foot_point(df: DefiningFunction, z, tol=1e-14, maxiter=60):
    """Boundary point reached from z by Newton steps along grad rho (normal projection)."""
    p = np.array(z, dtype=complex)
    # at a critical point of rho (the centre) every normal direction is admissible: leave it along Re z_1
    flat = np.sum(np.abs(df.drho(p)) ** 2, axis=-1) < 1e-24
    p[flat, 0] += 1e-3
    for _ in range(maxiter):
        d = df.drho(p)
        nrm2 = 4.0 * np.sum(np.abs(d) ** 2, axis=-1)
        step = df.rho(p) / nrm2
        p = p - step[..., None] * 2.0 * np.conj(d)
        if np.all(np.abs(df.rho(p)) < tol):
            return p
    raise GeometryError("normal projection onto bD did not converge")


def target_frame(df: DefiningFunction, p):
    """Unitary Q with Q e1 = outward normal at boundary point p, and the chord centre c0."""
    nh = df.normal(p)
    hh = np.array([-np.conj(nh[1]), np.conj(nh[0])])
    Q = np.stack([nh, hh], 1)
    chord = df.grad_norm(p) / df.quad(nh)
    c = 0.5 * chord
    return Q, p - c * nh, c


@dataclass(frozen=True)
class TargetRule:
    """Boundary points W (Q, n) and dsigma weights for a target-centred rule."""

    points: np.ndarray
    weights: np.ndarray
    foot: np.ndarray
    depth: float


def target_rule(df: DefiningFunction, z, params: RuleParams = RuleParams(), on_boundary=None, grading=None):
    """Quadrature on bD adapted to the target z (on bD or inside D near it).

    Radial panels are graded toward a near-singularity at distance ``grading``
    from the corner (default: the distance of z from bD).
    """
    z = np.asarray(z, dtype=complex)
    if df.n != 2:
        raise ValueError("target-centred rules are for n = 2")
    r = df.rho(z)
    if on_boundary is None:
        on_boundary = abs(r) < 1e-12
    p = z if on_boundary else foot_point(df, z)
    depth = 0.0 if on_boundary else float(np.linalg.norm(z - p))
    Q, c0, c = target_frame(df, p)
    u, w = duffy_sphere_rule(params, radial_breaks(depth if grading is None else grading, params.power))
    theta = u @ Q.T
    R = df.ray_hit(c0, theta)
    W = c0 + R[:, None] * theta
    d = df.drho(W)
    gn = 2.0 * np.linalg.norm(d, axis=-1)
    radial = 2.0 * np.sum(d * theta, axis=-1).real
    return TargetRule(W, w * R**3 * gn / radial, p, depth)
