"""Cauchy integrals: interior C(f), boundary transform Cf, shifted approximants F_t, ball Poisson.

Discretization of the boundary transform
----------------------------------------
n = 1: Nystrom on the equispaced circle mesh.  Off-diagonal entries are the
kernel times mu_j; the diagonal is completed by the subtraction rule, the
removable value of [f(w) - f(z)] C(w, z) at w = z being c_1(z) f'(z) with f'
obtained by FFT differentiation.  Rows sum to one.

n = 2: spectral Galerkin.  The trial/test space P_K consists of the functions
w1^k1 w2^k2 (conjugated for negative powers) times Jacobi polynomials in
2|w2|^2/|w|^2 - 1, |k1| + |k2| + 2m <= K; on the sphere this is exactly the
space of polynomials in (z, zbar) of degree <= K.  The transform of every basis
function is evaluated at every node with the subtraction formula and the
target-centred singular rule of :mod:`hardylab.quadrature`, and projected back
with the discrete inner product.  The operator is then B M B^H Lambda, with B
lambda-orthonormal, so its L^2(lambda) operator norm equals ||M||_2.
Rotations z_j -> e^{i theta} z_j that preserve rho make the transform
equivariant, so only one target per orbit of mesh nodes is integrated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from .geometry import leray_levi_coefficients
from .kernels import DenominatorSpec, kernel_density
from .mesh import BoundaryFunction, BoundaryMesh, weighted_measure
from .quadrature import RuleParams, target_rule

INTERIOR_S0 = 0.9      # Duffy strip width for interior targets: the far-strip trapezoid in phi1
                       # converges slowly when the target is close to bD


class StandoffError(ValueError):
    """Interior target too close to bD for the requested evaluation."""


# --------------------------------------------------------------------------- basis
@dataclass(frozen=True)
class PolynomialBasis:
    """Raw (non-orthonormal) basis of P_K on a near-spherical surface in C^2."""

    K: int
    k1: np.ndarray = field(init=False, repr=False)
    k2: np.ndarray = field(init=False, repr=False)
    deg: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        rows = []
        for a in range(-self.K, self.K + 1):
            for b in range(-self.K, self.K + 1):
                rest = self.K - abs(a) - abs(b)
                if rest >= 0:
                    rows += [(a, b, m) for m in range(rest // 2 + 1)]
        rows.sort(key=lambda r: (abs(r[0]) + abs(r[1]) + 2 * r[2], r))
        arr = np.array(rows, dtype=int)
        object.__setattr__(self, "k1", arr[:, 0])
        object.__setattr__(self, "k2", arr[:, 1])
        object.__setattr__(self, "deg", arr[:, 2])

    @property
    def size(self):
        return self.k1.size

    @property
    def _connection(self):
        """C (size, K//2 + 1): P_m^(|a|,|b|)(x) = sum_l C[j, l] Leg_l(x) for basis function j."""
        C = self.__dict__.get("_conn")
        if C is None:
            L = self.K // 2
            xq, wq = np.polynomial.legendre.leggauss(self.K + 2)
            V = np.polynomial.legendre.legvander(xq, L) * (wq[:, None] * (2 * np.arange(L + 1) + 1) / 2)
            C = np.zeros((self.size, L + 1))
            for j, (a, b, m) in enumerate(zip(self.k1, self.k2, self.deg)):
                C[j] = _jacobi_table(m, abs(a), abs(b), xq)[m] @ V
            C[np.abs(C) < 1e-13 * np.abs(C).max(axis=1, keepdims=True)] = 0.0
            object.__setattr__(self, "_conn", C)
        return C

    def _factors(self, w):
        w = np.asarray(w, dtype=complex)
        w1, w2 = w[..., 0], w[..., 1]
        x = 2 * np.abs(w2) ** 2 / (np.abs(w1) ** 2 + np.abs(w2) ** 2) - 1
        leg = np.polynomial.legendre.legvander(x, self.K // 2)
        return _signed_powers(w1, self.K), _signed_powers(w2, self.K), leg

    def moments(self, w, v, chunk=16384):
        """sum_q v_q phi_j(w_q) for every basis function j, by separable sums over (w1, w2, x)."""
        K, L = self.K, self.K // 2
        acc = [np.zeros((2 * (K - 2 * l) + 1,) * 2, dtype=complex) for l in range(L + 1)]
        for a in range(0, len(v), chunk):
            E1, E2, leg = self._factors(w[a:a + chunk])
            vv = v[a:a + chunk]
            for l in range(L + 1):
                r = K - 2 * l
                acc[l] += ((vv * leg[:, l])[:, None] * E1[:, K - r:K + r + 1]).T @ E2[:, K - r:K + r + 1]
        C = self._connection
        out = np.zeros(self.size, dtype=complex)
        for l in range(L + 1):
            r = K - 2 * l
            sel = self.deg >= l
            out[sel] += C[sel, l] * acc[l][self.k1[sel] + r, self.k2[sel] + r]
        return out

    def evaluate(self, w, coef, chunk=16384):
        """sum_j coef_j phi_j(w) at many points (separable form of ``self(w) @ coef``)."""
        K, L = self.K, self.K // 2
        C = self._connection
        D = []
        for l in range(L + 1):
            Dl = np.zeros((2 * K + 1, 2 * K + 1), dtype=complex)
            np.add.at(Dl, (self.k1 + K, self.k2 + K), C[:, l] * coef)
            D.append(Dl)
        w = np.asarray(w, dtype=complex)
        flat = w.reshape(-1, 2)
        out = np.empty(flat.shape[0], dtype=complex)
        for a in range(0, flat.shape[0], chunk):
            E1, E2, leg = self._factors(flat[a:a + chunk])
            val = np.zeros(E1.shape[0], dtype=complex)
            for l in range(L + 1):
                val += leg[:, l] * np.sum(E1 * (E2 @ D[l].T), axis=1)
            out[a:a + chunk] = val
        return out.reshape(w.shape[:-1])

    def holomorphic(self):
        """Column mask of the holomorphic monomials w^a, |a| <= K."""
        return (self.k1 >= 0) & (self.k2 >= 0) & (self.deg == 0)

    def __call__(self, w):
        w = np.asarray(w, dtype=complex)
        w1, w2 = w[..., 0], w[..., 1]
        r2 = np.abs(w1) ** 2 + np.abs(w2) ** 2
        x = 2 * np.abs(w2) ** 2 / r2 - 1
        out = np.empty(w.shape[:-1] + (self.size,), dtype=complex)
        pw1 = _powers(w1, self.K)
        pw2 = _powers(w2, self.K)
        col = {}
        for j, (a, b, m) in enumerate(zip(self.k1, self.k2, self.deg)):
            col.setdefault((a, b), []).append((m, j))
        for (a, b), items in col.items():
            base = (pw1[a] if a >= 0 else np.conj(pw1[-a])) * (pw2[b] if b >= 0 else np.conj(pw2[-b]))
            P = _jacobi_table(max(m for m, _ in items), abs(a), abs(b), x)
            for m, j in items:
                out[..., j] = base * P[m]
        return out


def _powers(v, K):
    p = [np.ones_like(v)]
    for _ in range(K):
        p.append(p[-1] * v)
    return p


def _signed_powers(v, K):
    """Columns v^a for a = -K..K, with v^(-a) read as conj(v)^a."""
    p = np.empty(v.shape + (2 * K + 1,), dtype=complex)
    p[..., K] = 1.0
    for a in range(1, K + 1):
        p[..., K + a] = p[..., K + a - 1] * v
    p[..., :K] = np.conj(p[..., :K:-1])
    return p


def _jacobi_table(M, a, b, x):
    """P_0..P_M of the Jacobi family (a, b) by the three-term recurrence."""
    P = [np.ones_like(x)]
    if M >= 1:
        P.append((a + 1) + (a + b + 2) * (x - 1) / 2)
    for m in range(2, M + 1):
        c = 2 * m + a + b
        A = 2 * m * (m + a + b) * (c - 2)
        B = (c - 1) * (c * (c - 2) * x + a * a - b * b)
        C = 2 * (m + a - 1) * (m + b - 1) * c
        P.append((B * P[-1] - C * P[-2]) / A)
    return P


def default_degree(mesh: BoundaryMesh):
    """Largest K whose Galerkin products stay clear of trapezoid aliasing on the mesh.

    Degree-K products carry angular frequencies up to 2K; a margin of 10 below
    the node count absorbs the extra harmonics of non-spherical surfaces.
    """
    ns, n1, n2 = mesh.resolution
    return int(max(1, min(2 * ns - 1, n1 // 2 - 5, n2 // 2 - 5)))


def default_rule(mesh: BoundaryMesh) -> RuleParams:
    ns, n1, n2 = mesh.resolution
    return RuleParams(nv=ns + 8, ntau=ns + 8, nsf=ns, nphi1=3 * n1 // 2, nphi2=n2)


# ------------------------------------------------------------------- symmetry
def rotation_orbits(mesh: BoundaryMesh):
    """Representative node per orbit of the rotations preserving rho, and the angles to apply.

    z_j -> e^{i theta} z_j preserves rho for every theta when beta_j = 0 and for
    theta = pi always.  Returns (rep, angles, axes): node i equals the rotation
    of node rep[i] by angles[i, k] in coordinate axes[k].
    """
    ns, n1, n2 = mesh.resolution
    idx = np.arange(mesh.N).reshape(ns, n1, n2)
    rep = idx.copy()
    axes = []
    for j, nj in enumerate((n1, n2)):
        if mesh.df.beta[j] == 0:
            period = 1
        elif nj % 2 == 0:
            period = nj // 2
        else:
            continue
        axes.append(j)
        sl = [slice(None)] * 3
        sl[j + 1] = np.arange(nj) % period
        rep = rep[tuple(sl)]
    rep = rep.ravel()
    phis = np.stack([mesh.params["phi1"], mesh.params["phi2"]], -1)[:, axes]
    return rep, phis - phis[rep], axes


# ------------------------------------------------------------- discrete operators
@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Discretized boundary operator T = B M B^H Lambda (B lambda-orthonormal).

    ``basis is None`` marks the nodal (n = 1) representation B = Lambda^(-1/2).
    ``dense()`` materializes the N x N matrix when N is small.
    """

    mesh: BoundaryMesh
    lam: np.ndarray
    coef: np.ndarray
    basis: np.ndarray = None
    measure: str = "lebesgue"
    tag: str = "cauchy"

    def apply(self, f):
        f = np.asarray(f.values if isinstance(f, BoundaryFunction) else f, dtype=complex)
        if self.basis is None:
            r = np.sqrt(self.lam)
            return (self.coef @ (r * f)) / r
        return self.basis @ (self.coef @ self.project(f))

    def project(self, f):
        """Coefficients B^H Lambda f (nodal case: Lambda^(1/2) f)."""
        if self.basis is None:
            return np.sqrt(self.lam) * f
        return self.basis.conj().T @ (self.lam * f)

    def with_coef(self, coef, tag):
        return KernelMatrix(self.mesh, self.lam, coef, self.basis, self.measure, tag)

    def adjoint(self):
        return self.with_coef(self.coef.conj().T, f"adjoint:{self.tag}")

    def __matmul__(self, other):
        return self.with_coef(self.coef @ other.coef, f"{self.tag}*{other.tag}")

    def __sub__(self, other):
        return self.with_coef(self.coef - other.coef, f"{self.tag}-{other.tag}")

    def identity(self):
        return self.with_coef(np.eye(self.coef.shape[0], dtype=complex), "identity")

    def norm(self):
        """Operator norm on the discrete L^2(lambda) space."""
        return float(np.linalg.norm(self.coef, 2))

    def dense(self, max_nodes=6000):
        if self.mesh.N > max_nodes:
            raise MemoryError(f"refusing to materialize a {self.mesh.N}^2 matrix")
        if self.basis is None:
            r = np.sqrt(self.lam)
            return self.coef * r[None, :] / r[:, None]
        return (self.basis @ self.coef) @ (self.basis.conj().T * self.lam[None, :])


def orthonormalize(raw_nodes, lam):
    """R with B = raw R^-1 lambda-orthonormal (Householder QR of sqrt(lambda) raw)."""
    R = np.linalg.qr(np.sqrt(lam)[:, None] * raw_nodes, mode="r")
    d = np.abs(np.diag(R))
    if d.min() < 1e-12 * d.max():
        raise np.linalg.LinAlgError("polynomial basis is rank deficient on this mesh")
    return R


# ------------------------------------------------------------------ Cauchy operator
class CauchyOperator:
    """Boundary Cauchy transform on a mesh for a denominator and a measure."""

    def __init__(self, mesh: BoundaryMesh, denominator="leray", measure="lebesgue", degree=None, rule=None):
        self.mesh = mesh
        self.spec = DenominatorSpec(denominator, mesh.df)
        self.measure = measure if isinstance(measure, str) else "custom"
        self.lam = weighted_measure(mesh, measure)
        self.coeffs = leray_levi_coefficients(mesh.df, mesh.nodes)
        if mesh.n == 2:
            self.degree = default_degree(mesh) if degree is None else int(degree)
            self.rule = default_rule(mesh) if rule is None else rule
            self.poly = PolynomialBasis(self.degree)
            self.raw = _raw_basis(mesh, self.degree)
            self.R = orthonormalize(self.raw, self.lam)
            self.B = sla.solve_triangular(self.R, self.raw.T, trans="T", lower=False).T
        else:
            self.degree, self.rule, self.poly = None, None, None
        self._matrix = None

    # ---- representation
    @property
    def matrix(self) -> KernelMatrix:
        if self._matrix is None:
            self._matrix = self.galerkin(self.spec.kind, "cauchy")
        return self._matrix

    def galerkin(self, kind, tag):
        """Discretize the boundary operator of a denominator kind or closed-form kernel on this space."""
        if self.mesh.n == 1:
            C = _nystrom_circle(self.mesh, _density(kind, self.mesh.df), self.coeffs)
            r = np.sqrt(self.lam)
            return KernelMatrix(self.mesh, self.lam, C * r[:, None] / r[None, :], None, self.measure, tag)
        G = _galerkin_moments(self.mesh, kind, self.degree, self.rule, self.lam)
        Rinv = sla.solve_triangular(self.R, np.eye(self.R.shape[0]), lower=False)
        return KernelMatrix(self.mesh, self.lam, Rinv.conj().T @ G @ Rinv, self.B, self.measure, tag)

    # ---- resampling of boundary data at off-mesh boundary points
    def coefficients(self, f):
        vals = f.values if isinstance(f, BoundaryFunction) else np.asarray(f, dtype=complex)
        return sla.solve_triangular(self.R, self.B.conj().T @ (self.lam * vals), lower=False)

    def resample(self, f, points):
        """Values of boundary data at boundary points: analytic formula if tagged, else spectral."""
        if isinstance(f, BoundaryFunction) and f.exact is not None:
            return np.broadcast_to(np.asarray(f.exact(points), dtype=complex), points.shape[:-1])
        if self.mesh.n == 1:
            vals = f.values if isinstance(f, BoundaryFunction) else np.asarray(f, dtype=complex)
            return _trig_interp(self.mesh, vals, points)
        return self.poly.evaluate(points, self.coefficients(f))

    def apply(self, f):
        return self.matrix.apply(f)


def _raw_basis(mesh, K):
    return PolynomialBasis(K)(mesh.nodes)


def _density(kind, df):
    """Kernel density callable (W, z) -> density for a denominator kind or a closed-form kernel."""
    if isinstance(kind, str):
        spec = DenominatorSpec(kind, df)
        return lambda W, z: kernel_density(spec, W, z, guard=None)
    return kind


@lru_cache(maxsize=8)
def _raw_transform_rows(mesh: BoundaryMesh, kind, K: int, rule: RuleParams):
    """(C phi)(z) for the raw basis at one node per rotation orbit.

    ``kind`` is a denominator name or a module-level callable (W, z) -> density.
    """
    dens = _density(kind, mesh.df)
    poly = PolynomialBasis(K)
    rep, _, _ = rotation_orbits(mesh)
    reps = np.unique(rep)
    rows = np.empty((reps.size, poly.size), dtype=complex)
    for t, i in enumerate(reps):
        rows[t] = _transform_row(dens, mesh.df, poly, mesh.nodes[i], rule)
    return reps, rows


def _transform_row(dens, df, poly, z, rule):
    """(C phi)(z) = phi(z) + sum_q k_q [phi(W_q) - phi(z)] over the target-centred rule."""
    r = target_rule(df, z, rule, on_boundary=True)
    k = dens(r.points, z) * r.weights
    pz = poly(z[None, :])[0]
    return pz + (poly.moments(r.points, k) - pz * np.sum(k))


def transform_columns(mesh, kind, K, rule):
    """(C phi_b)(w_i) for all nodes i and raw basis functions b."""
    reps, rows = _raw_transform_rows(mesh, kind, K, rule)
    rep, angles, axes = rotation_orbits(mesh)
    poly = PolynomialBasis(K)
    pos = np.searchsorted(reps, rep)
    Y = rows[pos]
    charges = np.stack([poly.k1, poly.k2], -1)[:, axes]
    if axes:
        Y *= np.exp(1j * angles @ charges.T)
    return Y


def _galerkin_moments(mesh, kind, K, rule, lam):
    """Phi^H Lambda Y with Phi the raw basis at the nodes."""
    Y = transform_columns(mesh, kind, K, rule)
    raw = _raw_basis(mesh, K)
    return raw.conj().T @ (lam[:, None] * Y)


def _circle_derivative(values):
    m = values.shape[0]
    k = np.fft.fftfreq(m, 1.0 / m)
    if m % 2 == 0:
        k[m // 2] = m // 2      # the Nyquist mode counts as the holomorphic frequency +m/2
    k = k.reshape((m,) + (1,) * (np.ndim(values) - 1))
    return np.fft.ifft(1j * k * np.fft.fft(values, axis=0), axis=0)


def _nystrom_circle(mesh, dens, coeffs):
    """Dense n = 1 Cauchy matrix with subtraction-rule diagonal.

    The removable value of [f(w) - f(z)] C(w, z) at w = z is c_1(z) f'(z) for
    any density with the Cauchy residue c_1(w)/(w - z), which covers the
    Leray density and the closed-form circle Szego kernel alike.
    """
    w = mesh.nodes[:, 0]
    N = w.size
    off = ~np.eye(N, dtype=bool)
    W = np.broadcast_to(mesh.nodes[None, :, :], (N, N, 1))
    Z = np.broadcast_to(mesh.nodes[:, None, :], (N, N, 1))
    K = np.zeros((N, N), dtype=complex)
    K[off] = dens(W[off], Z[off]) * np.broadcast_to(mesh.mu, (N, N))[off]
    C = K - np.diag(K.sum(axis=1)) + np.eye(N)
    dwdth = _circle_derivative(w)
    D = _circle_derivative(np.eye(N))
    C += (coeffs[:, 0] * mesh.mu / dwdth)[:, None] * D
    return C


def _trig_interp(mesh, vals, points):
    """Trigonometric interpolation in the mesh angle for an n = 1 radial mesh."""
    m = vals.size
    c = np.fft.fft(vals) / m
    k = np.fft.fftfreq(m, 1.0 / m)
    th = np.angle(np.asarray(points)[..., 0])
    return np.exp(1j * th[..., None] * k) @ c


# ---------------------------------------------------------------- public operations
def boundary_cauchy(op: CauchyOperator, f: BoundaryFunction) -> BoundaryFunction:
    return f.with_values(op.apply(f), tag=f"cauchy:{f.tag}")


def hardy_membership_residual(op: CauchyOperator, f: BoundaryFunction, p=2.0):
    """Discrete L^p norm of Cf - f."""
    if not 1 < p < np.inf:
        raise ValueError("need 1 < p < infinity")
    r = op.apply(f) - f.values
    return float(np.sum(np.abs(r) ** p * op.mesh.mu) ** (1.0 / p))


def boundary_distance(df, z):
    """dist(z, bD) from |rho|/|grad rho| refined by one normal projection."""
    from .quadrature import foot_point

    z = np.asarray(z, dtype=complex)
    return np.linalg.norm(z - foot_point(df, z), axis=-1)


def interior_rule(op: CauchyOperator, z):
    """Target-centred rule for an interior target; the Duffy strip is widened to s < INTERIOR_S0."""
    return target_rule(op.mesh.df, z, replace(op.rule, s0=INTERIOR_S0))


def interior_cauchy(op: CauchyOperator, f, z, standoff=0.05):
    """C(f)(z) for interior z at distance >= standoff from bD.

    ``f`` may be a list of boundary functions; they then share one quadrature rule
    and an array of values is returned.
    """
    z = np.asarray(z, dtype=complex)
    df = op.mesh.df
    if df.rho(z) >= 0:
        raise StandoffError("target is not inside the domain")
    d = float(boundary_distance(df, z))
    if d < standoff * (1 - 1e-12):
        raise StandoffError(f"target within {d:.3g} of bD; use boundary_cauchy or an approximant")
    fs = list(f) if isinstance(f, (list, tuple)) else [f]
    if op.mesh.n == 1:
        K = kernel_density(op.spec, op.mesh.nodes, z, coeffs=op.coeffs) * op.mesh.mu
        out = [complex(np.sum(g.values * K)) for g in fs]
    else:
        r = interior_rule(op, z)
        K = kernel_density(op.spec, r.points, z) * r.weights
        out = [complex(np.sum(op.resample(g, r.points) * K)) for g in fs]
    return np.array(out) if isinstance(f, (list, tuple)) else out[0]


def shifted_cauchy_approximant(op: CauchyOperator, f: BoundaryFunction, t, flow=None, targets=None, split=False, rule=None):
    """F_t on bD for t < 0: f(z) + int_bD [f(w) - f(z)] J(w) C(Phi(w), z) dsigma(w).

    Phi is the bijection of bD onto bD_t = {rho = -t}, i.e. the normal flow run
    for time -t > 0; ``flow`` (a FlowMap for time -t on op.mesh) supplies J at
    the nodes, which is resampled at the quadrature points.  Returns values at
    ``targets`` (default: all nodes); with ``split`` also the diagnostics
    (Cf - f, I_t, II_t) whose sum is F_t - f.  ``rule`` overrides the
    operator's quadrature orders (n = 2).
    """
    from .flow import flow_points, flow_map

    if not t < 0:
        raise ValueError("approximants require t < 0")
    mesh, df = op.mesh, op.mesh.df
    if flow is None:
        flow = flow_map(mesh, -t)
    if not math.isclose(flow.t, -t, rel_tol=0, abs_tol=1e-15) or flow.mesh is not mesh:
        raise ValueError("flow map must be the outward flow for time -t on the operator mesh")
    idx = np.arange(mesh.N) if targets is None else np.asarray(targets)
    vals = f.values
    out = np.empty(idx.size, dtype=complex)
    parts = np.empty((idx.size, 3), dtype=complex)
    if mesh.n == 1:
        m = max(mesh.N, int(np.ceil(64.0 / abs(t))))
        from .mesh import build_mesh

        fine = build_mesh(df, (m,))
        P = fine.nodes
        fP = op.resample(f, P)
        J = _trig_interp(mesh, flow.jacobian, P).real
        Phi = flow_points(df, P, -t)
        cP = leray_levi_coefficients(df, Phi)
        for a, i in enumerate(idx):
            z = mesh.nodes[i]
            Kt = kernel_density(op.spec, Phi, z, coeffs=cP)
            diff = (fP - vals[i]) * fine.mu
            out[a] = vals[i] + np.sum(diff * J * Kt)
            if split:
                parts[a] = _split_terms_n1(op, f, i, fine, fP, J, Kt)
        return (out, parts) if split else out
    Jc = sla.solve_triangular(op.R, op.B.conj().T @ (op.lam * flow.jacobian), lower=False)
    for a, i in enumerate(idx):
        z = mesh.nodes[i]
        r = target_rule(df, z, rule or op.rule, on_boundary=True, grading=abs(t) / 2)
        Phi = flow_points(df, r.points, -t)
        J = op.poly.evaluate(r.points, Jc).real
        Kt = kernel_density(op.spec, Phi, z, guard=None)
        diff = (op.resample(f, r.points) - vals[i]) * r.weights
        out[a] = vals[i] + np.sum(diff * J * Kt)
        if split:
            cf = np.sum(diff * kernel_density(op.spec, r.points, z, guard=None))
            parts[a] = (cf, np.sum(diff * Kt) - cf, np.sum(diff * (J - 1) * Kt))
    return (out, parts) if split else out


def _split_terms_n1(op, f, i, fine, fP, J, Kt):
    diff = (fP - f.values[i]) * fine.mu
    cf = op.apply(f)[i] - f.values[i]
    return (cf, np.sum(diff * Kt) - cf, np.sum(diff * (J - 1) * Kt))


def poisson_extension_ball(mesh: BoundaryMesh, f: BoundaryFunction, x, standoff=0.05, op=None):
    """Poisson integral of f on the unit sphere S^(2n-1) at |x| < 1 - standoff."""
    df = mesh.df
    if df.kind != "ball":
        raise ValueError("the Poisson extension is only available on the ball")
    x = np.asarray(x, dtype=complex)
    r = float(np.linalg.norm(x))
    if r >= 1 - standoff * (1 - 1e-12):
        raise StandoffError("point too close to the sphere")
    n = df.n
    area = 2 * np.pi**n / math.factorial(n - 1)
    if n == 1 or r < 0.5:
        P = (1 - r**2) / (area * np.sum(np.abs(x - mesh.nodes) ** 2, axis=-1) ** n)
        return complex(np.sum(P * f.values * mesh.mu))
    op = op or CauchyOperator(mesh)
    d = 1 - r
    rule = op.rule
    Q = target_rule(df, x, replace(rule, s0=INTERIOR_S0), grading=d * d)
    P = (1 - r**2) / (area * np.sum(np.abs(x - Q.points) ** 2, axis=-1) ** n)
    return complex(np.sum(P * op.resample(f, Q.points) * Q.weights))
