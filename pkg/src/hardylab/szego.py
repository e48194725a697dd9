"""Discrete Cauchy-Szego projections.

From C S = S, S C = C and S = S^* one gets S C^* = S, hence
S (I + C - C^*) = C S + ... = C, i.e. S (I + A) = C with A = C - C^*
skew-adjoint.  I + A has eigenvalues 1 + i lambda, so the system is always
solvable; it is solved densely with a column-pivoted QR factorization.
Adjoints are taken in the discrete weighted inner product
<f, g> = sum_i f_i conj(g_i) lambda_i, which in the lambda-orthonormal
coefficients of :class:`hardylab.transforms.KernelMatrix` is the conjugate
transpose.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .kernels import DenominatorSpec, pairwise_g
from .mesh import BoundaryFunction
from .transforms import CauchyOperator, KernelMatrix, hardy_membership_residual

COND_MAX = 1e8


class SingularityError(ValueError):
    """Closed-form kernel evaluated on its singular set."""


class ConditioningError(np.linalg.LinAlgError):
    """The Kerzman-Stein system is too ill-conditioned to trust."""

    def __init__(self, msg, report):
        super().__init__(msg)
        self.report = report


@dataclass(frozen=True, eq=False)
class SzegoOperator:
    matrix: KernelMatrix
    measure: str
    construction: str
    report: dict = field(default_factory=dict)

    @property
    def coef(self):
        return self.matrix.coef

    def apply(self, f):
        return self.matrix.apply(f)

    def norm(self):
        return self.matrix.norm()

    def invariants(self):
        """Relative self-adjointness and idempotence residuals."""
        S = self.coef
        s = np.linalg.norm(S, 2)
        return {
            "self_adjoint": float(np.linalg.norm(S - S.conj().T, 2) / s),
            "idempotence": float(np.linalg.norm(S @ S - S, 2) / s),
            "norm": float(s),
        }


# ------------------------------------------------------------------ closed form
def ball_szego_kernel(z, w):
    """S(z, w) = (n-1)!/(2 pi^n) (1 - <z, wbar>)^(-n) on the unit ball of C^n."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    n = max(z.shape[-1], w.shape[-1])
    d = 1.0 - np.sum(z * np.conj(w), axis=-1)
    if np.any(np.abs(d) < 1e-14):
        raise SingularityError("|1 - <z, wbar>| below 1e-14")
    return math.factorial(n - 1) / (2 * np.pi**n) / d**n


def _ball_szego_density(W, z):
    # density in the (W, z) calling convention of the transform pipeline; no guard on the diagonal
    d = 1.0 - np.sum(np.asarray(z) * np.conj(W), axis=-1)
    n = W.shape[-1]
    return math.factorial(n - 1) / (2 * np.pi**n) / d**n


def ball_kernel_deviation(mesh, block=512):
    """Max relative deviation between the leray density and S(z, w) over all off-diagonal node pairs."""
    if mesh.df.kind != "ball":
        raise ValueError("closed-form Szego kernel is only available on the ball")
    from .geometry import leray_levi_coefficients

    spec = DenominatorSpec("leray", mesh.df)
    W = mesh.nodes
    num = np.sum(mesh.df.drho(W) * leray_levi_coefficients(mesh.df, W), axis=-1)
    n = mesh.n
    worst = 0.0
    for a in range(0, mesh.N, block):
        Z = W[a:a + block]
        g = pairwise_g(spec, W, Z)
        d = 1.0 - Z @ W.conj().T
        diag = (np.arange(Z.shape[0]), np.arange(a, a + Z.shape[0]))
        g[diag] = d[diag] = 1.0
        C = num[None, :] / g**n
        S = math.factorial(n - 1) / (2 * np.pi**n) / d**n
        rel = np.abs(C - S) / np.abs(S)
        rel[diag] = 0.0
        worst = max(worst, float(np.max(rel)))
    return worst


def ball_szego_matrix(op: CauchyOperator, method="closed-form") -> SzegoOperator:
    """Ball Szego projection on the operator's discrete space.

    'closed-form' discretizes the kernel (n-1)!/(2 pi^n)(1 - <z, wbar>)^(-n)
    with the same singular quadrature as the Cauchy transform; 'gram' is the
    orthogonal projector onto the holomorphic polynomials of the space
    (for n = 1: the discrete Fourier modes 0..N/2).
    """
    df = op.mesh.df
    if df.kind != "ball":
        raise ValueError("closed-form Szego projection is only available on the ball")
    if method == "closed-form":
        return SzegoOperator(op.galerkin(_ball_szego_density, "szego-ball"), op.measure, "ball-closed-form")
    if method == "gram":
        return SzegoOperator(_gram_projector(op), op.measure, "gram")
    raise ValueError(f"unknown method {method!r}")


def _gram_projector(op: CauchyOperator) -> KernelMatrix:
    mat = op.matrix
    if op.mesh.n == 1:
        N = op.mesh.N
        V = np.sqrt(op.lam)[:, None] * op.mesh.nodes[:, :1] ** np.arange(N // 2 + 1)[None, :]
    else:
        V = op.R[:, op.poly.holomorphic()]
    Q, _ = np.linalg.qr(V)
    return mat.with_coef(Q @ Q.conj().T, "szego-gram")


def holomorphic_gram_projector(op: CauchyOperator, max_degree=None) -> SzegoOperator:
    """Orthogonal projector onto holomorphic polynomials of degree <= max_degree (any domain, n = 2)."""
    if op.mesh.n != 2:
        raise ValueError("n = 2 only")
    mask = op.poly.holomorphic()
    if max_degree is not None:
        mask &= (op.poly.k1 + op.poly.k2) <= max_degree
    Q, _ = np.linalg.qr(op.R[:, mask])
    return SzegoOperator(op.matrix.with_coef(Q @ Q.conj().T, "szego-gram"), op.measure, "gram")


# --------------------------------------------------------------- Kerzman-Stein
def kerzman_stein_szego(op: CauchyOperator, cond_max=COND_MAX) -> SzegoOperator:
    """Solve S (I + A) = C, A = C - C^*, by a column-pivoted QR of (I + A)^* = I - A."""
    C = op.matrix
    M = C.coef
    m = M.shape[0]
    A = M - M.conj().T
    X = np.eye(m) - A                      # (I + A)^*
    Q, R, piv = sla.qr(X, pivoting=True)
    d = np.abs(np.diag(R))
    cond = float(np.linalg.cond(X)) if m <= 4000 else float(d.max() / d.min())
    report = {"solver": "qr-column-pivoted", "cond": cond, "skew_defect": float(np.linalg.norm(A + A.conj().T, 2))}
    if not np.isfinite(cond) or cond > cond_max:
        raise ConditioningError(f"condition estimate {cond:.3g} exceeds {cond_max:.1g}", report)
    # X S^* = M^*  =>  S^* = P R^-1 Q^* M^*
    Y = sla.solve_triangular(R, Q.conj().T @ M.conj().T, lower=False)
    Sh = np.empty_like(Y)
    Sh[piv] = Y
    S = SzegoOperator(C.with_coef(Sh.conj().T, "szego-ks"), op.measure, "kerzman-stein", report)
    report.update(S.invariants())
    return S


def weighted_szego(op: CauchyOperator, cond_max=COND_MAX) -> SzegoOperator:
    """S_omega: the Kerzman-Stein construction on an operator built with an omega-weighted measure."""
    return kerzman_stein_szego(op, cond_max)


# -------------------------------------------------------------------- residuals
def _same_space(a: KernelMatrix, b: KernelMatrix):
    if a.mesh is not b.mesh or a.lam is not b.lam and not np.array_equal(a.lam, b.lam):
        raise ValueError("operators live on different meshes or measures")


def projection_identities(S: SzegoOperator, op: CauchyOperator):
    """(||C S - S||, ||S C - C||) in the discrete L^2(lambda) operator norm."""
    C = op.matrix
    _same_space(S.matrix, C)
    M, P = C.coef, S.coef
    return float(np.linalg.norm(M @ P - P, 2)), float(np.linalg.norm(P @ M - M, 2))


@dataclass(frozen=True)
class CharacterizationResult:
    residual: float            # ||S f - f||_p
    norm_f: float              # ||f||_p
    image_hardy_residual: float = None   # ||C(S f) - S f||_p when an operator is supplied


def szego_characterization_residual(S: SzegoOperator, f: BoundaryFunction, p=2.0, op: CauchyOperator = None):
    """||S f - f||_{L^p(dsigma)}, and the Hardy residual of S f itself when ``op`` is given."""
    if not 1 < p < np.inf:
        raise ValueError("need 1 < p < infinity")
    Sf = f.with_values(S.apply(f), tag=f"szego:{f.tag}")
    mu = f.mesh.mu
    res = float(np.sum(np.abs(Sf.values - f.values) ** p * mu) ** (1 / p))
    nf = float(np.sum(np.abs(f.values) ** p * mu) ** (1 / p))
    hr = None if op is None else hardy_membership_residual(op, Sf, p)
    return CharacterizationResult(res, nf, hr)


def operator_difference(Sa: SzegoOperator, Sb: SzegoOperator):
    """||T_a - T_b|| on C^N in the L^2(lambda_b) norm, T = B S B^H Lambda.

    The two operators may use different measures on the same mesh and degree;
    then T_a is expressed through W = B_b^H Lambda_b B_a (exact because both
    bases span the same space) and the Gram identity
    ||Z Lambda_b^(-1/2)||^2 = lambda_max(Z Lambda_b^-1 Z^H).
    """
    a, b = Sa.matrix, Sb.matrix
    if a.mesh is not b.mesh:
        raise ValueError("operators live on different meshes")
    if a.basis is None or b.basis is None:
        Ta, Tb = a.dense(), b.dense()
        r = np.sqrt(b.lam)
        return float(np.linalg.norm((Ta - Tb) * r[:, None] / r[None, :], 2))
    if a.lam is b.lam or np.array_equal(a.lam, b.lam):
        if a.basis is b.basis or np.array_equal(a.basis, b.basis):
            return float(np.linalg.norm(a.coef - b.coef, 2))
    Ba, Bb = a.basis, b.basis
    W = Bb.conj().T @ (b.lam[:, None] * Ba)
    V = Ba.conj().T @ (a.lam[:, None] * Bb)
    Gaa = Ba.conj().T @ ((a.lam**2 / b.lam)[:, None] * Ba)
    X = W @ a.coef
    cross = X @ V @ b.coef.conj().T
    D = X @ Gaa @ X.conj().T - cross - cross.conj().T + b.coef @ b.coef.conj().T
    ev = np.linalg.eigvalsh(0.5 * (D + D.conj().T))
    return float(np.sqrt(max(ev[-1], 0.0)))


def max_entry_difference(Sa: SzegoOperator, Sb: SzegoOperator, max_nodes=6000):
    """Max |(T_a - T_b)_ij| over the materialized N x N matrices (small meshes only)."""
    return float(np.max(np.abs(Sa.matrix.dense(max_nodes) - Sb.matrix.dense(max_nodes))))


def export_matrix(S: SzegoOperator, path):
    """Binary export: header line 'N measure domain-hash', then row-major complex128 pairs of the N x N matrix."""
    import hashlib

    T = S.matrix.dense()
    df = S.matrix.mesh.df
    h = hashlib.sha256(repr((df.kind, df.n, df.a, df.b, df.eps, S.matrix.mesh.resolution)).encode()).hexdigest()[:16]
    with open(path, "wb") as fh:
        fh.write(f"{T.shape[0]} {S.measure} {h}\n".encode())
        fh.write(np.ascontiguousarray(T, dtype=np.complex128).tobytes())
