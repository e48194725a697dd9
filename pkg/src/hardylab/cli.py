"""Command-line harness: named experiments driven by strict JSON configs.

    hardylab run --config <path> --out <dir> [--seed <u64>] [--threads <k>]
    hardylab sweep --config <path> --param <name> --values <csv-list> --out <dir>

Each run writes one CSV per table (``<experiment>_<table>.csv``) and a JSON
summary with pass/fail per assertion.  Exit codes: 0 all assertions pass,
2 configuration error, 3 numerical assertion failure, 4 internal error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import __version__
from .geometry import DefiningFunction, GeometryError, from_spec, t_max

EXPERIMENTS = ("repro", "identities", "density", "norms", "kernel-estimates", "flow", "szego-compare")
SWEEP_PARAMS = ("resolution", "t", "beta", "eps_p")

DEFAULT_TOLERANCES = {
    "repro": {"max_error": 1e-6, "constant": 1e-8, "order": 2.0},
    "identities": {"identity": 1e-4, "invariant": 1e-4, "hardy": 5e-3, "separation": 0.5, "kernel": 1e-10},
    "density": {"final": 1e-2},
    "norms": {"band": 10.0, "pointwise": 1e-8, "monotone": 1e-8},
    "kernel-estimates": {"ball_ratio": 1e-12, "lower_bound": 0.2, "profile_factor": 4.0, "band_lo": 0.1, "band_hi": 10.0},
    "flow": {"defect": 1e-9, "sphere": 1e-9, "jacobian": 1e-6, "change_of_vars": 1e-6},
    "szego-compare": {"weighted": 1e-4, "invariant": 5e-3},
}

DEFAULT_T_GRID = {
    "density": [-0.1, -0.05, -0.02, -0.01],
    "kernel-estimates": [-0.1, -0.05, -0.02, -0.01],
    "norms": [0.01, 0.02, 0.05, 0.1],
    "flow": [-0.1, -0.05, -0.02, 0.02, 0.05, 0.1],
}

DEFAULT_FUNCTIONS = {
    "density": ["one", "z1", "pole"],
    "norms": ["one", "z1", "pole-0.9"],
    "identities": ["one", "z1", "z2", "z1^2", "z1*z2", "z2^2", "z1^3", "z1^2*z2", "exp(z1)", "1/(1-0.5*z1)", "conj(z1)"],
}


# ------------------------------------------------------------ test functions
@dataclass(frozen=True)
class TestFunction:
    func: object
    holomorphic: bool
    slices: tuple       # density target slices valid for |F_t - f|, strongest first


def _z(k):
    return lambda z: z[..., k]


_SYM = ("phi1-phi2", "phi2-conj", "all")
TEST_FUNCTIONS = {
    "one": TestFunction(lambda z: np.ones(z.shape[:-1], dtype=complex), True, _SYM),
    "z1": TestFunction(_z(0), True, _SYM),
    "z2": TestFunction(lambda z: z[..., 1] + 0j, True, ("all",)),
    "z1^2": TestFunction(lambda z: z[..., 0] ** 2, True, _SYM),
    "z1*z2": TestFunction(lambda z: z[..., 0] * z[..., 1], True, ("all",)),
    "z2^2": TestFunction(lambda z: z[..., 1] ** 2 + 0j, True, ("all",)),
    "z1^3": TestFunction(lambda z: z[..., 0] ** 3, True, _SYM),
    "z1^2*z2": TestFunction(lambda z: z[..., 0] ** 2 * z[..., 1], True, ("all",)),
    "exp(z1)": TestFunction(lambda z: np.exp(z[..., 0]), True, _SYM[1:]),
    "1/(1-0.5*z1)": TestFunction(lambda z: 1 / (1 - 0.5 * z[..., 0]), True, _SYM[1:]),
    "pole": TestFunction(lambda z: 1 / (z[..., 0] - 1.05), True, _SYM[1:]),
    "pole-0.9": TestFunction(lambda z: 1 / (1 - 0.9 * z[..., 0]), True, _SYM[1:]),
    "conj(z1)": TestFunction(lambda z: np.conj(z[..., 0]), False, ("all",)),
}


# ------------------------------------------------------------------- config
class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DomainConfig(_Strict):
    kind: Literal["ball", "complex-ellipsoid", "real-ellipsoid", "perturbed-ball"]
    n: Literal[1, 2] = 2
    a: list[float] = []
    b: list[float] = []
    eps: float = 0.0

    def build(self) -> DefiningFunction:
        return from_spec(self.model_dump())


class KernelConfig(_Strict):
    denominator: Literal["leray", "levi"] = "leray"
    measure: Literal["lebesgue", "leray-levi"] = "lebesgue"


class ExperimentConfig(_Strict):
    experiment: Literal["repro", "identities", "density", "norms", "kernel-estimates", "flow", "szego-compare"]
    domain: DomainConfig
    resolution: Optional[list[int]] = None            # finest level; None = reference
    levels: int = Field(1, ge=1, le=4)                # dyadic levels ending at ``resolution``
    kernel: KernelConfig = KernelConfig()
    t_grid: Optional[list[float]] = None
    p_values: list[float] = [2.0]
    tolerances: dict[str, float] = {}
    output_dir: Optional[str] = None
    seed: int = Field(0, ge=0, lt=2**64)
    functions: Optional[list[str]] = None
    n_points: int = Field(20, ge=1)
    standoff: float = Field(0.05, gt=0)
    aperture: float = 2.0
    betas: list[float] = [0.5, 1.0]
    r_grid: list[float] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]
    targets: str = "auto"
    rule: Optional[list[int]] = [16, 12, 16, 48, 32]  # approximant quadrature orders for density runs
    szego: Literal["kerzman-stein", "closed-form", "gram"] = "kerzman-stein"

    @field_validator("aperture")
    @classmethod
    def _aperture(cls, v):
        if not v > 1:
            raise ValueError("aperture must exceed 1")
        return v

    @field_validator("p_values")
    @classmethod
    def _p(cls, v):
        if not v or any(not 1 < p < math.inf for p in v):
            raise ValueError("p values must lie in (1, infinity)")
        return v

    @field_validator("betas")
    @classmethod
    def _betas(cls, v):
        if any(not 0 < b <= 1 for b in v):
            raise ValueError("integrability exponents must lie in (0, 1]")
        return v

    @field_validator("rule")
    @classmethod
    def _rule(cls, v):
        if v is not None and (len(v) != 5 or any(k < 4 for k in v)):
            raise ValueError("rule needs five orders (nv, ntau, nsf, nphi1, nphi2), each >= 4")
        return v

    @model_validator(mode="after")
    def _check(self):
        try:
            df = self.domain.build()
        except GeometryError as exc:
            raise ValueError(str(exc)) from None
        defaults = DEFAULT_TOLERANCES[self.experiment]
        for k, v in self.tolerances.items():
            if k not in defaults:
                raise ValueError(f"unknown tolerance {k!r} for {self.experiment}; expected one of {sorted(defaults)}")
            if not v > 0:
                raise ValueError(f"tolerance {k!r} must be > 0")
        if self.resolution is not None:
            need = 1 if df.n == 1 else 3
            if len(self.resolution) != need or any(r < 2 for r in self.resolution):
                raise ValueError(f"resolution needs {need} entries >= 2 for n = {df.n}")
            if any(r % 2 ** (self.levels - 1) for r in self.resolution):
                raise ValueError("resolution must be divisible by 2^(levels-1)")
        for name in self.functions or []:
            if name not in TEST_FUNCTIONS:
                raise ValueError(f"unknown test function {name!r}; known: {sorted(TEST_FUNCTIONS)}")
        tg = self.t_grid
        if tg is not None:
            if not tg:
                raise ValueError("t-grid must not be empty")
            if self.experiment in ("density", "kernel-estimates") and any(not t < 0 for t in tg):
                raise ValueError("density requires t < 0" if self.experiment == "density" else "comparability requires t < 0")
            if self.experiment == "norms" and any(not t > 0 for t in tg):
                raise ValueError("exhaustion requires t > 0")
            if any(abs(t) > t_max(df) for t in tg):
                raise ValueError(f"|t| must not exceed t_max = {t_max(df)}")
        if self.experiment == "density" and self.targets not in ("auto", "all", "phi2", "phi2-conj", "phi1-phi2"):
            raise ValueError(f"unknown target slice {self.targets!r}")
        if not self.r_grid or not (0 < min(self.r_grid) and max(self.r_grid) < 1):
            raise ValueError("r-grid must lie in (0, 1)")
        return self

    # resolved settings
    @property
    def tol(self):
        return {**DEFAULT_TOLERANCES[self.experiment], **self.tolerances}

    @property
    def t_values(self):
        return self.t_grid if self.t_grid is not None else DEFAULT_T_GRID.get(self.experiment, [])

    @property
    def function_names(self):
        return self.functions if self.functions is not None else DEFAULT_FUNCTIONS.get(self.experiment, [])

    def config_hash(self):
        body = json.dumps(self.model_dump(exclude={"output_dir"}), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(body.encode()).hexdigest()


class ConfigError(ValueError):
    """Invalid configuration (exit status 2)."""


def load_config(path, seed=None) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if seed is not None:
        data["seed"] = seed
    return parse_config(data)


def parse_config(data) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        msgs = "; ".join(f"{'.'.join(map(str, e['loc'])) or 'config'}: {e['msg'].removeprefix('Value error, ')}" for e in exc.errors())
        raise ConfigError(msgs) from None


# ------------------------------------------------------------------- reports
@dataclass
class ReportTable:
    columns: list
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, *row):
        if len(row) != len(self.columns):
            raise ValueError(f"row width {len(row)} differs from header width {len(self.columns)}")
        self.rows.append(tuple(row))

    def column(self, name):
        k = self.columns.index(name)
        return [r[k] for r in self.rows]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(self.columns)
            for r in self.rows:
                wr.writerow([_fmt(x) for x in r])


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


@dataclass
class Assertion:
    name: str
    passed: bool
    value: float
    bound: str
    table: str = ""
    row: int = -1

    def describe(self):
        where = f" (table {self.table}, row {self.row})" if self.table else ""
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.value:.6g} {self.bound}{where}"


@dataclass
class ExperimentResult:
    tables: dict
    assertions: list
    headline: float

    def check(self, name, value, ok, bound, table="", row=-1):
        self.assertions.append(Assertion(name, bool(ok), float(value), bound, table, row))

    @property
    def passed(self):
        return all(a.passed for a in self.assertions)


# -------------------------------------------------------------------- helpers
def _levels(cfg: ExperimentConfig, df):
    from .mesh import REFERENCE_RESOLUTION

    top = tuple(cfg.resolution) if cfg.resolution is not None else tuple(np.atleast_1d(REFERENCE_RESOLUTION[df.n]))
    return [tuple(r // 2**k for r in top) for k in range(cfg.levels - 1, -1, -1)]


def sample_interior(df, count, standoff, seed):
    """Points of D at distance >= standoff from bD, from a counter-based generator keyed by ``seed``."""
    from .transforms import boundary_distance

    rng = np.random.Generator(np.random.Philox(key=seed))
    out = []
    while len(out) < count:
        x = rng.normal(size=2 * df.n)
        u = (x[0::2] + 1j * x[1::2]) / np.linalg.norm(x)
        R = df.ray_hit(np.zeros(df.n, dtype=complex), u[None, :])[0]
        z = rng.uniform(0.0, 1.0) * R * u
        if df.rho(z) < 0 and boundary_distance(df, z[None, :])[0] >= standoff:
            out.append(z)
    return np.array(out)


def _monomials(n, degree=4):
    if n == 1:
        return [(k,) for k in range(degree + 1)]
    return [(a, b) for a in range(degree + 1) for b in range(degree + 1 - a)]


def _monomial(exps):
    def f(z):
        out = np.ones(z.shape[:-1], dtype=complex)
        for j, e in enumerate(exps):
            out = out * z[..., j] ** e
        return out

    return f


def _order(prev, cur):
    return math.log2(prev / cur) if prev > 0 and cur > 0 else math.inf if cur == 0 < prev else math.nan


# ---------------------------------------------------------------- experiments
def run_repro(cfg, df):
    """Interior reproduction of monomial traces of degree <= 4 and of the constant 1."""
    from .mesh import BoundaryFunction, build_mesh
    from .transforms import CauchyOperator, interior_cauchy

    tol = cfg.tol
    Z = sample_interior(df, cfg.n_points, cfg.standoff, cfg.seed)
    mons = _monomials(df.n)
    tab = ReportTable(["level", "N", "max_error", "constant_error", "order"])
    res = ExperimentResult({"levels": tab}, [], math.nan)
    prev = None
    for lev, r in enumerate(_levels(cfg, df)):
        mesh = build_mesh(df, r)
        op = CauchyOperator(mesh, cfg.kernel.denominator, cfg.kernel.measure)
        fs = [BoundaryFunction.from_callable(mesh, _monomial(e)) for e in mons]
        err = cerr = 0.0
        for z in Z:
            vals = interior_cauchy(op, fs, z, cfg.standoff)
            exact = np.array([_monomial(e)(z) for e in mons])
            err = max(err, float(np.max(np.abs(vals - exact))))
            cerr = max(cerr, float(abs(vals[0] - 1)))
        order = _order(prev, err) if prev is not None else math.nan
        tab.add(lev, mesh.N, err, cerr, order)
        prev = err
    last = len(tab.rows) - 1
    res.check("max_error", err, err <= tol["max_error"], f"<= {tol['max_error']:g}", "levels", last)
    res.check("constant_error", cerr, cerr <= tol["constant"], f"<= {tol['constant']:g}", "levels", last)
    if last >= 1:
        o = tab.rows[last][-1]
        res.check("order", o, o >= tol["order"], f">= {tol['order']:g}", "levels", last)
    res.headline = err
    return res


def _szego(op, method):
    from .szego import ball_szego_matrix, kerzman_stein_szego

    if method == "kerzman-stein":
        return kerzman_stein_szego(op)
    return ball_szego_matrix(op, method)


def run_identities(cfg, df):
    """Projection identities and invariants of S per level; Hardy characterizations on the finest level.

    On the ball the leray kernel density is also compared entrywise with the closed-form Szego kernel.
    """
    from .mesh import BoundaryFunction, build_mesh
    from .szego import ball_kernel_deviation, projection_identities, szego_characterization_residual
    from .transforms import CauchyOperator, hardy_membership_residual

    tol = cfg.tol
    tab = ReportTable(["level", "N", "CS_minus_S", "SC_minus_C", "self_adjoint", "idempotence", "norm"])
    char = ReportTable(["function", "holomorphic", "norm_f", "cauchy_residual", "szego_residual", "cauchy_rel", "szego_rel"])
    res = ExperimentResult({"levels": tab, "characterization": char}, [], math.nan)
    for lev, r in enumerate(_levels(cfg, df)):
        mesh = build_mesh(df, r)
        op = CauchyOperator(mesh, cfg.kernel.denominator, cfg.kernel.measure)
        S = _szego(op, cfg.szego)
        a, b = projection_identities(S, op)
        inv = S.invariants()
        tab.add(lev, mesh.N, a, b, inv["self_adjoint"], inv["idempotence"], inv["norm"])
    last = len(tab.rows) - 1
    for name, k in (("CS_minus_S", 2), ("SC_minus_C", 3)):
        v = tab.rows[last][k]
        res.check(name, v, v <= tol["identity"], f"<= {tol['identity']:g}", "levels", last)
        if last >= 1:
            res.check(f"{name}_decreasing", v, v < tab.rows[last - 1][k], f"< {tab.rows[last - 1][k]:.6g}", "levels", last)
    for name, k in (("self_adjoint", 4), ("idempotence", 5)):
        v = tab.rows[last][k]
        res.check(name, v, v <= tol["invariant"], f"<= {tol['invariant']:g}", "levels", last)
    for i, name in enumerate(cfg.function_names):
        tf = TEST_FUNCTIONS[name]
        f = BoundaryFunction(mesh, tf.func(mesh.nodes), name)
        cr = hardy_membership_residual(op, f)
        sr = szego_characterization_residual(S, f).residual
        nf_mu = f.lp_norm(2)
        char.add(name, tf.holomorphic, nf_mu, cr, sr, cr / nf_mu, sr / nf_mu)
        if tf.holomorphic:
            res.check(f"hardy[{name}]", max(cr, sr), max(cr, sr) <= tol["hardy"], f"<= {tol['hardy']:g}", "characterization", i)
        else:
            res.check(f"separation[{name}]", min(cr, sr) / nf_mu, min(cr, sr) >= tol["separation"] * nf_mu, f">= {tol['separation']:g} (relative)", "characterization", i)
    if df.kind == "ball" and cfg.kernel.denominator == "leray":
        dev = ball_kernel_deviation(mesh)
        kt = ReportTable(["quantity", "value"])
        kt.add("max_rel_deviation_leray_vs_szego", dev)
        res.tables["kernel"] = kt
        res.check("ball_kernel_deviation", dev, dev <= tol["kernel"], f"<= {tol['kernel']:g}", "kernel", 0)
    res.headline = max(tab.rows[last][2], tab.rows[last][3])
    return res


def _slice_for(tf: TestFunction, mesh, requested):
    from .hardy import ConfigurationError, target_slice

    if requested != "auto":
        return requested
    for s in tf.slices:
        try:
            target_slice(mesh, s)
            return s
        except ConfigurationError:
            continue
    return "all"


def run_density(cfg, df):
    """Sup-error of the shifted-kernel approximants F_t over the t-grid."""
    from .hardy import density_experiment
    from .mesh import BoundaryFunction, build_mesh
    from .quadrature import RuleParams
    from .transforms import CauchyOperator

    tol = cfg.tol
    mesh = build_mesh(df, _levels(cfg, df)[-1])
    op = CauchyOperator(mesh, cfg.kernel.denominator, cfg.kernel.measure)
    rule = RuleParams(*cfg.rule) if cfg.rule is not None else None
    tab = ReportTable(["function", "t", "sup_err", "I_term", "II_term", "targets", "slice"])
    res = ExperimentResult({"table": tab}, [], 0.0)
    for name in cfg.function_names:
        tf = TEST_FUNCTIONS[name]
        f = BoundaryFunction.from_callable(mesh, tf.func, name)
        sl = _slice_for(tf, mesh, cfg.targets)
        T = density_experiment(op, f, cfg.t_values, targets=sl, rule=rule)
        first = len(tab.rows)
        order = np.argsort(-np.abs(T.t))
        for k in order:
            tab.add(name, T.t[k], T.sup_err[k], T.I_term[k], T.II_term[k], T.targets, sl)
        last = len(tab.rows) - 1
        errs = [T.sup_err[k] for k in order]
        if name == "one":
            res.check("zero[one]", max(errs), max(errs) == 0.0, "== 0", "table", first + int(np.argmax(errs)))
            continue
        bad = [i for i in range(1, len(errs)) if not errs[i] < errs[i - 1]]
        res.check(f"decreasing[{name}]", float(len(bad)), not bad, "non-decreasing steps == 0", "table", first + (bad[0] if bad else 0))
        res.check(f"final[{name}]", errs[-1], errs[-1] <= tol["final"], f"<= {tol['final']:g}", "table", last)
        res.headline = max(res.headline, errs[-1])
    return res


def run_norms(cfg, df):
    """Exhaustion, trace and nontangential-maximal norms of the test family."""
    from .hardy import ConeParams, exhaustion_table, nontangential_max
    from .mesh import build_mesh
    from .flow import flow_map

    tol = cfg.tol
    mesh = build_mesh(df, _levels(cfg, df)[-1])
    cones = ConeParams(beta=cfg.aperture)
    tvals = sorted(cfg.t_values)
    flows = [flow_map(mesh, -t) for t in tvals]
    tab = ReportTable(["function", "p", "exhaustion", "trace", "maximal", "exh_over_trace", "max_over_trace", "max_over_exh", "band", "pointwise_excess"])
    ex = ReportTable(["function", "p", "t", "level_norm"])
    res = ExperimentResult({"table": tab, "exhaustion": ex}, [], 0.0)
    for name in cfg.function_names:
        F = TEST_FUNCTIONS[name].func
        tr = np.abs(F(mesh.nodes))
        NF = nontangential_max(F, cones, mesh).values.real
        for p in cfg.p_values:
            rows = exhaustion_table(F, p, tvals, mesh, flows)
            for t, v in rows:
                ex.add(name, p, t, v)
            exh = max(v for _, v in rows)
            trace = float(np.sum(tr**p * mesh.mu) ** (1 / p))
            maximal = float(np.sum(NF**p * mesh.mu) ** (1 / p))
            ratios = (exh / trace, maximal / trace, maximal / exh)
            band = max(max(q, 1 / q) for q in ratios)
            excess = float(np.max(tr - NF))
            tab.add(name, p, exh, trace, maximal, *ratios, band, excess)
            i = len(tab.rows) - 1
            res.check(f"trace_le_maximal[{name},p={p:g}]", trace - maximal, trace <= maximal + tol["pointwise"], f"<= {tol['pointwise']:g}", "table", i)
            res.check(f"pointwise[{name},p={p:g}]", excess, excess <= tol["pointwise"], f"<= {tol['pointwise']:g}", "table", i)
            res.check(f"band[{name},p={p:g}]", band, band <= tol["band"], f"<= {tol['band']:g}", "table", i)
            if df.kind == "ball" and TEST_FUNCTIONS[name].holomorphic:
                v = [val for _, val in rows]          # t ascending: norms must not increase
                rise = max([0.0] + [v[k + 1] - v[k] for k in range(len(v) - 1)])
                res.check(f"monotone[{name},p={p:g}]", rise, rise <= tol["monotone"], f"<= {tol['monotone']:g}", "exhaustion", len(ex.rows) - 1)
            res.headline = max(res.headline, band)
    return res


def run_kernel_estimates(cfg, df):
    """Lower bound for Re g, quasi-ball integrability profiles and flow comparability."""
    from .kernels import DenominatorSpec, EstimateViolation, check_lower_bound, flow_comparability, integrability_profile
    from .mesh import build_mesh

    tol = cfg.tol
    mesh = build_mesh(df, _levels(cfg, df)[-1])
    spec = DenominatorSpec(cfg.kernel.denominator, df)
    lb = ReportTable(["quantity", "value"])
    prof = ReportTable(["beta", "r", "inner_ratio", "outer_ratio"])
    comp = ReportTable(["t", "lo", "hi"])
    res = ExperimentResult({"lower_bound": lb, "integrability": prof, "comparability": comp}, [], 0.0)

    idx = np.unique(np.linspace(0, mesh.N - 1, min(512, mesh.N)).astype(int))
    zs = np.concatenate([mesh.nodes[idx], sample_interior(df, 64, 1e-3, cfg.seed)])
    try:
        ratio = check_lower_bound(spec, mesh.nodes[idx], zs)
    except EstimateViolation:
        ratio = -1.0
    lb.add("lower_bound_ratio", ratio)
    if df.kind == "ball":
        res.check("lower_bound[ball]", abs(ratio - 0.5), abs(ratio - 0.5) <= tol["ball_ratio"], f"<= {tol['ball_ratio']:g}", "lower_bound", 0)
    else:
        res.check("lower_bound", ratio, ratio >= tol["lower_bound"], f">= {tol['lower_bound']:g}", "lower_bound", 0)

    if df.n == 2:
        worst = 0.0
        for beta in cfg.betas:
            P = integrability_profile(mesh, spec, 0, beta, cfg.r_grid)
            first = len(prof.rows)
            for k in range(P.r.size):
                prof.add(beta, P.r[k], P.inner_ratio[k], P.outer_ratio[k])
            for col in ("inner", "outer"):
                b = P.band(col)
                worst = max(worst, b)
                res.check(f"profile[{col},beta={beta:g}]", b, b <= tol["profile_factor"], f"<= {tol['profile_factor']:g}", "integrability", first)
        res.headline = worst

    for t in cfg.t_values:
        lo, hi = flow_comparability(mesh, spec, t, band=None)
        comp.add(t, lo, hi)
        ok = lo >= tol["band_lo"] and hi <= tol["band_hi"]
        res.check(f"comparability[t={t:g}]", hi if lo >= tol["band_lo"] else lo, ok, f"in [{tol['band_lo']:g}, {tol['band_hi']:g}]", "comparability", len(comp.rows) - 1)
    return res


def run_flow(cfg, df):
    """Level-set defect of the normal flow, sphere closed forms and the change of variables."""
    from .flow import change_of_vars_check, flow_map
    from .mesh import build_mesh

    tol = cfg.tol
    mesh = build_mesh(df, _levels(cfg, df)[-1])
    n = df.n
    tab = ReportTable(["t", "rho_defect", "sphere_error", "jacobian_error", "change_of_vars"])
    res = ExperimentResult({"table": tab}, [], 0.0)
    one = lambda z: np.ones(z.shape[:-1])
    for i, t in enumerate(cfg.t_values):
        fm = flow_map(mesh, t)
        defect = float(np.max(np.abs(df.rho(fm.images) - t)))
        if df.kind == "ball":
            sph = float(np.max(np.abs(fm.images - math.sqrt(1 + t) * mesh.nodes)))
            jac = float(np.max(np.abs(fm.jacobian - (1 + t) ** ((2 * n - 1) / 2))))
        else:
            sph = jac = math.nan
        cov = change_of_vars_check(mesh, t, one, fm)[0]
        tab.add(t, defect, sph, jac, cov)
        res.check(f"defect[t={t:g}]", defect, defect <= tol["defect"], f"<= {tol['defect']:g}", "table", i)
        if df.kind == "ball":
            res.check(f"sphere[t={t:g}]", sph, sph <= tol["sphere"], f"<= {tol['sphere']:g}", "table", i)
            res.check(f"jacobian[t={t:g}]", jac, jac <= tol["jacobian"], f"<= {tol['jacobian']:g}", "table", i)
        res.check(f"change_of_vars[t={t:g}]", cov, cov <= tol["change_of_vars"], f"<= {tol['change_of_vars']:g}", "table", i)
        res.headline = max(res.headline, defect)
    return res


def run_szego_compare(cfg, df):
    """Weighted projections S_omega against S: omega = 1, the Leray-Levi measure, and the invariant suite."""
    from .mesh import build_mesh
    from .szego import kerzman_stein_szego, operator_difference, projection_identities, weighted_szego
    from .transforms import CauchyOperator

    tol = cfg.tol
    mesh = build_mesh(df, _levels(cfg, df)[-1])
    den = cfg.kernel.denominator
    op = CauchyOperator(mesh, den, "lebesgue")
    S = kerzman_stein_szego(op)
    op1 = CauchyOperator(mesh, den, lambda w: np.ones(w.shape[:-1]))
    S1 = weighted_szego(op1)
    opw = CauchyOperator(mesh, den, "leray-levi")
    Sw = weighted_szego(opw)
    tab = ReportTable(["quantity", "value"])
    res = ExperimentResult({"table": tab}, [], 0.0)

    same = S1.coef.shape == S.coef.shape and np.array_equal(S1.coef, S.coef)
    d1 = float(np.max(np.abs(S1.coef - S.coef))) if S1.coef.shape == S.coef.shape else math.inf
    tab.add("omega_one_max_abs_diff", d1)
    res.check("omega_one_bitwise", d1, same, "bit-identical", "table", 0)
    dw = operator_difference(Sw, S)
    tab.add("leray_levi_vs_lebesgue", dw)
    if df.kind == "ball":
        res.check("leray_levi_vs_lebesgue[ball]", dw, dw <= tol["weighted"], f"<= {tol['weighted']:g}", "table", 1)
    a, b = projection_identities(Sw, opw)
    inv = Sw.invariants()
    for name, v in (("weighted_CS_minus_S", a), ("weighted_SC_minus_C", b),
                    ("weighted_self_adjoint", inv["self_adjoint"]), ("weighted_idempotence", inv["idempotence"])):
        tab.add(name, v)
        res.check(name, v, v <= tol["invariant"], f"<= {tol['invariant']:g}", "table", len(tab.rows) - 1)
        res.headline = max(res.headline, v)
    return res


RUNNERS = {
    "repro": run_repro,
    "identities": run_identities,
    "density": run_density,
    "norms": run_norms,
    "kernel-estimates": run_kernel_estimates,
    "flow": run_flow,
    "szego-compare": run_szego_compare,
}


# ---------------------------------------------------------------------- driver
def execute(cfg: ExperimentConfig, out) -> ExperimentResult:
    """Run the configured experiment and write its CSV tables and JSON summary into ``out``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    res = RUNNERS[cfg.experiment](cfg, cfg.domain.build())
    wall = time.perf_counter() - t0
    meta = {"config_hash": cfg.config_hash(), "code_version": __version__, "wall_time": wall}
    for name, tab in res.tables.items():
        tab.metadata = meta
        tab.to_csv(out / f"{cfg.experiment}_{name}.csv")
    summary = {
        "experiment": cfg.experiment,
        **meta,
        "config": cfg.model_dump(),
        "passed": res.passed,
        "headline": res.headline,
        "assertions": [a.__dict__ for a in res.assertions],
    }
    (out / f"{cfg.experiment}_summary.json").write_text(json.dumps(summary, indent=2, default=float))
    return res


def _set_threads(k):
    k = k or os.environ.get("HARDYLAB_THREADS")
    if k:
        from threadpoolctl import threadpool_limits

        threadpool_limits(int(k))


def _report(res, stream=None):
    for a in res.assertions:
        print(a.describe(), file=stream or sys.stdout)


def cmd_run(args):
    cfg = load_config(args.config, args.seed)
    out = args.out or cfg.output_dir
    if out is None:
        raise ConfigError("no output directory: pass --out or set output_dir")
    res = execute(cfg, out)
    _report(res)
    return 0 if res.passed else 3


def _apply_param(data, param, value):
    data = json.loads(json.dumps(data))
    if param == "resolution":
        data["resolution"] = [int(v) for v in value.split("x")]
    elif param == "t":
        data["t_grid"] = [float(value)]
    elif param == "beta":
        if data.get("experiment") == "kernel-estimates":
            data["betas"] = [float(value)]
        else:
            data["aperture"] = float(value)
    elif param == "eps_p":
        dom = dict(data.get("domain", {}))
        dom["kind"], dom["eps"] = "perturbed-ball", float(value)
        data["domain"] = dom
    return data


def cmd_sweep(args):
    if args.param not in SWEEP_PARAMS:
        raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMS}")
    values = [v.strip() for v in (args.values or "").split(",") if v.strip()]
    if not values:
        raise ConfigError("sweep needs at least one value")
    try:
        data = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    try:
        cfgs = [parse_config(_apply_param(data, args.param, v)) for v in values]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = Path(args.out)
    conv = ReportTable(["value", "headline", "observed_order", "passed"])
    ok, prev = True, None
    for v, cfg in zip(values, cfgs):
        res = execute(cfg, out / f"{args.param}={v}")
        print(f"[{args.param}={v}]")
        _report(res)
        order = _order(prev, res.headline) if args.param == "resolution" and prev is not None else math.nan
        conv.add(v, res.headline, order, res.passed)
        prev = res.headline
        ok &= res.passed
    conv.to_csv(out / f"sweep_{args.param}.csv")
    return 0 if ok else 3


def build_parser():
    p = argparse.ArgumentParser(prog="hardylab", description="Cauchy-Szego and Hardy-space numerical experiments")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.add_argument("--seed", type=int)
    r.add_argument("--threads", type=int)
    s = sub.add_parser("sweep", help="run an experiment over a parameter list")
    s.add_argument("--config", required=True)
    s.add_argument("--param", required=True)
    s.add_argument("--values", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--threads", type=int)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        _set_threads(args.threads)
        return cmd_run(args) if args.command == "run" else cmd_sweep(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal error: report and map to exit status 4
        from .hardy import ConfigurationError
        from .szego import ConditioningError

        if isinstance(exc, ConfigurationError):
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        if isinstance(exc, ConditioningError):
            print(f"assertion failure: {exc}", file=sys.stderr)
            return 3
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
