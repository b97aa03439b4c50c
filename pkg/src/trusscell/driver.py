"""Optimization driver: evaluate, differentiate, update, repeat.

One iteration projects the bars to the density field, solves the six cell
problems, forms the objective (±K, ±G or nu) and the constraint set, pulls
all gradients back to the scaled design vector, and takes one MMA step under
move limits. The discreteness/exclusion limits tighten whenever the relative
objective change stalls below the trigger; the run stops once the limits sit
at their final values and the objective stalls below objtol.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .config import ConfigError, RunConfig
from .constraints import (
    ContinuationState,
    NoCutConstraint,
    discreteness,
    discreteness_grad,
    mutual_exclusion,
    mutual_exclusion_grad,
    weight_fraction,
    weight_fraction_field_weights,
)
from .design import DesignVector, initial_design, validate_bars_in_region
from .geometry import Bar, _segment_distance_pieces
from .homogenization import (
    PeriodicOperator,
    assemble_and_solve,
    bulk_modulus,
    effective_tensor,
    energy_weights,
    poisson_ratio,
    shear_modulus,
)
from .materials import interpolate_elasticity
from .projection import ProjectionState
from .sensitivities import field_functional_gradient, objective_weight_matrix, property_gradient, sparsity_map
from .symmetry import in_reference_region, reflect_to_reference
from .mma import MmaState, apply_move_limits, mma_update

Array = NDArray[np.float64]


class DriverError(RuntimeError):
    """Non-finite values or other unrecoverable state mid-run."""


@dataclass
class IterationRecord:
    iteration: int
    f: float
    K: float
    G: float
    nu: float
    w_f: float
    g_d: float
    g_m: float
    g_n: float
    eps_d: float
    eps_m: float
    wall_time: float

    HEADER = "iteration,f,K,G,nu,w_f,g_d,g_m,g_n,eps_d,eps_m,wall_time"

    def csv_row(self) -> str:
        return (
            f"{self.iteration},{self.f:.17g},{self.K:.17g},{self.G:.17g},{self.nu:.17g},"
            f"{self.w_f:.17g},{self.g_d:.17g},{self.g_m:.17g},{self.g_n:.17g},"
            f"{self.eps_d:.17g},{self.eps_m:.17g},{self.wall_time:.6g}"
        )


@dataclass
class Evaluation:
    """One full analysis of a design, with or without gradients."""

    bars: list[Bar]
    rho_eff: Array
    CH: Array
    K: float
    G: float
    nu: float
    f: float
    w_f: float
    g_d: float
    g_m: float
    g_n: float
    u: Array
    grad_f: Array | None = None
    grad_wf: Array | None = None
    grad_gd: Array | None = None
    grad_gm: Array | None = None
    grad_gn: Array | None = None
    grad_K: Array | None = None


class OptimizationProblem:
    """Fixed analysis machinery for one configuration."""

    def __init__(self, cfg: RunConfig):
        cfg.validate()
        self.cfg = cfg
        self.materials = cfg.materials()
        self.grid = cfg.grid()
        self.group = cfg.group()
        self.settings = cfg.projection_settings()
        self.op = PeriodicOperator(self.grid)
        self.eval_points = reflect_to_reference(self.grid.centroids, self.group)
        self.no_cut = NoCutConstraint(
            grid=self.grid, group=self.group, window=self.settings.window, k=cfg.aggregation_k
        )
        self.wf_field_weights = weight_fraction_field_weights(self.grid, self.materials)
        self.delta_C = self.materials.stiffness - self.materials.C_min[None, :, :]

    def initial_bars(self, rng: np.random.Generator | None = None, validate: bool = True) -> list[Bar]:
        """Configured explicit bars, or a seeded random starting design.

        validate=True enforces the optimization-start contract (endpoints
        strictly inside the reference region); evaluation-only entry points
        skip it so optimized designs that drifted slightly out of the wedge
        (bounded by the no-cut constraint) can still be re-analyzed.
        """
        cfg = self.cfg
        if cfg.explicit_bars:
            bars = cfg.bars_from_explicit()
            if validate:
                try:
                    validate_bars_in_region(bars, self.group, cfg.cell_edge)
                except ValueError as exc:
                    raise ConfigError(str(exc)) from exc
            return bars
        alpha = cfg.alpha_init if cfg.alpha_init is not None else np.full(cfg.n_materials, 1.0 / cfg.n_materials)
        length = cfg.initial_bar_length if cfg.initial_bar_length is not None else 1e-3 * cfg.cell_edge
        rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        return initial_design(
            n_bars=cfg.num_bars,
            width=cfg.bar_width,
            group=self.group,
            edge=cfg.cell_edge,
            rng=rng,
            alpha_init=alpha,
            length=length,
        )

    def layout(self, bars: list[Bar]) -> DesignVector:
        return DesignVector(n_bars=len(bars), n_materials=self.materials.n_materials, edge=self.cfg.cell_edge)

    def _alpha_matrix(self, bars: list[Bar]) -> Array:
        return np.stack([bar.alpha for bar in bars])

    def _embed_alpha_grad(self, layout: DesignVector, per_alpha: Array) -> Array:
        """Scatter an (n_bars, n_materials) gradient into the z layout."""
        out = np.zeros(layout.size)
        for q in range(layout.n_bars):
            out[q * layout.block + 6 : (q + 1) * layout.block] = per_alpha[q]
        return out

    def _embed_endpoint_grad(self, layout: DesignVector, per_bar: Array) -> Array:
        """Scatter an (n_bars, 6) physical endpoint gradient, edge-scaled."""
        out = np.zeros(layout.size)
        for q in range(layout.n_bars):
            out[q * layout.block : q * layout.block + 6] = per_bar[q]
        return layout.physical_to_scaled_grad(out)

    def evaluate(self, bars: list[Bar], warm_start: Array | None = None, need_grads: bool = True) -> Evaluation:
        cfg = self.cfg
        state = ProjectionState(bars, self.eval_points, self.settings)
        rho_eff = state.rho_eff
        C_field = interpolate_elasticity(rho_eff, self.materials)
        sol = assemble_and_solve(
            self.op, C_field, rtol=cfg.cg_rtol, warm_start=warm_start, method=cfg.linear_solver
        )
        CH, F = effective_tensor(self.op, C_field, sol)
        K, G = bulk_modulus(CH), shear_modulus(CH)
        nu = poisson_ratio(CH)
        f = {"max_bulk": -K, "max_shear": -G, "min_poisson": nu}[cfg.problem]

        alphas = self._alpha_matrix(bars)
        w_f = weight_fraction(rho_eff, self.grid, self.materials)
        g_d = discreteness(alphas, cfg.aggregation_k)
        g_m = mutual_exclusion(alphas, cfg.aggregation_k)

        ev = Evaluation(
            bars=bars, rho_eff=rho_eff, CH=CH, K=K, G=G, nu=nu, f=f,
            w_f=w_f, g_d=g_d, g_m=g_m, g_n=0.0, u=sol.u,
        )
        if not need_grads:
            ev.g_n = self.no_cut.value(bars)
            return ev

        layout = self.layout(bars)
        supports = sparsity_map(bars, self.eval_points, self.settings)
        Q = energy_weights(self.op, F, self.delta_C)

        L_obj = objective_weight_matrix(cfg.problem, CH)
        grad_prop = property_gradient(L_obj, Q, state, layout, supports)
        sign = -1.0 if cfg.problem in ("max_bulk", "max_shear") else 1.0
        ev.grad_f = sign * grad_prop
        if cfg.problem == "min_poisson":
            ev.grad_K = property_gradient(objective_weight_matrix("max_bulk", CH), Q, state, layout, supports)

        ev.grad_wf = field_functional_gradient(self.wf_field_weights, state, layout, supports)
        ev.grad_gd = self._embed_alpha_grad(
            layout, discreteness_grad(alphas, cfg.aggregation_k).reshape(alphas.shape)
        )
        ev.grad_gm = self._embed_alpha_grad(layout, mutual_exclusion_grad(alphas, cfg.aggregation_k))
        ev.g_n, gn_bars = self.no_cut.value_and_grad(bars)
        ev.grad_gn = self._embed_endpoint_grad(layout, gn_bars)

        for name, arr in (("objective", ev.grad_f), ("weight", ev.grad_wf), ("no-cut", ev.grad_gn)):
            if not np.all(np.isfinite(arr)):
                raise DriverError(f"non-finite {name} gradient")
        return ev


@dataclass
class OptimizationResult:
    bars: list[Bar]
    z: Array
    CH: Array
    K: float
    G: float
    nu: float
    w_f: float
    g_d: float
    g_m: float
    g_n: float
    rho_eff: Array
    history: list[IterationRecord]
    z_history: list[Array]
    stop_reason: str
    feasible: bool
    no_cut_offsets: Array
    iterations: int


def _constraint_rows(problem: OptimizationProblem, ev: Evaluation, cont: ContinuationState) -> tuple[Array, Array]:
    cfg = problem.cfg
    g = [ev.w_f - cfg.wf_star, ev.g_d - cont.eps_d, ev.g_m - cont.eps_m, ev.g_n - cfg.eps_no_cut]
    dg = [ev.grad_wf, ev.grad_gd, ev.grad_gm, ev.grad_gn]
    if cfg.problem == "min_poisson":
        g.append(cfg.k_min_bulk - ev.K)
        dg.append(-ev.grad_K)
    return np.array(g), np.stack(dg)


def _is_feasible(problem: OptimizationProblem, ev: Evaluation) -> bool:
    cfg = problem.cfg
    ok = (
        ev.w_f <= cfg.wf_star + 1e-3
        and ev.g_d <= cfg.eps_d_final + 1e-9
        and ev.g_m <= cfg.eps_m_final + 1e-9
        and ev.g_n <= cfg.eps_no_cut + 1e-12
    )
    if cfg.problem == "min_poisson":
        ok = ok and ev.K >= cfg.k_min_bulk - 1e-9
    return ok


def run_optimization(cfg: RunConfig, log=None) -> OptimizationResult:
    """Full run per the configuration; deterministic for a fixed config."""
    problem = OptimizationProblem(cfg)
    bars = problem.initial_bars()
    layout = problem.layout(bars)
    widths = np.array([bar.width for bar in bars])
    offsets = problem.no_cut.calibrate(bars)
    if log:
        log(f"no-cut calibration offsets: {np.array2string(offsets, precision=3)}")

    z = layout.scale(bars)
    mma = MmaState(n=layout.size)
    cont = ContinuationState(
        eps_d=cfg.eps_d_init, eps_m=cfg.eps_m_init,
        eps_d_final=cfg.eps_d_final, eps_m_final=cfg.eps_m_final,
        delta_eps=cfg.delta_eps, delta_f_trigger=cfg.delta_f_trigger,
    )

    history: list[IterationRecord] = []
    z_history: list[Array] = []
    f_old: float | None = None
    warm: Array | None = None
    stop_reason = "max_iters"
    ev: Evaluation | None = None
    t0 = time.perf_counter()

    for it in range(cfg.max_iters):
        bars = layout.unscale(z, widths)
        ev = problem.evaluate(bars, warm_start=warm)
        warm = ev.u
        if not np.isfinite(ev.f):
            raise DriverError(f"non-finite objective at iteration {it}")
        history.append(
            IterationRecord(
                iteration=it, f=ev.f, K=ev.K, G=ev.G, nu=ev.nu, w_f=ev.w_f,
                g_d=ev.g_d, g_m=ev.g_m, g_n=ev.g_n,
                eps_d=cont.eps_d, eps_m=cont.eps_m,
                wall_time=time.perf_counter() - t0,
            )
        )
        z_history.append(z.copy())
        if log:
            r = history[-1]
            log(
                f"it {r.iteration:3d}  f {r.f: .6e}  K {r.K:.5f}  G {r.G:.5f}  nu {r.nu: .4f}  "
                f"wf {r.w_f:.4f}  gd {r.g_d:.4f}  gm {r.g_m: .4f}  gn {r.g_n: .2e}  "
                f"eps ({r.eps_d:.2f},{r.eps_m:.2f})"
            )

        delta_f = np.inf if f_old is None else abs(ev.f - f_old) / max(abs(f_old), 1e-12)
        if it >= 2 and cont.finished and delta_f <= cfg.objtol:
            stop_reason = "objtol"
            break
        if f_old is not None:
            cont.step(delta_f)

        g, dg = _constraint_rows(problem, ev, cont)
        lower, upper = apply_move_limits(z, cfg.move_limit)
        z = mma_update(mma, z, ev.grad_f, g, dg, lower, upper)
        f_old = ev.f

    if ev is None or stop_reason == "max_iters":
        # final (or only) design has not been evaluated yet
        bars = layout.unscale(z, widths)
        ev = problem.evaluate(bars, warm_start=warm, need_grads=False)

    return OptimizationResult(
        bars=ev.bars, z=layout.scale(ev.bars), CH=ev.CH, K=ev.K, G=ev.G, nu=ev.nu,
        w_f=ev.w_f, g_d=ev.g_d, g_m=ev.g_m, g_n=ev.g_n, rho_eff=ev.rho_eff,
        history=history, z_history=z_history, stop_reason=stop_reason,
        feasible=_is_feasible(problem, ev), no_cut_offsets=offsets,
        iterations=len(history),
    )


def homogenize_design(cfg: RunConfig) -> Evaluation:
    """Evaluate the configured (explicit or seeded) design without optimizing.

    The no-cut value reported here is raw (uncalibrated): there is no
    optimization run to calibrate against.
    """
    problem = OptimizationProblem(cfg)
    bars = problem.initial_bars(validate=False)
    return problem.evaluate(bars, need_grads=False)


@dataclass
class GradientAuditRow:
    design: int
    quantity: str
    max_rel_error: float
    checked: int
    skipped: int


def check_gradients(cfg: RunConfig) -> tuple[list[GradientAuditRow], bool]:
    """Central-difference audit of every analytic gradient on random designs.

    Designs are random bars (random endpoints inside the reference wedge,
    uniform alphas). Variables whose perturbation straddles a projection
    branch boundary (|phi| within 1e-4 of the window radius or Heaviside
    band, or an evaluation point within 1e-4 of the bar axis) are skipped:
    one-sided derivatives differ there.
    """
    problem = OptimizationProblem(cfg)
    rng = np.random.default_rng(cfg.fd_seed)
    n_mat = problem.materials.n_materials
    rows: list[GradientAuditRow] = []
    guard = 1e-4

    for design_idx in range(cfg.fd_designs):
        bars = _random_audit_bars(problem, rng, n_mat)
        layout = problem.layout(bars)
        widths = np.array([bar.width for bar in bars])
        problem.no_cut.offsets = None
        ev = problem.evaluate(bars)
        base_u = ev.u

        skip_bar = _branch_boundary_bars(problem, bars, guard)
        quantities = {
            "objective": (ev.f, ev.grad_f),
            "weight_fraction": (ev.w_f, ev.grad_wf),
            "discreteness": (ev.g_d, ev.grad_gd),
            "mutual_exclusion": (ev.g_m, ev.grad_gm),
            "no_cut": (ev.g_n, ev.grad_gn),
        }
        fd = {name: np.zeros(layout.size) for name in quantities}
        checked = np.zeros(layout.size, dtype=bool)
        z0 = layout.scale(bars)
        h = cfg.fd_step
        for j in range(layout.size):
            endpoint_var = (j % layout.block) < 6
            if endpoint_var and skip_bar[j // layout.block]:
                continue
            checked[j] = True
            vals = {}
            for sgn in (+1.0, -1.0):
                zj = z0.copy()
                zj[j] += sgn * h
                bj = layout.unscale(zj, widths)
                e = problem.evaluate(bj, warm_start=base_u, need_grads=False)
                vals[sgn] = {"objective": e.f, "weight_fraction": e.w_f, "discreteness": e.g_d,
                             "mutual_exclusion": e.g_m, "no_cut": e.g_n}
            for name in quantities:
                fd[name][j] = (vals[1.0][name] - vals[-1.0][name]) / (2.0 * h)

        n_checked = int(np.sum(checked))
        for name, (_, grad) in quantities.items():
            a, f_ = grad[checked], fd[name][checked]
            if n_checked == 0:
                err = 0.0
            else:
                # infinity-norm relative error of the gradient vector
                err = float(np.max(np.abs(a - f_)) / max(np.max(np.abs(f_)), 1e-12))
            rows.append(
                GradientAuditRow(
                    design=design_idx, quantity=name, max_rel_error=err,
                    checked=n_checked, skipped=int(layout.size - n_checked),
                )
            )
    passed = all(row.max_rel_error <= cfg.fd_rel_tol for row in rows)
    return rows, passed


def _random_audit_bars(problem: OptimizationProblem, rng: np.random.Generator, n_mat: int) -> list[Bar]:
    """Random finite-length bars strictly inside the reference region."""
    cfg = problem.cfg
    bars = []
    margin = 0.02 * cfg.cell_edge
    while len(bars) < cfg.num_bars:
        pts = rng.uniform(margin, cfg.cell_edge - margin, size=(2, 3))
        if not np.all(in_reference_region(pts, problem.group, tol=-margin)):
            continue
        if np.linalg.norm(pts[1] - pts[0]) < 0.05 * cfg.cell_edge:
            continue
        bars.append(Bar(x0=pts[0], xf=pts[1], width=cfg.bar_width, alpha=rng.uniform(0.05, 0.95, size=n_mat)))
    return bars


def _branch_boundary_bars(problem: OptimizationProblem, bars: list[Bar], guard: float) -> NDArray[np.bool_]:
    """Bars with any evaluation point near a kink of the projection chain."""
    settings = problem.settings
    r, eps = settings.window.radius, settings.band
    flags = np.zeros(len(bars), dtype=bool)
    for pts in (problem.eval_points, problem.no_cut.region_points):
        state_pts = np.atleast_2d(pts)
        for q, bar in enumerate(bars):
            d, _, _ = _segment_distance_pieces(state_pts, bar.x0, bar.xf)
            phi = d - 0.5 * bar.width
            near = (
                np.any(np.abs(np.abs(phi) - r) < guard)
                or np.any(np.abs(np.abs(phi) - eps) < guard)
                or np.any(d < guard)
            )
            flags[q] = flags[q] or near
    return flags
