"""Synchronous round-based executors: D-BFGS, DGD, DD, and consensus ADMM.

Every runner consumes the same objective abstraction and emits a Trace.
Exchange accounting is fixed per method: D-BFGS costs 2 exchanges per
iteration in dual mode and 3 in primal mode; the first-order baselines
cost 1.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from ._kernel import RoundKernel
from .curvature import SKIP_THRESHOLD, CurvatureState
from .netgraph import Graph
from .objectives import DistributedObjective, consensus_error, solve_consensus_optimum

__all__ = [
    "SyncConfig",
    "Trace",
    "DbfgsSyncEngine",
    "run_dbfgs_sync",
    "run_dgd",
    "run_dd",
    "run_admm",
    "exchanges_per_iteration",
    "DIVERGENCE_LIMIT",
]

DIVERGENCE_LIMIT = 1e12

SYNC_CSV_HEADER = "iter,error,grad_norm,exchanges,method,mode,seed"
ASYNC_CSV_HEADER = SYNC_CSV_HEADER + ",model_time,local_iter_min"


def exchanges_per_iteration(method: str, mode: str) -> int:
    if method == "dbfgs":
        return 3 if mode == "primal" else 2
    if method in ("dgd", "dd", "admm"):
        return 1
    raise ValueError(f"unknown method {method!r}")


@dataclass
class SyncConfig:
    """Run parameters for the synchronous executors."""

    method: str
    mode: str
    step_size: float
    max_iters: int
    gamma: float | None = None
    big_gamma: float | None = None
    seed: int = 0
    stop_error: float | None = None
    stop_grad_norm: float | None = None
    var0: np.ndarray | None = None

    def validate(self, objective: DistributedObjective) -> None:
        if self.method not in ("dbfgs", "dgd", "dd", "admm"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.mode not in ("primal", "dual"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode != objective.mode:
            raise ValueError(f"config mode {self.mode!r} does not match objective "
                             f"mode {objective.mode!r}")
        if self.step_size <= 0:
            raise ValueError("step size must be positive")
        if self.max_iters < 1:
            raise ValueError("iteration budget must be at least 1")
        if self.method == "dbfgs":
            if self.gamma is None or self.gamma <= 0:
                raise ValueError("dbfgs requires gamma > 0")
            if self.big_gamma is None or self.big_gamma <= 0:
                raise ValueError("dbfgs requires big_gamma > 0")
        if self.method == "dgd" and self.mode != "primal":
            raise ValueError("dgd runs in primal mode only")
        if self.method in ("dd", "admm") and self.mode != "dual":
            raise ValueError(f"{self.method} runs in dual mode only")


@dataclass
class Trace:
    """Per-iteration (or per-event) run records."""

    method: str
    mode: str
    seed: int
    iters: list = field(default_factory=list)
    error: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    exchanges: list = field(default_factory=list)
    model_time: list | None = None
    local_iter_min: list | None = None
    status: str = "max_iters"
    event_log: list | None = None

    @property
    def is_async(self) -> bool:
        return self.model_time is not None

    def append(self, it, err, gnorm, exch, model_time=None, local_iter_min=None):
        self.iters.append(int(it))
        self.error.append(float(err))
        self.grad_norm.append(float(gnorm))
        self.exchanges.append(int(exch))
        if self.is_async:
            self.model_time.append(float(model_time))
            self.local_iter_min.append(int(local_iter_min))

    def error_at(self, iteration: int) -> float:
        """Error at the given iteration (async: minimum local iteration)."""
        axis = self.local_iter_min if self.is_async else self.iters
        arr = np.asarray(axis)
        hits = np.nonzero(arr >= iteration)[0]
        if len(hits) == 0:
            raise ValueError(f"trace never reaches iteration {iteration}")
        return self.error[hits[0]]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write((ASYNC_CSV_HEADER if self.is_async else SYNC_CSV_HEADER) + "\n")
        for k in range(len(self.iters)):
            row = (f"{self.iters[k]},{self.error[k]!r},{self.grad_norm[k]!r},"
                   f"{self.exchanges[k]},{self.method},{self.mode},{self.seed}")
            if self.is_async:
                row += f",{self.model_time[k]!r},{self.local_iter_min[k]}"
            buf.write(row + "\n")
        return buf.getvalue()


def _check_stop(trace: Trace, cfg: SyncConfig) -> bool:
    err, gnorm = trace.error[-1], trace.grad_norm[-1]
    if not np.isfinite(err) or err > DIVERGENCE_LIMIT:
        trace.status = "diverged"
        return True
    if cfg.stop_error is not None and err <= cfg.stop_error:
        trace.status = "error_stop"
        return True
    if cfg.stop_grad_norm is not None and gnorm <= cfg.stop_grad_norm:
        trace.status = "grad_stop"
        return True
    return False


# ---------------------------------------------------------------------------
# D-BFGS synchronous engine
# ---------------------------------------------------------------------------


class DbfgsSyncEngine:
    """Full-network D-BFGS rounds on a shared state.

    The loop is the synchronous algorithm with the bookkeeping rotated one
    step: each call to step() applies the descents computed at the end of
    the previous round, re-evaluates gradients, updates every node's
    curvature from the (previous, current) neighborhood views, and computes
    the next round's descent contributions.
    """

    def __init__(self, graph: Graph, objective: DistributedObjective,
                 gamma: float, big_gamma: float, step_size: float,
                 var0: np.ndarray | None = None):
        self.graph = graph
        self.objective = objective
        self.gamma = gamma
        self.big_gamma = big_gamma
        self.eps = step_size
        p = objective.p
        self.kernel = RoundKernel(graph, p)
        self.var = (np.zeros((graph.n, p)) if var0 is None
                    else np.array(var0, dtype=float))
        self.matrices = [np.eye(graph.m[i] * p) for i in range(graph.n)]
        self.aux = objective.stage1_full(self.var)
        self.g = objective.stage2_full(self.var, self.aux)
        self._prev_var_views = self.kernel.gather_views(self.var)
        self._prev_g_views = self.kernel.gather_views(self.g)
        self.eflat = self.kernel.descent(self.matrices,
                                         self._prev_g_views, big_gamma)
        self.accepted = np.zeros(graph.n, dtype=bool)
        self.last_descent = np.zeros_like(self.var)

    def step(self) -> None:
        self.last_descent = self.kernel.apply_descents(self.var, self.eflat, self.eps)
        self.aux = self.objective.stage1_full(self.var)
        self.g = self.objective.stage2_full(self.var, self.aux)
        var_views = self.kernel.gather_views(self.var)
        g_views = self.kernel.gather_views(self.g)
        self.accepted = self.kernel.bfgs_all(
            self.matrices, self._prev_var_views, var_views,
            self._prev_g_views, g_views, self.gamma, SKIP_THRESHOLD,
        )
        self.eflat = self.kernel.descent(self.matrices, g_views, self.big_gamma)
        self._prev_var_views = var_views
        self._prev_g_views = g_views

    def states(self) -> list:
        """Current curvature as CurvatureState objects (diagnostics/tests)."""
        out = []
        for i in range(self.graph.n):
            st = CurvatureState.initial(self.graph, i, self.objective.p,
                                        self.gamma, self.big_gamma)
            st.matrix = self.matrices[i]
            out.append(st)
        return out


def run_dbfgs_sync(graph: Graph, objective: DistributedObjective,
                   cfg: SyncConfig) -> Trace:
    """Synchronous D-BFGS; in dual mode the iterated variable is nu and the
    machinery descends -psi, so the update ascends the dual function."""
    cfg.validate(objective)
    xstar = solve_consensus_optimum(objective.instance)
    engine = DbfgsSyncEngine(graph, objective, cfg.gamma, cfg.big_gamma,
                             cfg.step_size, cfg.var0)
    cost = exchanges_per_iteration("dbfgs", cfg.mode)
    trace = Trace(method="dbfgs", mode=cfg.mode, seed=cfg.seed)
    for t in range(1, cfg.max_iters + 1):
        engine.step()
        err = consensus_error(objective.recover_x(engine.var), xstar)
        trace.append(t, err, np.linalg.norm(engine.g), t * cost)
        if _check_stop(trace, cfg):
            break
    return trace


# ---------------------------------------------------------------------------
# first-order baselines
# ---------------------------------------------------------------------------


def run_dgd(graph: Graph, objective: DistributedObjective,
            cfg: SyncConfig) -> Trace:
    """Decentralized gradient descent on the scaled penalty objective."""
    cfg.validate(objective)
    xstar = solve_consensus_optimum(objective.instance)
    x = (np.zeros((graph.n, objective.p)) if cfg.var0 is None
         else np.array(cfg.var0, dtype=float))
    g = objective.runtime_grad(x)
    trace = Trace(method="dgd", mode=cfg.mode, seed=cfg.seed)
    for t in range(1, cfg.max_iters + 1):
        x = x - cfg.step_size * g
        g = objective.runtime_grad(x)
        trace.append(t, consensus_error(x, xstar), np.linalg.norm(g), t)
        if _check_stop(trace, cfg):
            break
    return trace


def run_dd(graph: Graph, objective: DistributedObjective,
           cfg: SyncConfig) -> Trace:
    """Dual decomposition: gradient ascent on psi through the Lagrangian
    minimizers. Trace rows carry the state the round computed with (the
    event simulator's rows align with these)."""
    cfg.validate(objective)
    xstar = solve_consensus_optimum(objective.instance)
    nu = (np.zeros((graph.n, objective.p)) if cfg.var0 is None
          else np.array(cfg.var0, dtype=float))
    trace = Trace(method="dd", mode=cfg.mode, seed=cfg.seed)
    for t in range(1, cfg.max_iters + 1):
        aux = objective.stage1_full(nu)
        g = objective.stage2_full(nu, aux)
        trace.append(t, consensus_error(aux, xstar), np.linalg.norm(g), t)
        nu = nu - cfg.step_size * g
        if _check_stop(trace, cfg):
            break
    return trace


def run_admm(graph: Graph, objective: DistributedObjective, cfg: SyncConfig,
             initial_multipliers: np.ndarray | None = None) -> Trace:
    """Edge-based decentralized consensus ADMM with exact local solves.

    The config step size is the penalty parameter rho. Each node carries the
    accumulated multiplier of its incident edges; both updates touch only
    neighbor variables. Quadratic instances only.
    """
    cfg.validate(objective)
    inst = objective.instance
    xstar = solve_consensus_optimum(inst)
    n, p = graph.n, objective.p
    rho = cfg.step_size
    adj = np.zeros((n, n))
    for i, j in graph.edges:
        adj[i, j] = adj[j, i] = 1.0
    deg = np.asarray([graph.degree(i) for i in range(n)], dtype=float)[:, None]
    x = (np.zeros((n, p)) if cfg.var0 is None else np.array(cfg.var0, dtype=float))
    mult = (np.zeros((n, p)) if initial_multipliers is None
            else np.array(initial_multipliers, dtype=float))
    trace = Trace(method="admm", mode=cfg.mode, seed=cfg.seed)
    for t in range(1, cfg.max_iters + 1):
        x = (rho * (deg * x + adj @ x) - mult - inst.b) / (inst.a + 2.0 * rho * deg)
        resid = deg * x - adj @ x
        mult = mult + rho * resid
        trace.append(t, consensus_error(x, xstar), np.linalg.norm(resid), t)
        if _check_stop(trace, cfg):
            break
    return trace
