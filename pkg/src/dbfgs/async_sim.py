"""Deterministic discrete-event simulation of asynchronous D-BFGS and DD.

Each node has its own availability clock. At an availability event a node
reads its mailbox (descent contributions and dated neighbor packages
deposited strictly before the event time), applies pending descents,
recomputes its gradient from its dated view, updates its curvature, and
deposits fresh values for its neighbors.

Events sharing an exact wall time form a batch processed as a synchronized
sub-round: tied nodes see each other's fresh values. A zero-drift schedule
therefore degenerates to the synchronous runtime; all-nodes batches run
through the same vectorized kernel as the synchronous engine, so lockstep
execution reproduces it bit for bit. Continuous random schedules have
singleton batches almost surely, which is the asynchronous algorithm
proper.

The virtual engine re-runs the same event sequence but applies every
finished descent to a global variable immediately instead of through
mailboxes; with zero message delay its trajectory coincides with the
physical engine at every node's availability events.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ._kernel import RoundKernel
from .curvature import (
    SKIP_THRESHOLD,
    CurvatureState,
    bfgs_update,
    modified_variations,
    neighborhood_descent,
)
from .netgraph import Graph
from .objectives import DistributedObjective, consensus_error, solve_consensus_optimum
from .sync_runtime import DIVERGENCE_LIMIT, SyncConfig, Trace

__all__ = [
    "ClockSchedule",
    "AsyncConfig",
    "EventQueue",
    "gen_clock_schedule",
    "time_functions",
    "measure_asynchronicity",
    "run_dbfgs_async",
    "run_dd_async",
    "virtual_replay",
    "dump_schedule",
    "load_schedule",
]

CLOCK_INCREMENT_FLOOR = 0.01


# ---------------------------------------------------------------------------
# clocks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClockSchedule:
    """Per-node strictly increasing availability times, all starting at 0."""

    times: tuple
    horizon: float
    mu: float
    sigma: float
    seed: int

    @property
    def n(self) -> int:
        return len(self.times)


def gen_clock_schedule(n: int, mu_clk: float, sigma_clk: float, horizon: float,
                       seed: int) -> ClockSchedule:
    """Availability clocks t_k = t_{k-1} + max(N(mu, sigma), 0.01).

    All nodes tick at t = 0. Increments are drawn node-major from a single
    PCG64 stream, so schedules are bit-reproducible from the seed.
    """
    if mu_clk <= 0:
        raise ValueError("mean clock increment must be positive")
    if sigma_clk < 0:
        raise ValueError("clock standard deviation must be nonnegative")
    rng = np.random.default_rng(seed)
    times = []
    for _ in range(n):
        ticks = [0.0]
        t = 0.0
        while True:
            t = t + max(float(rng.normal(mu_clk, sigma_clk)), CLOCK_INCREMENT_FLOOR)
            if t > horizon:
                break
            ticks.append(t)
        times.append(np.asarray(ticks))
    return ClockSchedule(times=tuple(times), horizon=float(horizon),
                         mu=float(mu_clk), sigma=float(sigma_clk), seed=seed)


def _last_before(ticks: np.ndarray, t) -> np.ndarray:
    """max{t_hat in ticks : t_hat < t}, or 0.0 before the first tick."""
    idx = np.searchsorted(ticks, t, side="left") - 1
    vals = ticks[np.clip(idx, 0, None)]
    return np.where(idx < 0, 0.0, vals)


def time_functions(schedule: ClockSchedule, i: int, j: int, t: float):
    """(pi_i(t), pi_i_j(t)): node i's last availability strictly before t,
    and the generation time of node j's data held by i (pi_j after pi_i)."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    pi_i = float(_last_before(schedule.times[i], t))
    pi_ij = float(_last_before(schedule.times[j], pi_i))
    return pi_i, pi_ij


def measure_asynchronicity(schedule: ClockSchedule, horizon: float | None = None) -> float:
    """Smallest staleness bound B with t - pi_i_j(t) < B over the event grid.

    Cross-node staleness composes pi_j(pi_i(t)); a node's own block is dated
    at its last availability, so the i = j staleness is t - pi_i(t).
    """
    grid = np.unique(np.concatenate(schedule.times))
    if horizon is not None:
        grid = grid[grid <= horizon]
    worst = 0.0
    for i in range(schedule.n):
        pi_i = _last_before(schedule.times[i], grid)
        worst = max(worst, float(np.max(grid - pi_i)))
        for j in range(schedule.n):
            if j == i:
                continue
            pi_ij = _last_before(schedule.times[j], pi_i)
            worst = max(worst, float(np.max(grid - pi_ij)))
    return worst


def dump_schedule(schedule: ClockSchedule) -> str:
    lines = [f"schedule {schedule.n} {schedule.horizon!r} {schedule.mu!r} "
             f"{schedule.sigma!r} {schedule.seed}"]
    for ticks in schedule.times:
        lines.append(" ".join(repr(float(t)) for t in ticks))
    return "\n".join(lines) + "\n"


def load_schedule(text: str) -> ClockSchedule:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split()
    n = int(head[1])
    times = tuple(np.asarray([float(v) for v in lines[1 + i].split()])
                  for i in range(n))
    return ClockSchedule(times=times, horizon=float(head[2]), mu=float(head[3]),
                         sigma=float(head[4]), seed=int(head[5]))


# ---------------------------------------------------------------------------
# event queue
# ---------------------------------------------------------------------------


class EventQueue:
    """Availability events in (time, node id) total order, batched by time."""

    def __init__(self, schedule: ClockSchedule):
        events = [(float(t), i) for i in range(schedule.n)
                  for t in schedule.times[i]]
        events.sort()
        self.events = events

    def batches(self):
        """Yield (time, [node ids ascending]) with exact-tie events grouped."""
        k, total = 0, len(self.events)
        while k < total:
            t = self.events[k][0]
            nodes = []
            while k < total and self.events[k][0] == t:
                nodes.append(self.events[k][1])
                k += 1
            yield t, nodes


@dataclass
class AsyncConfig(SyncConfig):
    """Synchronous parameters plus the message delivery delay."""

    delta_msg: float = 0.0


# ---------------------------------------------------------------------------
# mailboxes
# ---------------------------------------------------------------------------


class _Mailbox:
    """Per-node inbox: dated neighbor packages and pending descent chunks."""

    __slots__ = ("queues", "current", "pending")

    def __init__(self, neighbors):
        self.queues = {j: deque() for j in neighbors}
        self.current = {j: None for j in neighbors}
        self.pending = deque()

    def read(self, now: float):
        """Deliver everything that arrived strictly before ``now``.

        Returns pending descent chunks in arrival order and refreshes the
        dated package copies.
        """
        for j, q in self.queues.items():
            while q and q[0][0] < now:
                self.current[j] = q.popleft()[2]
        chunks = []
        while self.pending and self.pending[0][0] < now:
            chunks.append(self.pending.popleft())
        return chunks


class _NodeState:
    """Async node: curvature, previous neighborhood views, local counter."""

    __slots__ = ("curv", "prev_var_view", "prev_g_view", "local_iter")

    def __init__(self, curv):
        self.curv = curv
        self.prev_var_view = None
        self.prev_g_view = None
        self.local_iter = 0


def _check_schedule_start(schedule: ClockSchedule) -> None:
    if any(ticks[0] != 0.0 for ticks in schedule.times):
        raise ValueError("all availability clocks must start at t = 0")


# ---------------------------------------------------------------------------
# D-BFGS engines (physical and virtual)
# ---------------------------------------------------------------------------


class _AsyncDbfgs:
    """Shared implementation of the physical and virtual D-BFGS engines."""

    def __init__(self, graph: Graph, objective: DistributedObjective,
                 cfg: AsyncConfig, schedule: ClockSchedule, virtual: bool):
        cfg.validate(objective)
        if schedule.n != graph.n:
            raise ValueError("schedule and graph disagree on node count")
        _check_schedule_start(schedule)
        self.graph = graph
        self.obj = objective
        self.cfg = cfg
        self.schedule = schedule
        self.virtual = virtual
        n, p = graph.n, objective.p
        self.p = p
        self.kernel = RoundKernel(graph, p)
        self.var = (np.zeros((n, p)) if cfg.var0 is None
                    else np.array(cfg.var0, dtype=float))
        self.aux_est = objective.stage1_full(self.var)
        self.nodes = [
            _NodeState(CurvatureState.initial(graph, i, p, cfg.gamma, cfg.big_gamma))
            for i in range(n)
        ]
        self.mail = [_Mailbox(graph.neighborhoods[i]) for i in range(n)]
        self.seq = 0
        self.regular = graph.is_regular() is not None
        self.xstar = solve_consensus_optimum(objective.instance)
        self.trace = Trace(method="dbfgs", mode=cfg.mode, seed=cfg.seed,
                           model_time=[], local_iter_min=[])
        self.event_log = []
        self.exchanges = 0

    # -- deposits ------------------------------------------------------------

    def _deposit(self, i: int, t: float, var_i, aux_i, g_i, e_flat):
        """Queue node i's descent contributions and package for neighbors.

        The virtual engine also applies each contribution to the global
        variable immediately, in the same deterministic order the physical
        mailboxes will replay it. The published package always carries the
        pre-descent block (what the physical node holds after its read).
        """
        delta = self.cfg.delta_msg
        pkg = (var_i.copy(), aux_i.copy(), g_i.copy())
        for slot, j in enumerate(self.graph.neighborhoods[i]):
            block = e_flat[slot * self.p:(slot + 1) * self.p].copy()
            arrival = t if j == i else t + delta
            self.mail[j].pending.append((arrival, self.seq, block))
            self.seq += 1
            if self.virtual:
                self.var[j] += self.cfg.step_size * block
        for j in self.graph.neighborhoods[i]:
            if j != i:
                self.mail[j].queues[i].append((t + delta, self.seq, pkg))
                self.seq += 1

    # -- all-nodes batches through the synchronous kernel ---------------------

    def _full_batch_kernel(self, t: float, batch, init: bool) -> bool:
        """All-nodes batch on the vectorized round kernel.

        Applicable on regular graphs when every node's pending chunks are
        exactly one slot-ordered contribution per neighbor (always the case
        in lockstep). Bit-identical to the synchronous engine's round.
        """
        n = self.graph.n
        if not (self.regular and len(batch) == n):
            return False
        m = self.graph.m[0]
        if init:
            if any(self.mail[i].pending for i in range(n)):
                return False
            chunks = None
        else:
            rows = []
            for i in range(n):
                pend = list(self.mail[i].pending)
                if len(pend) != m or any(entry[0] >= t for entry in pend):
                    return False
                rows.append([entry[2] for entry in pend])
            chunks = np.asarray(rows)  # (n, m, p)
        for i in range(n):
            box = self.mail[i]
            box.pending.clear()
            for j, q in box.queues.items():
                while q and q[0][0] < t:
                    box.current[j] = q.popleft()[2]
        if chunks is not None and not self.virtual:
            for k in range(m):
                self.var += self.cfg.step_size * chunks[:, k]
        if not init:
            for st in self.nodes:
                st.local_iter += 1
        snapshot = self.var.copy()
        for i in range(n):
            self.event_log.append((t, i, self.nodes[i].local_iter,
                                   snapshot[i]))
        aux = self.obj.stage1_full(self.var)
        g = self.obj.stage2_full(self.var, aux)
        self.aux_est = aux.copy()
        var_views = self.kernel.gather_views(self.var)
        g_views = self.kernel.gather_views(g)
        mats = [st.curv.matrix for st in self.nodes]
        if not init:
            prev_v = [np.stack([st.prev_var_view for st in self.nodes])]
            prev_g = [np.stack([st.prev_g_view for st in self.nodes])]
            self.kernel.bfgs_all(mats, prev_v, var_views, prev_g, g_views,
                                 self.cfg.gamma, SKIP_THRESHOLD)
            for i, st in enumerate(self.nodes):
                st.curv.matrix = mats[i]
        eflat = self.kernel.descent(mats, g_views, self.cfg.big_gamma)
        off = self.kernel.offsets
        for i, st in enumerate(self.nodes):
            st.prev_var_view = var_views[0][i]
            st.prev_g_view = g_views[0][i]
            self._deposit(i, t, snapshot[i], aux[i], g[i],
                          np.ravel(eflat[off[i]:off[i + 1]]))
        return True

    # -- generic batches -------------------------------------------------------

    def _process_batch(self, t: float, batch, init: bool) -> None:
        if self._full_batch_kernel(t, batch, init):
            self.exchanges += len(batch)
            if not init:
                self._record(t)
            return
        batch = sorted(batch)
        batch_set = set(batch)
        # phase 1: read mail, apply pending descents, advance local clocks
        for i in batch:
            chunks = self.mail[i].read(t)
            if not self.virtual:
                for _, _, block in chunks:
                    self.var[i] += self.cfg.step_size * block
            if not init:
                self.nodes[i].local_iter += 1
        # phase 2a: variable views (fresh within the batch) and auxiliaries
        var_views, auxes = {}, {}
        for i in batch:
            nbhd = self.graph.neighborhoods[i]
            vv = np.empty((len(nbhd), self.p))
            for k, j in enumerate(nbhd):
                if j == i or j in batch_set:
                    vv[k] = self.var[j]
                else:
                    pkg = self.mail[i].current[j]
                    vv[k] = pkg[0] if pkg is not None else 0.0
            var_views[i] = vv
            auxes[i] = self.obj.stage1_block(i, vv)
        # phase 2b: gradients from auxiliary views; comparison snapshots
        g_blocks, snapshots = {}, {}
        for i in batch:
            nbhd = self.graph.neighborhoods[i]
            av = np.empty((len(nbhd), self.p))
            for k, j in enumerate(nbhd):
                if j == i:
                    av[k] = auxes[i]
                elif j in batch_set:
                    av[k] = auxes[j]
                else:
                    pkg = self.mail[i].current[j]
                    av[k] = pkg[1] if pkg is not None else 0.0
            g_blocks[i] = self.obj.stage2_block(i, var_views[i], av)
            self.aux_est[i] = auxes[i]
            snapshots[i] = self.var[i].copy()
            self.event_log.append((t, i, self.nodes[i].local_iter,
                                   snapshots[i]))
        # phase 3: curvature updates, next descents, deposits
        for i in batch:
            st = self.nodes[i]
            nbhd = self.graph.neighborhoods[i]
            gv = np.empty((len(nbhd), self.p))
            for k, j in enumerate(nbhd):
                if j == i:
                    gv[k] = g_blocks[i]
                elif j in batch_set:
                    gv[k] = g_blocks[j]
                else:
                    pkg = self.mail[i].current[j]
                    gv[k] = pkg[2] if pkg is not None else 0.0
            var_flat = var_views[i].ravel()
            g_flat = gv.ravel()
            if st.prev_var_view is not None:
                pair = modified_variations(st.prev_var_view, var_flat,
                                           st.prev_g_view, g_flat,
                                           st.curv.d_diag, self.cfg.gamma)
                st.curv, _ = bfgs_update(st.curv, pair)
            e_flat = neighborhood_descent(st.curv, g_flat)
            st.prev_var_view = var_flat.copy()
            st.prev_g_view = g_flat.copy()
            self._deposit(i, t, snapshots[i], auxes[i], g_blocks[i], e_flat)
        self.exchanges += len(batch)
        if not init:
            self._record(t)

    def _record(self, t: float) -> None:
        est = self.var if self.obj.mode == "primal" else self.aux_est
        err = consensus_error(est, self.xstar)
        gnorm = np.linalg.norm(self.obj.runtime_grad(self.var))
        lmin = min(st.local_iter for st in self.nodes)
        self.trace.append(lmin, err, gnorm, self.exchanges,
                          model_time=t, local_iter_min=lmin)

    def run(self) -> Trace:
        queue = EventQueue(self.schedule)
        first = True
        for t, batch in queue.batches():
            self._process_batch(t, batch, init=first)
            first = False
            if self.trace.error and (not np.isfinite(self.trace.error[-1])
                                     or self.trace.error[-1] > DIVERGENCE_LIMIT):
                self.trace.status = "diverged"
                return self.trace
        self.trace.status = "max_iters"
        return self.trace


def run_dbfgs_async(graph: Graph, objective: DistributedObjective,
                    cfg: AsyncConfig, schedule: ClockSchedule) -> Trace:
    """Asynchronous D-BFGS (physical mailbox engine).

    The returned trace carries ``event_log`` entries
    (time, node, local_iter, own block after applying pending descents).
    """
    engine = _AsyncDbfgs(graph, objective, cfg, schedule, virtual=False)
    trace = engine.run()
    trace.event_log = engine.event_log
    return trace


def virtual_replay(graph: Graph, objective: DistributedObjective,
                   cfg: AsyncConfig, schedule: ClockSchedule) -> Trace:
    """Virtual-update engine: every finished descent applies instantly to a
    global variable. With delta_msg = 0 it matches the physical engine at
    every availability event (compare the two traces' event logs)."""
    engine = _AsyncDbfgs(graph, objective, cfg, schedule, virtual=True)
    trace = engine.run()
    trace.event_log = engine.event_log
    return trace


# ---------------------------------------------------------------------------
# asynchronous dual decomposition
# ---------------------------------------------------------------------------


class _AsyncDd:
    """Asynchronous dual decomposition over the same mailbox machinery."""

    def __init__(self, graph, objective, cfg, schedule):
        cfg.validate(objective)
        if schedule.n != graph.n:
            raise ValueError("schedule and graph disagree on node count")
        _check_schedule_start(schedule)
        self.graph, self.obj, self.cfg, self.schedule = graph, objective, cfg, schedule
        n, p = graph.n, objective.p
        self.p = p
        self.var = (np.zeros((n, p)) if cfg.var0 is None
                    else np.array(cfg.var0, dtype=float))
        self.aux_est = objective.stage1_full(self.var)
        self.mail = [_Mailbox(graph.neighborhoods[i]) for i in range(n)]
        self.local_iter = [0] * n
        self.seq = 0
        self.xstar = solve_consensus_optimum(objective.instance)
        self.trace = Trace(method="dd", mode=cfg.mode, seed=cfg.seed,
                           model_time=[], local_iter_min=[])
        self.exchanges = 0

    def _process_batch(self, t, batch, init):
        batch = sorted(batch)
        batch_set = set(batch)
        for i in batch:
            self.mail[i].read(t)
        if len(batch) == self.graph.n:
            aux_full = self.obj.stage1_full(self.var)
            g_full = self.obj.stage2_full(self.var, aux_full)
            auxes = {i: aux_full[i] for i in batch}
            g_blocks = {i: g_full[i] for i in batch}
        else:
            var_views, auxes = {}, {}
            for i in batch:
                nbhd = self.graph.neighborhoods[i]
                vv = np.empty((len(nbhd), self.p))
                for k, j in enumerate(nbhd):
                    if j == i or j in batch_set:
                        vv[k] = self.var[j]
                    else:
                        pkg = self.mail[i].current[j]
                        vv[k] = pkg[0] if pkg is not None else 0.0
                var_views[i] = vv
                auxes[i] = self.obj.stage1_block(i, vv)
            g_blocks = {}
            for i in batch:
                nbhd = self.graph.neighborhoods[i]
                av = np.empty((len(nbhd), self.p))
                for k, j in enumerate(nbhd):
                    if j == i:
                        av[k] = auxes[i]
                    elif j in batch_set:
                        av[k] = auxes[j]
                    else:
                        pkg = self.mail[i].current[j]
                        av[k] = pkg[1] if pkg is not None else 0.0
                g_blocks[i] = self.obj.stage2_block(i, var_views[i], av)
        for i in batch:
            self.aux_est[i] = auxes[i]
        self.exchanges += len(batch)
        if not init:
            for i in batch:
                self.local_iter[i] += 1
            err = consensus_error(self.aux_est, self.xstar)
            gnorm = np.linalg.norm(self.obj.runtime_grad(self.var))
            lmin = min(self.local_iter)
            self.trace.append(lmin, err, gnorm, self.exchanges,
                              model_time=t, local_iter_min=lmin)
            for i in batch:
                self.var[i] -= self.cfg.step_size * g_blocks[i]
        delta = self.cfg.delta_msg
        for i in batch:
            pkg = (self.var[i].copy(), auxes[i].copy(), g_blocks[i].copy())
            for j in self.graph.neighborhoods[i]:
                if j != i:
                    self.mail[j].queues[i].append((t + delta, self.seq, pkg))
                    self.seq += 1

    def run(self):
        queue = EventQueue(self.schedule)
        first = True
        for t, batch in queue.batches():
            self._process_batch(t, batch, init=first)
            first = False
            if self.trace.error and (not np.isfinite(self.trace.error[-1])
                                     or self.trace.error[-1] > DIVERGENCE_LIMIT):
                self.trace.status = "diverged"
                return self.trace
        self.trace.status = "max_iters"
        return self.trace


def run_dd_async(graph: Graph, objective: DistributedObjective,
                 cfg: AsyncConfig, schedule: ClockSchedule) -> Trace:
    """Asynchronous dual decomposition with dated mailbox gradients."""
    return _AsyncDd(graph, objective, cfg, schedule).run()
