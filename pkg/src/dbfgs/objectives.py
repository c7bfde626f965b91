"""Objective functions with neighborhood-local gradients.

Provides the two experiment families (diagonal quadratics with a
controlled condition number, and binary logistic regression), the
primal penalty and dual ascent consensus formulations built on top of
them, optimum oracles, and the average consensus-error metric.

All randomness goes through numpy's PCG64 (``np.random.default_rng``),
drawn node-major, so instances are bit-reproducible from their seed.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .netgraph import Graph

__all__ = [
    "QuadraticInstance",
    "LogisticInstance",
    "DistributedObjective",
    "make_quadratic",
    "make_logistic",
    "solve_consensus_optimum",
    "consensus_error",
    "dump_instance",
    "load_instance",
]


# ---------------------------------------------------------------------------
# instances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticInstance:
    """Per-node quadratics f_i(x) = 1/2 x'diag(a_i)x + b_i'x.

    ``a`` and ``b`` are (n, p); all a entries must be nonnegative and each
    node's diagonal strictly positive for strong convexity (tests construct
    degenerate convex-only variants on purpose).
    """

    a: np.ndarray
    b: np.ndarray
    eta: float
    seed: int

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def p(self) -> int:
        return self.a.shape[1]

    def local_grad(self, i: int, x_i: np.ndarray) -> np.ndarray:
        return self.a[i] * x_i + self.b[i]

    def local_value(self, i: int, x_i: np.ndarray) -> float:
        return float(0.5 * np.dot(self.a[i] * x_i, x_i) + np.dot(self.b[i], x_i))

    def grad_all(self, x: np.ndarray) -> np.ndarray:
        return self.a * x + self.b

    def value_all(self, x: np.ndarray) -> float:
        return float(0.5 * np.sum(self.a * x * x) + np.sum(self.b * x))


def _exponent_grid(eta: float) -> list:
    """Integer exponent steps 0..eta/2 plus the fractional endpoint."""
    kmax = int(np.floor(eta / 2.0))
    grid = [float(k) for k in range(kmax + 1)]
    if eta / 2.0 != kmax:
        grid.append(eta / 2.0)
    return grid


def make_quadratic(n: int, p: int, eta: float, seed: int) -> QuadraticInstance:
    """Random quadratic instance with condition number 10^eta.

    First p/2 diagonal entries are drawn from {10^0, ..., 10^{eta/2}} and
    the last p/2 from {10^0, ..., 10^{-eta/2}}, so the aggregate sum of the
    A_i has eigenvalues inside [n 10^{-eta/2}, n 10^{eta/2}]. b entries are
    uniform on [0, 1].
    """
    if p % 2 != 0:
        raise ValueError(f"dimension p must be even, got {p}")
    if eta < 0:
        raise ValueError(f"condition parameter eta must be nonnegative, got {eta}")
    rng = np.random.default_rng(seed)
    grid = np.asarray(_exponent_grid(eta))
    a = np.empty((n, p))
    a[:, : p // 2] = 10.0 ** rng.choice(grid, size=(n, p // 2))
    a[:, p // 2 :] = 10.0 ** (-rng.choice(grid, size=(n, p // 2)))
    b = rng.uniform(0.0, 1.0, size=(n, p))
    return QuadraticInstance(a=a, b=b, eta=float(eta), seed=seed)


@dataclass(frozen=True)
class LogisticInstance:
    """Per-node binary logistic regression samples.

    f_i(x) = lam ||x||^2 / (2n) + sum_l log(1 + exp(-v_il u_il'x)); the
    global regularizer lam ||x||^2 / 2 is split evenly across nodes so the
    consensus aggregate matches the usual regularized objective.
    """

    features: np.ndarray  # (n, q, p)
    labels: np.ndarray  # (n, q) in {-1, +1}
    lam: float
    mu: float
    sigma_pos: float
    sigma_neg: float
    seed: int

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def q(self) -> int:
        return self.features.shape[1]

    @property
    def p(self) -> int:
        return self.features.shape[2]

    def local_grad(self, i: int, x_i: np.ndarray) -> np.ndarray:
        u, v = self.features[i], self.labels[i]
        s = _sigmoid(-(u @ x_i) * v)
        return self.lam * x_i / self.n - (v * s) @ u

    def local_value(self, i: int, x_i: np.ndarray) -> float:
        u, v = self.features[i], self.labels[i]
        loss = np.logaddexp(0.0, -(u @ x_i) * v).sum()
        return float(0.5 * self.lam * np.dot(x_i, x_i) / self.n + loss)

    def grad_all(self, x: np.ndarray) -> np.ndarray:
        z = -np.einsum("iqp,ip->iq", self.features, x) * self.labels
        s = _sigmoid(z)
        return self.lam * x / self.n - np.einsum(
            "iq,iqp->ip", self.labels * s, self.features
        )

    def value_all(self, x: np.ndarray) -> float:
        z = -np.einsum("iqp,ip->iq", self.features, x) * self.labels
        loss = np.logaddexp(0.0, z).sum()
        return float(0.5 * self.lam * np.sum(x * x) / self.n + loss)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def make_logistic(
    n: int,
    p: int,
    q: int,
    lam: float,
    mu: float,
    sigma_pos: float,
    sigma_neg: float,
    seed: int,
) -> LogisticInstance:
    """Gaussian class-conditional logistic data, balanced labels per node.

    Each node receives ceil(q/2) positive samples ~ N(mu*1, sigma_pos^2 I)
    and floor(q/2) negative samples ~ N(-mu*1, sigma_neg^2 I).
    """
    if q <= 0:
        raise ValueError(f"samples per node must be positive, got {q}")
    if lam < 0:
        raise ValueError(f"regularizer must be nonnegative, got {lam}")
    rng = np.random.default_rng(seed)
    qpos = (q + 1) // 2
    features = np.empty((n, q, p))
    labels = np.empty((n, q))
    for i in range(n):
        features[i, :qpos] = rng.normal(mu, sigma_pos, size=(qpos, p))
        features[i, qpos:] = rng.normal(-mu, sigma_neg, size=(q - qpos, p))
        labels[i, :qpos] = 1.0
        labels[i, qpos:] = -1.0
    return LogisticInstance(
        features=features,
        labels=labels,
        lam=float(lam),
        mu=float(mu),
        sigma_pos=float(sigma_pos),
        sigma_neg=float(sigma_neg),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# distributed objective (primal penalty / dual ascent)
# ---------------------------------------------------------------------------


class DistributedObjective:
    """Consensus problem with a neighborhood-local gradient structure.

    Primal mode minimizes the scaled penalty objective

        F(x) = alpha * sum_i f_i(x_i) + 1/2 x'(I - Z)x,

    whose i-th gradient block is alpha * grad f_i(x_i)
    + sum_{j in n_i} w_ij (x_i - x_j); this is alpha times the penalty
    gradient of the 1/(2 alpha) formulation and is the only scaling under
    which the standard constant stepsizes for DGD and quasi-Newton DGD are
    stable. ``primal_grad_i`` exposes the unscaled form.

    Dual mode minimizes F(nu) = -psi(nu), the negative dual function of the
    consensus-constrained problem; gradients are evaluated through the
    closed-form Lagrangian minimizers (quadratic instances only).
    """

    def __init__(self, instance, graph: Graph, weights: np.ndarray, mode: str,
                 alpha: float | None = None):
        if mode not in ("primal", "dual"):
            raise ValueError(f"mode must be 'primal' or 'dual', got {mode!r}")
        if mode == "primal":
            if alpha is None or alpha <= 0:
                raise ValueError("primal mode requires a positive penalty alpha")
        if mode == "dual" and not isinstance(instance, QuadraticInstance):
            raise ValueError("dual mode requires a quadratic instance")
        if weights.shape != (graph.n, graph.n):
            raise ValueError("weight matrix shape does not match graph")
        self.instance = instance
        self.graph = graph
        self.weights = np.asarray(weights, dtype=float)
        self.mode = mode
        self.alpha = alpha

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def p(self) -> int:
        return self.instance.p

    # -- local operations in their textbook (unscaled) form ----------------

    def primal_grad_i(self, i: int, x_nbhd: np.ndarray) -> np.ndarray:
        """Penalty gradient block grad f_i(x_i) + (1/alpha) sum w_ij (x_i - x_j).

        ``x_nbhd`` is (m_i, p) in sorted-neighborhood order.
        """
        if self.mode != "primal":
            raise ValueError("primal_grad_i requires primal mode")
        x_nbhd = self._check_view(i, x_nbhd)
        pos = self.graph.neighborhood_index(i, i)
        x_i = x_nbhd[pos]
        wrow = self.weights[i, list(self.graph.neighborhoods[i])]
        slack = x_i - wrow @ x_nbhd
        return self.instance.local_grad(i, x_i) + slack / self.alpha

    def dual_lagrangian_minimizer_i(self, i: int, nu_i: np.ndarray,
                                    nu_neighbors: np.ndarray) -> np.ndarray:
        """x_i(nu) = -A_i^{-1}(b_i + sum_j w_ij (nu_i - nu_j)).

        ``nu_neighbors`` is (m_i, p), the full neighborhood in sorted order
        (the entry for i itself is taken from ``nu_i``).
        """
        if self.mode != "dual":
            raise ValueError("dual_lagrangian_minimizer_i requires dual mode")
        view = self._check_view(i, nu_neighbors).copy()
        pos = self.graph.neighborhood_index(i, i)
        view[pos] = nu_i
        wrow = self.weights[i, list(self.graph.neighborhoods[i])]
        slack = nu_i - wrow @ view
        return -(self.instance.b[i] + slack) / self.instance.a[i]

    def dual_grad_i(self, i: int, x_nbhd: np.ndarray) -> np.ndarray:
        """Constraint slack sum_j w_ij (x_i - x_j) over Lagrangian minimizers."""
        x_nbhd = self._check_view(i, x_nbhd)
        pos = self.graph.neighborhood_index(i, i)
        wrow = self.weights[i, list(self.graph.neighborhoods[i])]
        return x_nbhd[pos] - wrow @ x_nbhd

    def _check_view(self, i: int, view: np.ndarray) -> np.ndarray:
        view = np.asarray(view, dtype=float)
        want = (self.graph.m[i], self.p)
        if view.shape != want:
            raise ValueError(f"neighborhood view for node {i} must have shape {want}, "
                             f"got {view.shape}")
        return view

    # -- runtime surface: staged per-node evaluation ------------------------
    #
    # Stage 1 maps a node's neighborhood view of the iterated variable to its
    # auxiliary block (dual: the Lagrangian minimizer; primal: its own block).
    # Stage 2 maps the auxiliary/variable views to the local gradient of the
    # runtime objective. The same two functions back the synchronous rounds
    # and the event simulator so lockstep execution is bit-reproducible.

    def stage1_block(self, i: int, var_view: np.ndarray) -> np.ndarray:
        pos = self.graph.neighborhood_index(i, i)
        if self.mode == "primal":
            return var_view[pos].copy()
        wrow = self.weights[i, list(self.graph.neighborhoods[i])]
        nu_i = var_view[pos]
        slack = nu_i - wrow @ var_view
        return -(self.instance.b[i] + slack) / self.instance.a[i]

    def stage2_block(self, i: int, var_view: np.ndarray,
                     aux_view: np.ndarray) -> np.ndarray:
        pos = self.graph.neighborhood_index(i, i)
        wrow = self.weights[i, list(self.graph.neighborhoods[i])]
        if self.mode == "primal":
            x_i = var_view[pos]
            slack = x_i - wrow @ var_view
            return self.alpha * self.instance.local_grad(i, x_i) + slack
        return -(aux_view[pos] - wrow @ aux_view)

    # -- runtime surface: full-state vectorized evaluation -------------------

    def stage1_full(self, var: np.ndarray) -> np.ndarray:
        if self.mode == "primal":
            return var
        slack = var - self.weights @ var
        return -(self.instance.b + slack) / self.instance.a

    def stage2_full(self, var: np.ndarray, aux: np.ndarray) -> np.ndarray:
        if self.mode == "primal":
            return self.alpha * self.instance.grad_all(var) + (var - self.weights @ var)
        return -(aux - self.weights @ aux)

    def runtime_grad(self, var: np.ndarray) -> np.ndarray:
        return self.stage2_full(var, self.stage1_full(var))

    def runtime_value(self, var: np.ndarray) -> float:
        """Value of the objective the runtimes descend (F above)."""
        if self.mode == "primal":
            pen = 0.5 * np.sum(var * (var - self.weights @ var))
            return float(self.alpha * self.instance.value_all(var) + pen)
        return -self.dual_function_value(var)

    def recover_x(self, var: np.ndarray) -> np.ndarray:
        """Primal estimate used for the error metric."""
        if self.mode == "primal":
            return var
        return self.stage1_full(var)

    # -- reference values for tests and diagnostics -------------------------

    def penalty_objective_value(self, x: np.ndarray) -> float:
        """Unscaled phi(x) = sum f_i + (1/2 alpha) x'(I-Z)x."""
        if self.mode != "primal":
            raise ValueError("penalty objective requires primal mode")
        pen = 0.5 * np.sum(x * (x - self.weights @ x)) / self.alpha
        return float(self.instance.value_all(x) + pen)

    def dual_function_value(self, nu: np.ndarray) -> float:
        """psi(nu) = L(x(nu), nu) for quadratic instances."""
        if self.mode != "dual":
            raise ValueError("dual function requires dual mode")
        slack_nu = nu - self.weights @ nu
        x = -(self.instance.b + slack_nu) / self.instance.a
        return float(self.instance.value_all(x) + np.sum(slack_nu * x))


# ---------------------------------------------------------------------------
# oracles and metric
# ---------------------------------------------------------------------------


def solve_consensus_optimum(instance) -> np.ndarray:
    """Common minimizer of sum_i f_i over a shared variable.

    Quadratic: closed form -(sum A_i)^{-1} sum b_i (coordinates with zero
    aggregate curvature and zero aggregate slope take the min-norm value 0).
    Logistic: damped Newton to gradient norm <= 1e-12 (requires lam > 0).
    """
    if isinstance(instance, QuadraticInstance):
        sa = instance.a.sum(axis=0)
        sb = instance.b.sum(axis=0)
        out = np.zeros_like(sa)
        pos = sa > 0
        out[pos] = -sb[pos] / sa[pos]
        if np.any(~pos & (sb != 0)):
            raise ValueError("aggregate quadratic is unbounded below")
        return out
    if isinstance(instance, LogisticInstance):
        if instance.lam <= 0:
            raise ValueError("logistic optimum oracle requires lam > 0")
        return _logistic_newton(instance)
    raise TypeError(f"unsupported instance type {type(instance)!r}")


def _logistic_newton(inst: LogisticInstance, tol: float = 1e-12,
                     max_iter: int = 200) -> np.ndarray:
    u = inst.features.reshape(-1, inst.p)
    v = inst.labels.reshape(-1)
    lam = inst.lam
    x = np.zeros(inst.p)

    def val(x_):
        return float(0.5 * lam * x_ @ x_ + np.logaddexp(0.0, -(u @ x_) * v).sum())

    def grad(x_):
        s = _sigmoid(-(u @ x_) * v)
        return lam * x_ - (v * s) @ u

    for _ in range(max_iter):
        g = grad(x)
        if np.linalg.norm(g) <= tol:
            return x
        s = _sigmoid(-(u @ x) * v)
        w = s * (1.0 - s)
        h = lam * np.eye(inst.p) + (u * w[:, None]).T @ u
        step = np.linalg.solve(h, g)
        t, v0 = 1.0, val(x)
        while val(x - t * step) > v0 - 1e-4 * t * (g @ step) and t > 1e-12:
            t *= 0.5
        x = x - t * step
    if np.linalg.norm(grad(x)) > tol:
        raise RuntimeError("logistic Newton failed to reach tolerance")
    return x


def consensus_error(x: np.ndarray, xstar: np.ndarray) -> float:
    """Average error (1/n) sum_i ||x_i - xstar||^2 / ||xstar||^2."""
    xstar = np.asarray(xstar, dtype=float)
    denom = float(xstar @ xstar)
    if denom == 0.0:
        raise ValueError("consensus error is undefined for a zero optimum")
    diff = np.asarray(x, dtype=float) - xstar
    return float(np.mean(np.sum(diff * diff, axis=1)) / denom)


# ---------------------------------------------------------------------------
# plain-text instance fixtures
# ---------------------------------------------------------------------------


def dump_instance(instance) -> str:
    buf = io.StringIO()
    if isinstance(instance, QuadraticInstance):
        buf.write(f"quadratic {instance.n} {instance.p} {instance.eta!r} {instance.seed}\n")
        for i in range(instance.n):
            buf.write("a " + " ".join(repr(float(v)) for v in instance.a[i]) + "\n")
            buf.write("b " + " ".join(repr(float(v)) for v in instance.b[i]) + "\n")
    elif isinstance(instance, LogisticInstance):
        buf.write(
            f"logistic {instance.n} {instance.q} {instance.p} {instance.lam!r} "
            f"{instance.mu!r} {instance.sigma_pos!r} {instance.sigma_neg!r} {instance.seed}\n"
        )
        for i in range(instance.n):
            for l in range(instance.q):
                row = " ".join(repr(float(v)) for v in instance.features[i, l])
                buf.write(f"s {int(instance.labels[i, l])} {row}\n")
    else:
        raise TypeError(f"unsupported instance type {type(instance)!r}")
    return buf.getvalue()


def load_instance(text: str):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split()
    if head[0] == "quadratic":
        n, p = int(head[1]), int(head[2])
        eta, seed = float(head[3]), int(head[4])
        a = np.empty((n, p))
        b = np.empty((n, p))
        rows = lines[1:]
        for i in range(n):
            a[i] = [float(v) for v in rows[2 * i].split()[1:]]
            b[i] = [float(v) for v in rows[2 * i + 1].split()[1:]]
        return QuadraticInstance(a=a, b=b, eta=eta, seed=seed)
    if head[0] == "logistic":
        n, q, p = int(head[1]), int(head[2]), int(head[3])
        lam, mu, sp, sn = (float(v) for v in head[4:8])
        seed = int(head[8])
        features = np.empty((n, q, p))
        labels = np.empty((n, q))
        rows = lines[1:]
        for i in range(n):
            for l in range(q):
                parts = rows[i * q + l].split()
                labels[i, l] = float(parts[1])
                features[i, l] = [float(v) for v in parts[2:]]
        return LogisticInstance(features=features, labels=labels, lam=lam, mu=mu,
                                sigma_pos=sp, sigma_neg=sn, seed=seed)
    raise ValueError(f"unknown instance kind {head[0]!r}")
