"""Vectorized full-network round primitives shared by the runtimes.

Nodes are grouped by neighborhood size so stacked linear algebra applies
on regular and irregular graphs alike. The synchronous engine and the
event simulator's all-nodes-available batches go through these same
functions, which is what makes lockstep execution of the simulator
reproduce the synchronous runtime exactly.
"""

from __future__ import annotations

import numpy as np

from .netgraph import Graph


class RoundKernel:
    """Precomputed index structure for stacked per-neighborhood operations."""

    def __init__(self, graph: Graph, p: int):
        self.graph = graph
        self.p = p
        n = graph.n
        m = np.asarray(graph.m)
        self.offsets = np.concatenate([[0], np.cumsum(m)])
        self.total_blocks = int(self.offsets[-1])
        self.groups = []
        for msize in sorted(set(graph.m)):
            ids = np.array([i for i in range(n) if graph.m[i] == msize])
            nb = np.array([graph.neighborhoods[i] for i in ids])
            dd = np.stack([
                np.repeat([1.0 / graph.m[j] for j in graph.neighborhoods[i]], p)
                for i in ids
            ])
            # flat row of e holding node j's contribution to node i
            ch = np.array([
                [self.offsets[j] + graph.neighborhood_index(j, i)
                 for j in graph.neighborhoods[i]]
                for i in ids
            ])
            rows = (self.offsets[ids][:, None] + np.arange(msize)[None, :]).ravel()
            self.groups.append((msize, ids, nb, dd, ch, rows))

    # -- gathering ----------------------------------------------------------

    def gather_views(self, arr: np.ndarray) -> list:
        """Per-group flattened neighborhood views of a (n, p) array."""
        return [arr[nb].reshape(len(ids), msize * self.p)
                for msize, ids, nb, _, _, _ in self.groups]

    # -- descent ------------------------------------------------------------

    def descent(self, matrices: list, g_views: list, big_gamma: float) -> np.ndarray:
        """Stacked -(B^{-1} + Gamma D) g for every node.

        Returns the flat contribution array e of shape (sum m_i, p); row
        offsets[i] + k holds node i's contribution to its k-th neighbor.
        """
        eflat = np.empty((self.total_blocks, self.p))
        for (msize, ids, nb, dd, ch, rows), gv in zip(self.groups, g_views):
            b = np.stack([matrices[i] for i in ids])
            low = np.linalg.cholesky(b)
            y = np.linalg.solve(low, gv[..., None])
            y = np.linalg.solve(np.swapaxes(low, 1, 2), y)[..., 0]
            e = -(y + big_gamma * dd * gv)
            eflat[rows] = e.reshape(-1, self.p)
        return eflat

    # -- applying contributions ----------------------------------------------

    def apply_descents(self, var: np.ndarray, eflat: np.ndarray,
                       eps: float) -> np.ndarray:
        """Add eps times every neighbor contribution to var, in slot order.

        Contributions are applied one neighborhood slot at a time (ascending
        sender id per recipient) so the event simulator's incremental
        mailbox application performs the identical float sequence.
        Returns the aggregated descent d (without eps) for diagnostics.
        """
        d = np.zeros_like(var)
        for msize, ids, nb, dd, ch, rows in self.groups:
            chunks = eflat[ch]  # (g, msize, p)
            for k in range(msize):
                var[ids] += eps * chunks[:, k]
            d[ids] = chunks.sum(axis=1)
        return d

    # -- curvature updates ----------------------------------------------------

    def bfgs_all(self, matrices: list, old_var_views: list, new_var_views: list,
                 old_g_views: list, new_g_views: list, gamma: float,
                 skip_threshold: float) -> np.ndarray:
        """Stacked regularized BFGS update of every node; returns accept mask."""
        n = self.graph.n
        accepted = np.zeros(n, dtype=bool)
        for gi, (msize, ids, nb, dd, ch, rows) in enumerate(self.groups):
            v = dd * (new_var_views[gi] - old_var_views[gi])
            dg = new_g_views[gi] - old_g_views[gi]
            r = dg - gamma * v
            ip = np.sum(v * r, axis=1)
            acc = ip > skip_threshold * np.linalg.norm(v, axis=1) * np.linalg.norm(r, axis=1)
            if not np.any(acc):
                continue
            b = np.stack([matrices[i] for i in ids])
            bv = np.einsum("gij,gj->gi", b, v)
            vbv = np.sum(v * bv, axis=1)
            acc &= vbv > 0
            safe_ip = np.where(acc, ip, 1.0)
            safe_vbv = np.where(acc, vbv, 1.0)
            new = (
                b
                + r[:, :, None] * r[:, None, :] / safe_ip[:, None, None]
                - bv[:, :, None] * bv[:, None, :] / safe_vbv[:, None, None]
            )
            idx = np.arange(msize * self.p)
            new[:, idx, idx] += gamma
            new = 0.5 * (new + np.swapaxes(new, 1, 2))
            for row, i in enumerate(ids):
                if acc[row]:
                    matrices[i] = new[row]
                    accepted[i] = True
        return accepted
