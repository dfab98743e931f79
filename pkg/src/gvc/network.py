"""Value-added trade networks and their centrality measures."""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from gvc import kernels
from gvc.errors import BetaOutOfRange, GvcError, NoConvergence
from gvc.icio import coefficients
from gvc.linalg import perron_root
from gvc.tiva import gross_exports

LEVELS = ("country", "country-sector")
FLOWS = ("dva_in_exports", "gross_exports")
EIGEN_TOL = 1e-12
EIGEN_MAX_ITER = 10_000
EIGEN_DAMPING = 0.99


@dataclass(frozen=True, eq=False)
class FlowNetwork:
    """Weighted directed network; ``W[i, j]`` is the flow from node i to node j."""

    nodes: tuple
    W: np.ndarray
    normalized: bool = False
    level: str = "country"
    flow: str = "gross_exports"

    def __post_init__(self):
        W = np.array(self.W, dtype=np.float64, copy=True)
        if W.shape != (len(self.nodes), len(self.nodes)):
            raise ValueError(f"W has shape {W.shape} for {len(self.nodes)} nodes")
        if (W < 0).any():
            raise ValueError("network weights must be nonnegative")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "nodes", tuple(self.nodes))

    @property
    def n(self):
        return len(self.nodes)

    def normalize(self):
        total = self.W.sum()
        W = self.W / total if total > 0 else self.W
        return FlowNetwork(self.nodes, W, True, self.level, self.flow)

    def scaled(self, s):
        return FlowNetwork(self.nodes, self.W * s, False, self.level, self.flow)

    def permuted(self, perm):
        perm = np.asarray(perm)
        return FlowNetwork([self.nodes[p] for p in perm], self.W[np.ix_(perm, perm)],
                           self.normalized, self.level, self.flow)

    def transposed(self):
        return FlowNetwork(self.nodes, self.W.T, self.normalized, self.level, self.flow)

    def edges(self):
        i, j = np.nonzero(self.W)
        return [(self.nodes[a], self.nodes[b], float(self.W[a, b])) for a, b in zip(i, j)]

    def to_dot(self, name="gvc"):
        lines = [f"digraph {name} {{"]
        for node in self.nodes:
            lines.append(f'  "{node}";')
        for a, b, w in self.edges():
            lines.append(f'  "{a}" -> "{b}" [weight={w:.10g}, label="{w:.4g}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_network(table, level="country", flow="dva_in_exports", cs=None, normalize=False):
    """Trade network from a table.

    ``gross_exports`` weights are gross export values. ``dva_in_exports``
    weights are the domestic value added carried by those exports, so at
    country level each node's out-strength equals its total EXGR_DVA.
    Country-sector edges carry intermediate sales to foreign producers only;
    final-demand exports have no destination sector.
    """
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}")
    if flow not in FLOWS:
        raise ValueError(f"flow must be one of {FLOWS}")
    owner = table.country_of()
    if flow == "dva_in_exports":
        cs = cs if cs is not None else coefficients(table)
        same = owner[:, None] == owner[None, :]
        dva_per_unit = np.where(same, cs.vcL, 0.0).sum(axis=0)
    else:
        dva_per_unit = np.ones(table.n)

    if level == "country":
        bil = gross_exports(table).bilateral * dva_per_unit[:, None]
        W = bil.reshape(table.M, table.N, table.M).sum(axis=1)
        np.fill_diagonal(W, 0.0)
        nodes = table.countries
    else:
        W = np.where(owner[:, None] != owner[None, :], table.Z, 0.0) * dva_per_unit[:, None]
        nodes = tuple(f"{c}.{s}" for c, s in table.labels())
    net = FlowNetwork(nodes, np.clip(W, 0.0, None), False, level, flow)
    return net.normalize() if normalize else net


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def strength(net):
    """(in_strength, out_strength)."""
    return net.W.sum(axis=0), net.W.sum(axis=1)


def distances(net):
    """All-pairs shortest path lengths with arc length 1/W."""
    with np.errstate(divide="ignore"):
        length = np.where(net.W > 0, 1.0 / np.where(net.W > 0, net.W, 1.0), np.inf)
    return kernels.dijkstra_all_pairs(length)


def closeness(net, direction="out", dist=None):
    """Harmonic closeness: sum over other nodes of 1/shortest-path length.

    ``out`` measures paths leaving the node, ``in`` paths arriving at it.
    Unreachable nodes contribute nothing.
    """
    if direction not in ("in", "out"):
        raise ValueError("direction must be 'in' or 'out'")
    D = distances(net) if dist is None else dist
    if direction == "in":
        D = D.T
    with np.errstate(divide="ignore"):
        inv = np.where(np.isfinite(D) & (D > 0), 1.0 / D, 0.0)
    np.fill_diagonal(inv, 0.0)
    return inv.sum(axis=1)


def shortest_path(net, source, target):
    """One shortest path between two node labels, or None if unreachable.

    Among equal-length paths the lexicographically smallest index sequence wins.
    """
    s, t = net.nodes.index(source), net.nodes.index(target)
    W = net.W
    heap = [(0.0, (s,))]
    settled = set()
    while heap:
        d, path = heapq.heappop(heap)
        u = path[-1]
        if u in settled:
            continue
        settled.add(u)
        if u == t:
            return d, [net.nodes[k] for k in path]
        for v in np.nonzero(W[u])[0]:
            if v not in settled:
                heapq.heappush(heap, (d + 1.0 / W[u, v], path + (int(v),)))
    return None


def largest_eigenvalue(W):
    return perron_root(W, max_iter=EIGEN_MAX_ITER, tol=EIGEN_TOL)


def bonacich(net, alpha=1.0, beta=0.0):
    """Bonacich power centrality ``alpha (I - beta W)^{-1} W 1``."""
    W = net.W
    lam = largest_eigenvalue(W)
    if lam > 0 and abs(beta) >= 1.0 / lam:
        raise BetaOutOfRange(f"|beta|={abs(beta):g} must be below 1/lambda_max={1.0 / lam:g}")
    ones_out = W.sum(axis=1)
    if beta == 0:
        return alpha * ones_out
    return alpha * np.linalg.solve(np.eye(net.n) - beta * W, ones_out)


@dataclass(frozen=True)
class EigenvectorResult:
    scores: np.ndarray = field(repr=False)
    eigenvalue: float
    iterations: int
    damped: bool
    residual: float


def _eigen_iterate(Wt, damping, tol, max_iter):
    n = Wt.shape[0]
    c = np.full(n, 1.0 / n)
    for it in range(1, max_iter + 1):
        y = Wt @ c
        lam = y.sum()
        if lam == 0.0:
            # c spans part of the null space: an eigenvector for eigenvalue 0
            return c, 0.0, it, True
        y /= lam
        if damping is not None:
            y = damping * y + (1.0 - damping) * c
        if np.abs(y - c).sum() <= tol:
            return y, float((Wt @ y).sum()), it, True
        c = y
    return c, float((Wt @ c).sum()), max_iter, False


def eigenvector_centrality(net, tol=EIGEN_TOL, max_iter=EIGEN_MAX_ITER):
    """Dominant eigenvector of W^T (in-centrality), L1-normalized.

    Plain power iteration first; if that fails to settle (periodic networks),
    it is repeated with damping 0.99, which keeps the same fixed point.
    """
    if not net.W.any():
        raise GvcError("eigenvector centrality needs at least one edge")
    Wt = net.W.T
    c, lam, it, ok = _eigen_iterate(Wt, None, tol, max_iter)
    damped = False
    total_it = it
    if not ok:
        damped = True
        c, lam, it, ok = _eigen_iterate(Wt, EIGEN_DAMPING, tol, max_iter)
        total_it += it
        if not ok:
            raise NoConvergence("eigenvector centrality did not converge", total_it)
    c = c / c.sum()
    resid = float(np.abs(Wt @ c - lam * c).max())
    return EigenvectorResult(c, lam, total_it, damped, resid)


def clustering(net):
    """Weighted directed clustering coefficient.

    Weights are rescaled by the largest weight and cube-rooted; triangles of
    any orientation count. Nodes with fewer than two neighbours get 0.
    """
    W = net.W.copy()
    np.fill_diagonal(W, 0.0)
    top = W.max(initial=0.0)
    if top == 0:
        return np.zeros(net.n)
    What = np.cbrt(W / top)
    S = What + What.T
    num = np.einsum("ij,jk,ki->i", S, S, S)
    A = (W > 0).astype(float)
    d_tot = A.sum(axis=0) + A.sum(axis=1)
    d_bi = np.diag(A @ A)
    den = 2.0 * (d_tot * (d_tot - 1.0) - 2.0 * d_bi)
    out = np.zeros(net.n)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    return out


@dataclass(frozen=True, eq=False)
class NetworkMetrics:
    nodes: tuple
    in_strength: np.ndarray
    out_strength: np.ndarray
    closeness_in: np.ndarray
    closeness_out: np.ndarray
    bonacich: np.ndarray
    eigenvector: np.ndarray
    clustering: np.ndarray
    meta: dict

    COLUMNS = ("node", "in_strength", "out_strength", "closeness_in", "closeness_out",
               "bonacich", "eigenvector", "clustering")

    def rows(self):
        return [
            (node, self.in_strength[k], self.out_strength[k], self.closeness_in[k],
             self.closeness_out[k], self.bonacich[k], self.eigenvector[k], self.clustering[k])
            for k, node in enumerate(self.nodes)
        ]


def default_beta(net, fraction=0.5):
    lam = largest_eigenvalue(net.W)
    return fraction / lam if lam > 0 else fraction


def network_metrics(net, alpha=1.0, beta=None, orientation="seller"):
    """All centrality measures for ``net``.

    ``orientation="buyer"`` evaluates Bonacich and eigenvector centrality on
    the transposed network (importer-to-exporter direction).
    """
    if orientation not in ("seller", "buyer"):
        raise ValueError("orientation must be 'seller' or 'buyer'")
    oriented = net if orientation == "seller" else net.transposed()
    beta = default_beta(oriented) if beta is None else beta
    s_in, s_out = strength(net)
    D = distances(net)
    nan = np.full(net.n, np.nan)
    try:
        eig = eigenvector_centrality(oriented)
        eig_scores, eig_meta = eig.scores, {
            "eigenvalue": eig.eigenvalue, "iterations": eig.iterations, "damped": eig.damped,
        }
    except (NoConvergence, GvcError) as exc:
        eig_scores, eig_meta = nan, {"error": str(exc)}
    return NetworkMetrics(
        nodes=net.nodes,
        in_strength=s_in,
        out_strength=s_out,
        closeness_in=closeness(net, "in", D),
        closeness_out=closeness(net, "out", D),
        bonacich=bonacich(oriented, alpha, beta),
        eigenvector=eig_scores,
        clustering=clustering(net),
        meta={"alpha": alpha, "beta": beta, "orientation": orientation, "eigenvector": eig_meta,
              "normalized": net.normalized, "level": net.level, "flow": net.flow},
    )
