"""Oriented-graph representation and the spectral quantities built on it.

The network is an undirected connected graph; each edge carries an
orientation used purely as a sign convention for the incidence matrix.
From the Laplacian L = B B^T we derive its pseudo-inverse, resistance
distances, the orthonormal basis of the subspace orthogonal to the all-ones
vector (the disagreement subspace), and the Fiedler vector.

All values are immutable after construction and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import eig_symmetric


class NotConnectedError(ValueError):
    """The underlying undirected graph is not connected."""


@dataclass(frozen=True)
class OrientedGraph:
    """Undirected graph with per-edge orientation.

    Nodes are 0..n-1; edges is an ordered list of (source, target) pairs.
    Edge order defines the column numbering of the incidence matrix, and
    for each edge (u, v) the directed links (u -> v) and (v -> u) get
    consecutive slots 2l and 2l+1 in the directed-link numbering.
    """

    n: int
    edges: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple((int(u), int(v)) for u, v in self.edges))
        if self.n < 2:
            raise ValueError(f"need at least 2 nodes, got n={self.n}")
        seen = set()
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u},{v}) out of range for n={self.n}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"duplicate undirected edge {key}")
            seen.add(key)

    @property
    def m(self) -> int:
        return len(self.edges)

    def neighbors(self, i: int):
        """Sorted neighbor list of node i."""
        out = []
        for u, v in self.edges:
            if u == i:
                out.append(v)
            elif v == i:
                out.append(u)
        return sorted(out)

    def directed_links(self):
        """All 2m directed links as (sender, receiver) pairs.

        Link 2l is edge l in its stored orientation, link 2l+1 the reverse.
        The buffer for link (j, i) sits at receiver i and is fed by j.
        """
        links = []
        for u, v in self.edges:
            links.append((u, v))
            links.append((v, u))
        return links

    def is_connected(self) -> bool:
        """Union-find connectivity check on the undirected edges."""
        parent = list(range(self.n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for u, v in self.edges:
            ru, rv = find(u), find(v)
            if ru != rv:
                parent[ru] = rv
        root = find(0)
        return all(find(i) == root for i in range(self.n))


def complete(n: int) -> OrientedGraph:
    """Complete graph K_n, edges oriented lower index -> higher index."""
    if n < 2:
        raise ValueError(f"complete graph needs n >= 2, got {n}")
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    return OrientedGraph(n, tuple(edges))


def path(n: int) -> OrientedGraph:
    """Path graph 0-1-...-(n-1)."""
    if n < 2:
        raise ValueError(f"path graph needs n >= 2, got {n}")
    return OrientedGraph(n, tuple((i, i + 1) for i in range(n - 1)))


def mesh(rows: int, cols: int) -> OrientedGraph:
    """Rectangular grid graph with row-major node numbering.

    Node (r, c) is index r*cols + c; edges run lower index -> higher index.
    """
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise ValueError(f"mesh needs rows*cols >= 2, got {rows}x{cols}")
    edges = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                edges.append((i, i + 1))
            if r + 1 < rows:
                edges.append((i, i + cols))
    return OrientedGraph(rows * cols, tuple(edges))


def incidence_matrix(g: OrientedGraph) -> np.ndarray:
    """n x m incidence matrix: +1 at the source, -1 at the target of each edge."""
    b = np.zeros((g.n, g.m))
    for l, (u, v) in enumerate(g.edges):
        b[u, l] = 1.0
        b[v, l] = -1.0
    return b


def laplacian(g: OrientedGraph) -> np.ndarray:
    """Graph Laplacian L = B B^T (degrees on the diagonal, -1 per edge)."""
    b = incidence_matrix(g)
    return b @ b.T


def _sign_normalize_columns(v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Flip eigenvector columns so the first non-negligible entry is positive."""
    v = v.copy()
    for j in range(v.shape[1]):
        col = v[:, j]
        nz = np.nonzero(np.abs(col) > tol * max(np.abs(col).max(), 1.0))[0]
        if nz.size and col[nz[0]] < 0:
            v[:, j] = -col
    return v


@dataclass(frozen=True)
class SpectralData:
    """Eigendecomposition-derived quantities of a connected graph's Laplacian.

    disagreement_basis holds the n-1 eigenvectors of the nonzero eigenvalues
    (orthonormal, orthogonal to the all-ones vector); reduced_laplacian is
    the Laplacian expressed in that basis and is positive definite.
    """

    graph: OrientedGraph
    laplacian: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    disagreement_basis: np.ndarray
    reduced_laplacian: np.ndarray
    pseudo_inverse: np.ndarray
    incidence: np.ndarray = field(repr=False, default=None)

    @property
    def algebraic_connectivity(self) -> float:
        return float(self.eigenvalues[1])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])


def spectral_data(g: OrientedGraph, tol: float = 1e-9) -> SpectralData:
    """Factor the Laplacian and assemble all derived spectral quantities.

    Eigenvalues below tol * lambda_max count as zero; a connected graph must
    produce exactly one. The connectedness requirement is structural, the
    threshold only guards numerics.
    """
    lap = laplacian(g)
    w, v = eig_symmetric(lap)
    lam_max = w[-1]
    if lam_max <= 0:
        raise NotConnectedError("graph has no edges or all-zero spectrum")
    n_zero = int(np.sum(w < tol * lam_max))
    if n_zero != 1:
        raise NotConnectedError(
            f"{n_zero} zero eigenvalues (expected 1): graph is not connected"
        )
    v = _sign_normalize_columns(v)
    w = w.copy()
    w[0] = 0.0
    u1 = v[:, 1:]
    reduced = u1.T @ lap @ u1
    reduced = (reduced + reduced.T) / 2.0
    inv_w = np.concatenate([[0.0], 1.0 / w[1:]])
    pinv = (v * inv_w) @ v.T
    return SpectralData(
        graph=g,
        laplacian=lap,
        eigenvalues=w,
        eigenvectors=v,
        disagreement_basis=u1,
        reduced_laplacian=reduced,
        pseudo_inverse=pinv,
        incidence=incidence_matrix(g),
    )


def resistance_distance(sd: SpectralData, i: int, j: int) -> float:
    """Effective resistance between nodes i and j with unit resistors per edge."""
    n = sd.graph.n
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"node index out of range: ({i},{j}) for n={n}")
    lp = sd.pseudo_inverse
    return float(lp[i, i] + lp[j, j] - 2.0 * lp[i, j])


def resistance_matrix(sd: SpectralData) -> np.ndarray:
    """Full n x n matrix of pairwise resistance distances."""
    d = np.diag(sd.pseudo_inverse)
    return d[:, None] + d[None, :] - 2.0 * sd.pseudo_inverse


@dataclass(frozen=True)
class FiedlerResult:
    """Unit eigenvector of the algebraic connectivity, with degeneracy flag."""

    vector: np.ndarray
    algebraic_connectivity: float
    degenerate: bool


def fiedler_vector(sd: SpectralData, tol: float = 1e-9) -> FiedlerResult:
    """Unit eigenvector of the second-smallest Laplacian eigenvalue.

    Sign convention: first non-negligible entry positive. When the eigenvalue
    has multiplicity > 1 the returned vector is one member of the eigenspace
    and the result is flagged degenerate (the maximizer is not unique there).
    """
    w = sd.eigenvalues
    lam2 = w[1]
    degenerate = bool(w.size > 2 and (w[2] - lam2) <= tol * sd.lambda_max)
    vec = sd.eigenvectors[:, 1].copy()
    return FiedlerResult(vector=vec, algebraic_connectivity=float(lam2), degenerate=degenerate)
