"""Random and reference network generators used by the pipeline and tests.

All generators return :class:`~netspectra.graphs.ConnectivityMatrix` instances
under the package-wide receiver-row convention.  Families that must be stable
in closed loop accept the node dynamics and resample (or rescale) until the
joint state matrix is Hurwitz, failing after a bounded number of attempts.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .errors import StabilityError, ValidationError
from .graphs import ConnectivityMatrix, laplacian_connectivity
from .lti import NetworkSystem, NodeDynamics, is_hurwitz

__all__ = [
    "directed_sparse",
    "laplacian_network",
    "nonreciprocal_ring",
    "random_orientation",
    "symmetric_network",
    "reference_laplacian_6",
    "reference_laplacian_5",
    "ensure_hurwitz",
    "random_hurwitz_system",
]

MAX_STABILITY_RETRIES = 50


def ensure_hurwitz(
    factory,
    node: NodeDynamics,
    rng: np.random.Generator,
    max_tries: int = MAX_STABILITY_RETRIES,
) -> ConnectivityMatrix:
    """Draw from ``factory(rng)`` until the closed-loop system is Hurwitz."""
    for _ in range(max_tries):
        g = factory(rng)
        if is_hurwitz(NetworkSystem(node, g)).stable:
            return g
    raise StabilityError(
        f"no Hurwitz sample found in {max_tries} draws; the family's weight "
        "range is incompatible with the node dynamics"
    )


def directed_sparse(
    n: int,
    edge_prob: float,
    weight_range: tuple[float, float],
    rng: np.random.Generator,
) -> ConnectivityMatrix:
    """Erdos-Renyi directed graph with uniform weights, zero diagonal."""
    lo, hi = weight_range
    if not 0 <= lo <= hi:
        raise ValidationError("weight range must satisfy 0 <= lo <= hi")
    mask = rng.random((n, n)) < edge_prob
    w = rng.uniform(lo, hi, (n, n)) * mask
    np.fill_diagonal(w, 0.0)
    return ConnectivityMatrix(w)


def laplacian_network(
    n: int,
    graph: str,
    weight_range: tuple[float, float],
    rng: np.random.Generator,
    edge_prob: float = 0.3,
) -> ConnectivityMatrix:
    """Diffusively coupled network ``G = -(D - A)`` over a chosen graph family.

    ``graph`` is one of ``ring`` (directed cycle), ``pairs`` (disjoint
    driver->follower edges; needs even ``n``) or ``random`` (directed
    Erdos-Renyi).  The eigenpair ``(0, ones)`` is attached automatically.
    """
    lo, hi = weight_range
    a = np.zeros((n, n))
    if graph == "ring":
        for k in range(n):
            a[(k + 1) % n, k] = rng.uniform(lo, hi)
    elif graph == "pairs":
        if n % 2:
            raise ValidationError("pairs family needs an even node count")
        for k in range(n // 2):
            a[n // 2 + k, k] = rng.uniform(lo, hi)
    elif graph == "random":
        mask = rng.random((n, n)) < edge_prob
        a = rng.uniform(lo, hi, (n, n)) * mask
        np.fill_diagonal(a, 0.0)
    else:
        raise ValidationError(f"unknown laplacian graph family {graph!r}")
    return laplacian_connectivity(a)


def nonreciprocal_ring(
    n: int,
    weight_range: tuple[float, float],
    rng: np.random.Generator,
) -> ConnectivityMatrix:
    """Directed cycle: the canonical nonreciprocal network."""
    lo, hi = weight_range
    w = np.zeros((n, n))
    for k in range(n):
        w[(k + 1) % n, k] = rng.uniform(lo, hi)
    return ConnectivityMatrix(w)


def random_orientation(
    n: int,
    edge_prob: float,
    weight_range: tuple[float, float],
    rng: np.random.Generator,
    spectral_radius: Optional[float] = None,
) -> ConnectivityMatrix:
    """Random undirected graph with every edge given a single random direction.

    Nonreciprocal by construction.  If ``spectral_radius`` is given, weights
    are rescaled so the matrix's spectral radius matches it (useful to
    guarantee closed-loop stability for first-order nodes).
    """
    lo, hi = weight_range
    w = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < edge_prob:
                weight = rng.uniform(lo, hi)
                if rng.random() < 0.5:
                    w[i, j] = weight
                else:
                    w[j, i] = weight
    if spectral_radius is not None:
        rho = np.abs(np.linalg.eigvals(w)).max()
        if rho > 0:
            w *= spectral_radius / rho
    return ConnectivityMatrix(w)


def symmetric_network(
    n: int,
    edge_prob: float,
    weight_range: tuple[float, float],
    rng: np.random.Generator,
    max_eigenvalue: Optional[float] = None,
) -> ConnectivityMatrix:
    """Random symmetric coupling with nonnegative weights, zero diagonal.

    If ``max_eigenvalue`` is given, the matrix is rescaled so its largest
    eigenvalue equals it (for first-order nodes with pole ``p``, any value
    below ``-p`` gives a Hurwitz closed loop).
    """
    lo, hi = weight_range
    w = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < edge_prob:
                w[i, j] = w[j, i] = rng.uniform(lo, hi)
    if max_eigenvalue is not None:
        lam_max = np.linalg.eigvalsh(w)[-1]
        if lam_max > 0:
            w *= max_eigenvalue / lam_max
    return ConnectivityMatrix(w)


def reference_laplacian_6() -> ConnectivityMatrix:
    """The package's reference 6-node directed Laplacian network.

    Three independent driver->follower pairs (1->4, 2->5, 3->6) with uniform
    coupling 5.0, diffusively coupled (``G = -(D - A)``).  The design puts the
    end-to-end statistical recovery benchmark at the estimator's noise floor:
    every sender has zero in-degree, so the inverse-CPSD diagonal of a sender
    column is dominated by the edge statistic itself, and uniform weights keep
    all edge statistics in one cluster for the gap threshold.
    """
    a = np.zeros((6, 6))
    for k in range(3):
        a[3 + k, k] = 5.0
    return laplacian_connectivity(a)


def reference_laplacian_5() -> ConnectivityMatrix:
    """Reference 5-node strongly coupled directed Laplacian ring."""
    a = np.zeros((5, 5))
    weights = [3.0, 4.0, 5.0, 4.0, 3.0]
    for k in range(5):
        a[(k + 1) % 5, k] = weights[k]
    return laplacian_connectivity(a)


def random_hurwitz_system(
    rng: np.random.Generator,
    n_nodes_max: int = 8,
    state_dim_max: int = 3,
) -> NetworkSystem:
    """Random stable networked system for randomized identity sweeps.

    Node matrices are shifted to be comfortably stable in isolation and the
    coupling is scaled down until the joint matrix is Hurwitz.
    """
    n_nodes = int(rng.integers(2, n_nodes_max + 1))
    n_state = int(rng.integers(1, state_dim_max + 1))
    a = rng.standard_normal((n_state, n_state))
    a = a - (np.abs(np.linalg.eigvals(a).real).max() + rng.uniform(0.5, 1.5)) * np.eye(
        n_state
    )
    node = NodeDynamics(a, rng.standard_normal(n_state), rng.standard_normal(n_state))
    mask = rng.random((n_nodes, n_nodes)) < 0.5
    w = rng.uniform(0.2, 1.0, (n_nodes, n_nodes)) * mask
    np.fill_diagonal(w, 0.0)
    for _ in range(40):
        g = ConnectivityMatrix(w)
        if is_hurwitz(NetworkSystem(node, g)).stable:
            return NetworkSystem(node, g)
        w = 0.5 * w
    return NetworkSystem(node, ConnectivityMatrix(np.zeros((n_nodes, n_nodes))))
