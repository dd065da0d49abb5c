"""Directed interference networks.

A graph on ``n`` individuals records, for each node ``i``, the ordered list
of in-neighbors ``j`` such that the edge ``(j, i)`` exists, i.e. the nodes
whose treatment can affect ``i``'s outcome. Every node is an in-neighbor of
itself (self-loops are always present).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError


@dataclass
class Graph:
    """Immutable directed network with self-loops.

    Attributes:
        n: Population size.
        in_neighbors: For each node i, sorted list of j with edge (j, i).
            Always contains i itself.
    """

    n: int
    in_neighbors: list[list[int]]
    d_in: int = field(init=False)
    d_out: int = field(init=False)
    d: int = field(init=False)

    def __post_init__(self) -> None:
        self.validate()
        out_deg = np.zeros(self.n, dtype=np.int64)
        for neigh in self.in_neighbors:
            out_deg[neigh] += 1
        self.d_in = max(len(neigh) for neigh in self.in_neighbors)
        self.d_out = int(out_deg.max())
        self.d = max(self.d_in, self.d_out)

    def validate(self) -> None:
        """Raise ValueError if the adjacency structure is inconsistent."""
        if self.n < 1:
            raise ValueError(f"population size must be >= 1, got {self.n}")
        if len(self.in_neighbors) != self.n:
            raise ValueError("in_neighbors length does not match n")
        for i, neigh in enumerate(self.in_neighbors):
            if len(set(neigh)) != len(neigh):
                raise ValueError(f"duplicate in-neighbor for node {i}")
            if any(j < 0 or j >= self.n for j in neigh):
                raise ValueError(f"in-neighbor index out of range for node {i}")
            if i not in neigh:
                raise ValueError(f"missing self-loop for node {i}")

    def out_degrees(self) -> np.ndarray:
        """Out-degree of each node, self-loops included."""
        out = np.zeros(self.n, dtype=np.int64)
        for neigh in self.in_neighbors:
            out[neigh] += 1
        return out

    def num_edges(self) -> int:
        return sum(len(neigh) for neigh in self.in_neighbors)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and self.in_neighbors == other.in_neighbors


def _power_law_degrees(n: int, exponent: float, rng: np.random.Generator) -> np.ndarray:
    """Draw n in-degrees from a discrete power law on {1, ..., n-1}.

    Uses exact inverse-CDF sampling with pmf proportional to x**(-exponent),
    so results are reproducible and unbiased at small n.
    """
    support = np.arange(1, n, dtype=np.float64)
    pmf = support ** (-exponent)
    cdf = np.cumsum(pmf / pmf.sum())
    cdf[-1] = 1.0
    u = rng.random(n)
    return np.searchsorted(cdf, u, side="right") + 1


def generate_configuration_model(n: int, exponent: float = 2.5, seed: int = 0) -> Graph:
    """Generate a directed configuration-model network.

    In-degrees (excluding the mandatory self-loop) follow a discrete power
    law with the given exponent, truncated to [1, n-1]. The in-stubs are
    assigned to source nodes round-robin over a random node permutation so
    that out-degrees differ by at most one before self-loops. Duplicate
    edges produced by the matching are collapsed, then the self-loop (i, i)
    is added for every node.

    Args:
        n: Population size, >= 1.
        exponent: Power-law exponent, > 1.
        seed: RNG seed; identical inputs give identical graphs.

    Returns:
        The generated Graph.
    """
    if n < 1:
        raise ValueError(f"population size must be >= 1, got {n}")
    if exponent <= 1:
        raise ValueError(f"power-law exponent must be > 1, got {exponent}")

    rng = np.random.default_rng(seed)
    neighbor_sets: list[set[int]] = [set() for _ in range(n)]

    if n > 1:
        degrees = _power_law_degrees(n, exponent, rng)
        perm = rng.permutation(n)
        stub = 0
        for target in range(n):
            for _ in range(int(degrees[target])):
                source = int(perm[stub % n])
                neighbor_sets[target].add(source)
                stub += 1

    for i in range(n):
        neighbor_sets[i].add(i)

    return Graph(n=n, in_neighbors=[sorted(s) for s in neighbor_sets])


def save_edge_list(g: Graph, destination: str | os.PathLike) -> None:
    """Write a graph as an edge-list text file.

    Format: first line ``n <count>``, then one ``src dst`` pair per line
    (0-based decimal indices), newline-terminated, UTF-8.
    """
    with open(destination, "w", encoding="utf-8") as fh:
        fh.write(f"n {g.n}\n")
        for dst in range(g.n):
            for src in g.in_neighbors[dst]:
                fh.write(f"{src} {dst}\n")


def load_edge_list(source: str | os.PathLike) -> Graph:
    """Read a graph written by save_edge_list.

    Raises:
        ParseError: On a malformed line, an out-of-range index, a duplicate
            edge, or a node missing its self-loop; the message names the
            offending line.
    """
    with open(source, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("line 1: empty edge-list file")
    header = lines[0].split()
    if len(header) != 2 or header[0] != "n":
        raise ParseError(f"line 1: expected header 'n <count>', got {lines[0]!r}")
    try:
        n = int(header[1])
    except ValueError:
        raise ParseError(f"line 1: population size {header[1]!r} is not an integer")
    if n < 1:
        raise ParseError(f"line 1: population size must be >= 1, got {n}")

    neighbor_sets: list[set[int]] = [set() for _ in range(n)]
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"line {lineno}: expected 'src dst', got {line!r}")
        try:
            src, dst = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"line {lineno}: non-integer index in {line!r}")
        if not (0 <= src < n and 0 <= dst < n):
            raise ParseError(f"line {lineno}: index out of range [0, {n}) in {line!r}")
        if src in neighbor_sets[dst]:
            raise ParseError(f"line {lineno}: duplicate edge {src} -> {dst}")
        neighbor_sets[dst].add(src)

    for i in range(n):
        if i not in neighbor_sets[i]:
            raise ParseError(f"missing self-loop edge '{i} {i}'")

    return Graph(n=n, in_neighbors=[sorted(s) for s in neighbor_sets])
