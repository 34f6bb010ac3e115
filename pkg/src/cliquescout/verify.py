"""Differential checks of the enumerators against the exhaustive subset oracles."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .clique import maximal_cliques
from .quasiclique import QuasiParams, maximal_pseudo_cliques, pseudo_cliques
from .synth import oracle_maximal_cliques, oracle_pseudo_cliques, random_graph

CLIQUE_PROBS = (0.3, 0.5, 0.8)
QUASI_PROBS = (0.4, 0.6, 0.9)
THETAS = (Fraction(4, 5), Fraction(9, 10), Fraction(1))


def differential_cliques(n_graphs: int = 300, seed: int = 0, max_n: int = 12) -> list[str]:
    rng = np.random.default_rng(seed)
    failures = []
    for i in range(n_graphs):
        n = int(rng.integers(1, max_n + 1))
        p = CLIQUE_PROBS[i % len(CLIQUE_PROBS)]
        g = random_graph(n, p, rng)
        got = list(maximal_cliques(g, min_size=1))
        if len(got) != len(set(got)) or set(got) != oracle_maximal_cliques(g, 1):
            failures.append(f"clique graph #{i} (n={n}, p={p}): {sorted(g.edge_set())}")
    return failures


def differential_pseudo_cliques(n_graphs: int = 300, seed: int = 1, max_n: int = 10) -> list[str]:
    rng = np.random.default_rng(seed)
    failures = []
    for i in range(n_graphs):
        n = int(rng.integers(2, max_n + 1))
        p = QUASI_PROBS[i % len(QUASI_PROBS)]
        g = random_graph(n, p, rng)
        for theta in THETAS:
            params = QuasiParams(theta, min_size=2)
            for maximal, enum in ((False, pseudo_cliques), (True, maximal_pseudo_cliques)):
                got = list(enum(g, params))
                want = oracle_pseudo_cliques(g, theta, 2, maximal=maximal)
                if len(got) != len(set(got)) or set(got) != want:
                    failures.append(
                        f"pseudo-clique graph #{i} (n={n}, p={p}, theta={theta}, maximal={maximal}): "
                        f"{sorted(g.edge_set())}"
                    )
    return failures
