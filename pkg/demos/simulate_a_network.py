"""Walk through the synthetic-data side of the library.

Builds a small sensor network, draws ground-truth dynamics on it, rolls the
dynamics forward, and writes the two CSV files every other tool consumes.
Run from the repository root after installing the package:

    python3 demos/simulate_a_network.py
"""

from pathlib import Path

import numpy as np

from graphmarkov import (
    build_graph,
    hop_masks,
    normalized_laplacian,
    random_transition,
    simulate_gmp,
    spectral_basis,
    write_adjacency_csv,
    write_speed_csv,
)

OUT = Path("demo_output/simulate")


def main():
    rng = np.random.default_rng(42)

    # A ring of 8 sensors with two chords: sparse but well connected.
    size = 8
    adjacency = np.zeros((size, size))
    for i in range(size):
        adjacency[i, (i + 1) % size] = adjacency[(i + 1) % size, i] = 1.0
    adjacency[0, 4] = adjacency[4, 0] = 1.0
    adjacency[2, 6] = adjacency[6, 2] = 1.0
    graph = build_graph(adjacency)
    print(f"graph: {graph.size} vertices, {int(graph.adjacency.sum()) // 2} edges")

    # Reachability supports widen as the horizon grows, then saturate.
    masks = hop_masks(graph, 4)
    for k in range(1, 5):
        reach = int(masks.mask(k).sum())
        print(f"  within {k} hop(s): {reach} of {size * size} vertex pairs reachable")

    # The spectral side: eigenvalues of the normalized Laplacian.
    basis = spectral_basis(normalized_laplacian(graph))
    print("  normalized-Laplacian eigenvalues:",
          np.array2string(basis.eigenvalues, precision=3))

    # Ground-truth dynamics, then a 2000-step rollout with mild noise.
    spec = random_transition(graph, seed=7, gamma=0.9, noise_std=0.01)
    print(f"dynamics: damping {spec.gamma}, noise {spec.noise_std}, "
          f"row sums {np.array2string(spec.matrix.sum(axis=1), precision=3)}")
    series = simulate_gmp(graph, spec, steps=2000, seed=8)
    values = series.values
    print(f"rollout: {series.steps} steps x {series.size} sensors, "
          f"range [{values.min():.3f}, {values.max():.3f}], "
          f"final-quarter mean {values[-500:].mean():.4f}")

    OUT.mkdir(parents=True, exist_ok=True)
    write_adjacency_csv(OUT / "adjacency.csv", graph.adjacency)
    write_speed_csv(OUT / "speed.csv", series)
    print(f"wrote {OUT / 'adjacency.csv'} and {OUT / 'speed.csv'}")


if __name__ == "__main__":
    main()
