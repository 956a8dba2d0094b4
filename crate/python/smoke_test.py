"""Smoke test for the pynoisestab extension.

Build and install first:
    (cd crates/python && maturin build --release -o dist)
    pip install crates/python/dist/*.whl
"""

import math

import pynoisestab as ns


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b}"


def main():
    close(ns.normal_cdf(0.0), 0.5, 1e-15)
    close(ns.normal_inv_cdf(0.975), 1.959963984540054, 1e-9)
    close(ns.bivariate_orthant(0.0, 0.0, 0.5), 1.0 / 3.0, 1e-12)

    est = ns.exchangeable_orthant([0.0, 0.0, 0.0], -0.3, samples=200_000, seed=1)
    assert est.method == "monte_carlo" and est.n_samples == 200_000
    again = ns.exchangeable_orthant([0.0, 0.0, 0.0], -0.3, samples=200_000, seed=1)
    assert est.value == again.value

    simplex = ns.Partition.simplex(3)
    assert (simplex.q, simplex.n) == (3, 2)
    assert simplex.classify([0.0, 1.0]) in range(3)
    close(ns.simplex_stability(3, 1.0).value, 1.0, 0.0)
    stack = ns.Partition.halfspace_stack([0.2, 0.3, 0.5], 2)
    close(ns.pair_stability(stack, 0.0).value, 0.38, 1e-9)

    # Majority on three bits as a 0/1 table, first coordinate most significant.
    maj = [float(bin(i).count("1") >= 2) for i in range(8)]
    close(ns.noise_stability(maj, 2, 3, 0.5), 0.3515625, 1e-12)
    assert all(abs(x - 0.125) < 1e-12 for x in ns.influences(maj, 2, 3))

    close(ns.condorcet(3, 3, exact=True).value, 17.0 / 18.0, 1e-12)
    coin = ns.cosmic_coin(3, 101, 0.5, samples=100_000, seed=2)
    assert 0.3 < coin.value < 0.45

    alpha, rho_star, se = ns.alpha_q(2)
    close(alpha, 0.878567, 1e-6)
    assert se == 0.0 and -0.7 < rho_star < -0.68

    g = ns.Graph.complete(4, 3)
    opt, labels = g.brute_force_opt()
    assert opt == 5.0 and g.cut_value(labels) == 5.0
    sol = ns.sdp_solve(g)
    close(sol.objective, 16.0 / 3.0, 1e-4)
    best_labels, best, mean, _ = ns.round(sol, g, repeats=500, seed=3)
    assert best <= opt + 1e-12 and mean <= best
    assert ns.Graph.from_text(g.to_text(), 3).edges == g.edges

    ulc, lv, lw = ns.UlcInstance.random_satisfiable(2, 3, 4, 2, seed=4)
    assert ulc.value(lv, lw) == 1.0
    red = ns.ulc_reduce(ulc, 2, -1.0)
    close(red.total_mass(), 1.0, 1e-12)
    close(red.graph.cut_value(red.honest_labels(lw)), red.completeness(), 1e-12)

    try:
        ns.Graph(2, [(0, 5, 1.0)], 2)
    except ValueError:
        pass
    else:
        raise AssertionError("bad edge accepted")

    assert math.isfinite(float(est))
    print("pynoisestab smoke test passed")


if __name__ == "__main__":
    main()
