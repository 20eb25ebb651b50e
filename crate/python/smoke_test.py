"""Smoke test for the gravcollapse Python extension."""

import math
import tempfile

import gravcollapse as gc


def close(a, b, rel):
    return abs(a - b) <= rel * abs(b)


def main():
    k = gc.PhysicalConstants()
    m = gc.feynman_mass_scale(k)
    assert close(m, 2.176434e-8, 1e-5), m

    a = gc.MassDistribution.uniform_sphere(1e-3, 1e-2)
    b = a.translated([3e-2, 0.0, 0.0])
    spec = gc.Superposition(a, b, complex(math.sqrt(0.3)), complex(math.sqrt(0.7)))
    u = gc.self_energy(a)
    assert close(u, 0.6 * k.G * 1e-6 / 1e-2, 1e-9), u
    ed = gc.e_delta(spec)
    mc, err = gc.e_delta_monte_carlo(spec, 20000, seed=1)
    assert abs(mc - ed) < 5 * err, (mc, ed, err)
    t = gc.collapse_time(spec)
    assert close(t, k.hbar / ed, 1e-12)
    assert math.isinf(gc.collapse_time(gc.Superposition(a, a)))

    states = gc.sn_spectrum(2)
    assert abs(states[0].natural_eigenvalue + 0.16277) < 1e-3
    assert [s.node_count for s in states] == [0, 1]

    rows = gc.evolve_gaussian(2.0, 0.05, 20, 40.0, 0.05)
    assert abs(rows[-1][1] - rows[0][1]) < 1e-10

    h = gc.hydrogen_diagnostic()
    assert close(h["ground_energy_ev"], -13.606, 1e-3)

    s = gc.simulate_collapse(spec, 2000, seed=7, rate=1.0)
    assert s["collapsed"] == 2000

    with tempfile.TemporaryDirectory() as d:
        bundle = gc.run_manifest('[command]\nname = "feynman-scale"\n', d)
        assert bundle["status"] == "ok"

    try:
        gc.MassDistribution.uniform_sphere(-1.0, 1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative mass accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
