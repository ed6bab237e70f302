"""Smoke test for the compiled extension: build with `maturin develop` in
crates/py, then run `python python/smoke_test.py`."""

import json
import math

import micromaser_py as mm


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b)


def main():
    a = mm.annihilation(4)
    assert a.shape == (4, 4)
    close(a[(1, 2)].real, math.sqrt(2.0), 1e-15)
    comm = a @ mm.creation(4) - mm.creation(4) @ a
    close(comm[(0, 0)].real, 1.0, 1e-15)

    sz = mm.pauli("z")
    joint = mm.kron(sz, mm.ComplexMatrix.identity(3))
    reduced = mm.partial_trace(joint, [2, 3], 0)
    close(reduced[(0, 0)].real, 3.0, 1e-15)

    phase = mm.expm(mm.ComplexMatrix([[1j * math.pi]]))
    close(phase[(0, 0)].real, -1.0, 1e-12)

    rho = mm.thermal_field_state(60, 1.0)
    close(mm.mean_photon_number(rho), 1.0 / math.expm1(1.0), 1e-10)
    close(mm.g2_zero(rho), 2.0, 1e-6)

    pe, pg = mm.two_level_populations(2.0)
    close(pe, 0.3775406688, 1e-9)

    t = mm.thermalization_time("multi-level", 2, 0.1, 0.1, 0.5)
    close(t["t_th"], 400.0545, 1e-3)

    config = {
        "reservoir": {"kind": "multi-atom", "N": 1, "T_a": 0.1},
        "field": {"T_f0": 1},
        "coupling": {"g": 0.1, "tau": 0.5},
    }
    run = mm.run_simulation(json.dumps(config))
    summary = run["summary"]
    close(summary["gamma_fit"], summary["gamma_predicted"], 0.1 * summary["gamma_predicted"])
    assert 1.9 <= summary["g2_final"] <= 2.1
    assert run["csv"].startswith("step,time,n_mean,T_field,g2,trace_dev,tail_leak\n")

    bad = dict(config, reservoir={"kind": "multi-level", "N": 3, "T_a": 2})
    try:
        mm.predict(json.dumps(bad))
    except mm.GainRegimeError:
        pass
    else:
        raise AssertionError("gain regime not rejected")

    print("smoke test ok: t_th fit", round(summary["t_th_fit"], 3), "predicted", round(summary["t_th_predicted"], 3))


if __name__ == "__main__":
    main()
