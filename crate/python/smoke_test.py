"""Smoke test for the etreg extension module.

Build and install first:  pip install --no-build-isolation -e crates/py
"""

import math

import etreg


def close(a, b, tol):
    return all(abs(x - y) <= tol for x, y in zip(a, b))


def main():
    sc = etreg.Scenario.bundled("lorenz_d01")
    assert close(sc.psi(), [-5.0, 12.0, 3.0, 6.0], 1e-9), sc.psi()
    checks = sc.verify()
    assert all(passed for _, passed, _ in checks), checks

    res = sc.simulate()
    m = res.metrics()
    print(res, m["tail_sup_error"])
    assert res.status == "Completed"
    assert 217 <= res.trigger_count <= 325
    assert m["tail_sup_error"] <= 0.022
    assert len(res.t) == len(res.e) == len(res.u)
    assert all(d > 0 for d in res.dwells)

    fine = sc.with_delta(0.01).simulate()
    assert fine.trigger_count > res.trigger_count

    x = etreg.solve_sylvester([[2.0]], [[-1.0]], [[3.0]])
    assert close(x[0], [1.0], 1e-14)
    e = etreg.expm([[0.0, 1.0], [-1.0, 0.0]])
    assert close(e[0], [math.cos(1.0), math.sin(1.0)], 1e-12)
    assert etreg.hurwitz_verdict([[-2.0, 1.0], [-2.0, 0.0]]) == "Hurwitz"
    assert etreg.hurwitz_verdict([[0.0, 1.0], [-1.0, 0.0]]) == "marginal"

    try:
        etreg.Scenario.from_toml("not = [valid")
    except etreg.EtregError as err:
        assert "line" in str(err)
    else:
        raise AssertionError("malformed scenario accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
