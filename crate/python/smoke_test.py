"""Smoke test for the scorelaw extension module.

Build and install first:

    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/scorelaw-*.whl
"""


import scorelaw


def close(x, y, rel=1e-12):
    return abs(x - y) <= rel * abs(y)


def main():
    # c(1, s) = 36 / (s (s+1) (s+2) (s+3)) for a = 1/3, b = 0, m = 2
    for s in (1, 2, 10, 1000):
        want = 36.0 / (s * (s + 1) * (s + 2) * (s + 3))
        assert close(scorelaw.c_gamma(1, s, 1 / 3, 0.0, 2.0), want, 1e-11), s
    limit = scorelaw.limit_distribution(1, 10_000, 1 / 3, 0.0, 2.0)
    assert len(limit) == 10_000 and close(limit[1], 1.5)
    k, exponent = scorelaw.tail_coefficient(1, 1 / 3, 0.0, 2.0)
    assert close(k, 36.0, 1e-10) and close(exponent, 4.0)
    residual = scorelaw.mass_identity_check(1, 1 / 3, 0.0, 2.0, 100_000)
    assert 0.0 < residual < 2e-4

    params = scorelaw.SimParams(0.5, 0.0, 2.0, 4, 1, seed=42)
    h10, h100 = scorelaw.run(params, 100, [10, 100])
    assert h10.n == 10 and h10.total() == 22
    assert h100.to_csv().startswith("s,count\n")
    again = scorelaw.run(params, 100, [100])[0]
    assert again.counts == h100.counts

    table = scorelaw.ScoreTable(params)
    assert table.scores() == [1, 1]
    inc, births, clamped = table.step()
    assert births == 2 and not clamped and inc <= 4

    oracle = scorelaw.expected_histogram(params, 2, 8)
    assert close(oracle[0], 2 * 0.875**4 + 2)

    d = scorelaw.derived_params(3, 2, 0.75, 0.75, 0.75)
    assert close(d["a"], 0.375) and close(d["exponent"], 11 / 3)

    run = scorelaw.run_graph(scorelaw.GraphParams(3, 0.75, 0.75, 0.75, 20_000, seed=3, tracked_m=[2]))
    assert run.invariant_violations == 0
    n, v = run.v_trace[-1]
    assert n == 20_000 and abs(v / n - 0.75) < 0.02
    mean, se = run.newcomer_rate(2)
    assert abs(mean - d["mu"]) < 5 * se

    zipf = {w: 1e9 * w ** -3.0 for w in range(1, 100_001)}
    fit = scorelaw.fit_tail(zipf, "discrete_mle", w_min=10, target=3.0, tolerance=0.05)
    assert fit["pass"], fit
    try:
        scorelaw.SimParams(0.0, 0.0, 1.0, 2, 1)
    except ValueError:
        pass
    else:
        raise AssertionError("a = 0 must be rejected")

    assert scorelaw.replica_seed(0, 0) == 0xE220A8397B1DCDAF
    ok, detail = scorelaw.acceptance_criterion("A2")
    assert ok, detail
    print("scorelaw smoke test passed")


if __name__ == "__main__":
    main()
