import json
import math

import pytest

import hawkes_gaps as hg


EXAMPLE1 = dict(u=[5.0, 5.0], a=[[0.5, 0.5], [0.0, 0.5]], b=[10.0, 10.0])


def test_params_round_trip():
    p = hg.Params(**EXAMPLE1)
    assert p.a == EXAMPLE1["a"]
    assert math.isclose(p.spectral_radius(), 0.5, rel_tol=1e-9)
    assert hg.Params.from_json(p.to_json()) == p


def test_invalid_params_name_the_field():
    with pytest.raises(ValueError, match="b"):
        hg.Params(u=[1.0], a=[[0.1]], b=[-1.0])


def test_simulation_is_deterministic():
    p = hg.Params(**EXAMPLE1)
    e1 = hg.simulate(p, 50.0, seed=3)
    e2 = hg.simulate(p, 50.0, seed=3)
    assert e1 == e2
    assert e1.dimension == 2
    times = e1.times(0)
    assert all(0 < x <= 50.0 for x in times)
    assert times == sorted(times)


def test_cif_example():
    p = hg.Params(u=[1.0], a=[[0.5]], b=[2.0])
    e = hg.Events([[1.0]], 5.0)
    assert math.isclose(hg.cif_full(p, e, 0, 2.0), 1 + math.exp(-2.0), rel_tol=1e-14)


def test_windows_and_restriction():
    w = hg.generate_windows(2, 1000.0, p=0.3, tau1=0.5, tau2=3.0, seed=4)
    assert w.windows(0)[0][0] == 0.0
    assert abs(w.observed_fraction()[0] - 0.375) < 0.05
    e = hg.simulate(hg.Params(**EXAMPLE1), 1000.0, seed=5)
    kept = hg.restrict_events(e, w)
    assert kept.total_count < e.total_count
    with pytest.raises(ValueError):
        hg.generate_windows(1, 100.0, tau1=3.0, tau2=1.0)


def test_fit_methods():
    p = hg.Params(**EXAMPLE1)
    e = hg.simulate(p, 200.0, seed=6)
    w = hg.generate_windows(2, 200.0, seed=7)
    box = hg.fit(e, w, method="mhpg-box", C=20.0)
    assert box["method"] == "mhpg-box"
    assert len(box["objective_trace"]) == box["iterations"]
    for m in range(2):
        for v in box["lambda_bar"][m]:
            assert box["params"].u[m] * (1 - 1e-12) <= v <= 20 * box["params"].u[m] * (1 + 1e-12)
    blind = hg.fit(e, method="mhp")
    assert blind["params"].dimension == 2
    with pytest.raises(ValueError, match="windows"):
        hg.fit(e, method="mhpg-fixed")


def test_full_window_fixed_matches_baseline():
    e = hg.simulate(hg.Params(**EXAMPLE1), 100.0, seed=8)
    full = hg.Windows.full(2, 100.0)
    a = hg.fit(e, full, method="mhpg-fixed", mu=0.5, tol=1e-10, max_iter=3000)
    b = hg.fit(e, method="mhp", mu=0.5, tol=1e-10, max_iter=3000)
    for x, y in zip(a["params"].u + a["params"].b, b["params"].u + b["params"].b):
        assert math.isclose(x, y, rel_tol=1e-8)


def test_poisson_histogram():
    p = hg.Params(u=[5.0], a=[[0.0]], b=[1.0])
    counts = hg.count_histogram(p, n_reps=300, interval=20.0, seed=9, jobs=2)
    mean = sum(counts[0]) / len(counts[0])
    assert abs(mean - 100.0) < 3 * math.sqrt(100.0 / 300)


def test_experiment_writes_outputs(tmp_path):
    config = {
        "name": "smoke",
        "truth": EXAMPLE1,
        "T": 100,
        "methods": ["mhp", {"name": "mhpg-box", "C": 20}],
        "n_param_reps": 2,
        "n_hist_reps": 20,
        "seed": 1,
    }
    summary = hg.run_experiment(json.dumps(config), str(tmp_path), jobs=2)
    assert summary["failures"] == 0
    medians = (tmp_path / "medians.csv").read_text().splitlines()
    assert medians[0].startswith("# hawkes-gaps experiment=smoke config_hash=" + summary["config_hash"])
    assert medians[1] == "method,parameter,truth,median"
