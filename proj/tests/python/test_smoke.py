import math

import numpy as np
import pytest

import skewlab


def test_transforms():
    assert skewlab.kappa(0.5, 2.0) == 3.0
    assert skewlab.kappa(0.5, -2.0) == -1.0
    assert skewlab.phi(0.5, skewlab.kappa(0.5, 0.7)) == pytest.approx(0.7)
    assert skewlab.alpha_limit(math.e, 1 / math.e) == pytest.approx(math.tanh(1.0), abs=1e-15)


def test_invalid_skew_raises():
    with pytest.raises(skewlab.SkewlabError, match=r"\|beta\| < 1"):
        skewlab.kappa(1.5, 0.0)


def test_expr():
    e = skewlab.Expr("(c/(2*eps))*indicator(-eps, eps, x)", {"c": 1.0})
    assert e(0.05, 0.1) == pytest.approx(5.0)
    assert e(0.2, 0.1) == 0.0
    assert skewlab.Expr("-2^2")(0.0) == -4.0
    with pytest.raises(skewlab.SkewlabError, match="column 4"):
        skewlab.Expr("x +")


def test_distances():
    a = [0.0, 1.0, 2.0]
    assert skewlab.ks_distance(a, a) == 0.0
    assert skewlab.wasserstein1(a, [x + 0.3 for x in a]) == pytest.approx(0.3)
    assert skewlab.ks_critical_value(100, 100) > 0


def test_skew_simulation_and_local_time():
    paths = skewlab.simulate_skew(0.5, n_steps=200, n_paths=4000, seed=3)
    assert paths.shape == (4000, 201)
    assert np.all(paths[:, 0] == 0.0)
    assert np.mean(paths[:, -1] > 0) == pytest.approx(0.75, abs=0.03)
    again = skewlab.simulate_skew(0.5, n_steps=200, n_paths=4000, seed=3)
    assert np.array_equal(paths, again)
    lt = skewlab.local_time(paths[:10])
    assert lt.shape == (10, 201)
    assert np.all(np.diff(lt, axis=1) >= 0)


def test_run_command_help():
    code, out, _ = skewlab.run_command(["--help"])
    assert code == 0
    assert "study" in out


def test_configs_match_schema():
    import json
    import pathlib

    jsonschema = pytest.importorskip("jsonschema")
    root = pathlib.Path(__file__).resolve().parents[2]
    schema = json.loads((root / "docs" / "config_schema.json").read_text())
    for path in sorted((root / "configs").glob("*.json")):
        jsonschema.validate(json.loads(path.read_text()), schema)
