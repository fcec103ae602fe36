import json
import os
from fractions import Fraction

import numpy as np
import pytest

from rkhs.core import DomainTag, PointSet, bergman, gram, szego
from sampling import STRESS_RADIUS, parse_kernel, parse_points
from utils import (
    ConfigError,
    export_results,
    format_scalar,
    gram_to_dict,
    load_experiment_config,
    load_kernel,
    measure_from_dict,
    parse_scalar,
    to_jsonable,
)


def test_disk_plan_is_seeded_and_reaches_the_stress_ring():
    first = parse_points("disk:40:r0.95", seed=7)
    again = parse_points("disk:40:r0.95", seed=7)
    other = parse_points("disk:40:r0.95", seed=8)
    assert first.domain == DomainTag.DISK
    assert len(first) == 40
    assert np.array_equal(first.values, again.values)
    assert not np.array_equal(first.values, other.values)
    assert np.all(np.abs(first.values) < 0.95)
    ring = np.isclose(np.abs(first.values), STRESS_RADIUS)
    assert np.count_nonzero(ring) >= 8


def test_other_sampling_plans():
    upper = parse_points("upper:10:r0.5")
    assert upper.domain == DomainTag.UPPER_HALF_PLANE
    assert np.all(upper.values.imag > 0)
    interval = parse_points("interval:10:-0.5:0.5")
    assert interval.domain == DomainTag.REAL_INTERVAL
    assert np.all(np.abs(interval.values) <= 0.5)
    assert len(parse_points("triadic:2")) == 8
    assert parse_points("plane:5:r3").domain == DomainTag.WHOLE_PLANE


def test_explicit_points_infer_their_domain():
    assert parse_points("explicit:[0, 0.5, 1]").domain == DomainTag.UNIT_INTERVAL
    assert parse_points("explicit:[-0.5, 0.5]").domain == DomainTag.REAL_INTERVAL
    assert parse_points('explicit:["0.1+0.2i", 0.3]').domain == DomainTag.DISK
    assert parse_points('explicit:["1+1i", "2+0.5i"]').domain == DomainTag.UPPER_HALF_PLANE
    assert parse_points("explicit:[2, -3]").domain == DomainTag.WHOLE_PLANE


@pytest.mark.parametrize("token", ["disk:5", "disk:0:r0.5", "disk:5:r1.2", "cube:5:r0.5",
                                   "explicit:{}", "explicit:[0.1, 0.1]", "interval:5:0.5:0.1"])
def test_malformed_sampling_plans(token):
    with pytest.raises(ConfigError):
        parse_points(token)


def test_parse_kernel():
    pts = PointSet([0.0, 0.5], DomainTag.DISK)
    assert np.allclose(gram(parse_kernel("szego"), pts).entries, [[1, 1], [1, 4 / 3]])
    assert parse_kernel("bergman").to_descriptor() == bergman().to_descriptor()
    assert parse_kernel("inverse-power:3").params == {"n": 3}
    assert parse_kernel("bargmann:2").params == {"c": Fraction(2)}
    assert parse_kernel("interval-szego").domain == DomainTag.REAL_INTERVAL
    with pytest.raises(ConfigError):
        parse_kernel("inverse-power")
    with pytest.raises(ConfigError):
        parse_kernel("inverse-power:0")
    with pytest.raises(ConfigError):
        parse_kernel("gaussian")


def test_scalar_text_format():
    assert format_scalar(0.25) == "0.25"
    assert format_scalar(1 - 2j) == "1.0-2.0i"
    assert format_scalar(Fraction(1, 3)) == "1/3"
    assert parse_scalar("1.0-2.0i") == 1 - 2j
    assert parse_scalar(format_scalar(0.1 + 1e-17j)) == 0.1 + 1e-17j
    with pytest.raises(ValueError):
        parse_scalar("nan")


def test_to_jsonable():
    value = to_jsonable({"a": np.array([1.0, 2.0]), "b": Fraction(1, 2), "c": 1j, "d": np.float64("inf"),
                         "e": DomainTag.DISK, "f": np.bool_(True)})
    assert value == {"a": [1.0, 2.0], "b": "1/2", "c": "0.0+1.0i", "d": "inf", "e": "complex-disk", "f": True}


def test_export_results(tmp_path):
    out = os.path.join(str(tmp_path), "bundle")
    record = export_results(out, {"experiment": "gram", "passed": True},
                            files={"b.csv": (["i", "value"], [["0", 0.5 + 1j]])},
                            documents={"a.json": {"x": 1}})
    assert record["files"] == ["a.json", "b.csv"]
    with open(os.path.join(out, "b.csv")) as f:
        assert f.read() == "i,value\n0,0.5+1.0i\n"
    with open(os.path.join(out, "summary.json")) as f:
        assert json.load(f)["passed"] is True
    assert not [name for name in os.listdir(out) if name.endswith(".tmp")]


def test_load_experiment_config(tmp_path):
    path = os.path.join(str(tmp_path), "config.json")
    with open(path, "w") as f:
        json.dump({"experiment": "order-chain", "n-max": 4}, f)
    assert load_experiment_config(path) == {"experiment": "order-chain", "n_max": 4}
    with open(path, "w") as f:
        f.write("[1, 2]")
    with pytest.raises(ConfigError):
        load_experiment_config(path)
    with pytest.raises(ConfigError):
        load_experiment_config(os.path.join(str(tmp_path), "missing.json"))


def test_load_kernel():
    K = load_kernel({"node": "power", "params": {"n": 2}, "children": [{"node": "builtin", "name": "szego"}]})
    pts = PointSet([0.3, -0.4j], DomainTag.DISK)
    assert np.allclose(gram(K, pts).entries, gram(bergman(), pts).entries)
    with pytest.raises(ConfigError):
        load_kernel({"node": "unknown"})
    with pytest.raises(ConfigError):
        load_kernel({"node": "builtin", "name": "inverse_power", "params": {"n": 0}})


def test_measure_and_gram_documents():
    mu = measure_from_dict({"points": ["0.5", "0.1+0.1i"], "weights": [1, "-2.0i"]})
    assert mu.pts.domain == DomainTag.DISK
    assert list(mu.weights) == [1, -2j]
    with pytest.raises(ConfigError):
        measure_from_dict({"points": [0.5]})
    document = gram_to_dict(gram(szego(), PointSet([0.0, 0.5], DomainTag.DISK)))
    assert document["points"] == ["0.0", "0.5"]
    assert document["domain"] == "complex-disk"
    assert document["entries"][0] == ["1.0", "1.0"]
    assert document["kernel_descriptor"] == {"node": "builtin", "name": "szego", "params": {}}
