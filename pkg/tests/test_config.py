import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from specgen import random_spec
from splitseg import config, netequiv
from splitseg.errors import InvalidParameterError
from splitseg.field import gaussian_kernel
from splitseg.splitting import Resolvent, run

DOCS = Path(__file__).resolve().parent.parent / "docs"


def schema(name):
    return json.loads((DOCS / f"{name}.schema.json").read_text())


def test_schemas_are_valid():
    for name in ("scheme", "network", "run"):
        jsonschema.Draft202012Validator.check_schema(schema(name))


@pytest.mark.parametrize("name", ["scheme_sequential", "scheme_parallel"])
def test_example_schemes(name):
    path = DOCS / "examples" / f"{name}.json"
    doc = json.loads(path.read_text())
    jsonschema.validate(doc, schema("scheme"))
    spec, shape, initial = config.scheme_from_dict(doc, path.parent)
    model = netequiv.export(spec)
    net = config.model_to_dict(model, shape)
    jsonschema.validate(json.loads(config.to_json(net)), schema("network"))
    back, bshape = config.model_from_dict(json.loads(config.to_json(net)))
    assert bshape == shape
    u0 = initial if initial is not None else np.random.default_rng(0).random(shape)
    assert netequiv.compare_trajectories(spec, back, u0, spec.steps).passed


def test_example_run():
    path = DOCS / "examples" / "run_model2.json"
    doc = json.loads(path.read_text())
    jsonschema.validate(doc, schema("run"))
    cfg = config.model_config(doc["model"], doc["params"], (192, 256), path.parent)
    assert cfg.lam == 4.0 and cfg.steps == 60


@pytest.mark.parametrize("seed", range(8))
def test_scheme_roundtrip_bitwise(seed):
    rng = np.random.default_rng(seed)
    spec, u0 = random_spec(rng)
    doc = json.loads(config.to_json(config.scheme_to_dict(spec, u0.shape, u0)))
    jsonschema.validate(doc, schema("scheme"))
    spec2, shape, initial = config.scheme_from_dict(doc)
    assert shape == u0.shape and np.array_equal(initial, u0)
    assert np.array_equal(run(spec, u0)[0], run(spec2, initial)[0])


def test_gaussian_kernel_reference():
    k = config.load_kernel({"gaussian": {"delta": 2.0, "convention": "heat-time", "radius": 3}})
    assert np.array_equal(k.weights, gaussian_kernel(2.0, radius=3).weights)
    k2 = config.load_kernel(config.dump_kernel(k))
    assert np.array_equal(k2.weights, k.weights) and k2.factors is not None


def test_resolvent_roundtrip():
    r = Resolvent.logit_nonlocal(1.0, 2.5, gaussian_kernel(1.0, radius=2), tol=1e-9, max_iters=77, polish=False)
    back = config.load_resolvent(json.loads(config.to_json(config.dump_resolvent(r))))
    assert (back.kind, back.mu, back.nu, back.tol, back.max_iters, back.polish) == ("logit-nonlocal", 1.0, 2.5, 1e-9, 77, False)


def test_model_config_errors():
    with pytest.raises(InvalidParameterError):
        config.model_config(1, {"eps": 2.0}, (8, 8))
    with pytest.raises(InvalidParameterError):
        config.model_config(2, {"convention": "other"}, (8, 8))
    cfg = config.model_config(2, {"radius": 3, "lambda": 10}, (8, 8))
    assert cfg.kernel.shape == (7, 7) and cfg.lam == 10.0


def test_field_references(tmp_path):
    from splitseg.pgm import write_pgm

    (tmp_path / "f.pgm").write_bytes(write_pgm(np.full((2, 3), 0.2)))
    assert np.array_equal(config.load_field({"pgm": "f.pgm"}, (2, 3), tmp_path), np.full((2, 3), 51 / 255))
    assert np.array_equal(config.load_field(0.5, (2, 2)), np.full((2, 2), 0.5))
    assert config.load_field(None, (2, 2)) is None
    with pytest.raises(InvalidParameterError):
        config.load_field({"inline": [[1, 2]]}, (2, 2))


def test_read_json_errors(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(InvalidParameterError):
        config.read_json(p)


def test_model_head_must_match_topology():
    spec, u0 = random_spec(np.random.default_rng(1), mode="parallel", K=2, shape=(6, 6))
    doc = config.model_to_dict(netequiv.export(spec), (6, 6))
    doc["head"] = "identity"
    with pytest.raises(InvalidParameterError):
        config.model_from_dict(doc)
