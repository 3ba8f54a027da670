import json

import numpy as np
import pytest

from localdecay.campaign import (RunManifest, compare_series, prepare_run_dir, rerun_manifest,
                                 run_campaign, series_name, sha256_file)
from localdecay.config import loads
from localdecay.errors import StageError

SMALL = """
[campaign]
name = "small"
stages = ["normalize", "evolve", "resolve", "zero", "lowfreq", "synthesize", "compare"]
ell = [0]

[background]
kind = "minkowski"

[evolve]
h = 0.1
x_max = 100.0
t_final = 60.0
observers = [10.0]

[resolve]
taus = [1.0]
sweep = [0.1, 2.0, 3.0]
sweep_h = 0.05
sweep_x_max = 60.0

[synthesis]
t_max = 40.0
observers = [10.0]
"""


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("camp") / "run"
    manifest, summary = run_campaign(loads(SMALL), out)
    return out, manifest, summary


def test_small_campaign_outputs(small_run):
    out, manifest, summary = small_run
    assert manifest.passed is True and summary["campaign"]["passed"] is True
    assert manifest.stages == ["normalize", "evolve", "resolve", "zero", "lowfreq",
                               "synthesize", "compare"]
    paths = {o["path"] for o in manifest.outputs}
    assert "evolve/l0/" + series_name("phi", 10.0) in paths
    assert {"summary.toml", "compare/l0/report.txt", "resolve/l0/bounds.txt"} <= paths
    for o in manifest.outputs:
        p = out / o["path"]
        assert sha256_file(p) == o["sha256"] and p.stat().st_size == o["bytes"]
    assert summary["compare"]["l0"]["l2_rel"] < 0.01
    assert manifest.steps["evolve/l0"] == 1200


def test_manifest_round_trip(small_run):
    out, manifest, _ = small_run
    back = RunManifest.read(out / "manifest.json")
    assert back == RunManifest(**json.loads(json.dumps(manifest.__dict__)))
    assert back.parameters["background"]["kind"] == "minkowski"


def test_rerun_reproduces_checksums(small_run, tmp_path):
    out, manifest, _ = small_run
    new, bad = rerun_manifest(out / "manifest.json", tmp_path / "again")
    assert bad == []
    assert new.config_hash == manifest.config_hash


def test_empty_campaign_writes_only_manifest(tmp_path):
    manifest, summary = run_campaign(loads(""), tmp_path / "empty")
    assert [p.name for p in (tmp_path / "empty").iterdir()] == ["manifest.json"]
    assert manifest.outputs == [] and manifest.passed is None


def test_existing_directories_are_protected(tmp_path):
    d = tmp_path / "d"
    d.mkdir()
    (d / "keep.txt").write_text("precious")
    with pytest.raises(FileExistsError):
        prepare_run_dir(d)
    with pytest.raises(FileExistsError):
        prepare_run_dir(d, overwrite=True)     # not a run directory
    assert (d / "keep.txt").read_text() == "precious"
    run_campaign(loads(""), tmp_path / "r")
    with pytest.raises(FileExistsError):
        run_campaign(loads(""), tmp_path / "r")
    run_campaign(loads(""), tmp_path / "r", overwrite=True)


def test_failing_stage_leaves_partial_manifest(tmp_path):
    cfg = loads("""
[campaign]
stages = ["evolve", "fit"]
[background]
kind = "minkowski"
[evolve]
x_max = 100.0
t_final = 60.0
[fit]
window = [10.0, 50.0]
""")
    with pytest.raises(StageError) as exc:
        run_campaign(cfg, tmp_path / "f")
    assert exc.value.stage == "fit"
    m = RunManifest.read(tmp_path / "f" / "manifest.json")
    assert m.failed_stage == "fit" and m.passed is False


def test_parallel_modes_match_serial(tmp_path):
    text = """
[campaign]
stages = ["evolve"]
ell = [0, 1, 2]
workers = {w}
[background]
kind = "minkowski"
[evolve]
x_max = 80.0
t_final = 40.0
"""
    a, _ = run_campaign(loads(text.format(w=1)), tmp_path / "serial")
    b, _ = run_campaign(loads(text.format(w=3)), tmp_path / "parallel")
    # summary.toml records the config hash, which includes the worker count
    ca, cb = a.checksums(), b.checksums()
    assert ca.pop("summary.toml") != cb.pop("summary.toml")
    assert ca == cb and len(ca) == 6


def test_compare_series():
    t = np.linspace(0, 10, 101)
    y = np.sin(t)
    r = compare_series(t, y, t, y)
    assert r["l2_rel"] == 0 and r["sup_rel"] == 0 and r["samples"] == 101
    r = compare_series(t, y, t, 1.01 * y, window=[0, 5])
    assert r["window"] == [0.0, 5.0]
    assert r["l2_rel"] == pytest.approx(0.01, rel=1e-10)
