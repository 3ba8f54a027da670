import dataclasses

import pytest
from hypothesis import given, strategies as st

from localdecay.acceptance import CHECKS
from localdecay.config import (STAGES, BackgroundSection, CampaignSection, Config, DataSection,
                               EvolveSection, FitSection, bundled, dumps, from_dict, loads,
                               to_dict)
from localdecay.errors import ConfigError

pos = st.floats(min_value=1e-3, max_value=1e4, allow_nan=False)
anyf = st.floats(min_value=-1e4, max_value=1e4, allow_nan=False)

campaigns = st.builds(
    CampaignSection,
    name=st.text(st.characters(codec="utf-8", exclude_categories=("Cs",)), max_size=20),
    stages=st.lists(st.sampled_from(STAGES), unique=True),
    ell=st.lists(st.integers(0, 8), min_size=1, max_size=4),
    workers=st.integers(1, 8))
backgrounds = st.builds(
    BackgroundSection, kind=st.sampled_from(["minkowski", "schwarzschild"]), mass=pos,
    R0=st.none() | pos, r_match=st.none() | pos, domain=st.sampled_from(["whole", "exterior"]))
datas = st.builds(DataSection, profile=st.sampled_from(["gaussian", "bump"]), center=anyf,
                  width=pos, amplitude=anyf,
                  kind=st.sampled_from(["static", "velocity", "mixed", "outgoing", "ingoing"]))
evolves = st.builds(EvolveSection, h=pos, x_min=st.none() | anyf, x_max=pos,
                    t_final=st.floats(0, 1e4), cfl=st.floats(0.01, 0.9),
                    observers=st.lists(anyf, max_size=4),
                    boundary=st.sampled_from(["outflow", "reflecting"]),
                    snapshot_every=st.floats(0, 100), backend=st.sampled_from(["auto", "python"]))
fits = st.tuples(pos, pos).filter(lambda w: w[0] < w[1]).map(
    lambda w: FitSection(window=list(w)))
configs = st.builds(Config, campaign=campaigns, background=backgrounds, data=datas,
                    evolve=evolves, fit=fits)


@given(configs)
def test_round_trip(cfg):
    text = dumps(cfg)
    back = loads(text)
    assert back == cfg
    assert back.hash() == cfg.hash()
    assert dumps(back) == text


def test_empty_document_is_defaults():
    assert loads("") == Config()


def test_hash_changes_with_content():
    a = Config()
    b = dataclasses.replace(a, evolve=dataclasses.replace(a.evolve, h=0.05))
    assert a.hash() != b.hash()


def test_unset_optionals_are_omitted():
    d = to_dict(Config())
    assert "R0" not in d["background"] and "expect_phi" not in d["fit"]


@pytest.mark.parametrize("text, field", [
    ("[evolve]\nh = -1.0", "evolve.h"),
    ("[evolve]\nh = 'small'", "evolve.h"),
    ("[evolve]\nspeed = 1.0", "evolve.speed"),
    ("[nonsense]\nx = 1", "nonsense"),
    ("[campaign]\nstages = ['evolve', 'evolve']", "campaign.stages"),
    ("[campaign]\nstages = ['launch']", "campaign.stages[0]"),
    ("[campaign]\nell = [-1]", "campaign.ell"),
    ("[campaign]\nworkers = true", "campaign.workers"),
    ("[background]\nkind = 'kerr'", "background.kind"),
    ("[background]\ncoefficients = {g_tt = 'a.txt'}", "background.coefficients"),
    ("[fit]\nwindow = [10.0, 5.0]", "fit.window"),
    ("[resolve]\ntau_im = 0.5", "resolve.tau_im"),
    ("[lowfreq]\nsweep = [1e-5, 0.5, 16.0]", "lowfreq.sweep"),
    ("[acceptance]\nchecks = ['nope']", "acceptance.checks[0]"),
    ("[evolve\nh = 1", "<document>"),
])
def test_invalid_documents_name_the_field(text, field):
    with pytest.raises(ConfigError) as exc:
        loads(text)
    assert exc.value.field == field


def test_integers_accepted_for_floats():
    assert loads("[evolve]\nh = 1").evolve.h == 1.0


def test_bundled_configs():
    acc = bundled("acceptance")
    assert acc.campaign.stages == ["acceptance"] and acc.acceptance.checks == []
    price = bundled("price")
    assert price.campaign.ell == [0, 1] and price.background.kind == "schwarzschild"
    for key in acc.acceptance.checks:
        assert key in CHECKS


def test_from_dict_rejects_non_tables():
    with pytest.raises(ConfigError):
        from_dict({"evolve": 3})
