import random

import numpy as np

from trojanguard.config import bundled
from trojanguard.generate import medium_design, medium_fixture, random_netlist, write_medium
from trojanguard.netlist import format_netlist, validate
from trojanguard.sim import Simulator, random_stimulus


def test_random_netlists_validate(lib):
    for seed in range(30):
        nl = random_netlist(random.Random(seed), 25, 5, seed % 3, 2)
        assert validate(nl, lib) == []
        assert 1 <= len(nl.assert_outs) <= 2


def test_random_netlist_is_seeded():
    a = random_netlist(random.Random(1), 20, 4, 2)
    b = random_netlist(random.Random(1), 20, 4, 2)
    assert a == b


def test_bundled_medium_matches_generator(tmp_path):
    write_medium(tmp_path)
    data = bundled("")
    for path in sorted(tmp_path.rglob("*")):
        if path.is_file():
            rel = path.relative_to(tmp_path)
            assert (data / rel).read_text() == path.read_text(), rel


def test_medium_shape_and_silence(lib):
    base, cands = medium_fixture()
    nl = medium_design()
    assert validate(nl, lib) == []
    assert 450 <= len(nl.instances) <= 600
    assert len(nl.assert_outs) == len(cands)
    stim = random_stimulus(len(nl.inputs), 8, 256, np.random.default_rng(0))
    assert not Simulator(nl, lib).run(stim, watch=list(nl.assert_outs)).any()
    assert format_netlist(base) != format_netlist(nl)
