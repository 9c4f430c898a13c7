from fractions import Fraction

import pytest

from detmpc.config import RunConfig
from detmpc.errors import InvalidParams


def test_defaults():
    cfg = RunConfig()
    assert cfg.delta == Fraction(1, 8) and cfg.k == 8
    assert cfg.field_for(10) == 1031  # smallest prime >= 1024
    assert cfg.field_for(5000) == 5003


@pytest.mark.parametrize("kw", [{"zeta": 1}, {"k_conc": 1}, {"field_p": 100}, {"color_reserve": 0},
                                {"color_bins": 2, "color_reserve": 2}, {"space": 0}, {"workers": 0}])
def test_rejects(kw):
    with pytest.raises(InvalidParams):
        RunConfig(**kw)


def test_fixed_field_too_small():
    with pytest.raises(InvalidParams):
        RunConfig(field_p=11).field_for(11)


def test_with_and_cluster():
    cfg = RunConfig(space=64).with_(delta="1/48")
    assert cfg.k == 48 and cfg.new_cluster().spec.space_words == 64
