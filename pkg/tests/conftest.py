import functools

import numpy as np
import pytest

from irs_wpcn.experiments import default_config, trial_seed
from irs_wpcn.channel import sample_channels


@functools.lru_cache(maxsize=None)
def desk_channels(seed: int, preset: str = "desk"):
    """Channel realisation of the calibrated desk scenario for one seed."""
    cfg = default_config(preset)
    geom = cfg.geometry.realise(cfg.channel.users, seed)
    return sample_channels(cfg.channel, geom, seed)


@functools.lru_cache(maxsize=None)
def desk_config(preset: str = "desk"):
    return default_config(preset)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


#: criterion number -> (passed, detail), filled by the acceptance suite
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
