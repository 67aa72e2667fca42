import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fasport.channel import ArrayConfig, ChannelBatch, ScenarioConfig, generate_batch


@pytest.fixture(scope="session")
def small_batch():
    """3x3 grid, 2 users, 2 selected ports, 6 realizations."""
    cfg = ArrayConfig(n_x=3, n_y=3, w_x=1.0, w_y=1.0)
    scen = ScenarioConfig(users_k=2, selected_n=2, master_seed=42)
    return generate_batch(cfg, scen, 6)


@pytest.fixture(scope="session")
def n8_batch():
    """2x4 grid (N=8), 2 users, n=2, 20 realizations: exhaustive is cheap."""
    cfg = ArrayConfig(n_x=4, n_y=2, w_x=2.0, w_y=1.0)
    scen = ScenarioConfig(users_k=2, selected_n=2, master_seed=77)
    return generate_batch(cfg, scen, 20)


def make_batch(realizations, scenario, array):
    """ChannelBatch from explicit complex data, bypassing generation."""
    return ChannelBatch(realizations=np.asarray(realizations, dtype=complex),
                        scenario=scenario, array=array)
