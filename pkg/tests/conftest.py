import json

import numpy as np
import pytest

from qbld.models import IndividualBlock, ModelSpec, PanelDataset, Priors
from qbld.rng import RandomStream


def make_panel(rows, x_names=("x",), s_names=("const",)):
    """rows: list of (y, X, S) per individual, X/S given as nested lists."""
    blocks = tuple(
        IndividualBlock(id=i + 1, y=np.asarray(y, dtype=np.int8), X=np.asarray(X, dtype=float),
                        S=np.asarray(S, dtype=float))
        for i, (y, X, S) in enumerate(rows)
    )
    return PanelDataset(individuals=blocks, x_names=tuple(x_names), s_names=tuple(s_names))


@pytest.fixture
def rng():
    return RandomStream(20240611)


@pytest.fixture
def scalar_panel():
    # n=1, T=1, k=1 (x=3), l=1 (S=1), y=1
    return make_panel([([1], [[3.0]], [[1.0]])])


@pytest.fixture
def median_spec():
    return ModelSpec(p=0.5, priors=Priors(beta0=[0.0], B0=[[1.0]]))


@pytest.fixture
def write_config(tmp_path):
    def _write(name="config.json", **overrides):
        cfg = {
            "p": 0.5, "draws": 60, "burn_in": 20, "seed": 7,
            "x_columns": ["x2", "x3"], "s_columns": ["s2"],
            "simulation": {"n": 30, "T": 4},
        }
        cfg.update(overrides)
        path = tmp_path / name
        path.write_text(json.dumps(cfg))
        return path
    return _write
