import json
import os
import sys

import numpy as np
import pytest

HERE = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, HERE)

SPECS = os.path.join(os.path.dirname(HERE), "demos", "specs")
R, T = 3.0, 1.0


def load_fixture(dim):
    with open(os.path.join(HERE, "fixtures", f"bump{dim}d_oracle.json")) as fh:
        return json.load(fh)


def fixture_arrays(data):
    rays = data["rays"]
    out = {key: np.array([r[key] for r in rays]) for key in rays[0]}
    return out


@pytest.fixture(scope="session")
def oracle2():
    return load_fixture(2)


@pytest.fixture(scope="session")
def oracle3():
    return load_fixture(3)


@pytest.fixture
def specs():
    return SPECS


def bump_from_fixture(data):
    from lenscat.metric import ConformalBump
    p = data["params"]
    return ConformalBump(data["dim"], data["R"], data["T"], amplitude=p["amplitude"],
                         center=tuple(p["center"]), width=p["width"])
