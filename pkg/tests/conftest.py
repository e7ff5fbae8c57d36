import sys
import math

import numpy as np
import pytest
from hypothesis import strategies as st

from ua3dmot.detection import DetectionU
from ua3dmot.geometry import Box7

coords = st.floats(-50, 50, allow_nan=False)
extents = st.floats(0.2, 6.0, allow_nan=False)
yaws = st.floats(-math.pi, math.pi, allow_nan=False)


@st.composite
def boxes(draw):
    return Box7(draw(coords), draw(coords), draw(st.floats(-3, 3)), draw(extents), draw(extents), draw(extents), draw(yaws))


@st.composite
def psd_matrices(draw, n=7, scale=1.0):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) * scale
    rank = draw(st.integers(0, n))
    a[:, rank:] = 0.0
    return a @ a.T


def det(x, y=0.0, z=0.0, score=1.0, cls="Car", frame=0, cov=None, w=1.8, l=4.0, h=1.5, r=0.0):
    return DetectionU(frame, cls, score, Box7(x, y, z, w, l, h, r), cov)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
