import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fuseplan.graph import ComputationGraph, LayerDescriptor, LayerKind, PartitionScheme
from fuseplan.hardware import KB, HardwareConfig

MODELS_DIR = Path(__file__).parent.parent / "models"
CONFIGS_DIR = Path(__file__).parent.parent / "configs"


def L(nid, kind, kh, kw, sh, sw, cin, cout, oh, ow, wb=0):
    return LayerDescriptor(nid, kind, kh, kw, sh, sw, cin, cout, oh, ow, wb)


def make_forkjoin_1d():
    """Two-input fork-join regression example (1D along W).

    Expected derivation with output tiles forced to 2:
    delta_w = {0:4, 1:2, 2:2, 3:2, 4:2, 5:2}, tile_w(0)=6, tile_w(1)=4,
    upd = {0:1, 1:2, 2:1, 3:2, 4:2, 5:2}.
    """
    K = LayerKind
    nodes = [
        L(0, K.INPUT, 1, 1, 1, 1, 8, 8, 1, 10),
        L(1, K.INPUT, 1, 1, 1, 1, 8, 8, 1, 10),
        L(2, K.CONV, 1, 4, 1, 2, 8, 16, 1, 4, 512),
        L(3, K.CONV, 1, 3, 1, 1, 16, 16, 1, 8, 768),
        L(4, K.CONV, 1, 3, 1, 1, 8, 16, 1, 8, 384),
        L(5, K.ELTWISE, 1, 1, 1, 1, 16, 16, 1, 8),
    ]
    edges = [(0, 2), (0, 3), (1, 3), (1, 4), (3, 5), (4, 5)]
    return ComputationGraph(nodes, edges, [0, 1], [2, 5])


def make_fig4_2d():
    """Fork graph whose forward (production-driven) execution caches unused
    intermediates: a large-kernel branch (F=5) and a two-conv branch (F=3
    then F=2) rejoin in a window op, so one fixed input tile overproduces on
    the shallow-kernel path."""
    K = LayerKind
    nodes = [
        L(0, K.INPUT, 1, 1, 1, 1, 4, 4, 8, 8),
        L(1, K.CONV, 5, 5, 1, 1, 4, 8, 4, 4, 5 * 5 * 4 * 8),
        L(2, K.CONV, 3, 3, 1, 1, 4, 8, 6, 6, 3 * 3 * 4 * 8),
        L(3, K.CONV, 2, 2, 1, 1, 8, 8, 5, 5, 2 * 2 * 8 * 8),
        L(4, K.CONV, 2, 2, 1, 1, 16, 8, 4, 4, 2 * 2 * 16 * 8),
    ]
    edges = [(0, 1), (0, 2), (2, 3), (1, 4), (3, 4)]
    return ComputationGraph(nodes, edges, [0], [4])


def whole(g):
    return PartitionScheme({nid: 0 for nid in g.ids})


@pytest.fixture
def forkjoin_1d():
    return make_forkjoin_1d()


@pytest.fixture
def fig4_graph():
    return make_fig4_2d()


@pytest.fixture
def default_hw():
    return HardwareConfig()


@pytest.fixture
def big_hw():
    return HardwareConfig(global_buf_bytes=64 * 1024 * KB,
                          weight_buf_bytes=64 * 1024 * KB)


@pytest.fixture
def tiny_hw():
    # small buffers so partition choices matter on toy graphs
    return HardwareConfig(global_buf_bytes=4 * KB, weight_buf_bytes=64 * KB)
