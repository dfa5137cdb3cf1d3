"""pytest wiring: run doctests with numpy-1.x scalar reprs so they match on numpy 2"""
import numpy as np
import pytest
from _pytest.doctest import DoctestItem


@pytest.fixture(autouse=True)
def _numpy_legacy_repr_for_doctests(request):
    if not isinstance(request.node, DoctestItem) or int(np.__version__.split(".")[0]) < 2:
        yield
        return
    saved = np.get_printoptions()
    np.set_printoptions(legacy="1.25")
    try:
        yield
    finally:
        np.set_printoptions(**saved)
