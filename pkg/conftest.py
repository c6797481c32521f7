import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from acquisition_sim import SourceDetectorModel  # noqa: E402
from experiment_config import default_config  # noqa: E402
from image_synth import OpticalGeometry, render_image  # noqa: E402
from mask_bases import build_mask_set  # noqa: E402
from walk_core import calibrated_array, walk_spectrum  # noqa: E402


@pytest.fixture
def cfg(tmp_path):
    return default_config().with_overrides(output_dir=tmp_path / "run")


@pytest.fixture(scope="session")
def geometry():
    return OpticalGeometry()


@pytest.fixture(scope="session")
def walk():
    return walk_spectrum(calibrated_array())


@pytest.fixture(scope="session")
def facet(walk, geometry):
    return render_image(walk, geometry).normalized()


@pytest.fixture(scope="session")
def model():
    return SourceDetectorModel()


@pytest.fixture(scope="session")
def cake_masks():
    return build_mask_set(64, 16, "cake_cutting")


@pytest.fixture(scope="session")
def small_masks():
    return build_mask_set(8, 4, "cake_cutting")
