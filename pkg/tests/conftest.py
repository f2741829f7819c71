import numpy as np
import pytest

from fsolink.fixtures import synthetic_image
from fsolink.harness import default_imdd_config, ensure_imdd_calibrated
from fsolink.ldpc import make_code


@pytest.fixture(scope="session")
def image_128():
    return synthetic_image(128, 128, seed=11)


@pytest.fixture(scope="session")
def image_128_b():
    return synthetic_image(128, 128, seed=12)


@pytest.fixture(scope="session")
def image_768():
    # paper-scale frame: 768 wide, 512 high
    return synthetic_image(512, 768, seed=3)


@pytest.fixture(scope="session")
def code():
    return make_code()


@pytest.fixture(scope="session")
def imdd_cfg():
    cfg = default_imdd_config()
    ensure_imdd_calibrated(cfg)
    return cfg
