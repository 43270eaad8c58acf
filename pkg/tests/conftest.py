import numpy as np
import pytest
import torch

from sketchsynth.data import generate_synthetic_photo
from sketchsynth.imagery import ImageBuffer
from sketchsynth.modeling.features import TinyFeatureExtractor
from sketchsynth.modeling.generator import GeneratorConfig


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    """One visible PASS/FAIL line per acceptance criterion."""
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" and item.fspath.basename == "test_acceptance.py":
        label = item.name.replace("test_", "").replace("_", "-")
        print(f"\nACCEPTANCE [{label}]: {'PASS' if rep.passed else 'FAIL'}", flush=True)


@pytest.fixture(scope="session")
def tiny_fx():
    return TinyFeatureExtractor(seed=0)


@pytest.fixture(scope="session")
def tiny_fx_f64():
    return TinyFeatureExtractor(seed=0).double()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def demo_photo() -> ImageBuffer:
    return generate_synthetic_photo(7, size=256)


def tiny_gen_config(input_channels: int = 3, n_res: int = 2) -> GeneratorConfig:
    """Small generator (all widths <= 8) for fast and float64-friendly tests."""
    return GeneratorConfig(
        input_channels=input_channels,
        base_width=2,
        bottleneck_width=8,
        n_down=3,
        n_bottleneck_res=n_res,
        n_up=3,
    )


def small_gen_config(input_channels: int = 3) -> GeneratorConfig:
    """Mid-size config for smoke training: big enough to fit 8 images fast."""
    return GeneratorConfig(
        input_channels=input_channels,
        base_width=12,
        bottleneck_width=48,
        n_down=3,
        n_bottleneck_res=3,
        n_up=3,
    )


def to_net_tensor(buf: ImageBuffer) -> torch.Tensor:
    """(C, H, W) float32 tensor in [-1, 1] from a unit-range buffer."""
    return torch.from_numpy(buf.data.transpose(2, 0, 1) * 2.0 - 1.0)
