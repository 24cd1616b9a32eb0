import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from invbo._backend import BACKENDS  # noqa: E402
from invbo.kernels import CoregionalizationParams, InputKernelParams  # noqa: E402
from invbo.mogp import Dataset, FittedModel, Hyperparams, NoiseParams  # noqa: E402


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_model(X, Y, variance, lengthscale, L, kappa, noise):
    hp = Hyperparams(
        InputKernelParams(variance, lengthscale),
        CoregionalizationParams(L, kappa),
        NoiseParams(noise),
    )
    return FittedModel.condition(Dataset(X, Y), hp)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
