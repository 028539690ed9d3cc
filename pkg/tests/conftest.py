import os

import numpy as np
import pytest

from utils.data import GaussianMixtureSpec, LabeledDataset, gen_mixture_samples, load_mixture_specs

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SYNTHETIC_SPEC = os.path.join(ROOT, "specs", "synthetic_2d.json")

def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="запускать длительные тесты Монте-Карло")

def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="нужен --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)

@pytest.fixture
def spec_path():
    """Путь к синтетической спецификации двух классов."""
    return SYNTHETIC_SPEC

@pytest.fixture
def specs():
    """(p0, p1): N([1,1], 0.5I) и 0.5 N([0,0], 0.5I) + 0.5 N([1.5,1.5], 0.5I)."""
    return load_mixture_specs(SYNTHETIC_SPEC)

@pytest.fixture
def small_dataset(specs):
    """200 + 200 синтетических выборок."""
    spec0, spec1 = specs
    return LabeledDataset(gen_mixture_samples(spec0, 200, 11), gen_mixture_samples(spec1, 200, 12))

@pytest.fixture
def synthetic_train(specs):
    """2000 + 2000 синтетических выборок, как в основном эксперименте."""
    spec0, spec1 = specs
    return LabeledDataset(gen_mixture_samples(spec0, 2000, 101), gen_mixture_samples(spec1, 2000, 102))

@pytest.fixture
def toy_problem():
    """
    Два центра (0,0) и (1,0) при sigma = 1: взаимное значение ядра q = e^-1.
    По одной выборке класса в его центре.
    """
    centers = np.array([[0.0, 0.0], [1.0, 0.0]])
    dataset = LabeledDataset(np.array([[0.0, 0.0]]), np.array([[1.0, 0.0]]))
    return centers, dataset, float(np.exp(-1.0))

@pytest.fixture
def unit_spec():
    """Одномерная стандартная нормаль."""
    return GaussianMixtureSpec([(1.0, [0.0], [[1.0]])])
