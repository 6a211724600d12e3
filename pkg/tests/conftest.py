import pytest

from dseval import predictor
from dseval.tr3gen import Tr3Config, generate_dataset


@pytest.fixture(scope="session")
def tr3_small():
    """600-graph dataset shared across the test session."""
    return generate_dataset(Tr3Config(num_graphs=600, seed=17))


@pytest.fixture(scope="session")
def trained_small(tr3_small):
    """A quickly trained classifier on the shared dataset."""
    model, ckpt = predictor.train(
        tr3_small, predictor.PredictorConfig(max_epochs=60, seed=1))
    return model, ckpt
