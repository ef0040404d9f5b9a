import numpy as np
import pytest

from censored_exploration import VenueModel


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def desk_venues():
    """Four Zero-Bin power-law venues spanning the observed parameter ranges."""
    return [
        VenueModel("zb-power-law", 500, 0.6, 1.3),
        VenueModel("zb-power-law", 500, 0.7, 0.3),
        VenueModel("zb-power-law", 500, 0.8, 0.7),
        VenueModel("zb-power-law", 500, 0.9, 0.5),
    ]


def draw_censored(model, submitted, rng):
    """(submitted, min(submitted, latent)) pairs for the given submissions."""
    submitted = np.asarray(submitted, dtype=np.int64)
    latent = model.sample(rng, size=len(submitted))
    return np.column_stack([submitted, np.minimum(submitted, latent)])


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(line)
