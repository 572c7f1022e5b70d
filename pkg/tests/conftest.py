import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def lights3():
    from zsae.worlds import enumerate_states, render_all, world_from_name

    config = world_from_name("lightsout3")
    states = enumerate_states(config)
    return config, states, render_all(states, config)


@pytest.fixture(scope="session")
def tiny_sae(lights3):
    """A quickly trained model; good enough for plumbing, not for quality claims."""
    from zsae.sae import StateAutoEncoder

    _, _, X = lights3
    return StateAutoEncoder(n_latent=12, hidden=(64,), epochs=15, random_state=3).fit(X)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
