import pytest

from twtoa.model import SPEED_OF_LIGHT, ClockModel, RangingScenario

C = SPEED_OF_LIGHT


@pytest.fixture
def paper_scenario():
    """d = 30 m, f0 = 100 MHz, rho = 1e-4, D = 10, sigma = 0.1 m / c."""
    return RangingScenario(
        distance_m=30.0,
        delay_counts=10,
        clock=ClockModel.from_offset(100e6, 1e-4),
        noise_std_s=0.1 / C,
        num_samples=1000,
    )
