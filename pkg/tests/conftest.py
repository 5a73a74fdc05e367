import pytest

from evcs.env import ArrivalEvent, EpisodeConfig

# Two-EV worked example: EV1 (d=3, p=4), EV2 (d=2, p=4) parked at t=0,
# totals (2, 1, 0, 2, 0).  Prices are distinct primes to catch index slips.
TABLE1_PRICES = (2.0, 3.0, 5.0, 7.0, 11.0, 13.0)
TABLE1_TOTALS = (2, 1, 0, 2, 0)


@pytest.fixture
def table1_config() -> EpisodeConfig:
    return EpisodeConfig(
        horizon=5,
        prices=TABLE1_PRICES,
        arrivals=(ArrivalEvent(0, 3, 4), ArrivalEvent(0, 2, 4)),
    )
