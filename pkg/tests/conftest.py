import numpy as np
import pytest

from lqp import ModelConfig, build_time_grid, exponential_utility


@pytest.fixture
def symmetric_config():
    """Constant symmetric benchmark: unit rates, unit volatility, unit ARA."""
    return ModelConfig(volatility=1.0, spread_factor=1.0, sell_rate=1.0,
                       buy_rate=1.0, spread_scale=0.02, intensity_exponent=0.5,
                       horizon=1.0, initial_price=100.0, initial_cash=0.0,
                       utility=exponential_utility(1.0))


@pytest.fixture
def small_grid():
    return build_time_grid(1.0, 256)


def random_configs(n, seed, kappa_range=(0.0, 0.0)):
    """Battery of valid constant-coefficient configurations."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        out.append(ModelConfig(
            volatility=float(rng.uniform(0.2, 2.5)),
            spread_factor=float(rng.uniform(0.5, 2.0)),
            sell_rate=float(rng.uniform(0.3, 3.0)),
            buy_rate=float(rng.uniform(0.3, 3.0)),
            spread_scale=float(rng.uniform(0.002, 0.05)),
            intensity_exponent=float(rng.uniform(0.1, 0.9)),
            impact_fraction=float(rng.uniform(*kappa_range)),
            horizon=float(rng.uniform(0.5, 2.0)),
            initial_price=float(rng.uniform(10.0, 500.0)),
            initial_cash=float(rng.uniform(-1.0, 1.0)),
            utility=exponential_utility(float(rng.uniform(0.3, 3.0))),
        ))
    return out
