import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from riscf import scenario


@pytest.fixture
def small_setup():
    """One fixed desk-scale instance with all impairments active."""
    stats = scenario.random_statistics(1, L=2, S=2, K=3)
    config = scenario.SystemConfig(L=2, S=2, K=3, B=4, R=4, p=1.0, sigma2=1.0)
    hwi = scenario.HwiProfile(kappa_u=0.3, kappa_b=0.3, quant_bits=2)
    return stats, config, hwi


def make_nlos(seed, L=2, S=2, K=3):
    base = scenario.random_statistics(seed, L=L, S=S, K=K)
    return scenario.ChannelStatistics(
        alpha=base.alpha, beta=base.beta, gamma=base.gamma,
        delta=np.zeros((L, S)), eps=base.eps,
        aoa_ris=base.aoa_ris, aoa_ap=base.aoa_ap, aod_ris=base.aod_ris,
    )
