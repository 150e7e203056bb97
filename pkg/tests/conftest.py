import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from bmsruin import presets
from bmsruin.model import BonusMalusSystem, DistributionSpec
from bmsruin.solver import solve

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

PROPERTY_CASES = 200


@pytest.fixture(scope="session")
def gamma_bms():
    return presets.gamma_bms()


@pytest.fixture(scope="session")
def halfnormal_bms():
    return presets.halfnormal_bms()


@pytest.fixture(scope="session")
def maxwell_bms():
    return presets.maxwell_bms()


@pytest.fixture(scope="session")
def exponential_ds():
    return presets.exponential_ds()


@pytest.fixture(scope="session")
def gamma_solved(gamma_bms):
    return solve(gamma_bms, 3)


@pytest.fixture(scope="session")
def halfnormal_127(halfnormal_bms):
    return solve(halfnormal_bms, 127)


@pytest.fixture(scope="session")
def maxwell_runs(maxwell_bms):
    return {K: solve(maxwell_bms, K) for K in (1, 7, 127)}


# ---------------------------------------------------------------------------
# random catalog systems

claim_laws = st.one_of(
    st.builds(DistributionSpec.exponential, st.floats(0.5, 8.0)),
    st.builds(DistributionSpec.gamma, st.integers(1, 4), st.floats(1.0, 10.0)),
    st.builds(DistributionSpec.half_normal, st.floats(0.2, 1.5)),
    st.builds(DistributionSpec.maxwell, st.floats(0.2, 1.0)),
    st.builds(lambda a, w: DistributionSpec.uniform(a, a + w), st.floats(0.0, 0.5), st.floats(0.2, 1.5)),
)


@st.composite
def discrete_premiums(draw):
    k = draw(st.integers(1, 6))
    vals = sorted(set(round(v, 3) for v in draw(st.lists(st.floats(0.2, 3.0), min_size=k, max_size=k))))
    raw = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=len(vals), max_size=len(vals))))
    w = raw / raw.sum()
    w[-1] = 1.0 - w[:-1].sum()
    return DistributionSpec.mixture(vals, w.tolist())


continuous_premiums = st.one_of(
    st.builds(DistributionSpec.exponential, st.floats(0.3, 3.0)),
    st.builds(DistributionSpec.gamma, st.integers(1, 3), st.floats(1.0, 6.0)),
    st.builds(lambda a, w: DistributionSpec.uniform(a, a + w), st.floats(0.1, 1.0), st.floats(0.2, 2.0)),
)


@st.composite
def systems(draw, positive_drift=True):
    premium = draw(st.one_of(discrete_premiums(), continuous_premiums))
    claim = draw(claim_laws)
    lam1 = draw(st.floats(1.0, 30.0))
    lam2 = draw(st.floats(0.5, 20.0))
    system = BonusMalusSystem(premium, claim, lam1, lam2)
    if positive_drift and system.drift <= 0.05 * system.total_rate:
        # rescale the claim intensity so the drift is comfortably positive
        from bmsruin.model import mean
        lam2 = 0.5 * lam1 * mean(premium) / mean(claim)
        system = BonusMalusSystem(premium, claim, lam1, lam2)
    return system
