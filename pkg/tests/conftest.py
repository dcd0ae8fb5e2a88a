import numpy as np
import pytest

from ssaltplan import casestudy
from ssaltplan.model import DesignSpec, ModelParams, StressFrame

# published case-study values used as cross-check fixtures
MLE_PUBLISHED = np.array([4.5064, -4.7131, 0.7692, 2.0410, -1.2277, 1.5321])

BOOT_MEANS = np.array([0.1634, 4.2805, 1.2006, 0.1527, 1.4025, 1.6989])
BOOT_SES = np.array([0.3705, 1.2737, 1.2724, 0.1550, 0.5039, 0.4604])

# gamma hyperparameter table: {flavour: [(alpha, rate)] per component}
PRIOR_TABLE = {
    "I": [(0.195, 1.192), (11.290, 2.637), (0.889, 0.741),
          (0.970, 6.354), (7.748, 5.526), (13.606, 8.012)],
    "II": [(0.086, 0.530), (5.018, 1.172), (0.395, 0.329),
           (0.431, 2.824), (3.444, 2.456), (6.047, 3.561)],
    "III": [(0.086, 0.530), (10.501, 1.696), (0.395, 0.329),
            (0.431, 2.824), (8.153, 3.778), (6.047, 3.561)],
}


@pytest.fixture(scope="session")
def fixture_data():
    return casestudy.load_dataset()


@pytest.fixture(scope="session")
def fixture_design():
    return casestudy.design()


@pytest.fixture(scope="session")
def fixture_fit():
    from ssaltplan.mle import fit_mle

    return fit_mle(casestudy.load_dataset())


@pytest.fixture(scope="session")
def prior_one():
    return casestudy.stock_prior("I")


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


def random_params(rng, n=1):
    """Valid natural parameter vectors over a moderate range."""
    out = []
    for _ in range(n):
        out.append(ModelParams(
            a1=rng.uniform(-1.0, 5.0), b1=rng.uniform(-5.0, -0.2),
            beta1=rng.uniform(0.4, 3.0),
            a2=rng.uniform(-1.0, 5.0), b2=rng.uniform(-5.0, -0.2),
            beta2=rng.uniform(0.4, 3.0),
        ))
    return out if n > 1 else out[0]


def make_design(tau=5.0, tc=6.0, n=35, t1=320.2136):
    frame = StressFrame.from_temperatures(293.0, t1, 353.0)
    return DesignSpec(frame=frame, tau=tau, tc=tc, n=n)
