import math

import pytest

from levycodec.levy_model import (
    CompoundPoisson,
    Exponential,
    GammaStandard,
    GaussianOnly,
    LevyTriplet,
    NormalLaw,
    Stable,
    TwoPoint,
)

GAMMA_B = 1.0 - math.exp(-1.0)  # zero drift for the standard Gamma subordinator

FAMILIES = {
    "stable08": LevyTriplet(Stable(0.8, 0.5, 0.5)),
    "stable12": LevyTriplet(Stable(1.2, 0.3, 0.7), b=0.2),
    "stable15": LevyTriplet(Stable(1.5, 0.5, 0.5)),
    "gamma": LevyTriplet(GammaStandard(), b=GAMMA_B),
    "cpoisson": LevyTriplet(CompoundPoisson(20.0, TwoPoint(-0.3, 0.4, 0.7)), sigma2=0.1),
    "cp_exp": LevyTriplet(CompoundPoisson(5.0, Exponential(0.4, -1)), b=0.5),
    "cp_normal": LevyTriplet(CompoundPoisson(8.0, NormalLaw(0.1, 0.5))),
    "gaussian": LevyTriplet(GaussianOnly(), sigma2=1.0, b=0.3),
}


@pytest.fixture(params=sorted(FAMILIES))
def family(request):
    return request.param, FAMILIES[request.param]


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
