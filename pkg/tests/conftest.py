import pytest

from fowlerlab import fowler


@pytest.fixture(scope="session")
def conf3_orbit():
    params = fowler.FowlerParams.conformal(3, 1.0)
    return fowler.periodic_orbit(0.3, params)


@pytest.fixture(scope="session")
def conf5_orbit():
    params = fowler.FowlerParams.conformal(5, 1.0)
    return fowler.periodic_orbit(0.5 * fowler.constant_solution(params), params)


@pytest.fixture(scope="session")
def conf6_orbit():
    params = fowler.FowlerParams.conformal(6, 1.0)
    return fowler.periodic_orbit(0.6 * fowler.constant_solution(params), params)


@pytest.fixture(scope="session")
def const5_orbit():
    return fowler.constant_orbit(fowler.FowlerParams.conformal(5, 1.0))


@pytest.fixture(scope="session")
def ckn_orbit():
    params = fowler.FowlerParams.ckn(5, 0.5, 0.7)
    return fowler.periodic_orbit(0.4 * fowler.constant_solution(params), params)


@pytest.fixture(scope="session")
def ckn_const_orbit():
    return fowler.constant_orbit(fowler.FowlerParams.ckn(5, 0.5, 0.7))
