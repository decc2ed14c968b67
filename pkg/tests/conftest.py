import pytest

from cptwell import analytic, drive, spectrum


@pytest.fixture(scope="session")
def solution():
    return spectrum.solve()


@pytest.fixture(scope="session")
def working_drive(solution):
    return drive.calibrate(solution)


@pytest.fixture(scope="session")
def working_params(working_drive):
    return analytic.renormalize(working_drive)
