import random

import pytest

from asyncsc.das import key_gen, par_gen, pub_params


@pytest.fixture(scope="session")
def setup():
    """Seeded system parameters with a short succinct delay."""
    sp, pp = par_gen(128, 64, seed="tests")
    return sp, pp


@pytest.fixture(scope="session")
def keys(setup):
    sp, _ = setup
    rng = random.Random("tests:keys")
    return [key_gen(sp, rng) for _ in range(8)]


@pytest.fixture(scope="session")
def fast_pp(setup):
    sp, _ = setup
    return pub_params(sp, 64, delay="hashchain")


def pytest_terminal_summary(terminalreporter):
    from .helpers import ACCEPTANCE

    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
