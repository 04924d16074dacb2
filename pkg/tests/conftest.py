import math

import numpy as np
import pytest

from contact_tops.models import builtin_model, permute_frame, rotate_frame

SCRAMBLE = "0.7*q1 + 0.4*q2*q3"


def top_zoo():
    """Top frames with known constants (c, k)."""
    eps = math.sqrt(2) - 1
    return [
        (builtin_model("flat3"), 0.0, 0.0),
        (builtin_model("torus3", n=1), 0.0, 1.0),
        (builtin_model("torus3_skew", eps=eps), 0.0, 1 + eps * eps),
        (builtin_model("s3"), 2.0, 2.0),
        (builtin_model("heisenberg"), 1.0, 0.0),
    ]


def negatives():
    """Frames that are not tops, each breaking a different condition."""
    return [
        rotate_frame(builtin_model("s3"), SCRAMBLE),
        permute_frame(builtin_model("heisenberg"), (2, 3, 1)),
        rotate_frame(builtin_model("flat3"), "z + 0.5*z*z"),
    ]


@pytest.fixture(scope="session")
def s3():
    return builtin_model("s3")


@pytest.fixture(scope="session")
def heis():
    return builtin_model("heisenberg")


@pytest.fixture(scope="session")
def flat():
    return builtin_model("flat3")


@pytest.fixture(scope="session")
def scrambled_s3():
    return rotate_frame(builtin_model("s3"), f"-({SCRAMBLE})")


@pytest.fixture(scope="session")
def acceptance_log(request):
    log = []
    request.config._acceptance_log = log
    return log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = getattr(config, "_acceptance_log", None)
    if log:
        terminalreporter.section("acceptance criteria")
        for line in log:
            terminalreporter.write_line(line)
