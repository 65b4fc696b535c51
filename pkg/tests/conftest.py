import sys

import numpy as np
import pytest

from morphocomp.morphology import from_text

# a hand-built corpus used across physics and evaluation tests
BODIES = {
    "walker": ".....\n.AAB.\n.SSS.\n.R.R.\n.....",
    "block": "SSS\nSAS\nSSS",
    "all_kinds": "SRA\nB1!\n2?S",
    "tall": "A\nS\nS\nR\nS",
    "quad": "BSSA\nR..R",
    "wide": "AAAAAAAAAA\nRSSSSSSSSB",
}


def body(text: str, require_actuator: bool = True):
    return from_text(text, require_actuator=require_actuator)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=sorted(BODIES))
def corpus_body(request):
    return body(BODIES[request.param])



def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
