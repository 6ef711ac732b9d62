import json
from pathlib import Path

import pytest

from biforms import forms as fm

CORPUS = Path(__file__).resolve().parent.parent / "corpus"

NAMES = ["bilinear3", "bilinear_pair", "diag21", "mixed21", "diag21n2"]


def load_system(name):
    return fm.parse_system((CORPUS / f"{name}.frm").read_text())


def load_golden(name):
    return json.loads((CORPUS / "golden" / f"{name}.json").read_text())


@pytest.fixture(scope="session")
def corpus():
    return {name: load_system(name) for name in NAMES}


@pytest.fixture(scope="session")
def golden():
    return {name: load_golden(name) for name in NAMES}


@pytest.fixture(scope="session")
def bilinear3():
    return load_system("bilinear3")


@pytest.fixture(scope="session")
def bilinear_pair():
    return load_system("bilinear_pair")


@pytest.fixture(scope="session")
def diag21():
    return load_system("diag21")


@pytest.fixture(scope="session")
def mixed21():
    return load_system("mixed21")


@pytest.fixture(scope="session")
def diag21n2():
    return load_system("diag21n2")


@pytest.fixture(scope="session")
def x1y1():
    return load_system("x1y1")


@pytest.fixture
def sym_boxes():
    def make(system):
        return fm.BoxPair.symmetric(system.n1, system.n2)
    return make
