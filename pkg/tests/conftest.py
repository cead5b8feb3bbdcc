import os
from importlib import resources

import pytest

from pippi.lang import expand_names, parse
from pippi.model import Library, resolve_decl

CORPUS = str(resources.files("pippi.corpus"))
SCENARIOS = str(resources.files("pippi.scenarios"))


def corpus(name):
    return os.path.join(CORPUS, name)


def scenario_file(name):
    return os.path.join(SCENARIOS, name)


def read(path):
    with open(path, encoding="utf-8") as f:
        return f.read()


def library(*paths):
    lib = Library()
    for p in paths:
        lib.add(expand_names(parse(read(p))), os.path.basename(p))
    return lib


def resolved(name, *paths):
    lib = library(*paths)
    return resolve_decl(lib.get(name), lib, lib.files.get(name, "-"))


@pytest.fixture
def witness():
    return resolved("Witness", corpus("witness.bspl"))


@pytest.fixture
def court_wedding():
    return resolved("CourtWedding", corpus("court_wedding.bspl"), corpus("witness.bspl"))
