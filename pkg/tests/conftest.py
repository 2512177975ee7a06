import copy
import json

import pytest

from hscm.kb import load_kb
from hscm.pack import kb_path, pack_contents

# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def pack_kb():
    return pack_contents()


@pytest.fixture
def pack_doc():
    return json.loads(kb_path().read_text(encoding="utf-8"))


def minimal_doc() -> dict:
    """A tiny valid KB: a colour word becomes a Colour primitive, and
    ``colour thing`` becomes a ColouredThing frame."""
    return {
        "config": {},
        "nodes": [
            {"id": "Colour", "layer": 2, "kind": "ontologic-primitive", "label": "colour", "slots": [], "grammar": "g.colour"},
            {"id": "Thing", "layer": 2, "kind": "ontologic-primitive", "label": "thing", "slots": [], "grammar": "g.thing"},
            {
                "id": "ColouredThing",
                "layer": 4,
                "kind": "object-event-frame",
                "label": "coloured thing",
                "slots": [
                    {"name": "colour", "accepts": [{"node": "Colour"}], "cardinality": "optional"},
                    {"name": "thing", "accepts": [{"node": "Thing"}], "cardinality": "one"},
                ],
                "grammar": "g.ct",
            },
        ],
        "lexicon": [
            {"surface": ["red", "blue"], "functional": "colour", "l1_class": "prop.colour", "pos": "adjective"},
            {"surface": ["box", "ball"], "functional": "thing", "l1_class": "physobj.thing", "pos": "noun"},
        ],
        "grammars": [
            {"id": "g.colour", "elements": [{"constraint": {"l1": "prop.colour"}}]},
            {"id": "g.thing", "elements": [{"constraint": {"l1": "physobj.thing"}}]},
            {
                "id": "g.ct",
                "elements": [
                    {"constraint": {"node": "Colour"}, "quantifier": "optional", "capture": "colour"},
                    {"constraint": {"node": "Thing"}, "capture": "thing", "anchor": True},
                ],
            },
        ],
        "activation": [
            {"target": "Colour", "kind": "anchored", "trigger": {"l1": "prop.colour"}},
            {"target": "Thing", "kind": "anchored", "trigger": {"l1": "physobj.thing"}},
            {"target": "ColouredThing", "kind": "anchored", "trigger": {"node": "Thing"}},
        ],
        "suppression": [],
        "genspec": [],
        "precedence": [],
        "sequence_model": {"bigrams": []},
    }


@pytest.fixture
def mini_doc():
    return minimal_doc()


@pytest.fixture
def mini_kb():
    return load_kb(minimal_doc())


def clone(doc):
    return copy.deepcopy(doc)
