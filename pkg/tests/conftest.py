import socket
import urllib.request

import pytest

from iuu_seascapes import dataset, synth
from iuu_seascapes.geo import EezGeometry, GeoPoint


class NetworkBlocked(AssertionError):
    pass


@pytest.fixture(autouse=True)
def no_network(monkeypatch):
    """Fail any test that reaches the network; ingest tests use canned transports."""
    def refuse(*args, **kwargs):
        raise NetworkBlocked("network access attempted during tests")

    monkeypatch.setattr(socket.socket, "connect", refuse)
    monkeypatch.setattr(socket, "create_connection", refuse)
    monkeypatch.setattr(urllib.request, "urlopen", refuse)


def ring(*coords):
    pts = [GeoPoint(lat, lon) for lat, lon in coords]
    return tuple(pts + [pts[0]])


@pytest.fixture
def unit_square():
    return EezGeometry((ring((0, 0), (0, 1), (1, 1), (1, 0)),), "square")


@pytest.fixture(scope="session")
def scenario():
    return synth.generate(synth.ScenarioConfig())


@pytest.fixture(scope="session")
def scenario_stacks(scenario):
    from iuu_seascapes.grid import GridStack
    return {var: GridStack(fields) for var, fields in scenario.grids.items()}


@pytest.fixture(scope="session")
def scenario_rows(scenario, scenario_stacks):
    return dataset.build_feature_rows(scenario.vessels, scenario_stacks, scenario.eez)


@pytest.fixture(scope="session")
def scenario_dir(tmp_path_factory, scenario):
    out = tmp_path_factory.mktemp("scenario")
    synth.write_scenario(scenario, out)
    return out


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(request):
    """Record one pass/fail line for an acceptance criterion."""
    def record(name, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
