import copy
import sys

import pytest

from microdispatch import fixture_path
from microdispatch.grid import case_from_dict, load_case


def chain_doc(n_bus=3, steps=1, r=0.5, x=0.3, load=50.0, failure_rate=0.0, ders=(), **extra):
    """Document for a chain 0-1-...-(n-1) with the same load on every non-root bus."""
    doc = {
        "name": f"chain{n_bus}",
        "base": {"s_base_kva": 1000.0, "v_base_kv": 12.66},
        "horizon": {"steps": steps, "dt": 1.0},
        "buses": [{"id": 0}] + [{"id": i, "load_p_peak": load, "load_q_peak": 0.2 * load} for i in range(1, n_bus)],
        "branches": [
            {"id": i, "from_bus": i - 1, "to_bus": i, "r": r, "x": x, "length": 1.0, "failure_rate": failure_rate}
            for i in range(1, n_bus)
        ],
        "ders": list(ders),
        "prices": {"grid_energy_price": [0.1] * steps, "loss_price": 0.1, "interruption_price": 5.0},
        "profiles": {"load": [1.0] * steps},
        "weights": {"h1": 1.0, "h2": 1.0, "h_c": 1.0},
    }
    doc.update(copy.deepcopy(extra))
    return doc


@pytest.fixture
def chain():
    def make(**kw):
        return case_from_dict(chain_doc(**kw))

    return make


@pytest.fixture(scope="session")
def two_bus():
    return load_case(fixture_path("two_bus.json"))


@pytest.fixture(scope="session")
def ieee69():
    return load_case(fixture_path("ieee69.json"))


@pytest.fixture(scope="session")
def lv():
    return load_case(fixture_path("lv_microgrid.json"))


@pytest.fixture(scope="session")
def lv_certain():
    return load_case(fixture_path("lv_microgrid_certain.json"))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        ok, detail = mod.RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
