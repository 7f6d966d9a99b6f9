import numpy as np
import pytest

from dnlpos.fingerprints import Fingerprint
from dnlpos.synth import RadioMapConfig, generate


def fp(fp_id, obs, pos=(0.0, 0.0), floor=1):
    return Fingerprint(fp_id, floor, pos, obs)


def random_fingerprints(rng, n, n_waps, integer_rss=True, width=100.0, height=80.0):
    """Random sparse fingerprints; integer RSS produces genuine distance ties."""
    macs = [f"m{j:03d}" for j in range(n_waps)]
    fps = []
    for i in range(n):
        k = rng.integers(1, n_waps + 1)
        chosen = rng.choice(n_waps, size=k, replace=False)
        rss = rng.integers(-100, -29, size=k) if integer_rss else rng.uniform(-100, -30, size=k)
        obs = {macs[j]: float(r) for j, r in zip(chosen, rss)}
        pos = (float(rng.uniform(0, width)), float(rng.uniform(0, height)))
        fps.append(Fingerprint(int(i * 3 + 1), 1, pos, obs))
    return fps


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_map():
    fps, waps = generate(RadioMapConfig(n_fps=120, n_waps=20, seed=5))
    return fps, waps


# Acceptance gate bookkeeping: tests marked ``criterion(id, title)`` report
# one PASS/FAIL line each in the terminal summary.
CRITERIA = pytest.StashKey[dict]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id, title): acceptance criterion gate")
    config.stash[CRITERIA] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed):
        return
    cid, title = mark.args
    detail = dict(item.user_properties).get("detail", "")
    if rep.failed and not detail:
        detail = str(call.excinfo.value).splitlines()[0] if call.excinfo else "error"
    results = item.config.stash[CRITERIA]
    ok = rep.passed and results.get(cid, (title, True, ""))[1]
    results[cid] = (title, ok, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(CRITERIA, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(results):
        title, ok, detail = results[cid]
        line = f"{'PASS' if ok else 'FAIL'}  criterion {cid}: {title}"
        terminalreporter.write_line(f"{line} ({detail})" if detail else line)
