import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_orthogonal(rng, d):
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    return Q * np.sign(np.diag(R))


ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line('markers', 'criterion(n, title): acceptance '
                            'criterion reported in the terminal summary')


@pytest.fixture
def note(request):
    """Collects detail strings for the acceptance summary line."""
    request.node.notes = []
    return request.node.notes.append


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker('criterion')
    if mark is None or rep.when != 'call':
        return
    n, title = mark.args
    detail = list(getattr(item, 'notes', []))
    if rep.failed:
        msg = str(call.excinfo.value).strip().splitlines()
        detail.append(msg[0] if msg else call.excinfo.typename)
    ACCEPTANCE[n] = ('PASS' if rep.passed else 'FAIL', title,
                     '; '.join(detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section('acceptance criteria')
    for n in sorted(ACCEPTANCE):
        status, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2} {status}: {title}"
                                    + (f" | {detail}" if detail else ''))
