import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def rk45_oracle(A, B, u_of_t, x0, t_end, rtol=1e-12, atol=1e-14):
    """Dense adaptive integration used as an independent reference."""
    from scipy.integrate import solve_ivp

    sol = solve_ivp(lambda t, x: A @ x + B @ np.atleast_1d(u_of_t(t)), (0.0, t_end), x0,
                    method="DOP853", rtol=rtol, atol=atol)
    return sol.y[:, -1]


_CRITERIA = {}


class _Criterion:
    def __init__(self, number, title, max_seconds, setup_seconds=0.0):
        # setup_seconds: shared fixture work charged against this criterion's budget
        self.number, self.title, self.max_seconds = number, title, max_seconds
        self.setup_seconds = setup_seconds
        self.detail = ""

    def __enter__(self):
        import time

        self._t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        import time

        elapsed = time.perf_counter() - self._t0 + self.setup_seconds
        ok = exc_type is None and elapsed < self.max_seconds
        if exc_type is None and not ok:
            self.detail += f"; runtime {elapsed:.1f} s over {self.max_seconds:g} s"
        status = "PASS" if ok else "FAIL"
        _CRITERIA[self.number] = f"criterion {self.number:2d} {status}  {self.title} ({elapsed:.1f} s) {self.detail}"
        if exc_type is None and not ok:
            raise AssertionError(f"criterion {self.number} exceeded its runtime budget ({elapsed:.1f} s)")
        return False


@pytest.fixture
def criterion():
    """Context manager that records one pass/fail line per acceptance criterion."""
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[k])
