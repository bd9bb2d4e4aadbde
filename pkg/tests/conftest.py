import numpy as np
import pytest

from cvqkd_finite.gaussian import TwoModeCov

OMEGA = np.kron(np.eye(2), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def symplectic_oracle(cov: TwoModeCov) -> tuple[float, float]:
    """Symplectic eigenvalues from a generic eigen-solver: moduli of eig(i*Omega*Gamma)."""
    ev = np.abs(np.linalg.eigvals(1j * OMEGA @ cov.matrix()))
    ev = np.sort(ev)[::-1]
    # eigenvalues come in +- pairs
    return float(ev[0]), float(ev[2])


def is_physical(a: float, b: float, c: float) -> bool:
    """Uncertainty principle Gamma + i*Omega >= 0, checked by brute-force eigenvalues."""
    g = np.array([[a, 0, c, 0], [0, a, 0, -c], [c, 0, b, 0], [0, -c, 0, b]], dtype=float)
    return bool(np.linalg.eigvalsh(g + 1j * OMEGA).min() > 1e-7)


def random_physical_cov(rng: np.random.Generator) -> TwoModeCov:
    while True:
        a = 1.0 + rng.exponential(5.0)
        b = 1.0 + rng.exponential(5.0)
        c = rng.uniform(-1.0, 1.0) * np.sqrt(a * b - 1.0)
        if is_physical(a, b, c):
            return TwoModeCov(a, b, c)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# -- acceptance summary --------------------------------------------------------

_ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid or report.when != "call":
        return
    detail = dict(report.user_properties).get("acceptance", "")
    _ACCEPTANCE[report.nodeid] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, (outcome, detail) in _ACCEPTANCE.items():
        name = nodeid.split("::")[-1]
        terminalreporter.write_line(f"{outcome} {name}: {detail}")
