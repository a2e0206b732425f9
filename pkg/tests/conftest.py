import numpy as np
import pytest

from hfqnn import statevector as sv

SINGLE_KINDS = ("RX", "RY", "RZ", "Rot")


def random_gate(rng: np.random.Generator, n_qubits: int):
    choices = SINGLE_KINDS + (("CNOT",) if n_qubits > 1 else ())
    kind = choices[rng.integers(len(choices))]
    if kind == "CNOT":
        c, t = rng.choice(n_qubits, 2, replace=False)
        return sv.CNOT(int(c), int(t))
    wire = int(rng.integers(n_qubits))
    if kind == "Rot":
        return sv.Rot(*rng.uniform(-2 * np.pi, 2 * np.pi, 3), wire)
    return getattr(sv, kind)(rng.uniform(-2 * np.pi, 2 * np.pi), wire)


def random_circuit(rng: np.random.Generator, n_qubits: int, max_gates: int = 20):
    return [random_gate(rng, n_qubits) for _ in range(int(rng.integers(1, max_gates + 1)))]


def random_state(rng: np.random.Generator, n_qubits: int) -> sv.Statevector:
    amps = rng.normal(size=2**n_qubits) + 1j * rng.normal(size=2**n_qubits)
    return sv.Statevector(n_qubits, amps / np.linalg.norm(amps))


def central_difference(f, x: np.ndarray, h: float) -> np.ndarray:
    """d f / d x for array-valued f, by central differences; shape f.shape + x.shape."""
    x = np.array(x, dtype=float)
    f0 = np.asarray(f(x))
    out = np.zeros(f0.shape + x.shape)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        out[(Ellipsis,) + idx] = (np.asarray(f(xp)) - np.asarray(f(xm))) / (2 * h)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per criterion; the lines are echoed in the terminal summary."""

    def record(number: int, title: str, passed: bool, detail: str = "") -> bool:
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title}"
        if detail:
            line += f" ({detail})"
        _ACCEPTANCE.append(line)
        print(line)
        return passed

    return record


def pytest_runtest_logreport(report):
    # Skipped dataset criteria still get a line.
    if report.skipped and "test_acceptance" in report.nodeid:
        reason = report.longrepr[-1] if isinstance(report.longrepr, tuple) else str(report.longrepr)
        _ACCEPTANCE.append(f"[SKIP] {report.nodeid.split('::')[-1]}: {reason}")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
