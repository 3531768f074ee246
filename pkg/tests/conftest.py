import numpy as np
import pytest

from selfgnn.gradcheck import numeric_gradient, relative_error
from selfgnn.numerics.tensor import Tape, Tensor, backward


def fd_check(fn, *arrays, tol=1e-6, h=1e-6):
    """Compare tape gradients of scalar ``fn(*tensors)`` with central differences."""
    leaves = [Tensor(np.array(a, dtype=np.float64), requires_grad=True) for a in arrays]
    with Tape() as tape:
        loss = fn(*leaves)
    grads = backward(tape, loss, leaves)

    def value():
        with Tape():
            return fn(*leaves).item()

    for leaf in leaves:
        numeric = numeric_gradient(value, leaf.data, h)
        if max(np.abs(grads[leaf]).max(), np.abs(numeric).max()) < 1e-9:
            continue  # exactly-zero gradient (e.g. key bias under softmax)
        err = relative_error(grads[leaf], numeric)
        assert err < tol, f"relative error {err:.2e}"
    return grads


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
