import numpy as np
import pytest

from randtt.tt import TT


def rand_tt(rng, dims, ranks):
    """Unnormalized standard-normal TT tensor; ``ranks`` are internal."""
    r = [1] + list(ranks) + [1]
    return TT([rng.standard_normal((r[n], d, r[n + 1])) for n, d in enumerate(dims)])


def low_rank_redundant(rng, dims, true_rank, stored_rank):
    """Tensor of TT-ranks ``true_rank`` stored with redundant ranks ``stored_rank``.

    Built as the sum of the same tensor split into two halves plus a cancelling pair,
    so the representation is genuinely redundant rather than zero-padded.
    """
    from randtt.tt import add_all

    x = rand_tt(rng, dims, [true_rank] * (len(dims) - 1))
    extra = stored_rank - 2 * true_rank
    parts = [x, x]
    coeffs = [0.5, 0.5]
    if extra > 0:
        z = rand_tt(rng, dims, [extra // 2] * (len(dims) - 1)) if extra >= 2 else None
        if z is not None:
            parts += [z, z]
            coeffs += [1.0, -1.0]
    return x, add_all(parts, coeffs)


def rel(a, b):
    return float(np.linalg.norm(np.ravel(a) - np.ravel(b)) / np.linalg.norm(np.ravel(b)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def report(number, title, ok, detail, elapsed):
    line = f"criterion {number:>2} [{'PASS' if ok else 'FAIL'}] {title}: {detail} ({elapsed:.1f} s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
