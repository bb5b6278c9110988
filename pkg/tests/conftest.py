import numpy as np
import pytest

from neuraldec.codes import ParityCheckMatrix, build_tanner_graph
from neuraldec.testcodes import hamming_7_4, pbrl_surrogate, regular_code

H_SMALL = [[1, 1, 0, 1], [0, 1, 1, 1]]


@pytest.fixture
def small_H():
    return ParityCheckMatrix.from_dense(H_SMALL)


@pytest.fixture(scope="session")
def hamming_graph():
    return build_tanner_graph(hamming_7_4())


@pytest.fixture(scope="session")
def regular_graph():
    # (3,6)-regular, n=96: small enough for finite differences
    return build_tanner_graph(regular_code(96, 3, 6, seed=3))


@pytest.fixture(scope="session")
def pbrl_small():
    H, P = pbrl_surrogate(4)
    return build_tanner_graph(H, P)


def rng(seed=0):
    return np.random.default_rng(seed)


def nullspace_gf2(H):
    """Basis (rows) of the binary code with parity-check matrix H (dense 0/1)."""
    A = np.array(H, dtype=np.uint8) % 2
    m, n = A.shape
    pivots = []
    r = 0
    for c in range(n):
        hits = np.flatnonzero(A[r:, c]) if r < m else []
        if len(hits) == 0:
            continue
        p = r + hits[0]
        A[[r, p]] = A[[p, r]]
        for i in range(m):
            if i != r and A[i, c]:
                A[i] ^= A[r]
        pivots.append(c)
        r += 1
        if r == m:
            break
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for f in free:
        v = np.zeros(n, dtype=np.uint8)
        v[f] = 1
        for i, pc in enumerate(pivots):
            v[pc] = A[i, f]
        basis.append(v)
    return np.array(basis)


def random_codeword(H, seed=0):
    B = nullspace_gf2(H)
    coef = np.random.default_rng(seed).integers(0, 2, len(B))
    return (coef @ B % 2).astype(np.uint8)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[0][3:])):
            terminalreporter.write_line(line)
