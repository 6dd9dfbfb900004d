import numpy as np
import pytest

from kobalab.domain import ConvexDomainSpec


@pytest.fixture(scope="session")
def ball():
    return ConvexDomainSpec.ball(2)


@pytest.fixture(scope="session")
def e12():
    return ConvexDomainSpec.ellipsoid((1, 2))


@pytest.fixture(scope="session")
def e13():
    return ConvexDomainSpec.ellipsoid((1, 3))


def bisect(f, lo, hi, tol=1e-14):
    """Plain bisection for a sign change of ``f`` on ``[lo, hi]``."""
    flo = f(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def random_interior(domain, rng, depth_lo=1e-4, depth_hi=0.5):
    """Point on a random ray from the center at a log-uniform fraction below the boundary."""
    from kobalab.domain import radial_boundary_point

    d = rng.standard_normal(domain.n) + 1j * rng.standard_normal(domain.n)
    p = radial_boundary_point(domain, d)
    s = np.exp(rng.uniform(np.log(depth_lo), np.log(depth_hi)))
    return (1.0 - s) * p


def rotated_ellipsoid(exponents, Q):
    """``{sum_j |(Q^* z)_j|^{2 m_j} < 1}`` written out as a real polynomial domain."""
    import itertools
    from collections import defaultdict

    n = len(exponents)
    Qh = np.conj(np.asarray(Q)).T
    terms = defaultdict(float)
    terms[(0,) * (2 * n)] -= 1.0
    for j, m in enumerate(exponents):
        L = np.zeros(2 * n, dtype=complex)
        L[0::2], L[1::2] = Qh[j], 1j * Qh[j]
        A = np.real(np.outer(np.conj(L), L))
        A = 0.5 * (A + A.T)
        for ix in itertools.product(range(2 * n), repeat=2 * m):
            c = np.prod([A[ix[2 * k], ix[2 * k + 1]] for k in range(m)])
            p = [0] * (2 * n)
            for a in ix:
                p[a] += 1
            terms[tuple(p)] += c
    pt = tuple({"coeff": v, "powers": list(k)} for k, v in terms.items() if abs(v) > 1e-15)
    return ConvexDomainSpec("polynomial", n, poly_terms=pt, type_bound=2 * max(exponents))


def random_unitary(rng, n):
    Q, R = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    return Q * (np.diag(R) / np.abs(np.diag(R)))


_ACCEPTANCE_LINES = []


@pytest.fixture()
def criterion():
    """``record(label, ok, detail)`` prints one pass/fail line and asserts ``ok``."""

    def record(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
