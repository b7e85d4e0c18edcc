from fractions import Fraction

import numpy as np
import pytest


def qr_unitary(rng, n):
    """Independent Haar sampler: QR of a complex Gaussian with fixed phases."""
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(G)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def conj_diag(Q, diag):
    return Q @ np.diag(diag) @ Q.conj().T


def commuting_hermitian(rng, n, m, scale=1.0):
    Q = qr_unitary(rng, n)
    pts = rng.uniform(-scale, scale, (n, m))
    comps = np.array([conj_diag(Q, pts[:, j]) for j in range(m)])
    return 0.5 * (comps + comps.conj().transpose(0, 2, 1)), Q, pts


def hermitian_unit(rng, n):
    K = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    K = 0.5 * (K + K.conj().T)
    return K / np.linalg.norm(K, 2)


def expi(K, eta):
    w, V = np.linalg.eigh(K)
    return (V * np.exp(1j * eta * w)) @ V.conj().T


def snap_oracle(values, delta):
    """Nearest representative -1 + 2k/(M-1) per entry, in exact rational arithmetic.

    Entries within 1e-12 of a midpoint go to the lower representative.
    """
    count = int(np.ceil(1 + 1 / delta - 1e-9))
    reps = [Fraction(-1) + Fraction(2 * k, count - 1) for k in range(count)]
    tie = Fraction(1e-12)
    out = []
    for x in np.atleast_1d(values):
        x = Fraction(float(x))
        best = reps[0]
        for r in reps[1:]:
            if abs(x - r) < abs(x - best) - tie:
                best = r
        out.append(float(best))
    return np.array(out)


def spec_norm(A):
    return np.linalg.norm(A, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
