"""Random model generators and grid oracles shared by the test modules."""

import numpy as np

from fdisynth.lss import evaluate, freqresp, probe_points, ss, static
from fdisynth.synthesis import SynthesisModel


def tf1(num, den, domain="continuous", Ts=None):
    """SISO realization (controllable canonical form) from coefficient lists."""
    num = np.atleast_1d(np.asarray(num, dtype=float))
    den = np.atleast_1d(np.asarray(den, dtype=float))
    n = len(den) - 1
    num = np.concatenate([np.zeros(len(den) - len(num)), num]) / den[0]
    den = den / den[0]
    if n == 0:
        return static([[num[0]]], domain, Ts)
    d = num[0]
    rest = num[1:] - d * den[1:]
    A = np.zeros((n, n))
    A[0, :] = -den[1:]
    A[1:, :-1] = np.eye(n - 1)
    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    C = rest.reshape(1, n)
    return ss(A, B, C, [[d]], domain, Ts)


def random_stable(rng, n, p, m, domain="continuous", margin=0.3):
    """Random realization with eigenvalues well inside the stability region."""
    Ts = 1.0 if domain == "discrete" else None
    if n == 0:
        return static(rng.standard_normal((p, m)), domain, Ts)
    A = rng.standard_normal((n, n))
    ev = np.linalg.eigvals(A)
    if domain == "continuous":
        A = A - (ev.real.max() + margin + rng.uniform(0, 1)) * np.eye(n)
    else:
        A = A / (np.abs(ev).max() / rng.uniform(0.3, 1 - margin))
    return ss(A, rng.standard_normal((n, m)), rng.standard_normal((p, n)),
              rng.standard_normal((p, m)), domain, Ts)


def random_model(rng, n=None, p=None, dims=None, domain="continuous", unstable=False):
    """Random synthesis model with a shared state; dims = (m_u, m_d, m_f, m_w)."""
    n = rng.integers(1, 9) if n is None else n
    p = rng.integers(1, 6) if p is None else p
    m_u, m_d, m_f, m_w = dims if dims is not None else rng.integers(0, 3, 4)
    m_f = max(int(m_f), 1)
    m = int(m_u + m_d + m_f + m_w)
    G = random_stable(rng, int(n), int(p), m, domain)
    if unstable and G.n:
        A = G.A + (0.5 - np.linalg.eigvals(G.A).real.max()) * np.eye(G.n)
        G = ss(A, G.B, G.C, G.D, domain, G.Ts)
    return SynthesisModel.from_columns(G, range(m_u), range(m_u, m_u + m_d),
                                       range(m_u + m_d, m_u + m_d + m_f),
                                       range(m_u + m_d + m_f, m))


def grid_max(G, n=40, seed=0):
    """Largest singular value of G over random boundary probes."""
    lams = probe_points(G, n, seed=seed)
    return max(np.linalg.norm(evaluate(G, lam), 2) for lam in lams)


def grid_diff(G1, G2, n=20, seed=0):
    lams = probe_points(G1, n, seed=seed)
    F1 = freqresp(G1, lams)
    F2 = freqresp(G2, lams)
    return max(np.linalg.norm(a - b, 2) for a, b in zip(F1, F2))
