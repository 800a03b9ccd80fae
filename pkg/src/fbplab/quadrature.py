"""Small quadrature helpers used across the package."""

import numpy as np
from scipy.integrate import simpson


def gauss_legendre(a, b, n, breaks=()):
    """Composite Gauss-Legendre nodes and weights on [a, b].

    ``breaks`` are interior points where the integrand may lose smoothness;
    each resulting panel gets ``n`` nodes.
    """
    edges = np.unique(np.concatenate([[a, b], [x for x in breaks if a < x < b]]))
    x0, w0 = np.polynomial.legendre.leggauss(n)
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        xs.append(lo + half * (x0 + 1.0))
        ws.append(half * w0)
    return np.concatenate(xs), np.concatenate(ws)


def panels(a, b, n_panels, n=16):
    """Gauss-Legendre rule with ``n_panels`` equal panels on [a, b]."""
    edges = np.linspace(a, b, n_panels + 1)[1:-1]
    return gauss_legendre(a, b, n, breaks=edges)


def simpson_uniform(values, a, b):
    """Composite Simpson on a uniform grid including both endpoints."""
    values = np.asarray(values)
    x = np.linspace(a, b, values.shape[-1])
    return simpson(values, x=x, axis=-1)


def periodic_trapezoid(values, period=2 * np.pi):
    """Trapezoid rule for periodic samples (endpoint excluded)."""
    values = np.asarray(values)
    return values.sum(axis=-1) * period / values.shape[-1]


def exp_weight_rule(t_max=40.0, n_panels=64, n=16, breaks=()):
    """Nodes and weights on [0, t_max] for integrands carrying e^{-2t}.

    The weight itself is not folded in; callers multiply by ``exp(-2 t)``.
    """
    edges = list(np.linspace(0.0, t_max, n_panels + 1)[1:-1]) + list(breaks)
    return gauss_legendre(0.0, t_max, n, breaks=edges)
