"""Shared closed-form oracles, helpers, and acceptance-verdict reporting."""

import numpy as np

#: verdict lines recorded by the acceptance gate, replayed after the run
ACCEPTANCE_VERDICTS = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)


def disc_A(lam: float, t: float, d: float, u: float) -> float:
    """Closed-form fundamental solution of L = -lam*u + |v|^2/2.

    Stationarity of the exponentially weighted quadratic action forces
    xi'(s) = c * exp(-lam*s); matching the displacement and integrating
    gives A = exp(-lam*t) u + lam d^2 / (2 (exp(lam*t) - 1)).
    """
    return float(np.exp(-lam * t) * u + lam * d * d / (2.0 * np.expm1(lam * t)))


def disc_p0(lam: float, t: float, d: float) -> float:
    """Initial momentum of the discounted minimizer: lam*d / (1 - e^{-lam t})."""
    return float(lam * d / (-np.expm1(-lam * t)))


def rel(a: float, b: float) -> float:
    """Guarded relative error |a - b| / max(1, |b|)."""
    return abs(a - b) / max(1.0, abs(b))


def hopf_lax_bruteforce(phi, t: float, x: float, lo: float = -10.0,
                        hi: float = 10.0, step: float = 1e-4):
    """Dense-grid minimization of phi(y) + (x - y)^2 / (2 t)."""
    y = np.arange(lo, hi + step, step)
    vals = phi(y) + (x - y) ** 2 / (2.0 * t)
    j = int(np.argmin(vals))
    return float(vals[j]), float(y[j])


def discounted_value_bruteforce(lam: float, phi, t: float, x: float,
                                lo: float = -10.0, hi: float = 10.0,
                                step: float = 1e-4):
    """Dense-grid minimization of e^{-lam t} phi(y) + lam (x-y)^2/(2(e^{lam t}-1))."""
    y = np.arange(lo, hi + step, step)
    vals = np.exp(-lam * t) * phi(y) + lam * (x - y) ** 2 / (2.0 * np.expm1(lam * t))
    j = int(np.argmin(vals))
    return float(vals[j]), float(y[j])
