"""Shared test utilities."""

import math

import numpy as np
from sklearn.gaussian_process import GaussianProcessRegressor
from sklearn.gaussian_process.kernels import RBF, ConstantKernel

from problin import RayleighSample

# criterion number -> (title, passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def format_line(number, title, passed, detail=""):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title}"
    return line + (f"  ({detail})" if detail else "")


def report(number, title, passed, detail=""):
    ACCEPTANCE[number] = (title, bool(passed), detail)
    print(format_line(number, title, passed, detail))


def spd_matrix(n, condition=100.0, seed=0):
    """Dense SPD matrix with log-spaced eigenvalues on ``[1, condition]``."""
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = np.geomspace(1.0, condition, n) if n > 1 else np.ones(1)
    A = (Q * lam) @ Q.T
    return 0.5 * (A + A.T)


def samples_on_line(k, theta0, theta1):
    return [RayleighSample(i, theta0 - theta1 * math.log(i)) for i in range(1, k + 1)]


def sklearn_prediction(samples, n, theta0, theta1, ell, var, noise):
    t = np.log([s.index for s in samples])[:, None]
    z = np.array([s.log_rayleigh for s in samples])
    resid = z - (theta0 - theta1 * t[:, 0])
    gp = GaussianProcessRegressor(
        ConstantKernel(var, "fixed") * RBF(ell, "fixed"), alpha=noise, optimizer=None, normalize_y=False
    )
    gp.fit(t, resid)
    k = max(s.index for s in samples)
    t_new = np.log(np.arange(k + 1, n + 1, dtype=float))[:, None]
    return theta0 - theta1 * t_new[:, 0] + gp.predict(t_new)
