"""Experiment drivers shared by the command line and the test-suite.

Every driver is deterministic given its seed and returns plain Python data.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .calibration import NoiseFloor, RayleighGP, SpectrumMean, w_statistic
from .distributions import solution_belief
from .errors import PreconditionError
from .priors import PriorSpec, scalar_mean_from_trace
from .problems import (
    KERNEL_FAMILIES,
    KernelSpec,
    gp_propagate,
    kernel_gram,
    kernel_matrix,
    poisson_dirichlet,
    predictive_fine_prior,
    prolongation,
    random_spd,
)
from .solver import SolverConfig, prior_result, solve

METHODS = ("none", "rayleigh", "eps2", "spectrum")
# Power-law decay rate of the kernel spectrum, nu + 1/2 for a nu-smooth kernel.
# The squared exponential decays faster than any power; 5 is a finite stand-in.
THETA1 = {"matern32": 2.0, "matern52": 3.0, "rbf": 5.0}


def _map(fn, items, jobs):
    items = list(items)
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def reference_cg(A, b, x0, iterations):
    """Textbook conjugate gradients; returns the iterates ``x_1 .. x_k``."""
    x = np.array(x0, dtype=float)
    r = b - A @ x
    p = r.copy()
    rr = float(r @ r)
    out = []
    for _ in range(iterations):
        if rr == 0.0:
            break
        Ap = A @ p
        a = rr / float(p @ Ap)
        x = x + a * p
        r = r - a * Ap
        rr_new = float(r @ r)
        p = r + (rr_new / rr) * p
        rr = rr_new
        out.append(x.copy())
    return out


def iterates(result, x0):
    """Solver iterates ``x_1 .. x_k`` rebuilt from the stored actions and steps."""
    if result.iterations == 0:
        return []
    X = x0[:, None] + np.cumsum(result.alphas[None, :] * result.S, axis=1)
    return list(X.T)


def uniform_spectrum(n, condition, rng):
    """Eigenvalues uniform on ``[1, condition]`` with both ends attained."""
    if n == 1:
        return np.ones(1)
    return np.concatenate([[1.0, float(condition)], rng.uniform(1.0, condition, n - 2)])


def _cg_compare_seed(args):
    n, condition, seed, iterations = args
    rng = np.random.default_rng(seed)
    A = random_spd(n, uniform_spectrum(n, condition, rng), seed=rng)
    b = rng.standard_normal(n)
    alpha = float(np.trace(A)) / n
    res = solve(A, b, PriorSpec(alpha=alpha), SolverConfig(rtol=1e-14, max_iter=iterations, compute_A_belief=False))
    x0 = b / alpha
    pls = iterates(res, x0)
    cg = reference_cg(A, b, x0, len(pls))
    dev = [float(np.linalg.norm(p - c) / np.linalg.norm(c)) for p, c in zip(pls, cg)]
    if len(cg) < len(pls):  # reference stopped on an exactly zero residual
        dev.append(math.inf)
    return {"seed": seed, "iterations": len(pls), "max_deviation": max(dev, default=0.0)}


def cg_compare(n, condition=1e4, seeds=20, iterations=25, jobs=None):
    """Largest relative gap between solver and textbook CG iterates over seeds."""
    if not 1 <= n <= 512:
        raise PreconditionError("n must lie in [1, 512]")
    if not condition >= 1:
        raise PreconditionError("condition must be at least 1")
    rows = _map(_cg_compare_seed, [(n, condition, s, iterations) for s in range(seeds)], jobs)
    return {"per_seed": rows, "max_deviation": max(r["max_deviation"] for r in rows)}


@dataclass(frozen=True)
class CalibrationCell:
    kernel: str
    n: int
    method: str
    num_problems: int
    eps2: float = 1e-4
    lengthscale: float = 0.1
    dim: int = 1
    inputs: str = "uniform"
    rtol: float = 1e-6
    seed: int = 0


def sample_inputs(n, dim, kind, rng):
    """Synthetic inputs in ``[0, 1]^dim``: uniform, or a mixture of five Gaussian clusters."""
    if kind == "uniform":
        return rng.uniform(0.0, 1.0, (n, dim))
    if kind == "cluster":
        centers = rng.uniform(0.15, 0.85, (5, dim))
        X = centers[rng.integers(0, 5, n)] + 0.05 * rng.standard_normal((n, dim))
        return np.clip(X, 0.0, 1.0)
    raise PreconditionError(f"unknown input distribution {kind!r}")


def calibration_method(name, kernel, eps2, eigenvalues=None, alpha=1.0):
    """Calibration method and prior for one column of the calibration table.

    ``none`` keeps the uncalibrated prior covariance ``W0 = H0``, whose scale on
    the unexplored space is ``1 / alpha``.
    """
    if name == "none":
        return None, PriorSpec(alpha=alpha, phi=alpha, psi=1.0 / alpha)
    if name == "eps2":
        return NoiseFloor(eps2), PriorSpec(alpha=alpha)
    if name == "spectrum":
        if eigenvalues is None:
            raise PreconditionError("spectrum calibration needs the eigenvalues")
        return SpectrumMean(tuple(eigenvalues)), PriorSpec(alpha=alpha)
    if name == "rayleigh":
        return RayleighGP(theta1=THETA1.get(kernel, 1.5)), PriorSpec(alpha=alpha)
    raise PreconditionError(f"unknown calibration method {name!r}; expected one of {METHODS}")


def calibration_cell(cell):
    """Mean and standard error of w over sampled problems ``(K + eps2 I) x* = b``.

    Inputs and solutions depend on the seed, kernel and size only, so cells
    differing in the method are paired.
    """
    if cell.kernel not in KERNEL_FAMILIES:
        raise PreconditionError(f"unknown kernel {cell.kernel!r}")
    rng = np.random.default_rng([cell.seed, KERNEL_FAMILIES.index(cell.kernel), cell.n])
    X = sample_inputs(cell.n, cell.dim, cell.inputs, rng)
    K = kernel_gram(KernelSpec(cell.kernel, cell.lengthscale, cell.eps2), X)
    Kd = K.to_dense(max_dim=None)
    alpha = float(np.trace(Kd)) / cell.n
    eig = np.linalg.eigvalsh(Kd) if cell.method == "spectrum" else None
    method, prior = calibration_method(cell.method, cell.kernel, cell.eps2, eig, alpha)
    config = SolverConfig(rtol=cell.rtol, calibration=method, compute_A_belief=False)
    ws, its = [], []
    for _ in range(cell.num_problems):
        x_star = rng.standard_normal(cell.n)
        res = solve(K, Kd @ x_star, prior, config)
        ws.append(w_statistic(x_star, res.x_belief))
        its.append(res.iterations)
    ws = np.array(ws)
    with np.errstate(invalid="ignore"):  # w is -inf once the space is fully explored
        stderr = float(np.std(ws, ddof=1) / math.sqrt(ws.size)) if ws.size > 1 else 0.0
    return {
        "kernel": cell.kernel,
        "n": cell.n,
        "method": cell.method,
        "w_bar": float(np.mean(ws)),
        "stderr": stderr,
        "mean_iterations": float(np.mean(its)),
    }


def calibration_experiment(kernels, sizes, methods, num_problems, jobs=None, **cell_kw):
    cells = [CalibrationCell(k, n, m, num_problems, **cell_kw) for k in kernels for n in sizes for m in methods]
    return _map(calibration_cell, cells, jobs)


def smooth_forcing(seed, base=15.0, modes=3, scale=0.3):
    """``base`` times one plus a random combination of low sine modes; ``seed=None`` gives the constant."""
    if seed is None:
        return base
    c = np.random.default_rng(seed).standard_normal((modes, modes)) * scale / modes

    def f(x, y):
        out = np.ones_like(x, dtype=float)
        for p in range(modes):
            for q in range(modes):
                out = out + c[p, q] * np.sin((p + 1) * np.pi * x) * np.sin((q + 1) * np.pi * y)
        return base * out

    return f


def _summary(res):
    return {
        "iterations": res.iterations,
        "stop_reason": res.stop_reason,
        "residual_history": [float(v) for v in res.residual_history],
        "trace_history": [float(v) for v in res.trace_history],
        "phi": float(res.phi),
        "psi": float(res.psi),
        "wall_time": float(res.wall_time),
    }


def pde_demo(m_coarse=3, m_fine=7, seed=None, lambda_inflate=0.0, rtol=1e-6, coarse_rtol=1e-10, samples=3):
    """Coarse solve, transport of its inverse belief to a nested fine grid, and fine solves.

    ``seed`` perturbs the source term (None keeps the constant 15) and seeds the
    sample draws. The transported mean is completed on the fine-only
    directions by ``(I - P P^T) / alpha`` with ``alpha = tr(A_fine) / n_fine``.
    """
    coarse = poisson_dirichlet(m_coarse, f=smooth_forcing(seed))
    fine = poisson_dirichlet(m_fine, f=smooth_forcing(seed))
    calib = RayleighGP(theta1=0.0)
    cfg = dict(compute_A_belief=False, calibration=calib)
    rc = solve(coarse.operator(), coarse.rhs, PriorSpec(alpha="trace"), SolverConfig(rtol=coarse_rtol, **cfg))

    P = prolongation(m_coarse, m_fine)
    A_f = fine.operator()
    alpha_f = scalar_mean_from_trace(A_f)
    transported = predictive_fine_prior(rc.H_belief, P, lambda_inflate, complement_scale=1.0 / alpha_f)
    x_prior = solution_belief(transported, fine.rhs)

    r_tr = solve(A_f, fine.rhs, PriorSpec(H0=transported.mean), SolverConfig(rtol=rtol, **cfg))
    r_def = solve(A_f, fine.rhs, PriorSpec(alpha="trace"), SolverConfig(rtol=rtol, **cfg))
    x_direct = spla.spsolve(fine.A.tocsc(), fine.rhs)

    std = x_prior.std()
    err = x_prior.mean - x_direct
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(std > 0, err / std, np.nan)
    draws = x_prior.sample(seed=0 if seed is None else seed, count=samples)
    rel = lambda x: float(np.linalg.norm(x - x_direct) / np.linalg.norm(x_direct))  # noqa: E731
    return {
        "m_coarse": m_coarse,
        "m_fine": m_fine,
        "runs": {"coarse": _summary(rc), "fine_transported": _summary(r_tr), "fine_default": _summary(r_def)},
        "fine_error_transported": rel(r_tr.x),
        "fine_error_default": rel(r_def.x),
        "transported_mean": x_prior.mean.tolist(),
        "transported_std": std.tolist(),
        "signed_error": err.tolist(),
        "standardized_error": [None if not np.isfinite(v) else float(v) for v in z],
        "samples": draws.tolist(),
        "direct_solution": x_direct.tolist(),
    }


def gp_demo(n=100, m=50, checkpoints=None, seed=0, kernel="matern32", lengthscale=0.1, eps2=1e-4, noise=0.1):
    """GP regression through the solver at a sequence of iteration counts.

    Returns one row per checkpoint with the relative mean error against the
    dense GP, the average predictive variance and the average trace budget.
    """
    rng = np.random.default_rng(seed)
    X = np.sort(rng.uniform(0.0, 1.0, n))
    y = np.sin(2 * np.pi * X) + noise * rng.standard_normal(n)
    Xq = np.linspace(0.0, 1.0, m)
    spec = KernelSpec(kernel, lengthscale, eps2)
    K = kernel_gram(spec, X)
    kt = kernel_matrix(spec, X, Xq)
    exact = kt.T @ np.linalg.solve(K.to_dense(max_dim=None), y)
    if checkpoints is None:
        checkpoints = [0, n // 4, n // 2, n]
    prior = PriorSpec(alpha="trace")
    rows = []
    for k in checkpoints:
        if k == 0:
            res = prior_result(K, y, prior, SolverConfig(calibration=NoiseFloor(eps2)))
        else:
            cfg = SolverConfig(rtol=1e-14, max_iter=k, calibration=NoiseFloor(eps2), compute_A_belief=False)
            res = solve(K, y, prior, cfg)
        pred = gp_propagate(K, y, kt, res)
        rows.append(
            {
                "k": int(k),
                "iterations": res.iterations,
                "mean_error": float(np.linalg.norm(pred.mean - exact) / np.linalg.norm(exact)),
                "variance": float(np.mean(pred.variance)),
                "trace": float(np.mean(pred.trace_budget)),
            }
        )
    return rows


def time_call(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0

