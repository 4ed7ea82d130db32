"""Joint covariance assembly, marginal likelihood and predictive equations.

Datasets and boundary conditions are stacked in the fixed block order
(w, phi, eps, M, V, q), with measurement noise added on diagonal blocks
only.  Noiseless boundary-condition blocks make the matrix singular in
exact arithmetic, so a bounded jitter ladder (relative to the kernel
diagonal) is escalated until the Cholesky factorization succeeds.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from timopigp import kernels
from timopigp.data import BoundaryCondition, Dataset
from timopigp.errors import IllConditionedModelError
from timopigp.kernels import KernelParams
from timopigp.quantities import BLOCK_INDEX, QuantityKind

JITTER_LADDER = (1e-12, 1e-10, 1e-8, 1e-6)

NEGATIVE_VARIANCE_SLACK = 1e-10


@dataclass(frozen=True)
class Theta:
    """GP hyperparameters: kernel scales, stiffness and per-dataset noise."""

    sigma_s2: float
    ell: float
    EI: float
    kGA: float
    sigma_n: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.sigma_s2 > 0 and self.ell > 0 and self.EI > 0
                and self.kGA > 0):
            raise ValueError("sigma_s2, ell, EI and kGA must be positive")
        if any(v < 0 for v in self.sigma_n.values()):
            raise ValueError("noise standard deviations must be non-negative")

    def kernel_params(self) -> KernelParams:
        return KernelParams(sigma_s2=self.sigma_s2, ell=self.ell,
                            EI=self.EI, kGA=self.kGA)


@dataclass(frozen=True)
class Prediction:
    """Predictive mean and variance of one quantity on a query grid."""

    kind: QuantityKind
    x_star: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    z_star: np.ndarray | None = None


@dataclass(frozen=True)
class CovarianceModel:
    """Assembled joint covariance with its cached Cholesky factorization."""

    entries: tuple
    theta: Theta
    K: np.ndarray
    chol: np.ndarray
    jitter: float
    y: np.ndarray
    slices: tuple

    @property
    def n(self) -> int:
        return self.y.size

    def log_det(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    def solve(self, b: np.ndarray) -> np.ndarray:
        return cho_solve((self.chol, True), b)

    def diagnostics(self) -> dict:
        d = np.diag(self.chol)
        return {
            "n": int(self.n),
            "jitter": self.jitter,
            "condition_estimate": float((d.max() / d.min()) ** 2),
            "log_likelihood": log_marginal_likelihood(self),
        }


def _effective_sigma(entry: Dataset, theta: Theta) -> float:
    if entry.learn_noise and entry.label in theta.sigma_n:
        return theta.sigma_n[entry.label]
    return entry.sigma_n


def order_entries(datasets, bcs) -> tuple:
    """Stack datasets then BCs, stably sorted into the fixed block order."""
    entries = list(datasets) + [bc.as_dataset() for bc in (bcs or [])]
    entries.sort(key=lambda e: BLOCK_INDEX[e.kind])
    return tuple(entries)


def _cross_block(kind_a, x_a, z_a, kind_b, x_b, z_b, params):
    z = None if z_a is None else z_a[:, None]
    zp = None if z_b is None else z_b[None, :]
    return kernels.kernel(kind_a, kind_b, x_a[:, None], x_b[None, :],
                          params, z=z, z_prime=zp)


def assemble(datasets, bcs, theta: Theta) -> CovarianceModel:
    """Build and factorize the joint covariance over all datasets and BCs."""
    entries = order_entries(datasets, bcs)
    if not entries:
        raise ValueError("at least one dataset or boundary condition required")
    params = theta.kernel_params()

    sizes = [len(e) for e in entries]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n = int(offsets[-1])
    slices = tuple(slice(int(offsets[i]), int(offsets[i + 1]))
                   for i in range(len(entries)))

    K = np.empty((n, n))
    for a, ea in enumerate(entries):
        for b, eb in enumerate(entries[a:], start=a):
            block = _cross_block(ea.kind, ea.x, ea.z, eb.kind, eb.x, eb.z,
                                 params)
            K[slices[a], slices[b]] = block
            if b != a:
                K[slices[b], slices[a]] = block.T
    for a, ea in enumerate(entries):
        sig = _effective_sigma(ea, theta)
        if sig > 0:
            idx = np.arange(slices[a].start, slices[a].stop)
            K[idx, idx] += sig**2

    y = np.concatenate([e.y for e in entries])

    # Jitter scale follows each block's own kernel diagonal so that blocks
    # of very different physical units are regularized evenly.
    diag = np.diag(K).copy()
    diag = np.maximum(diag, 1e-300)
    attempted = []
    for level in (0.0,) + JITTER_LADDER:
        attempted.append(level)
        try:
            Kj = K if level == 0.0 else K + np.diag(level * diag)
            L = cholesky(Kj, lower=True)
        except np.linalg.LinAlgError:
            continue
        except Exception:
            continue
        return CovarianceModel(entries=entries, theta=theta, K=K, chol=L,
                               jitter=level, y=y, slices=slices)
    raise IllConditionedModelError(attempted)


def log_marginal_likelihood(model: CovarianceModel,
                            y_all: np.ndarray | None = None) -> float:
    """Gaussian log evidence -y'K^-1 y/2 - log|K|/2 - n log(2 pi)/2."""
    y = model.y if y_all is None else np.asarray(y_all, float)
    if y.shape != model.y.shape:
        raise ValueError(f"expected {model.y.shape[0]} values, got {y.size}")
    alpha = model.solve(y)
    return float(-0.5 * y @ alpha - 0.5 * model.log_det()
                 - 0.5 * y.size * np.log(2.0 * np.pi))


def predict(model: CovarianceModel, kind: QuantityKind, x_star,
            z_star=None) -> Prediction:
    """Predictive mean and variance for one quantity on a query grid."""
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    if kind is QuantityKind.STRAIN:
        if z_star is None:
            raise ValueError("strain predictions require depths z_star")
        z_star = np.broadcast_to(np.asarray(z_star, float),
                                 x_star.shape).copy()
    params = model.theta.kernel_params()

    ks = np.empty((x_star.size, model.n))
    for e, sl in zip(model.entries, model.slices):
        z = None if z_star is None else z_star[:, None]
        zp = None if e.z is None else e.z[None, :]
        ks[:, sl] = kernels.kernel(kind, e.kind, x_star[:, None],
                                   e.x[None, :], params, z=z, z_prime=zp)

    mean = ks @ model.solve(model.y)
    v = solve_triangular(model.chol, ks.T, lower=True)
    k_diag = kernels.kernel(kind, kind, x_star, x_star, params,
                            z=z_star, z_prime=z_star)
    k_diag = np.atleast_1d(np.asarray(k_diag, float))
    var = k_diag - np.sum(v * v, axis=0)

    floor = -NEGATIVE_VARIANCE_SLACK * np.maximum(k_diag, 0.0)
    if np.any(var < floor):
        warnings.warn("predictive variance fell below the conditioning slack; "
                      "the model may be ill-conditioned", RuntimeWarning)
    return Prediction(kind=kind, x_star=x_star, mean=mean,
                      var=np.maximum(var, 0.0), z_star=z_star)


def predict_mixture(datasets, bcs, chain, kind: QuantityKind, x_star,
                    z_star=None) -> Prediction:
    """Fully Bayesian prediction averaging per-draw Gaussian predictives.

    The mixture mean is the average of per-draw means; the mixture variance
    adds the spread of the per-draw means to the average per-draw variance.
    """
    thetas = chain.thetas if hasattr(chain, "thetas") else list(chain)
    if not thetas:
        raise ValueError("posterior chain must be non-empty")
    means, variances = [], []
    out_x = out_z = None
    for theta in thetas:
        model = assemble(datasets, bcs, theta)
        pred = predict(model, kind, x_star, z_star=z_star)
        means.append(pred.mean)
        variances.append(pred.var)
        out_x, out_z = pred.x_star, pred.z_star
    means = np.asarray(means)
    variances = np.asarray(variances)
    mu = means.mean(axis=0)
    var = variances.mean(axis=0) + np.mean((means - mu) ** 2, axis=0)
    return Prediction(kind=kind, x_star=out_x, mean=mu, var=var, z_star=out_z)
