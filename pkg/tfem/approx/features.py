"""
tfem/approx/features.py
Random-feature fits of the scalar and vector maps the constructions place
inside FC blocks and attention heads.

ReLU atoms:     f(x) ~ out_scale * sum_i c_i relu(a_i . [x / in_scale; 1]),  |a_i| = 1
Softmax atoms:  f(x) ~ sum_i c_i softmax(A_i [x / in_scale; 1])[:k_out]

Random atoms are joined by a constant atom and the signed coordinate atoms,
so affine maps are represented exactly. Coefficients come from ridge least
squares on sampled points followed by refinement against the unregularized
normal equations; the sup error is measured on a low-discrepancy probe set.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy import linalg as sla
from scipy.special import expit
from scipy.stats import norm as normal_dist
from scipy.stats import qmc

from tfem.config.settings import Defaults
from tfem.errors import FitError, ParameterError

logger = logging.getLogger(__name__)


# ================================
# Targets
# ================================

class Target(str, Enum):
    INV_NORM = "inv_norm"
    SQRT_NORM = "sqrt_norm"
    INV_SCALAR = "inv_scalar"
    INV_SQRT = "inv_sqrt"
    COORDINATE = "coordinate"
    NORM = "norm"
    SIGMOID = "sigmoid"


class AtomKind(Enum):
    RELU = "relu"
    SOFTMAX = "softmax"


# degree p with f(R x) = R^p f(x); sigmoid is not homogeneous
HOMOGENEITY = {
    Target.INV_NORM: -1.0,
    Target.SQRT_NORM: 0.5,
    Target.INV_SCALAR: -1.0,
    Target.INV_SQRT: -0.5,
    Target.COORDINATE: 1.0,
    Target.NORM: 1.0,
}

RECIPROCAL = {Target.INV_NORM, Target.INV_SCALAR, Target.INV_SQRT}
SCALAR_ONLY = {Target.INV_SCALAR, Target.INV_SQRT}
# smallest random-atom count a ReLU fit accepts
MIN_RELU_ATOMS = 8


def target_values(target: Target, points: np.ndarray) -> np.ndarray:
    """Evaluate a named target on the columns of a d x n matrix."""
    if target is Target.INV_NORM:
        return 1.0 / np.linalg.norm(points, axis=0)
    if target is Target.SQRT_NORM:
        return np.sqrt(np.linalg.norm(points, axis=0))
    if target is Target.INV_SCALAR:
        return 1.0 / points[0]
    if target is Target.INV_SQRT:
        return 1.0 / np.sqrt(points[0])
    if target is Target.COORDINATE:
        return points[0].copy()
    if target is Target.NORM:
        return np.linalg.norm(points, axis=0)
    return expit(points[0])


# ================================
# Domain sampling
# ================================

def sample_domain(rng: np.random.Generator, d: int, r_lo: float, r_hi: float, n: int,
                  log_radius: bool = False) -> np.ndarray:
    """
    Radius uniform in [r_lo, r_hi] (log-uniform with `log_radius`), direction
    uniform on the sphere. For d = 1 the domain is the interval [r_lo, r_hi].
    """
    if log_radius:
        radii = np.exp(rng.uniform(np.log(r_lo), np.log(r_hi), size=n))
    else:
        radii = rng.uniform(r_lo, r_hi, size=n)
    if d == 1:
        return radii[None, :]
    dirs = rng.normal(size=(d, n))
    dirs /= np.linalg.norm(dirs, axis=0)
    return dirs * radii


def probe_domain(d: int, r_lo: float, r_hi: float, n: int = Defaults.PROBE_POINTS, seed: int = 0,
                 log_radius: bool = False) -> np.ndarray:
    """Scrambled Halton points mapped onto the same domain, endpoints included for d = 1."""
    cube = qmc.Halton(d=d + 1 if d > 1 else 1, scramble=True, seed=seed).random(n)
    if log_radius:
        radii = r_lo * (r_hi / r_lo) ** cube[:, 0]
    else:
        radii = r_lo + cube[:, 0] * (r_hi - r_lo)
    if d == 1:
        return np.concatenate([[r_lo, r_hi], radii])[None, :]
    # the first cube coordinate drives the radius, the rest pass through the normal quantile
    dirs = normal_dist.ppf(np.clip(cube[:, 1:], 1e-12, 1.0 - 1e-12)).T
    dirs /= np.linalg.norm(dirs, axis=0)
    return dirs * radii


def sample_cube(rng: np.random.Generator, d: int, r: float, n: int) -> np.ndarray:
    return rng.uniform(-r, r, size=(d, n))


def probe_cube(d: int, r: float, n: int = Defaults.PROBE_POINTS, seed: int = 0) -> np.ndarray:
    cube = qmc.Halton(d=d, scramble=True, seed=seed).random(n)
    return (2.0 * cube.T - 1.0) * r


# ================================
# Fitted approximation
# ================================

@dataclass(frozen=True)
class FeatureApprox:
    """
    A fitted combination of atoms. `directions` holds one (d+1)-row per atom
    in normalized coordinates; `rows` gives the output row of each softmax atom.
    """

    kind: AtomKind
    target: str
    coefficients: np.ndarray
    directions: np.ndarray
    d: int
    r_lo: float
    r_hi: float
    m: int
    seed: int
    measured_sup_error: float
    measured_rel_error: float = float("nan")
    in_scale: float = 1.0
    out_scale: float = 1.0
    k_out: int = 1
    rows: Optional[np.ndarray] = None
    samples: int = 0
    attempts: int = 1

    @property
    def atoms(self) -> list[tuple[float, np.ndarray]]:
        return [(float(c), a) for c, a in zip(self.coefficients, self.directions)]

    @property
    def n_atoms(self) -> int:
        return len(self.coefficients)

    def _features(self, points: np.ndarray) -> np.ndarray:
        """n x atoms for ReLU, (k_out * n) x atoms for softmax."""
        x = np.asarray(points, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[0] != self.d:
            raise ParameterError(f"expected {self.d}-row points, got {x.shape[0]}")
        pre = (self.directions[:, :-1] @ (x / self.in_scale) + self.directions[:, -1:]).T
        if self.kind is AtomKind.RELU:
            return np.maximum(pre, 0.0)
        return _softmax_atom_features(pre, self.rows, self.k_out)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Values at the columns of `points`; shape (n,) for ReLU fits, (k_out, n) for softmax fits."""
        flat = self.out_scale * (self._features(points) @ self.coefficients)
        if self.kind is AtomKind.RELU:
            return flat
        return flat.reshape(-1, self.k_out).T

    def scaled(self, radius: float) -> "FeatureApprox":
        """
        The fit of x -> f(x) on the domain stretched by `radius`, using the
        target's homogeneity; the sup error scales by radius^p.
        """
        target = Target(self.target) if self.target in Target._value2member_map_ else None
        if target not in HOMOGENEITY:
            raise ParameterError(f"target {self.target} has no homogeneity and cannot be rescaled")
        if not radius > 0.0:
            raise ParameterError(f"radius must be > 0, got {radius}")
        factor = radius ** HOMOGENEITY[target]
        return replace(
            self,
            in_scale=self.in_scale * radius,
            out_scale=self.out_scale * factor,
            r_lo=self.r_lo * radius,
            r_hi=self.r_hi * radius,
            measured_sup_error=self.measured_sup_error * factor,
        )

    def as_fc(self, dim: int, input_rows, ones_row: int, output_row: int) -> tuple[np.ndarray, np.ndarray]:
        """
        FC weights (W1, W2) reading the input from `input_rows` of a dim-row
        hidden state and adding the fitted value to `output_row`.
        """
        if self.kind is not AtomKind.RELU:
            raise ParameterError("only ReLU fits map onto an FC block")
        input_rows = np.atleast_1d(np.asarray(input_rows, dtype=int))
        if input_rows.size != self.d:
            raise ParameterError(f"fit reads {self.d} rows, got {input_rows.size}")
        w1 = np.zeros((self.n_atoms, dim))
        w1[:, input_rows] = self.directions[:, :-1] / self.in_scale
        w1[:, ones_row] += self.directions[:, -1]
        w2 = np.zeros((dim, self.n_atoms))
        w2[output_row] = self.out_scale * self.coefficients
        return w1, w2


def _softmax_atom_features(pre: np.ndarray, rows: np.ndarray, k_out: int) -> np.ndarray:
    """
    Softmax over k_out + 1 embedded rows: the atom's row scores pre + log k_out,
    every other row (sink included) scores 0. That row reads sigmoid(pre); the
    remaining k_out - 1 output rows read (1 - sigmoid(pre)) / k_out.
    """
    n, atoms = pre.shape
    top = expit(pre)
    rest = (1.0 - top) / k_out
    out = np.repeat(rest[:, None, :], k_out, axis=1)
    out[:, rows, np.arange(atoms)] = top
    return out.reshape(n * k_out, atoms)


# ================================
# Least squares
# ================================

def _solve_normal(gram: np.ndarray, rhs: np.ndarray, ridge: float, equilibrate: bool = False) -> np.ndarray:
    """
    Ridge solve of the normal equations. `equilibrate` rescales every atom to a
    unit diagonal first, for atoms whose magnitudes span many decades.
    """
    scale = np.ones(gram.shape[0])
    if equilibrate:
        scale = np.sqrt(np.maximum(np.diag(gram), 0.0))
        scale[scale == 0.0] = 1.0
        gram = gram / np.outer(scale, scale)
        rhs = rhs / scale
    lam = ridge * max(float(np.mean(np.diag(gram))), 1e-300)
    system = gram + lam * np.eye(gram.shape[0])
    coef = sla.solve(system, rhs, assume_a="pos")
    # iterated Tikhonov: pull the ridge solution back toward the plain normal equations
    for _ in range(Defaults.REFINE_STEPS):
        coef = coef + sla.solve(system, rhs - gram @ coef, assume_a="pos")
    coef = coef / scale
    if not np.all(np.isfinite(coef)):
        raise np.linalg.LinAlgError("non-finite coefficients")
    return coef


def _accumulate(features: Callable, sampler: Callable, values: Callable, n: int, weight: Callable, cols=None):
    """
    Chunked normal equations (Phi^T W Phi / n, Phi^T W y / n) over n fresh
    samples; `weight` maps the sample points to one weight per feature row.
    """
    gram = rhs = None
    done = 0
    while done < n:
        size = min(Defaults.FIT_CHUNK, n - done)
        pts = sampler(size)
        phi = features(pts)
        if cols is not None:
            phi = phi[:, cols]
        y = values(pts)
        wphi = phi * weight(pts)[:, None]
        if gram is None:
            gram = np.zeros((phi.shape[1], phi.shape[1]))
            rhs = np.zeros(phi.shape[1])
        gram += wphi.T @ phi
        rhs += wphi.T @ y
        done += size
    return gram / n, rhs / n


def _fit_two_stage(features: Callable, base_cols: np.ndarray, make_sampler: Callable, values: Callable, n: int,
                   weight: Callable, equilibrate: bool = False) -> np.ndarray:
    """
    Least squares on the base atoms alone (unregularized, minimum norm), then a
    joint ridge fit of what remains. Targets inside the base span come out exact.
    """
    gram, rhs = _accumulate(features, make_sampler(), values, n, weight, cols=base_cols)
    base = sla.lstsq(gram, rhs)[0]

    def residual(pts):
        return values(pts) - features(pts)[:, base_cols] @ base

    gram, rhs = _accumulate(features, make_sampler(), residual, n, weight)
    coef = _solve_normal(gram, rhs, Defaults.RIDGE, equilibrate)
    coef[base_cols] += base
    return coef


def _random_sphere(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    a = rng.normal(size=(count, dim))
    return a / np.linalg.norm(a, axis=1, keepdims=True)


def _relu_atoms(rng: np.random.Generator, m: int, d: int) -> np.ndarray:
    """m random unit directions, the constant atom, then +e_i and -e_i."""
    const = np.zeros((1, d + 1))
    const[0, d] = 1.0
    coords = np.zeros((2 * d, d + 1))
    coords[:d, :d] = np.eye(d)
    coords[d:, :d] = -np.eye(d)
    return np.vstack([_random_sphere(rng, m, d + 1), const, coords])


def _ramp_atoms(rng: np.random.Generator, m: int, lo_ratio: float) -> np.ndarray:
    """
    m left ramps relu(t - x) for a scalar input, one knot per equal slice of
    [log lo_ratio, 0] at a random position; then the constant and +-x atoms.
    """
    slices = (np.arange(m) + rng.random(m)) / m
    knots = np.exp(np.log(lo_ratio) * (1.0 - slices))
    ramps = np.stack([-np.ones(m), knots], axis=1)
    ramps /= np.linalg.norm(ramps, axis=1, keepdims=True)
    return np.vstack([ramps, [[0.0, 1.0]], [[1.0, 0.0]], [[-1.0, 0.0]]])


def fit_relu_features(
    target: str,
    d: int,
    r_lo: float,
    r_hi: float,
    m: int,
    seed: int = 0,
    relative: bool = False,
) -> FeatureApprox:
    """
    Fit a named target with m random ReLU atoms on {r_lo <= |x| <= r_hi}.

    Args:
        target: one of Target
        relative: fit the relative error of a reciprocal scalar target. The
            atoms become left ramps with log-spaced knots, samples and probes
            are log-uniform, and residuals are weighted by 1/f^2.

    Returns:
        FeatureApprox carrying the measured sup error on the probe set
    """
    try:
        target = Target(target)
    except ValueError:
        raise ParameterError(f"unknown target {target!r}; expected one of {[t.value for t in Target]}")
    if m < MIN_RELU_ATOMS or d < 1:
        raise ParameterError(f"need m >= {MIN_RELU_ATOMS} and d >= 1, got m={m}, d={d}")
    if not (0.0 <= r_lo < r_hi):
        raise ParameterError(f"need 0 <= r_lo < r_hi, got [{r_lo}, {r_hi}]")
    if target in RECIPROCAL and r_lo <= 0.0:
        raise ParameterError(f"target {target.value} needs r_lo > 0")
    if target in SCALAR_ONLY and d != 1:
        raise ParameterError(f"{target.value} is a scalar target (d = 1)")
    if relative and target not in SCALAR_ONLY:
        raise ParameterError(f"relative fits take a reciprocal scalar target, got {target.value}")

    scale = float(r_hi)
    width = m + 1 + 2 * d
    n = min(Defaults.SAMPLES_PER_FEATURE * width, Defaults.MAX_FIT_SAMPLES)
    affine = np.arange(m, width)

    def values(pts):
        return target_values(target, pts)

    def weight(pts):
        if not relative:
            return np.ones(pts.shape[1])
        y = values(pts)
        return 1.0 / np.maximum(y * y, 1e-300)

    for attempt in range(Defaults.FIT_RESEEDS + 1):
        rng = np.random.default_rng([seed, attempt])
        atoms = _ramp_atoms(rng, m, r_lo / r_hi) if relative else _relu_atoms(rng, m, d)

        def features(pts, atoms=atoms):
            return np.maximum(atoms[:, :-1] @ (pts / scale) + atoms[:, -1:], 0.0).T

        def make_sampler(attempt=attempt):
            rng = np.random.default_rng([seed, attempt, 1])
            return lambda size: sample_domain(rng, d, r_lo, r_hi, size, log_radius=relative)

        try:
            coef = _fit_two_stage(features, affine, make_sampler, values, n, weight, equilibrate=relative)
            break
        except np.linalg.LinAlgError as e:
            logger.warning("%s fit (m=%d, seed=%d) attempt %d failed: %s", target.value, m, seed, attempt, e)
    else:
        raise FitError(f"{target.value} fit with m={m} failed after {Defaults.FIT_RESEEDS} reseeds")

    fit = FeatureApprox(
        kind=AtomKind.RELU, target=target.value, coefficients=coef, directions=atoms,
        d=d, r_lo=float(r_lo), r_hi=float(r_hi), m=m, seed=seed,
        measured_sup_error=0.0, in_scale=scale, samples=n, attempts=attempt + 1,
    )
    probe = probe_domain(d, r_lo, r_hi, seed=seed, log_radius=relative)
    truth = values(probe)
    err = np.abs(fit.evaluate(probe) - truth)
    sup, rel = float(err.max()), float((err / np.abs(truth).clip(1e-300)).max())
    logger.debug("%s fit m=%d on [%g, %g]: sup %.3e rel %.3e", target.value, m, r_lo, r_hi, sup, rel)
    return replace(fit, measured_sup_error=sup, measured_rel_error=rel)


def fit_softmax_features(
    target: Callable[[np.ndarray], np.ndarray],
    d: int,
    k_out: int,
    r: float,
    m: int,
    seed: int = 0,
    name: str = "custom",
) -> FeatureApprox:
    """
    Fit a vector map R^d -> R^k_out on the cube [-r, r]^d with m random
    softmax atoms, cycling the output row over atoms. `target` takes a
    d x n matrix and returns k_out x n.
    """
    if m < 1 or d < 1 or k_out < 1:
        raise ParameterError(f"m, d, k_out must be >= 1, got {m}, {d}, {k_out}")
    if not r > 0.0:
        raise ParameterError(f"r must be > 0, got {r}")

    def values(pts):
        y = np.asarray(target(pts), dtype=np.float64)
        if y.shape != (k_out, pts.shape[1]):
            raise ParameterError(f"target returned shape {y.shape}, expected {(k_out, pts.shape[1])}")
        return y.T.reshape(-1)

    # constant atoms (zero direction) per output row span every constant vector
    const = np.zeros((k_out, d + 1))
    width = m + k_out
    rows = np.concatenate([np.arange(m) % k_out, np.arange(k_out)])
    n = min(Defaults.SAMPLES_PER_FEATURE * width // k_out, Defaults.MAX_FIT_SAMPLES)

    for attempt in range(Defaults.FIT_RESEEDS + 1):
        rng = np.random.default_rng([seed, attempt])
        steep = rng.uniform(1.0, 8.0, size=(m, 1))
        dirs = _random_sphere(rng, m, d)
        centers = rng.uniform(-1.0, 1.0, size=(m, d))
        random_atoms = np.hstack([steep * dirs, -steep * np.sum(dirs * centers, axis=1, keepdims=True)])
        atoms = np.vstack([random_atoms, const])

        def features(pts, atoms=atoms):
            pre = (atoms[:, :-1] @ (pts / r) + atoms[:, -1:]).T
            return _softmax_atom_features(pre, rows, k_out)

        def make_sampler(attempt=attempt):
            rng = np.random.default_rng([seed, attempt, 1])
            return lambda size: sample_cube(rng, d, r, size)

        try:
            coef = _fit_two_stage(features, np.arange(m, width), make_sampler, values, n,
                                  lambda pts: np.ones(k_out * pts.shape[1]))
            break
        except np.linalg.LinAlgError as e:
            logger.warning("softmax fit (m=%d, seed=%d) attempt %d failed: %s", m, seed, attempt, e)
    else:
        raise FitError(f"softmax fit with m={m} failed after {Defaults.FIT_RESEEDS} reseeds")

    fit = FeatureApprox(
        kind=AtomKind.SOFTMAX, target=name, coefficients=coef, directions=atoms,
        d=d, r_lo=0.0, r_hi=float(r), m=m, seed=seed, measured_sup_error=0.0,
        in_scale=float(r), k_out=k_out, rows=rows, samples=n, attempts=attempt + 1,
    )
    probe = probe_cube(d, r, seed=seed)
    err = np.abs(fit.evaluate(probe) - np.asarray(target(probe), dtype=np.float64))
    return replace(fit, measured_sup_error=float(err.max()))


# ================================
# Decay audit
# ================================

@dataclass
class DecayAudit:
    target: str
    kind: str = AtomKind.RELU.value
    ms: list[int] = field(default_factory=list)
    errors: list[float] = field(default_factory=list)
    slope: float = float("nan")
    reference: list[float] = field(default_factory=list)

    def within_reference(self, factor: float = 3.0) -> bool:
        """
        Every error sits below `factor` times the reference rate, scaled to
        agree with the measured error at the smallest atom count.
        """
        if not self.reference:
            return True
        errors, reference = np.asarray(self.errors), np.asarray(self.reference)
        envelope = factor * errors[0] * reference / reference[0]
        return bool(np.all(errors <= envelope))


def _log_slope(ms, errors) -> float:
    if len(ms) < 2:
        return float("nan")
    floor = np.maximum(np.asarray(errors, dtype=np.float64), 1e-300)
    return float(np.polyfit(np.log(ms), np.log(floor), 1)[0])


def decay_audit(target: str, d: int, r_lo: float, r_hi: float, ms=(64, 256, 1024, 4096), seed: int = 0) -> DecayAudit:
    """Measured sup error per atom count and the log-log slope of error against m."""
    audit = DecayAudit(target=str(target))
    for m in ms:
        fit = fit_relu_features(target, d, r_lo, r_hi, m, seed)
        audit.ms.append(int(m))
        audit.errors.append(fit.measured_sup_error)
        logger.info("decay %s m=%d: sup error %.3e", target, m, fit.measured_sup_error)
    audit.slope = _log_slope(audit.ms, audit.errors)
    return audit


def softmax_decay_reference(d: int, ms, r: float = 1.0) -> np.ndarray:
    """sqrt(d^2/M * log(M r / d^2)) per atom count M, the logarithm floored at 1."""
    m = np.asarray(ms, dtype=np.float64)
    return np.sqrt(d * d / m * np.maximum(np.log(m * r / (d * d)), 1.0))


def softmax_decay_audit(target: Callable[[np.ndarray], np.ndarray], d: int, k_out: int, r: float = 1.0,
                        ms=(64, 256, 1024), seed: int = 0, name: str = "custom") -> DecayAudit:
    """Decay audit of fit_softmax_features, with the reference rate attached."""
    audit = DecayAudit(target=name, kind=AtomKind.SOFTMAX.value)
    for m in ms:
        fit = fit_softmax_features(target, d, k_out, r, m, seed, name)
        audit.ms.append(int(m))
        audit.errors.append(fit.measured_sup_error)
        logger.info("softmax decay %s m=%d: sup error %.3e", name, m, fit.measured_sup_error)
    audit.reference = [float(v) for v in softmax_decay_reference(d, audit.ms, r)]
    audit.slope = _log_slope(audit.ms, audit.errors)
    return audit
