"""The four basis families B_{j,n}(rho) used by the curve and surface fits."""
import numpy as np
import scipy.special

from app.domain.model.shape import BasisFamily, BasisSpec
from app.domain.utils import error_collection, validation


def _polynomial(n: int, rhos: np.ndarray) -> np.ndarray:
    return rhos[:, None] ** np.arange(n + 1)[None, :]


def _bernstein(n: int, rhos: np.ndarray) -> np.ndarray:
    j = np.arange(n + 1)[None, :]
    rho = rhos[:, None]
    return scipy.special.binom(n, j) * rho ** j * (1.0 - rho) ** (n - j)


def _cox_deboor(n: int, rhos: np.ndarray) -> np.ndarray:
    # alternating sum over l = 0..n-j of (-1)^l C(n+1, l) (rho + n - j - l)_+^n / n!
    j = np.arange(n + 1)[None, :, None]
    l = np.arange(n + 1)[None, None, :]
    shifted = np.clip(rhos[:, None, None] + n - j - l, 0.0, None)
    terms = (-1.0) ** l * scipy.special.binom(n + 1, l) * shifted ** n
    terms = np.where(l <= n - j, terms, 0.0)
    return terms.sum(axis=2) / scipy.special.factorial(n)


def _trigonometric(n: int, rhos: np.ndarray) -> np.ndarray:
    out = np.empty((rhos.size, n + 1))
    out[:, 0] = 1.0
    for j in range(1, n + 1):
        if j % 2:
            out[:, j] = np.cos((j + 1) / 2 * rhos)
        else:
            out[:, j] = np.sin(j / 2 * rhos)
    return out


FAMILIES = {
    BasisFamily.polynomial: _polynomial,
    BasisFamily.bernstein: _bernstein,
    BasisFamily.cox_deboor: _cox_deboor,
    BasisFamily.trigonometric: _trigonometric,
}


def basis_matrix(family: str, n: int, rhos) -> np.ndarray:
    """N x (n+1) matrix with entry (i, j) = B_{j,n}(rho_i)"""
    validation.validate_positive_int(n, 'order')
    family = validation.validate_choice(family, tuple(FAMILIES), 'family')
    rhos = validation.validate_unit_interval(np.atleast_1d(np.asarray(rhos, dtype=float)).reshape(-1))
    return FAMILIES[family](n, rhos)


def basis_eval(spec: BasisSpec, j: int, rho: float) -> float:
    if j is None or int(j) != j or not 0 <= j <= spec.order_n:
        raise error_collection.DomainError(f'basis index j must be in [0, {spec.order_n}], receive {j}')
    return float(basis_matrix(spec.family, spec.order_n, [rho])[0, int(j)])


def surface_frame(xy) -> np.ndarray:
    """Bounding box (x_lo, y_lo, x_hi, y_hi) of the sample footprint, an axis without extent keeps unit width"""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    lo, hi = xy.min(axis=0), xy.max(axis=0)
    return np.concatenate([lo, np.where(hi > lo, hi, lo + 1.0)])


def surface_design(spec: BasisSpec, xy, frame=None) -> np.ndarray:
    """Rows B_{j,nx}(x_i) B_{l,ny}(y_i) with j outer and l inner, matching q_00, q_01, ...

    With a frame the coordinates are mapped onto [0, 1]^2 first, points outside it are clamped to its border."""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    if frame is not None:
        frame = np.asarray(frame, dtype=float)
        xy = np.clip((xy - frame[:2]) / (frame[2:] - frame[:2]), 0.0, 1.0)
    bx = basis_matrix(spec.family, spec.order_nx, xy[:, 0])
    by = basis_matrix(spec.family, spec.order_ny, xy[:, 1])
    return (bx[:, :, None] * by[:, None, :]).reshape(len(xy), -1)
