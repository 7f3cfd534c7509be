"""Named closure laws: equilibrium velocity V_eq, hesitation h and microscopic speed law s.

Laws are referenced by name in configurations and model parameters so that every parameter
object stays picklable for the process pool.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from sg_traffic.chaos.basis import Basis
from sg_traffic.chaos.galerkin import project_nodal, reconstruct_nodal

Array = NDArray[np.float64]


@dataclass(frozen=True)
class Closure:
    name: str
    value: Callable[[Array], Array]
    derivative: Callable[[Array], Array]
    # (c0, c1) when the law is c0 + c1 * rho; such laws are projected exactly.
    affine: tuple[float, float] | None = None


def _greenshields(rho: Array) -> Array:
    return 1.0 - rho


def _greenshields_prime(rho: Array) -> Array:
    return np.full_like(rho, -1.0)


def _clamped_greenshields(y: Array) -> Array:
    return np.clip(1.0 - y, 0.0, 1.0)


def _clamped_greenshields_prime(y: Array) -> Array:
    return np.where((y > 0.0) & (y < 1.0), -1.0, 0.0)


def _identity(rho: Array) -> Array:
    return np.asarray(rho, dtype=float)


def _one(rho: Array) -> Array:
    return np.ones_like(rho)


def _zero(rho: Array) -> Array:
    return np.zeros_like(rho)


def _square(rho: Array) -> Array:
    return rho * rho


def _twice(rho: Array) -> Array:
    return 2.0 * rho


VELOCITY_LAWS: dict[str, Closure] = {
    "greenshields": Closure("greenshields", _greenshields, _greenshields_prime, (1.0, -1.0)),
}

HESITATIONS: dict[str, Closure] = {
    "linear": Closure("linear", _identity, _one, (0.0, 1.0)),
    "zero": Closure("zero", _zero, _zero, (0.0, 0.0)),
    "quadratic": Closure("quadratic", _square, _twice),
}

SPEED_LAWS: dict[str, Closure] = {
    "greenshields": Closure("greenshields", _clamped_greenshields, _clamped_greenshields_prime),
    # Unclamped variant; affine, so the linear-headway shortcut is exact for it.
    "linear": Closure("linear", _greenshields, _greenshields_prime, (1.0, -1.0)),
}


def _lookup(table: dict[str, Closure], kind: str, name: str) -> Closure:
    try:
        return table[name]
    except KeyError:
        raise ValueError(f"unknown {kind} {name!r}; expected one of {sorted(table)}") from None


def velocity_law(name: str) -> Closure:
    return _lookup(VELOCITY_LAWS, "velocity law", name)


def hesitation(name: str) -> Closure:
    return _lookup(HESITATIONS, "hesitation function", name)


def speed_law(name: str) -> Closure:
    return _lookup(SPEED_LAWS, "speed law", name)


def project_closure(closure: Closure, u: Array, basis: Basis) -> Array:
    """Galerkin coefficients of closure(u(xi)).

    Affine laws map coefficients directly (c0 e_1 + c1 u); other laws are evaluated at the
    quadrature nodes of the reconstructed field and projected back.
    """
    coefficients = np.asarray(u, dtype=float)
    if closure.affine is not None:
        c0, c1 = closure.affine
        result = c1 * coefficients
        result[..., 0] += c0
        return result
    return project_nodal(closure.value(reconstruct_nodal(coefficients, basis)), basis)
