"""Dispersion coefficients (a, b, c, d) for the Boussinesq system families."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

FAMILIES = ("bbm-bbm", "bona-smith", "kdv-kdv", "general")


@dataclass(frozen=True)
class Coefficients:
    a: float
    b: float
    c: float
    d: float
    theta2: float
    nu: float
    mu: float


def coefficients(theta2: float, nu: float, mu: float) -> Coefficients:
    """Coefficients generated from (theta^2, nu, mu).

    a = (theta^2 - 1/3) nu / 2        b = (theta^2 - 1/3)(1 - nu) / 2
    c = (1 - theta^2) mu / 2          d = (1 - theta^2)(1 - mu) / 2

    so a + b + c + d = 1/3 identically, for any nu and mu.
    """
    if not 0.0 <= theta2 <= 1.0:
        raise ValueError(f"theta2 must lie in [0, 1], got {theta2}")
    a = 0.5 * (theta2 - 1.0 / 3.0) * nu
    b = 0.5 * (theta2 - 1.0 / 3.0) * (1.0 - nu)
    c = 0.5 * (1.0 - theta2) * mu
    d = 0.5 * (1.0 - theta2) * (1.0 - mu)
    return Coefficients(a=a, b=b, c=c, d=d, theta2=theta2, nu=nu, mu=mu)


def family_preset(name: str, theta2: float | None = None) -> Coefficients:
    """Named system presets: bbm-bbm, kdv-kdv, bona-smith (needs theta2)."""
    name = name.lower()
    if name == "bbm-bbm":
        return coefficients(2.0 / 3.0, 0.0, 0.0)
    if name == "kdv-kdv":
        return coefficients(2.0 / 3.0, 1.0, 1.0)
    if name == "bona-smith":
        if theta2 is None:
            theta2 = 9.0 / 11.0
        if not 2.0 / 3.0 <= theta2 < 1.0:
            raise ValueError(
                f"bona-smith requires 2/3 <= theta2 < 1, got {theta2}")
        mu = (4.0 - 6.0 * theta2) / (3.0 * (1.0 - theta2))
        coef = coefficients(theta2, 0.0, mu)
        _check(coef, fatal=True)
        return coef
    raise ValueError(f"unknown family {name!r}; expected one of {FAMILIES}")


def validate(coef: Coefficients, fatal: bool = False) -> list[str]:
    """Check the physical constraints; returns a list of violation messages."""
    return _check(coef, fatal=fatal)


def _check(coef: Coefficients, fatal: bool) -> list[str]:
    problems = []
    s = coef.a + coef.b + coef.c + coef.d
    if abs(s - 1.0 / 3.0) > 1e-14:
        problems.append(f"a+b+c+d = {s!r}, expected 1/3 "
                        f"(off by {s - 1.0 / 3.0:.3e})")
    if coef.c + coef.d < 0:
        problems.append(f"c+d = {coef.c + coef.d!r} < 0")
    if problems and fatal:
        raise ValueError("; ".join(problems))
    for p in problems:
        warnings.warn(p)
    return problems
