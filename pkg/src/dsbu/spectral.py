"""Periodic pseudo-spectral core: grid, fields, nonlocal operators, functionals.

The computational domain is the periodic square [-L/2, L/2)^2 sampled on an
n x n lattice, standing in for the plane; validity of that substitution is
monitored through boundary-decay checks on the second moment. Conventions
used throughout the package:

* array axis 0 is x1, axis 1 is x2 (x2 varies fastest in memory),
* wavenumbers are xi_k = 2*pi*k/L in numpy fft ordering,
* the forward transform is the unnormalized ``numpy.fft.fft2``,
* integrals are rectangle-rule quadratures dx^2 * sum, which is spectrally
  accurate for smooth periodic integrands.

The nonlocal operator ``B`` is the Fourier multiplier xi1^2/(xi1^2 + xi2^2).
The symbol has no limit at the origin; the zero mode is assigned the exact
average of the symbol over the origin cell (1/2 by symmetry), which is the
unique constant for which box quadratures of <B w, w> converge to their
plane values at fourth order in 1/box_length instead of second. ``L = nu*I
+ gamma*B`` acts on the real field |u|^2 inside the cubic nonlinearity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, GridMismatchError, UsageError

PHYSICAL = "physical"
SPECTRAL = "spectral"

#: Relative magnitude of the imaginary part above which a field no longer
#: counts as real-valued input to B and L.
REALITY_TOL = 1e-12

#: Relative boundary amplitude below which the box is considered to contain
#: the field (second-moment validity).
BOUNDARY_DECAY_TOL = 1e-10


class Grid2D:
    """Uniform n x n grid on the periodic square [-L/2, L/2)^2.

    Coordinates are x_i = -L/2 + i*dx with dx = L/n; wavenumbers are
    xi_k = 2*pi*k/L for k in [-n/2, n/2). Multiplier arrays used by the
    operators are precomputed once and never mutated, so a grid may be
    shared freely between threads.
    """

    def __init__(self, n: int, box_length: float):
        if n < 8 or n % 2 != 0:
            raise UsageError(f"grid size must be even and >= 8, got n={n}")
        if not box_length > 0:
            raise UsageError(f"box_length must be positive, got {box_length}")
        self.n = int(n)
        self.box_length = float(box_length)
        self.dx = self.box_length / self.n
        self.x = -self.box_length / 2 + self.dx * np.arange(self.n)
        self.k = 2 * np.pi * np.fft.fftfreq(self.n, d=self.dx)
        self.k1 = self.k[:, None] * np.ones((1, self.n))
        self.k2 = np.ones((self.n, 1)) * self.k[None, :]
        self.ksq = self.k1**2 + self.k2**2
        ksq_safe = self.ksq.copy()
        ksq_safe[0, 0] = 1.0
        self.b_symbol = self.k1**2 / ksq_safe
        # Zero mode carries the exact origin-cell average of the symbol; any
        # other constant leaves an O(1/L^2) rank-one defect in <B w, w>.
        self.b_symbol[0, 0] = 0.5

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid (X1, X2) of physical coordinates, 'ij' indexing."""
        return np.meshgrid(self.x, self.x, indexing="ij")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Grid2D)
            and self.n == other.n
            and self.box_length == other.box_length
        )

    def __hash__(self):
        return hash((self.n, self.box_length))

    def __repr__(self):
        return f"Grid2D(n={self.n}, box_length={self.box_length})"


@dataclass
class Field:
    """Complex samples of a field on a grid, tagged physical or spectral.

    Spectral values follow the unnormalized fft2 convention, so the
    round trip physical -> spectral -> physical is exact to roundoff.
    """

    grid: Grid2D
    values: np.ndarray
    space: str = PHYSICAL

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != (self.grid.n, self.grid.n):
            raise UsageError(
                f"field shape {self.values.shape} does not match grid n={self.grid.n}"
            )
        if self.space not in (PHYSICAL, SPECTRAL):
            raise UsageError(f"unknown space tag {self.space!r}")

    def to_physical(self) -> "Field":
        if self.space == PHYSICAL:
            return self
        return Field(self.grid, np.fft.ifft2(self.values), PHYSICAL)

    def to_spectral(self) -> "Field":
        if self.space == SPECTRAL:
            return self
        return Field(self.grid, np.fft.fft2(self.values), SPECTRAL)

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.space)


@dataclass(frozen=True)
class OperatorParams:
    """Couplings of the nonlocal operator L = nu*I + gamma*B."""

    nu: int
    gamma: float

    def __post_init__(self):
        if self.nu not in (-1, 1):
            raise UsageError(f"nu must be +1 or -1, got {self.nu}")
        if not self.gamma > 0:
            raise UsageError(f"gamma must be positive, got {self.gamma}")


def _require_same_grid(a: Field, b: Field) -> None:
    if a.grid != b.grid:
        raise GridMismatchError(f"grids differ: {a.grid} vs {b.grid}")


def _check_real(values: np.ndarray, what: str) -> None:
    norm = np.linalg.norm(values)
    if norm == 0.0:
        return
    imag = np.linalg.norm(values.imag)
    if imag > REALITY_TOL * norm:
        raise DomainError(
            f"{what} expects a real-valued field; relative imaginary part "
            f"{imag / norm:.3e} exceeds {REALITY_TOL:.0e}"
        )


def _b_action(values: np.ndarray, grid: Grid2D) -> np.ndarray:
    """Multiplier action of B on physical-space samples."""
    return np.fft.ifft2(grid.b_symbol * np.fft.fft2(values))


def apply_b(f: Field) -> Field:
    """Apply the multiplier B with symbol xi1^2/|xi|^2 to a real field.

    Input must be physical and real up to roundoff (B acts on |u|^2 in the
    evolution, which is real); the output imaginary part is pure roundoff
    because the symbol is real and even in each wavenumber.
    """
    f = f.to_physical()
    _check_real(f.values, "apply_b")
    return Field(f.grid, _b_action(f.values, f.grid), PHYSICAL)


def apply_l(f: Field, p: OperatorParams) -> Field:
    """Apply L = nu*I + gamma*B to a real field."""
    f = f.to_physical()
    _check_real(f.values, "apply_l")
    out = p.nu * f.values + p.gamma * _b_action(f.values, f.grid)
    return Field(f.grid, out, PHYSICAL)


def mass(u: Field) -> float:
    """Squared L2 norm: integral of |u|^2 over the box.

    Evaluated in whichever representation the field carries; the physical
    quadrature and the Parseval sum agree to roundoff.
    """
    g = u.grid
    if u.space == PHYSICAL:
        total = np.sum(np.abs(u.values) ** 2)
    else:
        total = np.sum(np.abs(u.values) ** 2) / g.n**2
    if not np.isfinite(total):
        raise DomainError("mass: field contains non-finite values")
    return float(g.dx**2 * total)


def gradient_norm_sq(u: Field) -> float:
    """Integral of |grad u|^2, evaluated as sum |xi|^2 |u_hat|^2."""
    g = u.grid
    uh = u.to_spectral().values
    return float(g.dx**2 / g.n**2 * np.sum(g.ksq * np.abs(uh) ** 2))


def quartic_term(u: Field, p: OperatorParams) -> float:
    """Interaction functional: integral of L(|u|^2) |u|^2.

    Computed as the spectral quadratic form nu*sum w^2 + gamma*sum m(xi)|w_hat|^2
    with w = |u|^2, which is manifestly real and keeps the gamma part inside
    [0, gamma * integral of |u|^4] (the symbol is bounded by [0, 1]).
    """
    g = u.grid
    w = np.abs(u.to_physical().values) ** 2
    what = np.fft.fft2(w)
    b_part = np.sum(g.b_symbol * np.abs(what) ** 2) / g.n**2
    return float(g.dx**2 * (p.nu * np.sum(w * w) + p.gamma * b_part))


def energy(u: Field, p: OperatorParams) -> float:
    """Hamiltonian: (1/2) integral |grad u|^2 - (1/4) integral L(|u|^2)|u|^2."""
    return 0.5 * gradient_norm_sq(u) - 0.25 * quartic_term(u, p)


class SecondMoment(NamedTuple):
    """Second-moment value with a boundary-decay validity flag."""

    value: float
    boundary_ok: bool


def second_moment(u: Field) -> SecondMoment:
    """Integral of |x|^2 |u|^2 with centered coordinates.

    The quantity is only meaningful while the field is contained well inside
    the box (|x|^2 is not periodic); ``boundary_ok`` is False once the field
    amplitude on the outermost cells exceeds 1e-10 of its maximum.
    """
    g = u.grid
    vals = u.to_physical().values
    absu = np.abs(vals)
    sup = absu.max()
    edge = max(
        absu[0, :].max(), absu[-1, :].max(), absu[:, 0].max(), absu[:, -1].max()
    )
    ok = bool(sup == 0.0 or edge <= BOUNDARY_DECAY_TOL * sup)
    x1, x2 = g.coords()
    value = float(g.dx**2 * np.sum((x1**2 + x2**2) * absu**2))
    return SecondMoment(value, ok)


def l4_norm_4(u: Field) -> float:
    """Integral of |u|^4 over the box."""
    g = u.grid
    vals = u.to_physical().values
    return float(g.dx**2 * np.sum(np.abs(vals) ** 4))


def sample_scaled(field: Field, target_grid: Grid2D, scale: float) -> np.ndarray:
    """Evaluate the band-limited extension of ``field`` at scale*x on a target grid.

    Returns the trigonometric interpolant of the source samples evaluated at
    the points scale * x_target (scale may be negative). The Nyquist mode is
    symmetrized (split between +/- n/2) so real sources give real values up to
    roundoff; at source grid points the interpolant reproduces the samples
    exactly. Points outside the source box see its periodic extension.
    """
    src = field.to_spectral()
    g = src.grid
    coeff = src.values / g.n**2
    # DFT phases are anchored at the first sample point x0 = -L/2.
    shifted = scale * target_grid.x - g.x[0]
    phase = np.exp(1j * np.outer(shifted, g.k))
    nyq = g.n // 2
    phase[:, nyq] = np.cos(abs(g.k[nyq]) * shifted)
    return phase @ coeff @ phase.T
