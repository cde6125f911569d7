"""Functional AR(1) sample paths with Brownian-bridge innovations.

The recursion is X_i = integral Psi(., s) X_{i-1}(s) ds + eps_i on [0,1],
discretized on an equidistant grid with trapezoidal quadrature and refit
into a B-spline working basis at every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .basis import (Basis, Curve, FunctionalSample, Grid, bspline_basis,
                    fit_curve)

_CHANGE_SHAPES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sin": np.sin,
    "constant": lambda t: np.ones_like(t),
}


def _base_kernel(kind: str,
                 custom: Callable[[np.ndarray, np.ndarray], np.ndarray] | None,
                 ) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    if kind == "gaussian":
        return lambda t, s: np.exp((t ** 2 + s ** 2) / 2.0)
    if kind == "wiener":
        return lambda t, s: np.minimum(t, s)
    if kind == "custom":
        if custom is None:
            raise ValueError("custom kernel requires a callable")
        return custom
    raise ValueError(f"unknown kernel kind {kind!r}")


@dataclass(frozen=True)
class IntegralKernel:
    """A calibrated AR operator kernel scale * psi_base(t, s).

    `scale` is chosen by calibrate_kernel so that the L^2([0,1]^2) norm of
    the scaled kernel equals `psi`.
    """

    kind: str
    psi: float
    scale: float
    custom: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None

    def values(self, t: np.ndarray, s: np.ndarray) -> np.ndarray:
        """Kernel matrix Psi(t_i, s_j) of shape (len(t), len(s))."""
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        base = _base_kernel(self.kind, self.custom)
        return self.scale * base(t[:, None], s[None, :])


def calibrate_kernel(kind: str, psi: float,
                     custom: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
                     quad_points: int = 1001) -> IntegralKernel:
    """Scale the base kernel so its L^2([0,1]^2) norm equals psi.

    Stationarity of the AR(1) iteration requires psi < 1.
    """
    if not 0.0 <= psi < 1.0:
        raise ValueError(f"need 0 <= psi < 1, got {psi}")
    base = _base_kernel(kind, custom)
    g = Grid.uniform(quad_points)
    w = g.trapezoid_weights
    vals = base(g.points[:, None], g.points[None, :])
    sq_norm = float(w @ (vals ** 2) @ w)
    if sq_norm <= 0.0:
        raise ValueError("base kernel has zero L^2 norm; cannot calibrate")
    return IntegralKernel(kind=kind, psi=psi, scale=psi / math.sqrt(sq_norm),
                          custom=custom)


def integral_transform(kernel: IntegralKernel, y: Curve, grid: Grid) -> Curve:
    """Apply z(t) = integral Psi(t, s) y(s) ds by quadrature on `grid`."""
    k_mat = kernel.values(grid.points, grid.points)
    z_vals = k_mat @ (grid.trapezoid_weights * y(grid.points))
    return fit_curve(z_vals, grid, y.basis)


def brownian_bridge_values(grid: Grid, rng: np.random.Generator,
                           size: int = 1) -> np.ndarray:
    """Brownian bridge paths at grid points, exact finite-dimensional law.

    B(t_k) = W(t_k) - t_k W(1) for a standard Wiener path W built from
    independent Gaussian increments over the grid spacings.  Shape (size, T).
    """
    pts = grid.points
    dt = np.diff(pts)
    incr = rng.normal(0.0, 1.0, size=(size, dt.size)) * np.sqrt(dt)
    w = np.cumsum(incr, axis=1)
    out = np.zeros((size, pts.size))
    out[:, 1:] = w
    out -= pts[None, :] * out[:, -1:]
    return out


def brownian_bridge_curve(grid: Grid, basis: Basis,
                          rng: np.random.Generator) -> Curve:
    """One Brownian bridge sampled on `grid` and smoothed into `basis`."""
    return fit_curve(brownian_bridge_values(grid, rng)[0], grid, basis)


@dataclass(frozen=True)
class ChangeSpec:
    """A one-time mean shift: curves after index floor(n * theta) gain delta."""

    theta: float
    delta: Curve
    shape: str = "custom"
    amplitude: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"need 0 < theta < 1, got {self.theta}")


@dataclass(frozen=True)
class SimSpec:
    """Complete description of one functional AR(1) data-generating process."""

    n: int
    kernel: IntegralKernel
    change: ChangeSpec | None = None
    burn_in: int = 100
    seed: int | tuple[int, ...] = 0
    grid_points: int = 96
    basis_size: int = 25
    basis_order: int = 4

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError("need n >= 2 curves")
        if self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")

    def to_config(self) -> str:
        """Serialize to `key = value` lines (round trips via from_config)."""
        lines = [
            f"n = {self.n}",
            f"kernel = {self.kernel.kind}",
            f"psi = {self.kernel.psi!r}",
            f"burn_in = {self.burn_in}",
            f"seed = {_seed_str(self.seed)}",
            f"grid_points = {self.grid_points}",
            f"basis_size = {self.basis_size}",
            f"basis_order = {self.basis_order}",
        ]
        if self.kernel.kind == "custom":
            raise ValueError("custom kernels cannot be serialized to config text")
        if self.change is None:
            lines.append("change_shape = none")
        else:
            if self.change.shape not in _CHANGE_SHAPES:
                raise ValueError(
                    f"change shape {self.change.shape!r} cannot be serialized")
            lines.append(f"change_shape = {self.change.shape}")
            lines.append(f"change_theta = {self.change.theta!r}")
            lines.append(f"change_amplitude = {self.change.amplitude!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_config(cls, text: str) -> "SimSpec":
        """Parse config text written by to_config (or by hand)."""
        fields: dict[str, str] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key in fields:
                raise ValueError(f"line {lineno}: duplicate key {key!r}")
            fields[key] = value
        known = {"n", "kernel", "psi", "burn_in", "seed", "grid_points",
                 "basis_size", "basis_order", "change_shape", "change_theta",
                 "change_amplitude"}
        unknown = set(fields) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for req in ("n", "kernel", "psi"):
            if req not in fields:
                raise ValueError(f"missing required config key {req!r}")
        n = int(fields["n"])
        kernel = calibrate_kernel(fields["kernel"], float(fields["psi"]))
        burn_in = int(fields.get("burn_in", "100"))
        seed = _parse_seed(fields.get("seed", "0"))
        grid_points = int(fields.get("grid_points", "96"))
        basis_size = int(fields.get("basis_size", "25"))
        basis_order = int(fields.get("basis_order", "4"))
        shape = fields.get("change_shape", "none")
        change = None
        if shape != "none":
            if shape not in _CHANGE_SHAPES:
                raise ValueError(f"unknown change_shape {shape!r}")
            theta = float(fields.get("change_theta", "0.5"))
            amplitude = float(fields.get("change_amplitude", "1.0"))
            change = make_change(shape, theta, amplitude,
                                 grid_points=grid_points,
                                 basis_size=basis_size,
                                 basis_order=basis_order)
        return cls(n=n, kernel=kernel, change=change, burn_in=burn_in,
                   seed=seed, grid_points=grid_points, basis_size=basis_size,
                   basis_order=basis_order)


def _seed_str(seed: int | tuple[int, ...]) -> str:
    if isinstance(seed, int):
        return str(seed)
    return ",".join(str(s) for s in seed)


def _parse_seed(text: str) -> int | tuple[int, ...]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) == 1:
        return int(parts[0])
    return tuple(int(p) for p in parts)


def make_change(shape: str, theta: float, amplitude: float = 1.0,
                grid_points: int = 96, basis_size: int = 25,
                basis_order: int = 4) -> ChangeSpec:
    """Build a ChangeSpec whose delta is amplitude * shape(t) in the working basis."""
    fn = _CHANGE_SHAPES.get(shape)
    if fn is None:
        raise ValueError(f"unknown change shape {shape!r}")
    grid = Grid.uniform(grid_points)
    basis = bspline_basis(basis_size, basis_order)
    delta = fit_curve(amplitude * fn(grid.points), grid, basis)
    return ChangeSpec(theta=theta, delta=delta, shape=shape,
                      amplitude=amplitude)


class Far1Simulator:
    """Reusable generator for one SimSpec.

    Precomputes the discrete AR step operator in coefficient space:
    c_i = A c_{i-1} + P eps_i, where P is the least-squares smoother onto
    the working basis, A = P K W E for the quadrature kernel matrix K W,
    and E the basis design matrix on the simulation grid.
    """

    def __init__(self, spec: SimSpec):
        self.spec = spec
        self.grid = Grid.uniform(spec.grid_points)
        self.basis = bspline_basis(spec.basis_size, spec.basis_order)
        design = self.basis.evaluate(self.grid.points)
        self._smoother = np.linalg.pinv(design)
        k_mat = spec.kernel.values(self.grid.points, self.grid.points)
        quad = k_mat * self.grid.trapezoid_weights[None, :]
        self._step = self._smoother @ quad @ design
        if spec.change is not None:
            delta_vals = spec.change.delta(self.grid.points)
            self._delta_coeffs = self._smoother @ delta_vals
        else:
            self._delta_coeffs = None

    def generate(self, seed: int | tuple[int, ...] | None = None,
                 ) -> FunctionalSample:
        """One sample of spec.n curves; `seed` overrides spec.seed."""
        spec = self.spec
        if seed is None:
            seed = spec.seed
        seq = np.random.SeedSequence(seed)
        rng = np.random.default_rng(seq)
        total = spec.burn_in + spec.n
        shocks = brownian_bridge_values(self.grid, rng, size=total)
        shock_coeffs = shocks @ self._smoother.T
        coeffs = np.empty((total, spec.basis_size))
        state = np.zeros(spec.basis_size)
        step = self._step
        for i in range(total):
            state = step @ state + shock_coeffs[i]
            coeffs[i] = state
        coeffs = coeffs[spec.burn_in:]
        if self._delta_coeffs is not None:
            kstar = math.floor(spec.n * spec.change.theta)
            coeffs[kstar:] += self._delta_coeffs
        return FunctionalSample(coeffs, self.basis)


def far1_generate(spec: SimSpec,
                  seed: int | tuple[int, ...] | None = None) -> FunctionalSample:
    """Generate one functional AR(1) sample (convenience wrapper)."""
    return Far1Simulator(spec).generate(seed)
