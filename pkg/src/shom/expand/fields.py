"""Two-scale error fields w_eps, tau_eps and the homogenization error norms.

With (V, T) either the Dirichlet correctors (Phi, Lambda) or the periodic
pair (P + eps chi(x/eps), pi(x/eps)):

    w   = u_eps - u_0 - (V_j^beta - P_j^beta) d_j u_0^beta
    tau = p_eps - p_0 - T_j^beta d_j u_0^beta - eps q_ij^beta(x/eps) d_i d_j u_0^beta

Everything is evaluated at cell centers; second derivatives of u_0 come from
second-order differences of its cell-center gradient.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Literal

import numpy as np

from shom.coeff.fields import CoefficientField
from shom.errors import GridMismatchError, PreconditionError
from shom.expand.dirichlet import DirichletCorrectorSet
from shom.stokes.grid import BoxDomain, staggered_grid
from shom.stokes.problem import StokesSolution
from shom.torus.models import CorrectorSet

Instantiation = Literal["dirichlet", "periodic"]


def _l2(values: np.ndarray, volume: float) -> float:
    return float(np.sqrt(volume * np.sum(values**2)))


def _cell_gradient(values: np.ndarray, h: float, d: int) -> np.ndarray:
    """Derivative axis inserted before the d trailing cell axes."""

    lead = values.ndim - d
    parts = np.gradient(values, h, axis=tuple(range(lead, values.ndim)), edge_order=2)
    return np.stack(parts, axis=lead)


@dataclass(frozen=True, eq=False)
class ExpansionFields:
    """w_eps and tau_eps at cell centers with the pieces they were built from.

    Layouts (cell axes trail): ``w`` [gamma], ``w_gradient`` [gamma, i],
    ``deviation`` [j, beta, gamma] (V - P), ``deviation_gradient`` [j, beta, gamma, k],
    ``pressure_term`` [j, beta] (T), ``gradient`` [beta, j] and ``hessian`` [beta, j, i] of u_0.
    """

    domain: BoxDomain
    eps: float
    instantiation: Instantiation
    w: np.ndarray
    tau: np.ndarray
    w_gradient: np.ndarray
    deviation: np.ndarray
    deviation_gradient: np.ndarray
    pressure_term: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray
    cell: CorrectorSet

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    def _mask(self, min_distance: float) -> np.ndarray:
        centers = self.domain.center_points()
        return self.domain.distance_to_boundary(centers) >= min_distance

    def norms(self, min_distance: float = 0.0) -> dict[str, float]:
        """L2, Linf and H1 norms of w and the L2 norm of tau over cells at distance >= ``min_distance``."""

        mask = self._mask(min_distance)
        volume = self.domain.spacing**self.dimension
        w = self.w[:, mask]
        w_gradient = self.w_gradient[:, :, mask]
        tau = self.tau[mask]
        l2_w = _l2(w, volume)
        h1_semi = _l2(w_gradient, volume)
        return {
            "w_l2": l2_w,
            "w_linf": float(np.max(np.abs(w))) if w.size else 0.0,
            "w_h1": float(np.hypot(l2_w, h1_semi)),
            "tau_l2": _l2(tau - tau.mean() if tau.size else tau, volume),
        }

    def rhs_fields(self, coefficient: CoefficientField) -> dict[str, np.ndarray]:
        """F_eps [alpha], h_eps [alpha, i] and g_eps of the system satisfied by (w, tau)."""

        if self.cell.phi is None or self.cell.q is None:
            raise PreconditionError("dual correctors are required for the right-hand side fields")
        d = self.dimension
        eps = self.eps
        axes = [axis / eps for axis in self.domain.center_axes()]
        centers = self.domain.center_points()
        tensor = np.moveaxis(coefficient.evaluate(centers / eps), tuple(range(-4, 0)), tuple(range(4)))
        chi_gradient = self.cell.chi_gradient_on_axes(axes)
        pi = self.cell.on_axes("pi", axes)
        phi = self.cell.on_axes("phi", axes)
        q = self.cell.on_axes("q", axes)
        boundary_layer = self.deviation_gradient - chi_gradient
        hessian = self.hessian
        force = np.einsum("ikag...,jbgk...,bji...->a...", tensor, boundary_layer, hessian)
        force += np.einsum("jb...,bja...->a...", pi - self.pressure_term, hessian)
        flux = -eps * np.einsum("kijab...,bjk...->ai...", phi, hessian)
        flux += np.einsum("ikag...,jbg...,bjk...->ai...", tensor, self.deviation, hessian)
        flux -= eps * np.einsum("ijb...,bja...->ai...", q, hessian)
        divergence = -np.einsum("jba...,bja...->...", self.deviation, hessian)
        return {"force": force, "flux": flux, "divergence": divergence}

    def describe(self) -> dict[str, Any]:
        summary: dict[str, Any] = {"eps": self.eps, "instantiation": self.instantiation}
        summary.update(self.norms())
        summary["interpolation"] = "trigonometric"
        return summary


def _check_domains(*domains: BoxDomain) -> None:
    first = domains[0]
    for other in domains[1:]:
        if other != first:
            raise GridMismatchError(f"fields live on different grids: {first.describe()} vs {other.describe()}")


def build_expansion(
    u_eps: StokesSolution,
    u_0: StokesSolution,
    correctors: DirichletCorrectorSet | CorrectorSet,
    instantiation: Instantiation = "dirichlet",
    *,
    eps: float | None = None,
) -> ExpansionFields:
    """Assemble w_eps and tau_eps for the chosen (V, T) instantiation.

    ``correctors`` is a :class:`DirichletCorrectorSet` for the Dirichlet
    instantiation; the periodic one accepts either that or a bare
    :class:`CorrectorSet` together with ``eps``.

    Raises:
        GridMismatchError: the solutions or correctors live on different boxes.
    """

    _check_domains(u_eps.domain, u_0.domain)
    domain = u_eps.domain
    d = domain.dimension
    h = domain.spacing
    grid = staggered_grid(domain)

    if isinstance(correctors, DirichletCorrectorSet):
        _check_domains(domain, correctors.domain)
        cell = correctors.cell
        scale = correctors.eps if eps is None else eps
    else:
        if instantiation == "dirichlet":
            raise PreconditionError("the Dirichlet instantiation needs a DirichletCorrectorSet")
        if eps is None:
            raise PreconditionError("eps is required with bare cell correctors")
        cell, scale = correctors, eps
    if cell.q is None:
        raise PreconditionError("cell correctors must carry dual correctors (q)")
    if cell.dimension != d:
        raise GridMismatchError("cell correctors and box have different dimensions")

    axes = [axis / scale for axis in domain.center_axes()]
    if instantiation == "dirichlet":
        deviation = correctors.deviation_at_centers()
        identity = np.einsum("ji,bg->jbgi", np.eye(d), np.eye(d)).reshape((d,) * 4 + (1,) * d)
        deviation_gradient = correctors.gradient_at_centers() - identity
        pressure_term = correctors.pressure
    elif instantiation == "periodic":
        deviation = scale * cell.on_axes("chi", axes)
        deviation_gradient = cell.chi_gradient_on_axes(axes)
        pressure_term = cell.on_axes("pi", axes)
    else:
        raise ValueError(f"unknown instantiation '{instantiation}'")

    gradient = grid.gradient_at_centers(u_0.velocity)
    hessian = _cell_gradient(gradient, h, d)
    q = cell.on_axes("q", axes)

    difference = grid.velocity_at_centers(u_eps.velocity - u_0.velocity)
    w = difference - np.einsum("jbg...,bj...->g...", deviation, gradient)
    tau = (u_eps.pressure - u_0.pressure) - np.einsum("jb...,bj...->...", pressure_term, gradient)
    tau = tau - scale * np.einsum("ijb...,bji...->...", q, hessian)
    tau = tau - tau.mean()
    return ExpansionFields(
        domain=domain,
        eps=float(scale),
        instantiation=instantiation,
        w=w,
        tau=tau,
        w_gradient=_cell_gradient(w, h, d),
        deviation=deviation,
        deviation_gradient=deviation_gradient,
        pressure_term=pressure_term,
        gradient=gradient,
        hessian=hessian,
        cell=cell,
    )


def _difference(u_eps: StokesSolution, u_0: StokesSolution) -> StokesSolution:
    _check_domains(u_eps.domain, u_0.domain)
    return StokesSolution(
        domain=u_eps.domain,
        velocity=u_eps.velocity - u_0.velocity,
        pressure=u_eps.pressure - u_0.pressure,
        residual=0.0,
        divergence_residual=0.0,
    )


def linf_rate(u_eps: StokesSolution, u_0: StokesSolution) -> float:
    """||u_eps - u_0||_inf over every velocity node, the quantity fitted for the uniform rate."""

    return _difference(u_eps, u_0).velocity_max()


def solution_errors(u_eps: StokesSolution, u_0: StokesSolution) -> dict[str, float]:
    """Homogenization errors reported per eps: L2 and H1 of the velocity, L2 of the pressure, sup of the velocity."""

    diff = _difference(u_eps, u_0)
    return {
        "l2_err": diff.velocity_l2(),
        "h1_err": diff.h1_norm(),
        "pressure_err": diff.pressure_l2(),
        "linf_err": diff.velocity_max(),
    }


__all__ = ["ExpansionFields", "Instantiation", "build_expansion", "linf_rate", "solution_errors"]
