"""Gallery of coupled systems: one preset per worked example."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coupled_system import CoupledSystem, assemble_from_specs
from .operators1d import APPROXIMATE, alpha_range, catalog_spec, poincare_constant


class UnknownPresetError(KeyError):
    pass


@dataclass(frozen=True)
class Preset:
    id: str
    description: str
    A1: str
    A2: str
    beta: float = 1.0
    alpha_frac: float = 0.5
    # alpha1 = ratio * alpha, alpha2 = alpha / ratio; ratio 1 is symmetric coupling
    asym_ratio: float = 1.0
    one_way: bool = False
    shift1: float | None = None
    shift2: float | None = None
    # decay exponent predicted for D(A) data: 1/4 under the half-power
    # condition, 1/j under the integer-power condition with index j
    rate: float = 0.25
    condition: str = "half"
    j: int | None = None
    n: int = 64
    T: float = 100.0
    m: int = 1
    seed: int = 0
    diagnostic: bool = False

    @property
    def approximate(self) -> bool:
        return self.A1 in APPROXIMATE or self.A2 in APPROXIMATE

    def specs(self, n: int | None = None):
        n = self.n if n is None else n
        return (
            catalog_spec(self.A1, n, self.shift1),
            catalog_spec(self.A2, n, self.shift2),
        )

    def alpha_max(self, n: int | None = None) -> float:
        return alpha_range(*self.specs(n))[1]

    def reference_bound(self, n: int | None = None) -> dict[str, float]:
        """Instance bounds quoted for the continuous problem, with discrete constants."""
        s1, s2 = self.specs(n)
        c_dir = poincare_constant(catalog_spec("dirichlet_laplacian", s1.n))
        out = {"sqrt_omega1_omega2": self.alpha_max(n), "C_Omega": c_dir}
        if self.id in ("ex51a", "ex51b"):
            lam = s1.shift if self.id == "ex51a" else 1.0
            out["C(C+lambda)^1/2"] = float(np.sqrt(c_dir * (c_dir + lam)))
        if self.id == "ww":
            out["C+kappa"] = c_dir + s1.shift
        if self.id in ("ex54a", "ex54b", "ww2"):
            out["C^3/2"] = c_dir**1.5
        return out

    def build(
        self,
        n: int | None = None,
        alpha_frac: float | None = None,
    ) -> CoupledSystem:
        s1, s2 = self.specs(n)
        frac = self.alpha_frac if alpha_frac is None else alpha_frac
        alpha = frac * alpha_range(s1, s2)[1]
        if self.one_way:
            return assemble_from_specs(s1, s2, self.beta, 0.0, alpha, diagnostic=True)
        a1 = alpha * self.asym_ratio
        a2 = alpha / self.asym_ratio
        return assemble_from_specs(s1, s2, self.beta, a1, a2, diagnostic=self.diagnostic)


PRESETS: dict[str, Preset] = {
    p.id: p
    for p in [
        Preset("is", "two Dirichlet wave equations, frictional damping on u",
               "dirichlet_laplacian", "dirichlet_laplacian"),
        Preset("is1", "Robin u / Dirichlet v wave pair",
               "robin_laplacian", "dirichlet_laplacian"),
        Preset("ex51a", "Neumann wave plus zero-order term / Dirichlet wave",
               "neumann_shift_laplacian", "dirichlet_laplacian"),
        Preset("ex51b", "Dirichlet-Neumann mixed wave / Dirichlet wave",
               "mixed_dirichlet_neumann_laplacian", "dirichlet_laplacian"),
        Preset("ex52", "plate with free-type conditions (approximate) / Dirichlet wave",
               "free_shift_bilaplacian", "dirichlet_laplacian"),
        Preset("ex53", "Robin wave / Dirichlet wave (hybrid conditions)",
               "robin_laplacian", "dirichlet_laplacian"),
        Preset("ex54a", "Robin wave / hinged Petrowsky plate",
               "robin_laplacian", "navier_bilaplacian"),
        Preset("ex54b", "Robin wave / clamped Petrowsky plate",
               "robin_laplacian", "clamped_bilaplacian"),
        Preset("ww", "equal Dirichlet operators with zero-order term kappa = 1",
               "dirichlet_laplacian", "dirichlet_laplacian",
               shift1=1.0, shift2=1.0, rate=0.5, condition="power", j=2),
        Preset("ww2", "hinged plate / Dirichlet wave, A1 = A2^2",
               "navier_bilaplacian", "dirichlet_laplacian",
               rate=0.25, condition="power", j=4),
        Preset("asym", "Robin / Dirichlet pair with unequal couplings",
               "robin_laplacian", "dirichlet_laplacian", asym_ratio=2.0),
        Preset("remark-ii", "one-way coupling: damped u drives v, v does not act on u",
               "dirichlet_laplacian", "dirichlet_laplacian",
               beta=2.0, one_way=True, diagnostic=True),
    ]
}


def get_preset(preset_id: str) -> Preset:
    try:
        return PRESETS[preset_id]
    except KeyError:
        raise UnknownPresetError(
            f"unknown preset {preset_id!r}; choose from {', '.join(PRESETS)}"
        ) from None
