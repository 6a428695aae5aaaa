"""Conserved and variational functionals, scalings, projections, classification.

All integrals are h^3 Riemann sums on the periodic grid; the kinetic term goes
through Parseval.  With g = int |grad u|^2, m = int |u|^2, P = int |u|^(p+1),
H = int (|x|^-2 * |u|^2) |u|^2 the quantities are

    K = g + omega m
    E = g/2 - H/4 - P/(p+1)
    L = K/2 - P/(p+1) - H/4
    N = K - P - H
    V = g - (D(p-1)/(2(p+1))) P - H/2

The Hartree term uses the TRUNCATED convolution mode by default (free-space
setting); a flag selects PERIODIC for oracle tests.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DegenerateField,
    NonpositiveLambda,
    QOutOfRange,
    SupportViolation,
    ZeroField,
)
from .model import Field, ModelParams
from .spectral import DEFAULT_SUPPORT_TOL, HartreeMode, SpectralEngine, hartree_term


class Region(enum.Enum):
    K = "K"
    K_PLUS = "K_PLUS"
    R_PLUS = "R_PLUS"
    BOUNDARY = "BOUNDARY"
    OUTSIDE_SUBLEVEL = "OUTSIDE_SUBLEVEL"
    UNCLASSIFIED = "UNCLASSIFIED"


class ScalingKind(enum.Enum):
    AMPLITUDE = "amplitude"            # lam * psi
    MASS_DILATION = "mass_dilation"    # lam^(D/2)   u(lam x)
    LP_DILATION = "lp_dilation"        # lam^(D/(p+1)) u(lam x)
    H1_DILATION = "h1_dilation"        # lam^(2/(p-1)) u(lam x)


@dataclass(frozen=True)
class FunctionalReport:
    mass: float
    kinetic: float      # int |grad psi|^2
    lp: float           # int |psi|^(p+1)
    hartree: float      # int (|x|^-2 * |psi|^2) |psi|^2
    energy: float
    bigK: float
    lagrange: float
    nehari: float
    vfunc: float
    region: Region = Region.UNCLASSIFIED

    def with_region(self, region: Region) -> "FunctionalReport":
        return replace(self, region=region)


@dataclass(frozen=True)
class GNConstants:
    """Sharp interpolation constants derived from the two extremizers."""

    q: float
    c_power: float        # (q+1) / ||R||_2^(2q)
    c_hartree: float      # 2 / ||grad W||_2^2
    r_norm_sq: float      # ||R||_2^2
    w_grad_norm_sq: float  # ||grad W||_2^2

    def __post_init__(self):
        for name in ("q", "c_power", "c_hartree", "r_norm_sq", "w_grad_norm_sq"):
            if not (getattr(self, name) > 0):
                raise ValueError(f"GNConstants.{name} must be strictly positive")


def vfunc_coefficient(params: ModelParams) -> float:
    return params.D * (params.p - 1.0) / (2.0 * (params.p + 1.0))


def assemble_report(params: ModelParams, mass: float, kinetic: float,
                    lp: float, hartree: float) -> FunctionalReport:
    p, w = params.p, params.omega
    bigK = kinetic + w * mass
    return FunctionalReport(
        mass=mass,
        kinetic=kinetic,
        lp=lp,
        hartree=hartree,
        energy=kinetic / 2.0 - hartree / 4.0 - lp / (p + 1.0),
        bigK=bigK,
        lagrange=bigK / 2.0 - lp / (p + 1.0) - hartree / 4.0,
        nehari=bigK - lp - hartree,
        vfunc=kinetic - vfunc_coefficient(params) * lp - hartree / 2.0,
    )


def report(field: Field, params: ModelParams, engine: SpectralEngine,
           mode: HartreeMode = HartreeMode.TRUNCATED,
           support_tol: float | None = DEFAULT_SUPPORT_TOL) -> FunctionalReport:
    """Evaluate every functional of one field.  Region is left UNCLASSIFIED."""
    engine._check(field)
    rho = field.density()
    h3 = engine.grid.cell_volume
    mass = float(np.sum(rho)) * h3
    if mass == 0.0:
        return assemble_report(params, 0.0, 0.0, 0.0, 0.0)
    kinetic = engine.grad_norm_sq(field.values)
    lp = float(np.sum(rho ** ((params.p + 1.0) / 2.0))) * h3
    pot = engine.hartree_values(rho, mode, support_tol)
    hartree = hartree_term(engine, rho, pot)
    return assemble_report(params, mass, kinetic, lp, hartree)


def aux_L1(field: Field, params: ModelParams, engine: SpectralEngine,
           rep: FunctionalReport | None = None) -> float:
    """L1 = K/4 + (1/4 - 1/(p+1)) * int |u|^(p+1); L = N/4 + L1 identically."""
    r = rep if rep is not None else report(field, params, engine)
    return r.bigK / 4.0 + (0.25 - 1.0 / (params.p + 1.0)) * r.lp


def aux_L2(field: Field, params: ModelParams, engine: SpectralEngine,
           rep: FunctionalReport | None = None) -> float:
    """L2 = (1/2 - 1/(p+1)) K + (1/(p+1) - 1/4) H; L = N/(p+1) + L2 identically."""
    r = rep if rep is not None else report(field, params, engine)
    p = params.p
    return (0.5 - 1.0 / (p + 1.0)) * r.bigK + (1.0 / (p + 1.0) - 0.25) * r.hartree


# -- scalings ----------------------------------------------------------------------

def dilation_exponent(kind: ScalingKind, params: ModelParams) -> float:
    """Amplitude power alpha for the dilation lam^alpha u(lam x)."""
    D, p = params.D, params.p
    if kind is ScalingKind.MASS_DILATION:
        return D / 2.0
    if kind is ScalingKind.LP_DILATION:
        return D / (p + 1.0)
    if kind is ScalingKind.H1_DILATION:
        if not (p > 1.0):
            raise ValueError("H1 dilation requires p > 1")
        return 2.0 / (p - 1.0)
    raise ValueError(f"{kind} is not a dilation")


def scaling_exponents(kind: ScalingKind, params: ModelParams):
    """Powers (e_g, e_m, e_lp, e_h) so that under the scaling the pieces map to
    lam^e_g g, lam^e_m m, lam^e_lp P, lam^e_h H."""
    D, p = params.D, params.p
    if kind is ScalingKind.AMPLITUDE:
        return (2.0, 2.0, p + 1.0, 4.0)
    a = dilation_exponent(kind, params)
    return (2.0 * a + 2.0 - D, 2.0 * a - D, (p + 1.0) * a - D, 4.0 * a + 2.0 - 2.0 * D)


def _dilation_basis(grid, lam: float) -> np.ndarray:
    """Per-axis trigonometric evaluation matrix B[j, m] (divided by n) so that
    contracting B against the DFT along each axis samples the band-limited
    interpolant at the points lam * x_j.  The asymmetric Nyquist mode is
    evaluated as a cosine to keep real fields real off-grid."""
    n, L = grid.n, grid.half_length
    m = np.fft.fftfreq(n, d=1.0 / n)  # integer mode numbers, fft order
    x = grid.axis()
    phase = np.pi * (lam * x[:, None] + L) * m[None, :] / L
    B = np.exp(1j * phase)
    nyq = m == -(n // 2)
    B[:, nyq] = np.cos(np.pi * (n // 2) * (lam * x[:, None] + L) / L)
    return B / n


def apply_scaling(field: Field, kind: ScalingKind, lam: float, params: ModelParams,
                  engine: SpectralEngine | None = None,
                  support_tol: float | None = DEFAULT_SUPPORT_TOL) -> Field:
    """lam * psi for AMPLITUDE; lam^alpha psi(lam x) for the dilation kinds,
    resampled by trigonometric interpolation."""
    if not (lam > 0):
        raise NonpositiveLambda(f"lambda = {lam}")
    if kind is ScalingKind.AMPLITUDE:
        return Field(field.grid, lam * field.values)
    alpha = dilation_exponent(kind, params)
    if lam == 1.0:
        return field
    grid = field.grid
    B = _dilation_basis(grid, lam)
    T = np.tensordot(B, np.fft.fftn(field.values), axes=(1, 0))  # (a, j, k)
    T = np.tensordot(B, T, axes=(1, 1))                          # (b, a, k)
    T = np.tensordot(B, T, axes=(1, 2))                          # (c, b, a)
    out = (lam**alpha) * T.transpose(2, 1, 0)
    if np.max(np.abs(out.imag)) <= 1e-13 * max(np.max(np.abs(out.real)), 1e-300):
        out = out.real.astype(np.complex128)  # drop interpolation roundoff
    result = Field(grid, out)
    if support_tol is not None:
        if engine is not None:
            engine.check_support(result.density(), support_tol)
        else:
            ax = grid.axis()
            r_sq = (ax[:, None, None] ** 2 + ax[None, :, None] ** 2
                    + ax[None, None, :] ** 2)
            rho = result.density()
            total = float(np.sum(rho))
            frac = float(np.sum(rho[r_sq > (grid.half_length / 2.0) ** 2])) / total \
                if total > 0 else 0.0
            if frac > support_tol:
                raise SupportViolation(
                    f"dilated field tail fraction {frac:.3e} exceeds {support_tol:.1e}")
    return result


def scaled_functionals(field: Field, kind: ScalingKind, lam: float,
                       params: ModelParams, engine: SpectralEngine,
                       rep: FunctionalReport | None = None):
    """(L, N, V) of the scaled field from the closed-form lambda expansions."""
    r = rep if rep is not None else report(field, params, engine)
    return scaled_functionals_from_report(r, kind, lam, params)


def scaled_functionals_from_report(rep: FunctionalReport, kind: ScalingKind,
                                   lam: float, params: ModelParams):
    if not (lam > 0):
        raise NonpositiveLambda(f"lambda = {lam}")
    eg, em, elp, eh = scaling_exponents(kind, params)
    p, w = params.p, params.omega
    g = lam**eg * rep.kinetic
    m = lam**em * rep.mass
    P = lam**elp * rep.lp
    H = lam**eh * rep.hartree
    K = g + w * m
    L = K / 2.0 - P / (p + 1.0) - H / 4.0
    N = K - P - H
    V = g - vfunc_coefficient(params) * P - H / 2.0
    return (L, N, V)


# -- projections --------------------------------------------------------------------

def _nehari_root(bigK: float, lp: float, hartree: float, p: float) -> float:
    """Unique lam > 0 with K = lam^(p-1) P + lam^2 H (monotone right side)."""
    if not (bigK > 0):
        raise DegenerateField(f"bigK = {bigK} must be positive")
    if not (lp + hartree > 0):
        raise DegenerateField("lp + hartree must be positive")

    def f(lam):
        return bigK - lam ** (p - 1.0) * lp - lam**2 * hartree

    lo, hi = 1e-6, 1.0
    while f(hi) > 0:
        hi *= 2.0
        if hi > 1e12:
            raise DegenerateField("no sign change located for the root")
    while f(lo) < 0:
        lo *= 0.5
        if lo < 1e-300:
            raise DegenerateField("no sign change located for the root")
    while hi - lo > 1e-10 * hi:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    for _ in range(3):  # Newton polish
        df = -(p - 1.0) * lam ** (p - 2.0) * lp - 2.0 * lam * hartree
        lam -= f(lam) / df
    return float(lam)


def nehari_lambda(field: Field, params: ModelParams, engine: SpectralEngine,
                  rep: FunctionalReport | None = None,
                  support_tol: float | None = DEFAULT_SUPPORT_TOL) -> float:
    """Amplitude lam* > 0 with N[lam* psi] = 0, |N| <= 1e-12 K after polish."""
    r = rep if rep is not None else report(field, params, engine, support_tol=support_tol)
    return _nehari_root(r.bigK, r.lp, r.hartree, params.p)


def _v_zero_root(kinetic: float, lp: float, hartree: float, vfunc: float,
                 params: ModelParams, tol: float = 1e-9) -> float | None:
    s = params.D * (params.p - 1.0) / 2.0
    if abs(s - 2.0) < 1e-12:
        # V scales as lam^2 under the mass dilation: the sign cannot change
        scale = max(kinetic, hartree, 1e-300)
        return 1.0 if abs(vfunc) <= tol * scale else None
    a = kinetic - hartree / 2.0
    if not (a > 0) or lp <= 0:
        return None
    c = vfunc_coefficient(params) * lp
    return float((a / c) ** (1.0 / (s - 2.0)))


def v_zero_lambda(field: Field, params: ModelParams, engine: SpectralEngine,
                  rep: FunctionalReport | None = None,
                  support_tol: float | None = DEFAULT_SUPPORT_TOL) -> float | None:
    """lam* with V[mass-dilated field] = 0, or None when no positive root exists."""
    r = rep if rep is not None else report(field, params, engine, support_tol=support_tol)
    return _v_zero_root(r.kinetic, r.lp, r.hartree, r.vfunc, params)


# -- classification --------------------------------------------------------------------

def classify(rep: FunctionalReport, d_N: float, tol: float = 1e-9) -> Region:
    """Sign-pattern region of (N, V) inside the sub-level set L < d_N.

    Signs are tested against +-tol*K so near-manifold data reports BOUNDARY
    instead of being forced into an open region.
    """
    if not (d_N > 0):
        raise ValueError(f"d_N = {d_N} must be positive")
    if rep.lagrange >= d_N - tol:
        return Region.OUTSIDE_SUBLEVEL
    scale = tol * abs(rep.bigK)
    if abs(rep.nehari) <= scale or (rep.nehari < 0 and abs(rep.vfunc) <= scale):
        return Region.BOUNDARY
    if rep.nehari < 0:
        return Region.K if rep.vfunc < 0 else Region.K_PLUS
    return Region.R_PLUS


# -- sharp interpolation ratios ----------------------------------------------------------

def gn_ratio_power(field: Field, q: float, constants: GNConstants,
                   engine: SpectralEngine) -> float:
    """||psi||_{2q+2}^{2q+2} / (C_opt ||grad psi||_2^{qD} ||psi||_2^{2+q(2-D)}),
    with D = 3 on the grid; <= 1 for every field, = 1 at the extremizer."""
    D = 3
    if not (0.0 < q < 2.0 / (D - 2)):
        raise QOutOfRange(f"q = {q} outside (0, {2.0 / (D - 2)})")
    engine._check(field)
    rho = field.density()
    h3 = engine.grid.cell_volume
    mass = float(np.sum(rho)) * h3
    if mass == 0.0:
        raise ZeroField("ratio undefined for the zero field")
    grad = engine.grad_norm_sq(field.values)
    s = float(np.sum(rho ** (q + 1.0))) * h3
    denom = constants.c_power * grad ** (q * D / 2.0) * mass ** ((2.0 + q * (2.0 - D)) / 2.0)
    return s / denom


def gn_ratio_hartree(field: Field, constants: GNConstants, engine: SpectralEngine,
                     mode: HartreeMode = HartreeMode.TRUNCATED,
                     support_tol: float | None = DEFAULT_SUPPORT_TOL) -> float:
    """hartree / (C_opt mass ||grad psi||_2^2); <= 1, = 1 at the extremizer."""
    engine._check(field)
    rho = field.density()
    h3 = engine.grid.cell_volume
    mass = float(np.sum(rho)) * h3
    if mass == 0.0:
        raise ZeroField("ratio undefined for the zero field")
    grad = engine.grad_norm_sq(field.values)
    pot = engine.hartree_values(rho, mode, support_tol)
    H = hartree_term(engine, rho, pot)
    return H / (constants.c_hartree * mass * grad)


# -- identities ------------------------------------------------------------------------------

def pohozaev_residual(field: Field, params: ModelParams, engine: SpectralEngine,
                      rep: FunctionalReport | None = None,
                      support_tol: float | None = DEFAULT_SUPPORT_TOL) -> float:
    """N - (2/D) V; vanishes on solutions of the standing-wave equation."""
    r = rep if rep is not None else report(field, params, engine, support_tol=support_tol)
    return r.nehari - (2.0 / params.D) * r.vfunc


def lambda_derivative_check(field: Field, kind: ScalingKind, lam: float,
                            params: ModelParams, engine: SpectralEngine,
                            rep: FunctionalReport | None = None):
    """Centered finite difference of L along the scaling versus the closed form:
    dL/dlam = N[lam psi]/lam (AMPLITUDE) or V[u_lam]/lam (MASS_DILATION).
    Returns (lhs, rhs)."""
    if kind not in (ScalingKind.AMPLITUDE, ScalingKind.MASS_DILATION):
        raise ValueError("derivative identity applies to AMPLITUDE and MASS_DILATION")
    if not (lam > 0):
        raise NonpositiveLambda(f"lambda = {lam}")
    r = rep if rep is not None else report(field, params, engine)
    eps = 1e-5 * lam

    def L(x):
        return scaled_functionals_from_report(r, kind, x, params)[0]

    lhs = (L(lam + eps) - L(lam - eps)) / (2.0 * eps)
    _, N, V = scaled_functionals_from_report(r, kind, lam, params)
    rhs = (N if kind is ScalingKind.AMPLITUDE else V) / lam
    return (lhs, rhs)


def h1_norm_sq(field: Field, engine: SpectralEngine) -> float:
    """||psi||_{H^1}^2 = mass + grad_norm_sq."""
    return engine.mass(field.values) + engine.grad_norm_sq(field.values)


def virial_lhs(rep: FunctionalReport, params: ModelParams) -> float:
    """16 E + ((16 - 4D(p-1))/(p+1)) P; identically equal to 8 V."""
    D, p = params.D, params.p
    return 16.0 * rep.energy + (16.0 - 4.0 * D * (p - 1.0)) / (p + 1.0) * rep.lp
