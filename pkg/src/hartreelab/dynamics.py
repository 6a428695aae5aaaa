"""Strang split-step evolution of the Cauchy problem with blow-up detection.

The linear half-step multiplies the spectrum by exp(-i |k|^2 dt/2); the
nonlinear step is the exact pointwise phase rotation
exp(i dt (V_H + |psi|^(p-1))) with V_H recomputed from the current density
(|psi| is invariant under the rotation, so the substep solves the full
nonlinear flow exactly).  Adjacent half-steps between samples are merged.

Blow-up cannot be decided on a grid; the detector pairs a gradient-growth
factor with persistently negative virial curvature, with time-step collapse
as a backstop.  G(t) = int |x|^2 |psi|^2 uses box coordinates (no periodic
wrap of the weight), meaningful while the support margin holds.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import NonfiniteState, SupportViolation
from .functionals import FunctionalReport, assemble_report
from .model import Field, ModelParams
from .spectral import DEFAULT_SUPPORT_TOL, HartreeMode, SpectralEngine, hartree_term


class Outcome(enum.Enum):
    GLOBAL_UNTIL_T = "GLOBAL_UNTIL_T"
    BLOWUP = "BLOWUP"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class EvolveConfig:
    dt: float
    t_end: float
    sample_every: int = 10
    blowup_factor: float = 10.0
    dt_min: float = 1e-8
    hartree_mode: HartreeMode = HartreeMode.TRUNCATED
    grad_growth_limit: float = 1.2  # per-sample-window growth of |grad|^2 that halves dt

    def __post_init__(self):
        if not (self.dt > self.dt_min > 0):
            raise ValueError("need dt > dt_min > 0")
        if not (self.t_end > 0):
            raise ValueError("t_end must be positive")
        if not (self.blowup_factor > 1):
            raise ValueError("blowup_factor must exceed 1")
        if self.sample_every < 1:
            raise ValueError("sample_every must be >= 1")


@dataclass
class TrajectoryRecord:
    rows: list                      # (t, mass, energy, grad_norm_sq, G, G_prime, eightV)
    outcome: Outcome
    t_star: float | None
    mass_drift: float
    energy_drift: float
    reports: list = dc_field(default_factory=list)  # FunctionalReport per row
    nonfinite: bool = False

    @property
    def times(self) -> np.ndarray:
        return np.array([r[0] for r in self.rows])

    def column(self, idx: int) -> np.ndarray:
        return np.array([r[idx] for r in self.rows])

    def outcome_label(self) -> str:
        if self.outcome is Outcome.BLOWUP:
            return f"BLOWUP(t_star={self.t_star!r})"
        return self.outcome.value


def _nonlinear_phase(values: np.ndarray, dt: float, params: ModelParams,
                     engine: SpectralEngine, mode: HartreeMode) -> np.ndarray:
    rho = values.real**2 + values.imag**2
    pot = engine.hartree_values(rho, mode, support_tol=None)
    p = params.p
    phase = pot + rho ** ((p - 1.0) / 2.0)
    return values * np.exp(1j * dt * phase)


def step_strang(field: Field, dt: float, params: ModelParams, engine: SpectralEngine,
                mode: HartreeMode = HartreeMode.TRUNCATED,
                linear_only: bool = False) -> Field:
    """One second-order step; raises NONFINITE_STATE if the result degenerates."""
    engine._check(field)
    half = np.exp(-0.5j * dt * engine.k_sq)
    v = engine.ifftn(half * engine.fftn(field.values))
    if not linear_only:
        v = _nonlinear_phase(v, dt, params, engine, mode)
    v = engine.ifftn(half * engine.fftn(v))
    if not np.all(np.isfinite(v.view(np.float64))):
        raise NonfiniteState("state lost finiteness during the step")
    return Field(field.grid, v)


def virial_monitors(field: Field, params: ModelParams, engine: SpectralEngine,
                    support_tol: float | None = DEFAULT_SUPPORT_TOL,
                    mode: HartreeMode = HartreeMode.TRUNCATED):
    """(G, G', 8V) with G = int |x|^2 |psi|^2 and G' = 4 Im int x . conj(psi) grad psi.

    The |x|^2 weight uses box coordinates, so the field must stay inside the
    support margin; that is the grid stand-in for requiring |x| psi in L^2.
    """
    engine._check(field)
    rho = field.density()
    engine.check_support(rho, support_tol)
    rep = _sample_report(field.values, rho, params, engine, mode)
    G, Gp = _virial_pair(field.values, rho, engine)
    return G, Gp, 8.0 * rep.vfunc


def _virial_pair(values: np.ndarray, rho: np.ndarray, engine: SpectralEngine):
    h3 = engine.grid.cell_volume
    G = float(np.sum(engine.r_sq * rho)) * h3
    grads = engine.gradient_values(values)
    x = engine.x1
    acc = (x[:, None, None] * grads[0] + x[None, :, None] * grads[1]
           + x[None, None, :] * grads[2])
    Gp = 4.0 * float(np.sum((np.conj(values) * acc).imag)) * h3
    return G, Gp


def _sample_report(values: np.ndarray, rho: np.ndarray, params: ModelParams,
                   engine: SpectralEngine, mode: HartreeMode) -> FunctionalReport:
    h3 = engine.grid.cell_volume
    mass = float(np.sum(rho)) * h3
    kinetic = engine.grad_norm_sq(values)
    lp = float(np.sum(rho ** ((params.p + 1.0) / 2.0))) * h3
    pot = engine.hartree_values(rho, mode, support_tol=None)
    return assemble_report(params, mass, kinetic, lp,
                           hartree_term(engine, rho, pot))


def evolve(initial: Field, params: ModelParams, config: EvolveConfig,
           engine: SpectralEngine, sample_callback=None) -> TrajectoryRecord:
    """Run to t_end or until blow-up is declared.

    Every ``sample_every`` steps the monitors are recorded.  If |grad psi|^2
    grew by more than the configured factor since the previous sample, dt is
    halved.  BLOWUP(t*) is declared once |grad psi| >= F |grad psi(0)| with
    8V < 0 at the three most recent samples, or once dt collapses below
    dt_min; reaching t_end with dt still reduced gives INCONCLUSIVE.

    ``sample_callback(t, values)``, when given, runs at every sample on the
    current state (read-only).
    """
    engine._check(initial)
    if not np.all(np.isfinite(initial.values.view(np.float64))):
        raise NonfiniteState("initial data must be finite")
    mode = config.hartree_mode
    v = initial.values.copy()
    t = 0.0
    dt = config.dt
    rows, reports = [], []
    vneg_streak = 0
    nonfinite = False
    outcome, t_star = None, None

    def record(t_now, vals):
        rho = vals.real**2 + vals.imag**2
        rep = _sample_report(vals, rho, params, engine, mode)
        G, Gp = _virial_pair(vals, rho, engine)
        rows.append((t_now, rep.mass, rep.energy, rep.kinetic, G, Gp, 8.0 * rep.vfunc))
        reports.append(rep)
        if sample_callback is not None:
            sample_callback(t_now, vals)
        return rep

    rep0 = record(0.0, v)
    grad0 = rep0.kinetic
    grad_prev = rep0.kinetic

    phase_cache = {}

    def propagators(step_dt):
        if step_dt not in phase_cache:
            phase_cache[step_dt] = (np.exp(-0.5j * step_dt * engine.k_sq),
                                    np.exp(-1.0j * step_dt * engine.k_sq))
            if len(phase_cache) > 8:
                phase_cache.pop(next(iter(phase_cache)))
        return phase_cache[step_dt]

    while t < config.t_end - 1e-12 * config.t_end:
        steps = min(config.sample_every, max(1, int(np.ceil((config.t_end - t) / dt - 1e-9))))
        window_dt = min(dt, (config.t_end - t) / steps)
        half, full = propagators(window_dt)
        # merged window: A(dt/2) [B A(dt)]^(steps-1) B A(dt/2)
        vh = engine.fftn(v) * half
        v = engine.ifftn(vh)
        ok = True
        for j in range(steps):
            v = _nonlinear_phase(v, window_dt, params, engine, mode)
            vh = engine.fftn(v) * (half if j == steps - 1 else full)
            v = engine.ifftn(vh)
            if not np.all(np.isfinite(v.view(np.float64))):
                ok = False
                break
        if not ok:
            nonfinite = True
            outcome, t_star = Outcome.BLOWUP, t
            break
        t += steps * window_dt
        rep = record(t, v)
        vneg_streak = vneg_streak + 1 if rep.vfunc < 0 else 0
        if (np.sqrt(rep.kinetic / grad0) >= config.blowup_factor and vneg_streak >= 3):
            outcome, t_star = Outcome.BLOWUP, t
            break
        if rep.kinetic > config.grad_growth_limit * grad_prev:
            dt *= 0.5
            if dt < config.dt_min:
                outcome, t_star = Outcome.BLOWUP, t
                break
        grad_prev = rep.kinetic

    if outcome is None:
        outcome = Outcome.GLOBAL_UNTIL_T if dt == config.dt else Outcome.INCONCLUSIVE

    masses = np.array([r[1] for r in rows])
    energies = np.array([r[2] for r in rows])
    mass_drift = float(np.max(np.abs(masses - masses[0])) / abs(masses[0])) \
        if masses[0] != 0 else 0.0
    energy_drift = float(np.max(np.abs(energies - energies[0])) / abs(energies[0])) \
        if energies[0] != 0 else 0.0
    return TrajectoryRecord(rows=rows, outcome=outcome, t_star=t_star,
                            mass_drift=mass_drift, energy_drift=energy_drift,
                            reports=reports, nonfinite=nonfinite)


def trajectory_csv_lines(record: TrajectoryRecord) -> list[str]:
    lines = ["t,mass,energy,grad_norm_sq,G,G_prime,eightV"]
    for r in record.rows:
        lines.append(",".join(repr(float(x)) for x in r))
    lines.append(f"# outcome={record.outcome_label()}")
    return lines


def second_divided_difference(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Three-point second divided difference at interior samples (nonuniform t)."""
    t, y = np.asarray(times), np.asarray(values)
    dtf = t[2:] - t[1:-1]
    dtb = t[1:-1] - t[:-2]
    return 2.0 * ((y[2:] - y[1:-1]) / dtf - (y[1:-1] - y[:-2]) / dtb) / (dtf + dtb)
