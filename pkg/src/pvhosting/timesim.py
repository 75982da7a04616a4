"""
Time-domain simulation of the grouped plant.

Two modes are provided.

``pade_linear``
    The continuous closed loop, with the delay replaced by its Padé model,
    realised as ``x' = A x + B u``.  Its eigenvalues are the closed-loop
    poles, so it doubles as an independent check of the characteristic
    polynomial.

``sampled_data``
    The plant integrated continuously while the controller runs once per
    sampling period.  The command computed at sample ``k`` is applied
    ``Td - Ts/2`` later and held for one period (computation delay plus ZOH).

Only one representative inverter per group is simulated; identical units
carry identical currents, so the group count only enters the PCC node
equation.  The PCC is an all-inductor node and is eliminated algebraically::

    v_pcc = (u_g + Rg * sum N_k i2_k + Lg * sum N_k uC_k / Lb_k)
            / (1 + Lg * sum N_k / Lb_k),        Lb_k = L2_k + LT_k
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from .errors import InputError
from .system import SystemModel, grid_impedance, state_dimension

__all__ = [
    "SimConfig",
    "StateSpace",
    "Waveform",
    "build_statespace",
    "run_linear",
    "run_sampled",
    "detect_stability",
    "discretize_resonant",
    "remove_periodic",
]

# |h * lambda_max| kept below this for explicit RK4 (stability limit ~2.78).
_RK4_REACH = 1.5
_BLOWUP = 1e100
# Periodic-removed remainder below this fraction of the signal counts as settled.
_SETTLED = 1e-9


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    ``divergence_window`` and ``divergence_factor`` drive
    :func:`detect_stability`.  The factor applies to the transient remainder
    after the 50 Hz forced response is removed; 1.005 over 0.2 s flags
    growth rates above about 0.025 1/s.  ``reference_amplitude`` is the peak of the
    sinusoidal current reference of every inverter (A).
    """

    mode: Literal["pade_linear", "sampled_data"] = "pade_linear"
    duration: float = 0.5
    substeps_per_Ts: int = 4
    reference_amplitude: float = 1.0
    grid_rms: float = 156.0
    divergence_window: float = 0.2
    divergence_factor: float = 1.005

    def __post_init__(self):
        if self.mode not in ("pade_linear", "sampled_data"):
            raise InputError(f"unknown simulation mode {self.mode!r}")
        if not self.duration > 0:
            raise InputError("duration must be positive")
        if int(self.substeps_per_Ts) != self.substeps_per_Ts or self.substeps_per_Ts < 4:
            raise InputError("substeps_per_Ts must be an integer >= 4")
        if not self.divergence_factor > 1:
            raise InputError("divergence_factor must exceed 1")
        if not self.divergence_window > 0:
            raise InputError("divergence_window must be positive")


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Group-reduced realization ``x' = A x + B u``, ``y = C x + D u``.

    Inputs are one current reference per group followed by the grid
    voltage.  Outputs are ``i2`` of each group followed by ``v_pcc``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    labels: tuple
    counts: tuple
    offsets: tuple
    Ts: float
    omega0: float

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    def eigenvalues(self) -> np.ndarray:
        ev = np.linalg.eigvals(self.A)
        return ev[np.lexsort((ev.imag, ev.real))]


@dataclass(frozen=True, eq=False)
class Waveform:
    """Sampled traces of a simulation run.

    ``currents`` maps group labels to the grid-side current of that group's
    representative inverter.  When the run blew up, ``diverged_at`` holds the
    time and the traces stop there.
    """

    times: np.ndarray
    currents: dict
    pcc_voltage: np.ndarray
    diverged_at: Optional[float] = None
    meta: dict = field(default_factory=dict)


def _pcc_row(m: SystemModel, offsets, n: int):
    """Row vector and grid-voltage coefficient giving ``v_pcc`` from the state."""
    z = grid_impedance(m.grid)
    lbs = [g.params.L2 + g.LT for g in m.groups]
    if not all(lb > 0 for lb in lbs):
        raise InputError("every branch inductance L2 + LT must be positive")
    denom = 1.0 + z.Lg * sum(g.count / lb for g, lb in zip(m.groups, lbs))
    row = np.zeros(n)
    for g, lb, o in zip(m.groups, lbs, offsets):
        row[o + 1] += z.Lg * g.count / lb / denom
        row[o + 2] += z.Rg * g.count / denom
    return row, 1.0 / denom, lbs


def build_statespace(m: SystemModel) -> StateSpace:
    """Continuous realization with the Padé delay, one block per group.

    Per group the states are ``i1, uC, i2`` (filter), two resonant-controller
    states and, for nonzero delay, two Padé states.
    """
    dims = [state_dimension(g.params) for g in m.groups]
    offsets = tuple(int(x) for x in np.cumsum([0] + dims[:-1]))
    n = sum(dims)
    ng = len(m.groups)
    A = np.zeros((n, n))
    B = np.zeros((n, ng + 1))
    vrow, vu, lbs = _pcc_row(m, offsets, n)

    for k, (g, o) in enumerate(zip(m.groups, offsets)):
        p = g.params
        i1, uc, i2, r1, r2 = o, o + 1, o + 2, o + 3, o + 4
        # error e = ref - i2; resonant part 2 kr wi s / (s^2 + 2 wi s + w0^2)
        e = np.zeros(n)
        e[i2] = -1.0
        eb = np.zeros(ng + 1)
        eb[k] = 1.0
        A[r1, r2] = 1.0
        A[r2, r1] = -p.omega0**2
        A[r2, r2] = -2 * p.omega_i
        A[r2] += e
        B[r2] += eb
        # w = kp e + 2 kr wi r2 - kd (i1 - i2)
        w = p.kp * e
        w[r2] += 2 * p.kr * p.omega_i
        w[i1] -= p.kd
        w[i2] += p.kd
        wb = p.kp * eb
        td = p.total_delay
        if td > 0:
            z1, z2 = o + 5, o + 6
            A[z1, z2] = 1.0
            A[z2, z1] = -12.0 / td**2
            A[z2, z2] = -6.0 / td
            A[z2] += w
            B[z2] += wb
            u = w.copy()
            u[z2] -= 12.0 / td
            ub = wb
        else:
            u, ub = w, wb
        A[i1] += p.k_pwm * u / p.L1
        B[i1] += p.k_pwm * ub / p.L1
        A[i1, uc] -= 1.0 / p.L1
        A[uc, i1] += 1.0 / p.Cf
        A[uc, i2] -= 1.0 / p.Cf
        A[i2, uc] += 1.0 / lbs[k]
        A[i2] -= vrow / lbs[k]
        B[i2, ng] -= vu / lbs[k]

    C = np.zeros((ng + 1, n))
    D = np.zeros((ng + 1, ng + 1))
    for k, o in enumerate(offsets):
        C[k, o + 2] = 1.0
    C[ng] = vrow
    D[ng, ng] = vu
    p0 = m.groups[0].params
    return StateSpace(
        A, B, C, D,
        tuple(g.label for g in m.groups),
        tuple(g.count for g in m.groups),
        offsets,
        p0.Ts,
        p0.omega0,
    )


def _inputs(t, ng, cfg: SimConfig, omega0: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    s = np.sin(omega0 * t)
    u = np.empty(t.shape + (ng + 1,))
    u[..., :ng] = cfg.reference_amplitude * s[..., None]
    u[..., ng] = math.sqrt(2) * cfg.grid_rms * s
    return u


def _rk4_affine(A: np.ndarray, h: float):
    """RK4 step for ``x' = A x + b(t)`` as ``x+ = P x + Q0 b0 + Qm bm + Q1 b1``."""
    n = A.shape[0]
    I = np.eye(n)
    M = h * A
    M2 = M @ M
    M3 = M2 @ M
    P = I + M + M2 / 2 + M3 / 6 + M2 @ M2 / 24
    Q0 = h / 6 * (I + M + M2 / 2 + M3 / 4)
    Qm = h / 6 * (4 * I + 2 * M + M2 / 2)
    Q1 = h / 6 * I
    return P, Q0, Qm, Q1


def _substeps(A: np.ndarray, Ts: float, requested: int) -> int:
    rho = float(np.max(np.abs(np.linalg.eigvals(A)))) if A.size else 0.0
    return max(requested, int(math.ceil(Ts * rho / _RK4_REACH)))


def run_linear(ss: StateSpace, cfg: SimConfig) -> Waveform:
    """Integrate the Padé realization with fixed-step RK4.

    Samples are recorded once per ``Ts``.  The substep count is raised above
    ``cfg.substeps_per_Ts`` when the fastest mode would make RK4 unstable.
    """
    if cfg.mode != "pade_linear":
        raise InputError("run_linear needs mode 'pade_linear'")
    ng = len(ss.labels)
    sub = _substeps(ss.A, ss.Ts, cfg.substeps_per_Ts)
    h = ss.Ts / sub
    P, Q0, Qm, Q1 = _rk4_affine(ss.A, h)
    G0, Gm, G1 = Q0 @ ss.B, Qm @ ss.B, Q1 @ ss.B
    n_samples = int(round(cfg.duration / ss.Ts))
    times = np.arange(n_samples + 1) * ss.Ts
    # Input samples on the half-step grid: index 2j is t = j h.
    uh = _inputs(np.arange(2 * sub * n_samples + 1) * (h / 2), ng, cfg, ss.omega0)

    y = np.zeros((n_samples + 1, ng + 1))
    x = np.zeros(ss.n_states)
    y[0] = ss.C @ x + ss.D @ uh[0]
    diverged = None
    for k in range(n_samples):
        base = 2 * sub * k
        for j in range(sub):
            i = base + 2 * j
            x = P @ x + G0 @ uh[i] + Gm @ uh[i + 1] + G1 @ uh[i + 2]
        y[k + 1] = ss.C @ x + ss.D @ uh[base + 2 * sub]
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > _BLOWUP:
            diverged = float(times[k + 1])
            y = y[: k + 2]
            times = times[: k + 2]
            break
    return Waveform(
        times,
        {lab: y[:, i].copy() for i, lab in enumerate(ss.labels)},
        y[:, ng].copy(),
        diverged,
        {"mode": "pade_linear", "substeps_per_Ts": sub, "omega0": ss.omega0},
    )


def discretize_resonant(kr: float, omega_i: float, omega0: float, Ts: float):
    """Tustin discretization of ``2 kr wi s / (s^2 + 2 wi s + w0^2)`` prewarped at ``w0``.

    Returns ``(b, a)`` with ``a[0] == 1``.
    """
    K = omega0 / math.tan(omega0 * Ts / 2)
    a0 = K * K + 2 * omega_i * K + omega0**2
    g = 2 * kr * omega_i * K / a0
    b = np.array([g, 0.0, -g])
    a = np.array([1.0, (2 * omega0**2 - 2 * K * K) / a0, (K * K - 2 * omega_i * K + omega0**2) / a0])
    return b, a


def _plant_matrices(m: SystemModel):
    """Filter-only dynamics: 3 states per group, inputs u_inv per group then u_g."""
    ng = len(m.groups)
    n = 3 * ng
    offsets = [3 * k for k in range(ng)]
    vrow, vu, lbs = _pcc_row(m, offsets, n)
    A = np.zeros((n, n))
    B = np.zeros((n, ng + 1))
    for k, (g, o) in enumerate(zip(m.groups, offsets)):
        p = g.params
        A[o, o + 1] = -1.0 / p.L1
        B[o, k] = 1.0 / p.L1
        A[o + 1, o] = 1.0 / p.Cf
        A[o + 1, o + 2] = -1.0 / p.Cf
        A[o + 2, o + 1] = 1.0 / lbs[k]
        A[o + 2] -= vrow / lbs[k]
        B[o + 2, ng] = -vu / lbs[k]
    return A, B, vrow, vu


def run_sampled(m: SystemModel, cfg: SimConfig) -> Waveform:
    """Sampled-data run with a genuine one-period hold and computation delay.

    At each sampling instant the controller reads ``i2`` and ``iC`` of every
    group, updates the discretized PR controller and computes
    ``kp e + R(e) - kd iC``.  That command drives the bridge from
    ``t_k + Td - Ts/2`` for one sampling period.  Delays that are not a
    multiple of ``Ts`` therefore place the actuation edge between samples;
    integration steps are split exactly at that edge.
    """
    if cfg.mode != "sampled_data":
        raise InputError("run_sampled needs mode 'sampled_data'")
    groups = m.groups
    ng = len(groups)
    Ts = groups[0].params.Ts
    if any(abs(g.params.Ts - Ts) > 1e-15 for g in groups):
        raise InputError("sampled-data mode needs a common sampling period")
    shifts = []
    for g in groups:
        d = g.params.total_delay - 0.5 * Ts
        if d < -1e-15:
            raise InputError(
                f"group {g.label!r}: total delay {g.params.total_delay} is below the "
                f"ZOH minimum Ts/2 for sampled-data simulation"
            )
        shifts.append(max(d, 0.0))
    omega0 = groups[0].params.omega0

    A, B, vrow, vu = _plant_matrices(m)
    sub = _substeps(A, Ts, cfg.substeps_per_Ts)
    h_max = Ts / sub
    filt = [discretize_resonant(g.params.kr, g.params.omega_i, g.params.omega0, Ts) for g in groups]
    zstate = np.zeros((ng, 2))
    ampl = cfg.reference_amplitude
    ug_peak = math.sqrt(2) * cfg.grid_rms

    def rhs(x, t, uinv):
        s = math.sin(omega0 * t)
        u = np.empty(ng + 1)
        u[:ng] = uinv
        u[ng] = ug_peak * s
        return A @ x + B @ u

    def advance(x, t0, t1, uinv):
        span = t1 - t0
        if span <= 0:
            return x
        steps = max(1, int(math.ceil(span / h_max - 1e-9)))
        h = span / steps
        t = t0
        for _ in range(steps):
            k1 = rhs(x, t, uinv)
            k2 = rhs(x + h / 2 * k1, t + h / 2, uinv)
            k3 = rhs(x + h / 2 * k2, t + h / 2, uinv)
            k4 = rhs(x + h * k3, t + h, uinv)
            x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        return x

    n_samples = int(round(cfg.duration / Ts))
    times = np.arange(n_samples + 1) * Ts
    y = np.zeros((n_samples + 1, ng + 1))
    x = np.zeros(3 * ng)
    uinv = np.zeros(ng)
    pending = [[] for _ in range(ng)]  # (apply_time, value) per group
    diverged = None

    for k in range(n_samples + 1):
        tk = k * Ts
        s = math.sin(omega0 * tk)
        y[k, :ng] = x[2::3]
        y[k, ng] = vrow @ x + vu * ug_peak * s
        if k == n_samples:
            break
        for gi, g in enumerate(groups):
            p = g.params
            i1, i2 = x[3 * gi], x[3 * gi + 2]
            e = ampl * s - i2
            b, a = filt[gi]
            r = b[0] * e + zstate[gi, 0]
            zstate[gi, 0] = b[1] * e - a[1] * r + zstate[gi, 1]
            zstate[gi, 1] = b[2] * e - a[2] * r
            cmd = p.k_pwm * (p.kp * e + r - p.kd * (i1 - i2))
            pending[gi].append((tk + shifts[gi], cmd))
        # Integrate to the next sample, switching held values at their edges.
        t_next = tk + Ts
        t = tk
        while True:
            edges = [q[0][0] for q in pending if q and q[0][0] < t_next - 1e-15]
            if not edges:
                break
            te = min(edges)
            x = advance(x, t, te, uinv)
            t = max(t, te)
            for gi, q in enumerate(pending):
                while q and q[0][0] <= te + 1e-15:
                    uinv[gi] = q.pop(0)[1]
        x = advance(x, t, t_next, uinv)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > _BLOWUP:
            diverged = float(times[k + 1])
            y = y[: k + 1]
            times = times[: k + 1]
            break
    return Waveform(
        times,
        {g.label: y[:, i].copy() for i, g in enumerate(groups)},
        y[:, ng].copy(),
        diverged,
        {"mode": "sampled_data", "substeps_per_Ts": sub, "omega0": omega0},
    )


def _window_rms(x: np.ndarray, t: np.ndarray, lo: float, hi: float) -> float:
    sel = (t >= lo) & (t < hi)
    if not np.any(sel):
        return float("nan")
    return float(np.sqrt(np.mean(x[sel] ** 2)))


def remove_periodic(x: np.ndarray, t: np.ndarray, period: float) -> np.ndarray:
    """``x(t) - x(t - period)``, zero for ``t < period``.

    The forced response of a stable linear loop driven at ``2 pi / period``
    is periodic and cancels exactly, while every transient mode keeps its
    exponential rate.  Off-grid shifts use linear interpolation.
    """
    out = x - np.interp(t - period, t, x)
    out[t < period] = 0.0
    return out


def detect_stability(w: Waveform, cfg: SimConfig) -> Optional[bool]:
    """Judge a run from its grid-side currents.

    The periodic forced response is removed first (see
    :func:`remove_periodic`), so that only transient content remains.  The
    run is unstable when the RMS of that remainder over the final
    ``divergence_window`` exceeds ``divergence_factor`` times its RMS over
    the window just before, or on a non-finite sample or recorded blow-up.
    A remainder at round-off level relative to the current itself counts
    as settled.  Returns ``None`` for an all-zero waveform.
    """
    if cfg.duration < 2 * cfg.divergence_window:
        raise InputError("duration must be at least twice the divergence window")
    if w.diverged_at is not None:
        return False
    traces = list(w.currents.values())
    if any(not np.all(np.isfinite(c)) for c in traces):
        return False
    if all(not np.any(c) for c in traces):
        return None
    period = 2 * math.pi / w.meta.get("omega0", 100 * math.pi)
    T = float(w.times[-1])
    W = cfg.divergence_window
    for c in traces:
        r = remove_periodic(c, w.times, period)
        base = _window_rms(r, w.times, T - 2 * W, T - W)
        final = _window_rms(r, w.times, T - W, T + 1e-12)
        level = _window_rms(c, w.times, T - W, T + 1e-12)
        if final <= _SETTLED * level:
            continue
        if final > cfg.divergence_factor * base:
            return False
    return True
