"""Vector field from four measured transition frequencies.

Four defect axes sample the field along four fixed directions, so four line
positions overdetermine the three field parameters (magnitude, latitude,
longitude).  The inverse problem is solved by bounded damped least squares
on the forward model, with the Jacobian obtained analytically: for an
eigenvalue E of H(B), dE/dB_j = <v| dH/dB_j |v>, and dH/dB involves only
the longitudinal and transverse projections of the unit vector dB/dB_j on
each axis.

The magnitude is boxed to a band around a caller-supplied nominal value
(the coil current times the coil constant is always known roughly), which
suppresses the mirror solutions an unconstrained fit can fall into.
Multiple starting points spread around the initial angles probe for
remaining ambiguity; distinct converged minima are reported through
``unique`` and ``uniqueness_scan``.

Near the poles (|latitude| -> 90 deg) the longitude becomes meaningless and
its column of the Jacobian collapses.  Starts seeded there switch to a
local two-parameter tangent chart for the direction and map the result
back afterwards.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from .crystal import (
    SphericalField,
    cartesian_to_spherical,
    nv_axes,
    spherical_to_cartesian,
)
from .errors import InversionError, UnobservableLineWarning
from .leastsq import covariance, damped_least_squares
from .spinmodel import (
    SPIN_SX,
    SPIN_SZ,
    SpinModelParams,
    TRANSITION_KINDS,
    _label_columns,
    _SZ2,
    transition_frequencies,
)

__all__ = [
    "TransitionAssignment",
    "InversionConfig",
    "InversionResult",
    "default_assignment",
    "predict_frequencies",
    "invert",
    "uniqueness_scan",
]

_DEG = math.pi / 180.0

# Drive strength below which a line is flagged as practically invisible.
MIN_OBSERVABLE_STRENGTH = 1e-4

# Latitude beyond which the spherical chart is ill-conditioned and starts
# switch to a local tangent parameterization.
POLE_SWITCH_DEG = 80.0

# A converged start only counts against uniqueness when its unweighted
# residual rms is within a factor 3 of the best (or below the solver-noise
# floor): stalled starts at much worse minima are failed probes, not
# evidence of ambiguity.
COMPETITIVE_RMS_FACTOR = 3.0
COMPETITIVE_RMS_FLOOR_MHZ = 1e-5


@dataclass(frozen=True)
class TransitionAssignment:
    """Which (axis, transition) produces each of the four measured lines.

    ``pairs`` holds four (axis, kind) tuples, axis in 1..4 and kind one of
    "minus", "plus", "dq", in the same order as the measured frequencies.
    Pairs must be distinct.
    """

    pairs: tuple

    def __post_init__(self):
        pairs = tuple((int(a), str(k)) for a, k in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        if len(pairs) != 4:
            raise ValueError(f"need exactly 4 assigned lines, got {len(pairs)}")
        for a, k in pairs:
            if a not in (1, 2, 3, 4):
                raise ValueError(f"axis must be 1..4, got {a}")
            if k not in TRANSITION_KINDS:
                raise ValueError(f"unknown transition kind {k!r}")
        if len(set(pairs)) != 4:
            raise ValueError("assigned lines must be distinct")

    @classmethod
    def parse(cls, text: str) -> "TransitionAssignment":
        """Parse "1:dq,4:dq,3:minus,2:minus" style strings."""
        pairs = []
        for tok in text.split(","):
            tok = tok.strip()
            if not tok:
                continue
            try:
                a, k = tok.split(":")
                pairs.append((int(a), k.strip()))
            except ValueError:
                raise ValueError(f"malformed assignment token {tok!r}") from None
        return cls(tuple(pairs))

    def __str__(self):
        return ",".join(f"{a}:{k}" for a, k in self.pairs)


def default_assignment(
    params: SpinModelParams,
    nominal_field: SphericalField,
    measured_mhz,
    min_strength=MIN_OBSERVABLE_STRENGTH,
) -> TransitionAssignment:
    """Greedy nearest-frequency matching against the nominal-field table.

    Lines weaker than ``min_strength`` never enter the candidate pool.
    Raises InversionError when the pool cannot cover all four measured
    frequencies with distinct transitions.
    """
    measured = np.asarray(measured_mhz, dtype=float)
    if measured.shape != (4,):
        raise ValueError("need exactly 4 measured frequencies")
    table = transition_frequencies(params, spherical_to_cartesian(nominal_field))
    pool = [
        (axis, kind, freq)
        for axis, kind, freq, strength in table.all_lines()
        if strength >= min_strength
    ]
    if len(pool) < 4:
        raise InversionError(
            f"only {len(pool)} transitions exceed strength {min_strength:g} "
            "at the nominal field; cannot assign 4 lines"
        )
    # Smallest gaps claim their transition first.
    order = []
    for i, fm in enumerate(measured):
        for axis, kind, freq in pool:
            order.append((abs(freq - fm), i, axis, kind))
    order.sort()
    chosen: dict[int, tuple] = {}
    used = set()
    for gap, i, axis, kind in order:
        if i in chosen or (axis, kind) in used:
            continue
        chosen[i] = (axis, kind)
        used.add((axis, kind))
        if len(chosen) == 4:
            break
    if len(chosen) != 4:
        raise InversionError("could not assign all measured lines to distinct transitions")
    return TransitionAssignment(tuple(chosen[i] for i in range(4)))


def predict_frequencies(
    params: SpinModelParams,
    fld: SphericalField,
    assignment: TransitionAssignment,
    warn_unobservable=True,
) -> np.ndarray:
    """Forward model: the four assigned transition frequencies (MHz)."""
    table = transition_frequencies(params, spherical_to_cartesian(fld))
    out = np.empty(4)
    for i, (axis, kind) in enumerate(assignment.pairs):
        freq, strength = table.line(axis, kind)
        out[i] = freq
        if warn_unobservable and strength < MIN_OBSERVABLE_STRENGTH:
            warnings.warn(
                f"axis {axis} {kind} line has strength {strength:.2e} at "
                f"b={fld.b_m_mt:g} mT; it would not be visible in a measurement",
                UnobservableLineWarning,
                stacklevel=2,
            )
    return out


@dataclass(frozen=True)
class InversionConfig:
    """Inversion settings: nominal magnitude, its band, seeds, and stopping rules.

    The solver searches |B| inside nominal*(1 +- magnitude_band).
    ``multistart`` starting points are spread ``angle_spread_deg`` around
    (theta0, phi0) with a seeded generator, so runs are reproducible.
    """

    nominal_b_mt: float
    magnitude_band: float = 0.10
    theta0_deg: float = 0.0
    phi0_deg: float = 0.0
    multistart: int = 8
    angle_spread_deg: float = 10.0
    step_tol: float = 1e-9
    max_iterations: int = 200
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.nominal_b_mt) and self.nominal_b_mt > 0):
            raise ValueError("nominal_b_mt must be positive")
        if not 0 < self.magnitude_band < 1:
            raise ValueError("magnitude_band must be in (0, 1)")
        if self.multistart < 1:
            raise ValueError("multistart must be >= 1")
        if self.angle_spread_deg < 0:
            raise ValueError("angle_spread_deg must be >= 0")

    @property
    def b_bounds(self) -> tuple[float, float]:
        return (
            self.nominal_b_mt * (1.0 - self.magnitude_band),
            self.nominal_b_mt * (1.0 + self.magnitude_band),
        )


@dataclass(frozen=True)
class InversionResult:
    """Recovered field with 1-sigma uncertainties and fit diagnostics.

    ``mismatch`` flags residuals larger than 5x the stated measurement
    sigma (only meaningful when sigma was given).  ``at_band_edge`` flags a
    magnitude pinned at the search box, which usually means the nominal
    value or the assignment is wrong.  ``unique`` is False when a second
    distinct minimum fits the data comparably well.
    """

    field: SphericalField
    sigma_b_mt: float
    sigma_theta_deg: float
    sigma_phi_deg: float
    residual_rms_mhz: float
    unique: bool
    mismatch: bool
    at_band_edge: bool
    converged: bool
    diagnostics: dict = dc_field(default_factory=dict)


def _hf_frequency_jacobian(params, b_cart, assignment):
    """d(frequency)/d(B_cart) for the assigned lines, shape (4, 3).

    Eigenvalue derivative dE/dB_j = <v| dH/dB_j |v> with
    dH/dB_j = gamma * (n_j * sign(b_par) * Sz_local + t_j * Sx_local);
    in the eigenbasis the expectation values of Sz and Sx do the work.
    Uses the same |b_parallel| canonicalization as the forward model, hence
    the sign factor on the longitudinal part.
    """
    axes = nv_axes()
    g = params.gamma_mhz_per_mt
    rows = {}
    for axis_index in {a for a, _ in assignment.pairs}:
        n_vec = axes[axis_index - 1]
        b_par = float(n_vec @ b_cart)
        t_vec = b_cart - b_par * n_vec
        b_perp = float(np.linalg.norm(t_vec))
        sign = 1.0 if b_par >= 0 else -1.0
        if b_perp > 1e-12:
            t_hat = t_vec / b_perp
        else:
            t_hat = np.zeros(3)
        h = params.d_zfs_mhz * _SZ2 + g * abs(b_par) * SPIN_SZ + g * b_perp * SPIN_SX
        w, v = np.linalg.eigh(h)
        cz, cm, cp = _label_columns(w, v)
        freqs = {"minus": w[cm] - w[cz], "plus": w[cp] - w[cz], "dq": w[cp] - w[cm]}
        grads = {}
        for label, col in (("zero", cz), ("minus", cm), ("plus", cp)):
            vec = v[:, col]
            sz_exp = float(vec @ (SPIN_SZ @ vec))
            sx_exp = float(vec @ (SPIN_SX @ vec))
            # dE/dB = gamma * (<Sz> * sign * n + <Sx> * t_hat)
            grads[label] = g * (sz_exp * sign * n_vec + sx_exp * t_hat)
        rows[axis_index] = (freqs, grads)

    jac = np.empty((4, 3))
    for i, (axis, kind) in enumerate(assignment.pairs):
        _, grads = rows[axis]
        if kind == "minus":
            jac[i] = grads["minus"] - grads["zero"]
        elif kind == "plus":
            jac[i] = grads["plus"] - grads["zero"]
        else:
            jac[i] = grads["plus"] - grads["minus"]
    return jac


def _spherical_chain(b_m, theta_deg, phi_deg):
    """d(B_cart)/d(b_m, theta_deg, phi_deg), shape (3, 3)."""
    th = theta_deg * _DEG
    ph = phi_deg * _DEG
    st, ct = math.sin(th), math.cos(th)
    sp, cp = math.sin(ph), math.cos(ph)
    unit = np.array([st, ct * cp, ct * sp])
    d_theta = b_m * np.array([ct, -st * cp, -st * sp]) * _DEG
    d_phi = b_m * np.array([0.0, -ct * sp, ct * cp]) * _DEG
    return np.column_stack([unit, d_theta, d_phi])


def _tangent_basis(u0):
    """Two unit vectors spanning the plane orthogonal to direction ``u0``."""
    ref = np.array([1.0, 0.0, 0.0])
    if abs(u0 @ ref) > 0.9:
        ref = np.array([0.0, 1.0, 0.0])
    e1 = np.cross(u0, ref)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(u0, e1)
    return e1, e2


def _solve_from_start(params, measured, sigma, assignment, cfg, theta_s, phi_s, b_s):
    """One bounded LSQ run; returns (x_spherical, lsq_result, used_pole_chart)."""
    w = 1.0 / sigma if sigma is not None else np.ones(4)
    lo_b, hi_b = cfg.b_bounds
    pole = abs(theta_s) > POLE_SWITCH_DEG

    if not pole:
        def residual(x):
            fld = SphericalField(x[0], x[1], x[2])
            return (predict_frequencies(params, fld, assignment, warn_unobservable=False) - measured) * w

        def jacobian(x):
            b_cart = spherical_to_cartesian(SphericalField(x[0], x[1], x[2]))
            jf = _hf_frequency_jacobian(params, b_cart, assignment)
            return (jf @ _spherical_chain(x[0], x[1], x[2])) * w[:, None]

        x0 = np.array([b_s, theta_s, phi_s])
        lo = np.array([lo_b, -90.0, -180.0])
        hi = np.array([hi_b, 90.0, 180.0])
        res = damped_least_squares(
            residual, jacobian, x0, bounds=(lo, hi),
            step_tol=cfg.step_tol, max_iter=cfg.max_iterations,
        )
        return res.x, res, False

    # Near-pole start: parameterize the direction as normalize(u0 + a*e1 + b*e2)
    # so the chart has no singularity at the pole itself.
    u0 = spherical_to_cartesian(SphericalField(1.0, theta_s, phi_s))
    e1, e2 = _tangent_basis(u0)

    def direction(ab):
        u = u0 + ab[0] * e1 + ab[1] * e2
        return u / np.linalg.norm(u)

    def residual(x):
        b_cart = x[0] * direction(x[1:])
        fld = cartesian_to_spherical(b_cart)
        return (predict_frequencies(params, fld, assignment, warn_unobservable=False) - measured) * w

    def jacobian(x):
        u = u0 + x[1] * e1 + x[2] * e2
        nrm = np.linalg.norm(u)
        uhat = u / nrm
        b_cart = x[0] * uhat
        jf = _hf_frequency_jacobian(params, b_cart, assignment)
        proj = (np.eye(3) - np.outer(uhat, uhat)) / nrm
        chain = np.column_stack([uhat, x[0] * (proj @ e1), x[0] * (proj @ e2)])
        return (jf @ chain) * w[:, None]

    x0 = np.array([b_s, 0.0, 0.0])
    lo = np.array([lo_b, -2.0, -2.0])
    hi = np.array([hi_b, 2.0, 2.0])
    res = damped_least_squares(
        residual, jacobian, x0, bounds=(lo, hi),
        step_tol=cfg.step_tol, max_iter=cfg.max_iterations,
    )
    b_cart = res.x[0] * direction(res.x[1:])
    fld = cartesian_to_spherical(b_cart)
    return np.array([fld.b_m_mt, fld.theta_deg, fld.phi_deg]), res, True


def _start_points(cfg):
    """Deterministic spread of (theta, phi, b) seeds around the config center."""
    rng = np.random.default_rng(cfg.seed)
    starts = [(cfg.theta0_deg, cfg.phi0_deg, cfg.nominal_b_mt)]
    lo_b, hi_b = cfg.b_bounds
    for _ in range(cfg.multistart - 1):
        th = cfg.theta0_deg + rng.uniform(-cfg.angle_spread_deg, cfg.angle_spread_deg)
        ph = cfg.phi0_deg + rng.uniform(-cfg.angle_spread_deg, cfg.angle_spread_deg)
        th = min(max(th, -90.0), 90.0)
        ph = ((ph + 180.0) % 360.0) - 180.0
        if ph == -180.0:
            ph = 180.0
        b = rng.uniform(lo_b, hi_b)
        starts.append((th, ph, b))
    return starts


def _cluster_solutions(solutions, sigmas, caps):
    """Group converged minima; two count as one when within 3 sigma.

    Sigmas are floored (solver convergence scatter) and capped (``caps``):
    on a degenerate landscape the local sigmas diverge, and without the cap
    a single cluster would swallow genuinely distinct solutions.
    """
    floor = np.array([1e-4, 1e-4, 1e-4])
    tol = 3.0 * np.clip(np.nan_to_num(sigmas, nan=0.0), floor, np.asarray(caps))
    clusters = []
    for sol in solutions:
        matched = False
        for rep in clusters:
            d_b = abs(sol[0] - rep[0])
            d_th = abs(sol[1] - rep[1])
            d_ph = abs(sol[2] - rep[2])
            d_ph = min(d_ph, 360.0 - d_ph)
            # Near the poles every longitude is the same point.
            if max(abs(sol[1]), abs(rep[1])) > 89.9:
                d_ph = 0.0
            if d_b <= tol[0] and d_th <= tol[1] and d_ph <= tol[2]:
                matched = True
                break
        if not matched:
            clusters.append(sol)
    return clusters


def invert(
    measured_mhz,
    cfg: InversionConfig,
    assignment: TransitionAssignment,
    params: SpinModelParams = SpinModelParams(),
    sigma_mhz=None,
) -> InversionResult:
    """Recover (|B|, latitude, longitude) from four line positions.

    ``sigma_mhz`` (scalar or length-4) weights the residuals and makes the
    reported uncertainties absolute; without it they are scaled from the
    residual scatter, which for an exactly-determined noiseless fit
    collapses to zero.  Raises InversionError when no start converges,
    with per-start diagnostics attached.
    """
    measured = np.asarray(measured_mhz, dtype=float)
    if measured.shape != (4,):
        raise ValueError("need exactly 4 measured frequencies")
    if not np.all(np.isfinite(measured)):
        raise ValueError("measured frequencies must be finite")
    sigma = None
    if sigma_mhz is not None:
        sigma = np.broadcast_to(np.asarray(sigma_mhz, dtype=float), (4,)).copy()
        if np.any(~np.isfinite(sigma)) or np.any(sigma <= 0):
            raise ValueError("sigma_mhz must be positive and finite")

    attempts = []
    failures = []
    for theta_s, phi_s, b_s in _start_points(cfg):
        try:
            x, res, pole = _solve_from_start(
                params, measured, sigma, assignment, cfg, theta_s, phi_s, b_s
            )
        except Exception as exc:  # keep scanning other starts
            failures.append({"start": (theta_s, phi_s, b_s), "error": str(exc)})
            continue
        entry = {
            "start": (theta_s, phi_s, b_s),
            "x": x,
            "chi2": res.chi2,
            "converged": res.converged,
            "message": res.message,
            "jacobian": res.jacobian,
            "pole_chart": pole,
        }
        (attempts if res.converged else failures).append(entry)

    if not attempts:
        raise InversionError(
            "no starting point converged; check the assignment and nominal field",
            diagnostics=failures,
        )

    for a in attempts:
        fld_a = SphericalField(float(a["x"][0]), float(a["x"][1]), float(a["x"][2]))
        pred = predict_frequencies(params, fld_a, assignment, warn_unobservable=False)
        a["rms"] = float(np.sqrt(np.mean((pred - measured) ** 2)))
    attempts.sort(key=lambda a: a["rms"])
    best = attempts[0]
    x = best["x"]
    fld = SphericalField(float(x[0]), float(x[1]), float(x[2]))

    # Covariance in the spherical chart at the solution (pole-chart runs
    # recompute the spherical Jacobian here rather than transform theirs).
    w = 1.0 / sigma if sigma is not None else np.ones(4)
    b_cart = spherical_to_cartesian(fld)
    jf = _hf_frequency_jacobian(params, b_cart, assignment)
    j_sph = (jf @ _spherical_chain(x[0], x[1], x[2])) * w[:, None]
    chi2 = best["chi2"]
    cov = covariance(j_sph, chi2, 4, 3, scale=sigma is None)
    if cov is None:
        sig = np.full(3, np.nan)
    else:
        sig = np.sqrt(np.maximum(np.diag(cov), 0.0))

    rms = best["rms"]

    mismatch = False
    if sigma is not None:
        mismatch = rms > 5.0 * float(np.mean(sigma))

    lo_b, hi_b = cfg.b_bounds
    edge_tol = 1e-9 * cfg.nominal_b_mt
    at_edge = x[0] <= lo_b + edge_tol or x[0] >= hi_b - edge_tol

    rms_cut = max(COMPETITIVE_RMS_FACTOR * rms, COMPETITIVE_RMS_FLOOR_MHZ)
    competitive = [a["x"] for a in attempts if a["rms"] <= rms_cut]
    caps = (0.05 * cfg.nominal_b_mt, 15.0, 15.0)
    clusters = _cluster_solutions(competitive, sig, caps)
    unique = len(clusters) == 1

    return InversionResult(
        field=fld,
        sigma_b_mt=float(sig[0]),
        sigma_theta_deg=float(sig[1]),
        sigma_phi_deg=float(sig[2]),
        residual_rms_mhz=rms,
        unique=unique,
        mismatch=mismatch,
        at_band_edge=at_edge,
        converged=True,
        diagnostics={
            "n_starts": cfg.multistart,
            "n_converged": len(attempts),
            "n_competitive": len(competitive),
            "n_failed": len(failures),
            "clusters": [tuple(map(float, c)) for c in clusters],
            "chi2": chi2,
        },
    )


def uniqueness_scan(
    measured_mhz,
    cfg: InversionConfig,
    assignment: TransitionAssignment,
    params: SpinModelParams = SpinModelParams(),
    sigma_mhz=None,
) -> list[InversionResult]:
    """Inversions from a widened multistart, one result per distinct minimum.

    Forces at least 8 starts.  Results are sorted by residual; each has
    ``unique`` set to whether it was the only cluster found.
    """
    eff = cfg if cfg.multistart >= 8 else InversionConfig(
        nominal_b_mt=cfg.nominal_b_mt,
        magnitude_band=cfg.magnitude_band,
        theta0_deg=cfg.theta0_deg,
        phi0_deg=cfg.phi0_deg,
        multistart=8,
        angle_spread_deg=cfg.angle_spread_deg,
        step_tol=cfg.step_tol,
        max_iterations=cfg.max_iterations,
        seed=cfg.seed,
    )
    base = invert(measured_mhz, eff, assignment, params, sigma_mhz)
    clusters = base.diagnostics["clusters"]
    if len(clusters) == 1:
        return [base]

    results = []
    for c in clusters:
        centered = InversionConfig(
            nominal_b_mt=eff.nominal_b_mt,
            magnitude_band=eff.magnitude_band,
            theta0_deg=c[1],
            phi0_deg=c[2],
            multistart=1,
            angle_spread_deg=0.0,
            step_tol=eff.step_tol,
            max_iterations=eff.max_iterations,
            seed=eff.seed,
        )
        r = invert(measured_mhz, centered, assignment, params, sigma_mhz)
        results.append(
            InversionResult(
                field=r.field,
                sigma_b_mt=r.sigma_b_mt,
                sigma_theta_deg=r.sigma_theta_deg,
                sigma_phi_deg=r.sigma_phi_deg,
                residual_rms_mhz=r.residual_rms_mhz,
                unique=False,
                mismatch=r.mismatch,
                at_band_edge=r.at_band_edge,
                converged=r.converged,
                diagnostics=r.diagnostics,
            )
        )
    results.sort(key=lambda r: r.residual_rms_mhz)
    return results
