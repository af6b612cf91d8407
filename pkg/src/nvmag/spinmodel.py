"""Ground-state spin-1 model per defect axis.

The axis-local Hamiltonian is

    H = d_zfs * Sz**2 + gamma * (b_parallel * Sz + b_perp * Sx)

with energies in MHz and fields in mT, keeping matrix entries O(1e3) and
well conditioned.  Strain and electric-field terms are neglected, which
makes the spectrum invariant under rotations about the axis; a single
transverse component along the local x direction therefore suffices.

Transition frequencies are obtained by direct diagonalization.  Eigenstates
are labeled 0-like, -1-like, +1-like by their dominant overlap with the Sz
eigenbasis (not by energy order), so transition names stay stable through
the near-crossing of the 0 and -1 levels around d_zfs/gamma (~102 mT for
the defaults).  Defects along +n and -n are spectrally equivalent, so
per-axis tables are computed from |b_parallel|; the +1-like branch is then
the upper one.

Single-quantum transitions are 0 -> -1 (``f_minus``) and 0 -> +1
(``f_plus``); the double-quantum (DQ) transition -1 -> +1 (``f_dq``) is
forbidden without a transverse field component.  ``f_minus`` is signed: it
goes negative once gamma*|b_parallel| exceeds d_zfs and the -1-like level
drops below the 0-like one.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .crystal import SphericalField, as_vec3, nv_axes, project_field, spherical_to_cartesian

__all__ = [
    "SpinModelParams",
    "AxisProjection",
    "Eigenlevels",
    "TransitionTable",
    "SweepCurves",
    "hamiltonian_matrix",
    "eigenlevels",
    "transition_frequencies",
    "transition_strength",
    "sweep_vs_field",
    "sweep_vs_angle",
    "TRANSITION_KINDS",
]

TRANSITION_KINDS = ("minus", "plus", "dq")

# Spin-1 operators in the basis (|+1>, |0>, |-1>).
SPIN_SX = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]) / math.sqrt(2.0)
SPIN_SZ = np.diag([1.0, 0.0, -1.0])
_SZ2 = SPIN_SZ @ SPIN_SZ
for _m in (SPIN_SX, SPIN_SZ, _SZ2):
    _m.setflags(write=False)

# Basis row index per spin projection.
_ROW_PLUS, _ROW_ZERO, _ROW_MINUS = 0, 1, 2

# Candidate assignments of eigenvector columns (ascending energy) to the
# labels (zero, minus, plus).  Column order (0, 1, 2) is the canonical
# energy-ordered labeling used to break ties.
_LABEL_PERMS = tuple(itertools.permutations(range(3)))
_CANONICAL_PERM_INDEX = _LABEL_PERMS.index((0, 1, 2))


@dataclass(frozen=True)
class SpinModelParams:
    """Zero-field splitting (MHz) and gyromagnetic ratio (MHz per mT).

    Defaults are the standard ground-state values: d_zfs = 2870 MHz and
    gamma = 28.024 MHz/mT.  Both are configuration parameters, not
    constants; d_zfs in particular shifts with temperature and is set per
    dataset.
    """

    d_zfs_mhz: float = 2870.0
    gamma_mhz_per_mt: float = 28.024

    def __post_init__(self):
        if not (math.isfinite(self.d_zfs_mhz) and self.d_zfs_mhz > 0):
            raise ValueError("d_zfs_mhz must be positive")
        if not (math.isfinite(self.gamma_mhz_per_mt) and self.gamma_mhz_per_mt > 0):
            raise ValueError("gamma_mhz_per_mt must be positive")


@dataclass(frozen=True)
class AxisProjection:
    """Field seen by one axis: signed longitudinal and transverse parts (mT).

    ``beta_deg`` is the angle between axis and field, ``omega_mt`` the field
    magnitude, so omega*cos(beta) = b_parallel and omega*sin(beta) = b_perp.
    """

    b_parallel_mt: float
    b_perp_mt: float
    beta_deg: float
    omega_mt: float

    def __post_init__(self):
        if self.b_perp_mt < 0:
            raise ValueError("b_perp_mt must be >= 0")
        tol = 1e-9 * max(1.0, self.omega_mt)
        beta = math.radians(self.beta_deg)
        if abs(self.omega_mt * math.cos(beta) - self.b_parallel_mt) > tol:
            raise ValueError("inconsistent projection: omega*cos(beta) != b_parallel")
        if abs(self.omega_mt * math.sin(beta) - self.b_perp_mt) > tol:
            raise ValueError("inconsistent projection: omega*sin(beta) != b_perp")

    @classmethod
    def from_components(cls, b_parallel_mt: float, b_perp_mt: float) -> "AxisProjection":
        omega = math.hypot(b_parallel_mt, b_perp_mt)
        beta = math.degrees(math.atan2(b_perp_mt, b_parallel_mt))
        return cls(b_parallel_mt, b_perp_mt, beta, omega)

    @classmethod
    def from_field(cls, axis, b_mt) -> "AxisProjection":
        b_par, b_perp = project_field(axis, b_mt)
        return cls.from_components(b_par, b_perp)


def hamiltonian_matrix(params: SpinModelParams, proj: AxisProjection) -> np.ndarray:
    """Axis-local 3x3 Hamiltonian (MHz) in the basis (|+1>, |0>, |-1>).

    Real symmetric by construction; its trace is 2*d_zfs for any field.
    """
    g = params.gamma_mhz_per_mt
    return (
        params.d_zfs_mhz * _SZ2
        + g * proj.b_parallel_mt * SPIN_SZ
        + g * proj.b_perp_mt * SPIN_SX
    )


def _label_columns(w: np.ndarray, v: np.ndarray) -> tuple[int, int, int]:
    """Columns of ``v`` (ascending energies ``w``) for the labels (zero, minus, plus).

    The assignment maximizes the summed squared overlap with the Sz
    eigenbasis; when assignments tie (symmetric mixing at zero longitudinal
    field), the energy-ordered one wins: 0-like lowest, then -1-like, then
    +1-like.
    """
    overlap = np.abs(v) ** 2
    scores = [
        overlap[_ROW_ZERO, p[0]] + overlap[_ROW_MINUS, p[1]] + overlap[_ROW_PLUS, p[2]]
        for p in _LABEL_PERMS
    ]
    best = max(scores)
    candidates = [i for i, s in enumerate(scores) if s >= best - 1e-10]
    idx = _CANONICAL_PERM_INDEX if _CANONICAL_PERM_INDEX in candidates else candidates[0]
    return _LABEL_PERMS[idx]


@dataclass(frozen=True)
class Eigenlevels:
    """Labeled eigenlevels of one axis-local Hamiltonian (energies in MHz)."""

    e_zero: float
    e_minus: float
    e_plus: float
    v_zero: np.ndarray
    v_minus: np.ndarray
    v_plus: np.ndarray


def eigenlevels(h) -> Eigenlevels:
    """Diagonalize a Hermitian 3x3 matrix and label states by Sz-basis overlap.

    Rejects input whose anti-Hermitian part exceeds 1e-9 (relative to the
    matrix scale).  Labels follow the dominant |m_s| overlap with ties
    broken by energy order (0-like lowest).
    """
    h = np.asarray(h)
    if h.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {h.shape}")
    scale = max(1.0, float(np.abs(h).max()))
    if np.abs(h - h.conj().T).max() > 1e-9 * scale:
        raise ValueError("matrix is not Hermitian within 1e-9")
    w, v = np.linalg.eigh(h)
    cz, cm, cp = _label_columns(w, v)
    return Eigenlevels(
        e_zero=float(w[cz]),
        e_minus=float(w[cm]),
        e_plus=float(w[cp]),
        v_zero=v[:, cz],
        v_minus=v[:, cm],
        v_plus=v[:, cp],
    )


def _strengths(lv: Eigenlevels) -> tuple[float, float, float]:
    # Squared Sx matrix elements, scaled so a single-quantum transition at
    # zero transverse field has strength exactly 1 (bare element 1/sqrt(2)).
    sm = 2.0 * abs(np.vdot(lv.v_minus, SPIN_SX @ lv.v_zero)) ** 2
    sp = 2.0 * abs(np.vdot(lv.v_plus, SPIN_SX @ lv.v_zero)) ** 2
    sdq = 2.0 * abs(np.vdot(lv.v_plus, SPIN_SX @ lv.v_minus)) ** 2
    return sm, sp, sdq


def transition_strength(params: SpinModelParams, proj: AxisProjection) -> tuple[float, float, float]:
    """Relative drive strengths (s_minus, s_plus, s_dq) for one axis.

    Normalized to the zero-transverse-field single-quantum strength; under
    strong transverse mixing single-quantum values can exceed 1.  s_dq is
    exactly 0 when b_perp is 0 (the DQ line is forbidden without transverse
    field).
    """
    lv = eigenlevels(hamiltonian_matrix(params, proj))
    return _strengths(lv)


@dataclass(frozen=True)
class TransitionTable:
    """Per-axis transition frequencies (MHz) and relative drive strengths.

    Arrays of shape (4,), indexed by axis label 1..4 minus one.  f_dq equals
    f_plus - f_minus by construction.
    """

    f_minus: np.ndarray
    f_plus: np.ndarray
    f_dq: np.ndarray
    s_minus: np.ndarray
    s_plus: np.ndarray
    s_dq: np.ndarray

    def line(self, axis: int, kind: str) -> tuple[float, float]:
        """(frequency, strength) of one transition; axis in 1..4, kind in TRANSITION_KINDS."""
        if axis not in (1, 2, 3, 4):
            raise ValueError(f"axis must be 1..4, got {axis}")
        if kind not in TRANSITION_KINDS:
            raise ValueError(f"unknown transition kind {kind!r}")
        freq = getattr(self, f"f_{kind}")[axis - 1]
        strength = getattr(self, f"s_{kind}")[axis - 1]
        return float(freq), float(strength)

    def all_lines(self) -> list[tuple[int, str, float, float]]:
        """All twelve (axis, kind, frequency, strength) tuples."""
        out = []
        for axis in (1, 2, 3, 4):
            for kind in TRANSITION_KINDS:
                freq, strength = self.line(axis, kind)
                out.append((axis, kind, freq, strength))
        return out


def _canonical_projections(b_mt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(|b_parallel|, b_perp) per axis, shape (4,), for a Cartesian field in mT."""
    axes = nv_axes()
    b_par = axes @ b_mt
    transverse = b_mt[None, :] - b_par[:, None] * axes
    b_perp = np.linalg.norm(transverse, axis=1)
    # the subtraction leaves rounding-level residue for aligned fields;
    # snap it to zero so the forbidden-line strength is exactly 0 there
    b_perp[b_perp <= 1e-12 * max(1.0, float(np.linalg.norm(b_mt)))] = 0.0
    return np.abs(b_par), b_perp


def _tables_for_projections(
    params: SpinModelParams, b_par: np.ndarray, b_perp: np.ndarray
) -> TransitionTable:
    """Transition table for a batch of (b_par >= 0, b_perp) projections."""
    n = b_par.shape[0]
    g = params.gamma_mhz_per_mt
    h = (
        params.d_zfs_mhz * _SZ2[None, :, :]
        + g * b_par[:, None, None] * SPIN_SZ[None, :, :]
        + g * b_perp[:, None, None] * SPIN_SX[None, :, :]
    )
    w, v = np.linalg.eigh(h)
    fm = np.empty(n)
    fp = np.empty(n)
    sm = np.empty(n)
    sp = np.empty(n)
    sdq = np.empty(n)
    for i in range(n):
        cz, cmn, cpl = _label_columns(w[i], v[i])
        fm[i] = w[i, cmn] - w[i, cz]
        fp[i] = w[i, cpl] - w[i, cz]
        sx_v = SPIN_SX @ v[i]
        sm[i] = 2.0 * abs(v[i, :, cmn] @ sx_v[:, cz]) ** 2
        sp[i] = 2.0 * abs(v[i, :, cpl] @ sx_v[:, cz]) ** 2
        sdq[i] = 2.0 * abs(v[i, :, cpl] @ sx_v[:, cmn]) ** 2
    return TransitionTable(fm, fp, fp - fm, sm, sp, sdq)


def transition_frequencies(params: SpinModelParams, b_mt) -> TransitionTable:
    """Transition table of all four axes for a Cartesian field (mT).

    At zero field every axis gives f_minus = f_plus = d_zfs and f_dq = 0.
    A field along a cube edge (such as the x-axis) projects identically on
    all four axes and yields four identical rows; a field along axis 1
    leaves that axis free of transverse field (s_dq = 0) and the other
    three rows identical.
    """
    b = as_vec3(b_mt)
    b_par, b_perp = _canonical_projections(b)
    return _tables_for_projections(params, b_par, b_perp)


@dataclass(frozen=True)
class SweepCurves:
    """Transition curves along a sweep; arrays of shape (n_points, 4 axes)."""

    kind: str
    sweep_values: np.ndarray
    f_minus: np.ndarray
    f_plus: np.ndarray
    f_dq: np.ndarray
    s_minus: np.ndarray
    s_plus: np.ndarray
    s_dq: np.ndarray
    fixed: dict = field(default_factory=dict)

    def frequencies(self, kind: str) -> np.ndarray:
        if kind not in TRANSITION_KINDS:
            raise ValueError(f"unknown transition kind {kind!r}")
        return getattr(self, f"f_{kind}")


def _stack_tables(kind, values, tables, fixed) -> SweepCurves:
    def col(name):
        if not tables:
            return np.empty((0, 4))
        return np.stack([getattr(t, name) for t in tables])

    return SweepCurves(
        kind=kind,
        sweep_values=np.asarray(values, dtype=float),
        f_minus=col("f_minus"),
        f_plus=col("f_plus"),
        f_dq=col("f_dq"),
        s_minus=col("s_minus"),
        s_plus=col("s_plus"),
        s_dq=col("s_dq"),
        fixed=fixed,
    )


def sweep_vs_field(params: SpinModelParams, direction, b_mags_mt) -> SweepCurves:
    """Transition curves versus field magnitude along a fixed unit direction.

    ``b_mags_mt`` must be ascending and non-negative; an empty range gives
    empty curves.
    """
    direction = as_vec3(direction)
    norm = np.linalg.norm(direction)
    if norm == 0:
        raise ValueError("direction must be nonzero")
    direction = direction / norm
    mags = np.asarray(b_mags_mt, dtype=float)
    if mags.ndim != 1:
        raise ValueError("b_mags_mt must be one-dimensional")
    if mags.size and (np.any(np.diff(mags) < 0) or mags[0] < 0):
        raise ValueError("b_mags_mt must be ascending and non-negative")
    tables = [transition_frequencies(params, m * direction) for m in mags]
    return _stack_tables("field", mags, tables, {"direction": tuple(direction)})


def sweep_vs_angle(
    params: SpinModelParams,
    b_m_mt: float,
    vary: str,
    sweep_deg,
    fixed_deg: float,
) -> SweepCurves:
    """Transition curves versus one spherical angle at fixed magnitude.

    ``vary`` selects "theta" (latitude, fixed longitude = ``fixed_deg``) or
    "phi" (longitude, fixed latitude).  The axis pairs (1,2) and (3,4) trace
    mirror-symmetric curves, reflecting the lattice symmetry.
    """
    if b_m_mt < 0:
        raise ValueError("b_m_mt must be >= 0")
    if vary not in ("theta", "phi"):
        raise ValueError("vary must be 'theta' or 'phi'")
    values = np.asarray(sweep_deg, dtype=float)
    tables = []
    for a in values:
        if vary == "theta":
            f = SphericalField(b_m_mt, float(a), fixed_deg)
        else:
            f = SphericalField(b_m_mt, fixed_deg, float(a))
        tables.append(transition_frequencies(params, spherical_to_cartesian(f)))
    fixed = {"b_m_mt": b_m_mt, ("phi_deg" if vary == "theta" else "theta_deg"): fixed_deg}
    return _stack_tables(vary, values, tables, fixed)
