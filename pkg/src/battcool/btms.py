"""Control-oriented cooling plant: compressor power to battery cooling rate.

The cooling rate is a quadratic-in-power surrogate whose six coefficients are
tabulated over ambient temperature and coolant mass flow. The coolant loop is
two algebraic heat-exchange relations (pack -> coolant, chiller -> coolant).

The bundled coefficient table is synthetic. The published coefficients exist
only as a figure, so the default is built to have plausible COP (1.5-3),
to grow with compressor power, to fall slightly with ambient temperature and
to rise slightly with coolant outlet temperature. Load a calibrated table
with :meth:`LambdaTable.from_csv` or fit one with :func:`fit_lambda`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from ._interp import bracket
from .errors import (
    DataError,
    EmptySampleSet,
    InsufficientSamples,
    InvalidActuation,
    OutOfEnvelope,
    ParseError,
    RankDeficient,
)

P_COMP_MIN = 500.0
P_COMP_MAX = 4500.0
V_MAX_KMH = 120.0
N_COEF = 6
SAMPLE_COLUMNS = ("p_comp_w", "t_clnt_out_c", "t_air_c", "m_air_kgs", "m_clnt_kgs", "q_cool_w")


@dataclass(frozen=True)
class BtmsParams:
    c_clnt: float = 3330.0  # J/(kg degC)
    h_bat: float = 300.0  # W/(m2 degC)
    a_bat: float = 3.1  # m2
    m_clnt: float = 0.18  # kg/s
    t_air: float = 33.0  # degC
    aux_power: float = 200.0  # pump + fan, W
    p_comp_min: float = P_COMP_MIN
    p_comp_max: float = P_COMP_MAX

    def __post_init__(self):
        for name in ("c_clnt", "h_bat", "a_bat", "m_clnt", "aux_power", "p_comp_min", "p_comp_max"):
            if getattr(self, name) <= 0:
                raise DataError(f"{name} must be positive")
        if not 0.144 - 1e-12 <= self.m_clnt <= 0.216 + 1e-12:
            raise OutOfEnvelope(f"coolant mass flow {self.m_clnt} kg/s outside 0.144-0.216")
        if not 26.0 <= self.t_air <= 40.0:
            raise OutOfEnvelope(f"ambient temperature {self.t_air} degC outside 26-40")

    @property
    def exchange_factor(self):
        """Weight of the inlet temperature in the pack/coolant exchange, in (0, 1)."""
        return math.exp(-self.h_bat * self.a_bat / (self.m_clnt * self.c_clnt))

    @property
    def coolant_capacity_rate(self):
        return self.m_clnt * self.c_clnt


@dataclass(frozen=True)
class BtmsState:
    t_clnt_in: float = 33.0
    t_clnt_out: float = 33.0
    p_comp: float = 0.0


def check_actuation(p_comp, params=None):
    lo = params.p_comp_min if params else P_COMP_MIN
    hi = params.p_comp_max if params else P_COMP_MAX
    if p_comp < 0 or (0 < p_comp < lo) or p_comp > hi:
        raise InvalidActuation(f"compressor power {p_comp} W not in {{0}} U [{lo}, {hi}]")


def snap_actuation(p_comp, params=None):
    """Map a requested power onto the admissible set: dead band -> 0, cap at the ceiling."""
    lo = params.p_comp_min if params else P_COMP_MIN
    hi = params.p_comp_max if params else P_COMP_MAX
    if p_comp < lo:
        return 0.0
    return min(float(p_comp), hi)


def total_cooling_power(p_comp, params=None):
    check_actuation(p_comp, params)
    return p_comp + (params.aux_power if params else 200.0)


def air_mass_flow(v):
    """Condenser air mass flow (kg/s) at vehicle speed ``v`` km/h."""
    if np.any(np.asarray(v) < 0) or np.any(np.asarray(v) > V_MAX_KMH):
        raise OutOfEnvelope(f"speed outside [0, {V_MAX_KMH}] km/h")
    return 0.07065 + 0.00606 * v


def basis(p_comp, t_clnt_out, t_air, m_air, m_clnt):
    """Regressor columns of the cooling-rate surrogate."""
    p = np.asarray(p_comp, dtype=float)
    t_out = np.asarray(t_clnt_out, dtype=float)
    one = np.ones(np.broadcast(p, t_out, t_air, m_air, m_clnt).shape)
    return np.stack(
        [p * one, p * p * one, t_out * one, t_air * m_air * one, t_out * m_clnt * one, one], axis=-1
    )


class LambdaTable:
    """Surrogate coefficients on a rectangular (ambient temperature, coolant flow) grid.

    ``coefs[i, j]`` holds lambda1..lambda6 for ``t_air[i]``, ``m_clnt[j]``.
    Queries are bilinear between nodes and raise :class:`OutOfEnvelope`
    outside the grid.
    """

    def __init__(self, t_air, m_clnt, coefs, check=True):
        self.t_air = np.asarray(t_air, dtype=float)
        self.m_clnt = np.asarray(m_clnt, dtype=float)
        self.coefs = np.asarray(coefs, dtype=float)
        if self.coefs.shape != (len(self.t_air), len(self.m_clnt), N_COEF):
            raise DataError("coefficient array shape does not match the grid axes")
        self._cache = {}
        for ax in (self.t_air, self.m_clnt):
            if len(ax) < 1 or np.any(np.diff(ax) <= 0):
                raise DataError("grid axes must be strictly increasing")
        if check:
            self.check_admissible()

    def check_admissible(self, p_lo=P_COMP_MIN, p_hi=P_COMP_MAX):
        """Cooling rate must increase with compressor power over the whole operating range.

        The derivative is affine in power, so the two endpoints suffice.
        """
        l1, l2 = self.coefs[..., 0], self.coefs[..., 1]
        slope = np.minimum(l1 + 2 * l2 * p_lo, l1 + 2 * l2 * p_hi)
        if np.any(slope <= 0):
            i, j = np.argwhere(slope <= 0)[0]
            raise DataError(
                f"non-monotone surrogate at t_air={self.t_air[i]}, m_clnt={self.m_clnt[j]}"
            )

    def _axis_weights(self, axis, x, name):
        tol = 1e-9
        if np.any(np.asarray(x) < axis[0] - tol) or np.any(np.asarray(x) > axis[-1] + tol):
            raise OutOfEnvelope(f"{name}={x} outside calibrated grid [{axis[0]}, {axis[-1]}]")
        if len(axis) == 1:
            return np.zeros(np.shape(x), dtype=int), np.zeros(np.shape(x))
        return bracket(axis, x)

    def coefficients(self, t_air, m_clnt):
        """Bilinearly interpolated lambda vector."""
        if np.ndim(t_air) == 0 and np.ndim(m_clnt) == 0:
            key = (float(t_air), float(m_clnt))
            cache = self._cache
            if key not in cache:
                cache[key] = self._coefficients(*key)
                cache[key].setflags(write=False)
            return cache[key]
        return self._coefficients(t_air, m_clnt)

    def _coefficients(self, t_air, m_clnt):
        i, wi = self._axis_weights(self.t_air, t_air, "t_air")
        j, wj = self._axis_weights(self.m_clnt, m_clnt, "m_clnt")
        wi = np.asarray(wi)[..., None]
        wj = np.asarray(wj)[..., None]
        i1 = np.minimum(i + 1, len(self.t_air) - 1)
        j1 = np.minimum(j + 1, len(self.m_clnt) - 1)
        c = self.coefs
        return (1 - wi) * ((1 - wj) * c[i, j] + wj * c[i, j1]) + wi * ((1 - wj) * c[i1, j] + wj * c[i1, j1])

    def nearest_coefficients(self, t_air, m_clnt):
        """Coefficients of the region (nearest node) containing the query."""
        self._axis_weights(self.t_air, t_air, "t_air")
        self._axis_weights(self.m_clnt, m_clnt, "m_clnt")
        i = np.abs(self.t_air[:, None] - np.atleast_1d(t_air)[None, :]).argmin(axis=0)
        j = np.abs(self.m_clnt[:, None] - np.atleast_1d(m_clnt)[None, :]).argmin(axis=0)
        out = self.coefs[i, j]
        return out if np.ndim(t_air) else out[0]

    def predict(self, p_comp, t_clnt_out, t_air, m_air, m_clnt, mode="bilinear"):
        """Raw surrogate output without dead band or floor."""
        if mode == "bilinear":
            lam = self.coefficients(t_air, m_clnt)
        elif mode == "nearest":
            lam = self.nearest_coefficients(t_air, m_clnt)
        else:
            raise ValueError(f"unknown mode {mode!r}")
        return np.sum(basis(p_comp, t_clnt_out, t_air, m_air, m_clnt) * lam, axis=-1)

    def __eq__(self, other):
        return (
            isinstance(other, LambdaTable)
            and np.array_equal(self.t_air, other.t_air)
            and np.array_equal(self.m_clnt, other.m_clnt)
            and np.array_equal(self.coefs, other.coefs)
        )

    def to_csv(self, path, fingerprint=None):
        path = Path(path)
        with path.open("w", newline="") as f:
            if fingerprint:
                f.write(f"# fingerprint: {fingerprint}\n")
            w = csv.writer(f)
            w.writerow(["axis", "t_air_c", *[repr(float(x)) for x in self.t_air]])
            w.writerow(["axis", "m_clnt_kgs", *[repr(float(x)) for x in self.m_clnt]])
            w.writerow(["t_air_c", "m_clnt_kgs", *[f"lambda{k + 1}" for k in range(N_COEF)]])
            for i, ta in enumerate(self.t_air):
                for j, mc in enumerate(self.m_clnt):
                    w.writerow([repr(float(ta)), repr(float(mc)), *[repr(float(x)) for x in self.coefs[i, j]]])
        return path

    @classmethod
    def from_csv(cls, path, check=True):
        try:
            with Path(path).open(newline="") as f:
                rows = [r for r in csv.reader(f) if r and not r[0].startswith("#")]
        except OSError as exc:
            raise ParseError(f"cannot read {path}: {exc}") from exc
        try:
            axes = {r[1]: np.array([float(x) for x in r[2:]]) for r in rows if r[0] == "axis"}
            t_air, m_clnt = axes["t_air_c"], axes["m_clnt_kgs"]
            body = [r for r in rows if r[0] not in ("axis", "t_air_c")]
            coefs = np.full((len(t_air), len(m_clnt), N_COEF), np.nan)
            for r in body:
                i = int(np.argmin(np.abs(t_air - float(r[0]))))
                j = int(np.argmin(np.abs(m_clnt - float(r[1]))))
                coefs[i, j] = [float(x) for x in r[2 : 2 + N_COEF]]
        except (KeyError, ValueError, IndexError) as exc:
            raise ParseError(f"{path}: malformed coefficient table ({exc})") from exc
        if np.isnan(coefs).any():
            raise ParseError(f"{path}: coefficient table does not cover every grid node")
        return cls(t_air, m_clnt, coefs, check=check)


def synthetic_coefficients(t_air, m_clnt):
    """Stand-in surrogate coefficients (see module docstring)."""
    return np.array(
        [
            3.0 - 0.015 * (t_air - 33.0) + 1.5 * (m_clnt - 0.18),
            -2.0e-4,
            15.0,
            -10.0,
            20.0,
            -700.0 - 5.0 * (t_air - 33.0),
        ]
    )


DEFAULT_T_AIR_NODES = (26.0, 28.0, 30.0, 33.0, 35.0, 38.0, 40.0)
DEFAULT_M_CLNT_NODES = (0.144, 0.18, 0.216)


def default_lambda_table():
    with resources.as_file(resources.files("battcool") / "data" / "lambda_default.csv") as p:
        return LambdaTable.from_csv(p)


def build_synthetic_table(t_air_nodes=DEFAULT_T_AIR_NODES, m_clnt_nodes=DEFAULT_M_CLNT_NODES):
    coefs = np.array([[synthetic_coefficients(ta, mc) for mc in m_clnt_nodes] for ta in t_air_nodes])
    return LambdaTable(t_air_nodes, m_clnt_nodes, coefs)


def cooling_rate(p_comp, state, t_air, v, params, table):
    """Cooling delivered to the pack (W), evaluated at the last coolant outlet temperature.

    Zero inside the compressor dead band and floored at zero elsewhere.
    """
    if p_comp < params.p_comp_min:
        if p_comp < 0:
            check_actuation(p_comp, params)
        return 0.0
    check_actuation(p_comp, params)
    m_air = air_mass_flow(min(max(v, 0.0), V_MAX_KMH))
    q = float(table.predict(p_comp, state.t_clnt_out, t_air, m_air, params.m_clnt))
    return max(q, 0.0)


def coolant_outlet(t_clnt_in, t_bat, params):
    e = params.exchange_factor
    return (t_clnt_in - t_bat) * e + t_bat


def coolant_inlet(t_clnt_out, q_cool, params):
    return t_clnt_out - q_cool / params.coolant_capacity_rate


def quasi_steady_cooling(p_comp, t_bat, t_air, v, params, table):
    """Cooling rate and outlet temperature once the coolant loop has settled.

    Eliminates the loop algebraically: the outlet sits ``e/(1-e) * Q/(m c)``
    below the pack, and ``Q`` is affine in the outlet temperature, so the
    fixed point is closed-form. Vectorised over ``p_comp`` and ``t_bat``.
    Used by the predictive optimisers, whose state is pack temperature only.
    """
    p = np.asarray(p_comp, dtype=float)
    t_bat = np.asarray(t_bat, dtype=float)
    lam = table.coefficients(t_air, params.m_clnt)
    m_air = air_mass_flow(min(max(v, 0.0), V_MAX_KMH))
    e = params.exchange_factor
    k = e / (1.0 - e) / params.coolant_capacity_rate
    a = lam[0] * p + lam[1] * p * p + lam[3] * t_air * m_air + lam[5]
    b = lam[2] + lam[4] * params.m_clnt
    t_out = (t_bat - k * a) / (1.0 + k * b)
    q = a + b * t_out
    active = (p >= params.p_comp_min) & (q > 0)
    q = np.where(active, q, 0.0)
    t_out = np.where(active, t_out, t_bat)
    return q, t_out


def fit_lambda(samples, t_air_nodes=DEFAULT_T_AIR_NODES, m_clnt_nodes=DEFAULT_M_CLNT_NODES, check=True):
    """Piecewise least-squares calibration of the surrogate.

    Each sample is assigned to the region of its nearest (t_air, m_clnt)
    node and every region is fitted independently on the six surrogate
    regressors. A region needs variation in coolant flow as well as outlet
    temperature, otherwise the two outlet-temperature columns are collinear
    and :class:`RankDeficient` is raised.
    """
    s = np.asarray(samples, dtype=float)
    if s.size == 0:
        raise InsufficientSamples("no calibration samples")
    if s.ndim != 2 or s.shape[1] != 6:
        raise DataError("samples must be rows of (p_comp, t_clnt_out, t_air, m_air, m_clnt, q_cool)")
    t_air_nodes = np.asarray(t_air_nodes, dtype=float)
    m_clnt_nodes = np.asarray(m_clnt_nodes, dtype=float)
    bi = np.abs(s[:, 2:3] - t_air_nodes[None, :]).argmin(axis=1)
    bj = np.abs(s[:, 4:5] - m_clnt_nodes[None, :]).argmin(axis=1)
    coefs = np.empty((len(t_air_nodes), len(m_clnt_nodes), N_COEF))
    for i, ta in enumerate(t_air_nodes):
        for j, mc in enumerate(m_clnt_nodes):
            rows = s[(bi == i) & (bj == j)]
            if len(rows) < N_COEF:
                raise InsufficientSamples(
                    f"region t_air~{ta}, m_clnt~{mc} has {len(rows)} samples, need {N_COEF}"
                )
            x = basis(rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3], rows[:, 4])
            # column scaling keeps the rank test meaningful despite the P^2 column
            scale = np.linalg.norm(x, axis=0)
            scale[scale == 0] = 1.0
            xs = x / scale
            if np.linalg.matrix_rank(xs, tol=1e-10 * math.sqrt(len(rows))) < N_COEF:
                raise RankDeficient(f"region t_air~{ta}, m_clnt~{mc}: design matrix is singular")
            sol, *_ = np.linalg.lstsq(xs, rows[:, 5], rcond=None)
            coefs[i, j] = sol / scale
    return LambdaTable(t_air_nodes, m_clnt_nodes, coefs, check=check)


def fit_quality(table, samples, mode="nearest"):
    """Fractions of samples predicted within 5 % and within 10 % relative error."""
    s = np.asarray(samples, dtype=float)
    if s.size == 0:
        raise EmptySampleSet("fit quality needs at least one sample")
    s = np.atleast_2d(s)
    pred = table.predict(s[:, 0], s[:, 1], s[:, 2], s[:, 3], s[:, 4], mode=mode)
    truth = s[:, 5]
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(pred - truth) / np.abs(truth)
    rel = np.where(truth == 0, np.where(pred == 0, 0.0, np.inf), rel)
    return float(np.mean(rel < 0.05)), float(np.mean(rel < 0.10))


def read_samples(path):
    try:
        with Path(path).open(newline="") as f:
            rows = list(csv.DictReader(f))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: no samples")
    try:
        return np.array([[float(r[c]) for c in SAMPLE_COLUMNS] for r in rows])
    except (KeyError, ValueError) as exc:
        raise ParseError(f"{path}: expected columns {', '.join(SAMPLE_COLUMNS)}") from exc


def write_samples(path, samples):
    with Path(path).open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(SAMPLE_COLUMNS)
        for row in np.asarray(samples, dtype=float):
            w.writerow([repr(float(x)) for x in row])
