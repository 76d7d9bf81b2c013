"""Hidden-variable models of the two-particle spin singlet.

Each model exposes its analytic joint law (when one exists in closed
form), a sampler for its hidden variables, the per-trial outcome rule,
and a set of hypothesis-compliance flags. All samplers are pure
functions of their inputs and a :class:`~lhvlab.geometry.RandomStream`;
vector arguments broadcast, so the same functions serve single trials
and batched Monte Carlo.

Conventions: outcomes are +-1, analyzers and hidden spins are unit
vectors, and the sign convention sgn(0) = +1 applies throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import RandomStream, assert_unit, sgn

LAW_TOL = 1e-12

# Rejection envelope for the maximal-measurement-dependence sampler.
# sup of (1-f)/(8*arccos f) over f in [-1, 1] is ~0.0905764 (attained
# near f = -0.689, where tan(arccos(f)/2) = arccos(f)), so the constant
# below clears a 1.05x safety margin. Verified by grid scan in
# _check_hall_envelope at import.
HALL_ENVELOPE = 0.0952

_OUT_INDEX = {1: 0, -1: 1}
_OUTCOMES = (1, -1)


class JointLaw2x2:
    """Joint probability table for a pair of +-1 outcomes at fixed settings.

    Indexed by (sigma, tau) with +1 first; entries must be nonnegative
    and sum to one within LAW_TOL.
    """

    def __init__(self, p, n_trials: int | None = None):
        p = np.asarray(p, dtype=float)
        if p.shape != (2, 2):
            raise ValueError("joint law needs a 2x2 table")
        if np.any(p < -LAW_TOL):
            raise ValueError(f"negative probability in joint law: {p!r}")
        if abs(float(p.sum()) - 1.0) > LAW_TOL:
            raise ValueError(f"joint law must sum to 1, got {float(p.sum())!r}")
        self.p = np.maximum(p, 0.0)
        self.n_trials = n_trials

    def prob(self, sigma: int, tau: int) -> float:
        return float(self.p[_OUT_INDEX[sigma], _OUT_INDEX[tau]])

    def correlator(self) -> float:
        """Expectation of sigma*tau."""
        return float(self.p[0, 0] - self.p[0, 1] - self.p[1, 0] + self.p[1, 1])

    def marginal_sigma(self, sigma: int) -> float:
        return float(self.p[_OUT_INDEX[sigma]].sum())

    def marginal_tau(self, tau: int) -> float:
        return float(self.p[:, _OUT_INDEX[tau]].sum())

    def std_error(self) -> float:
        """Worst-case Monte Carlo standard error per entry (0 if analytic)."""
        if not self.n_trials:
            return 0.0
        return 0.5 / math.sqrt(self.n_trials)

    def max_abs_diff(self, other: "JointLaw2x2") -> float:
        return float(np.abs(self.p - other.p).max())

    def as_dict(self) -> dict:
        return {f"p({s:+d},{t:+d})": self.prob(s, t) for s in _OUTCOMES for t in _OUTCOMES}

    @classmethod
    def from_outcomes(cls, sigma, tau) -> "JointLaw2x2":
        """Empirical law from arrays of +-1 outcomes."""
        sigma = np.asarray(sigma)
        tau = np.asarray(tau)
        n = sigma.size
        if n == 0:
            raise ValueError("cannot estimate a law from zero trials")
        p = np.empty((2, 2))
        sp = sigma > 0
        tp = tau > 0
        p[0, 0] = np.count_nonzero(sp & tp)
        p[0, 1] = np.count_nonzero(sp & ~tp)
        p[1, 0] = np.count_nonzero(~sp & tp)
        p[1, 1] = np.count_nonzero(~sp & ~tp)
        return cls(p / n, n_trials=n)

    def __repr__(self):
        return f"JointLaw2x2({self.p.tolist()})"


def uniform_law() -> JointLaw2x2:
    return JointLaw2x2(np.full((2, 2), 0.25))


def singlet_law(a, b) -> JointLaw2x2:
    """Reference joint law P(sigma, tau) = (1 - sigma*tau a.b)/4."""
    t = float(np.dot(assert_unit(a, "a"), assert_unit(b, "b")))
    p = np.array([[1 - t, 1 + t], [1 + t, 1 - t]]) / 4.0
    return JointLaw2x2(p)


def malus_marginal(u, n, outcome):
    """Malus probability (1 + outcome * u.n)/2 for hidden spin u and analyzer n."""
    d = np.sum(np.asarray(u, dtype=float) * np.asarray(n, dtype=float), axis=-1)
    return (1.0 + np.asarray(outcome) * d) / 2.0


def malus_draw(u, n, stream: RandomStream):
    """Sample +-1 outcomes from the Malus marginal, one uniform per trial."""
    p_plus = malus_marginal(u, n, 1)
    size = None if np.ndim(p_plus) == 0 else np.shape(p_plus)[0]
    draw = stream.uniform(size)
    out = np.where(draw < p_plus, 1.0, -1.0)
    return float(out) if np.ndim(p_plus) == 0 else out


# ---------------------------------------------------------------------------
# Communication model and its two indeterministic extensions


def tb_outcomes(u, v, a, b):
    """Deterministic outcome pair of the one-bit communication model.

    sigma = sgn(u.a); the bit c = sgn(u.a)*sgn(v.a) travels to the other
    station, which outputs tau = -sgn((u + c v).b).
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    sigma = sgn(np.sum(u * a, axis=-1))
    c = sigma * sgn(np.sum(v * a, axis=-1))
    tau = -sgn(np.sum((u + np.asarray(c)[..., None] * v) * b, axis=-1))
    return sigma, tau


class IncompatiblePriors:
    """Sentinel for the 0/0 conditional branch: the queried outcome cannot
    occur together with the given hidden variables and setting."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INCOMPATIBLE_PRIORS"


INCOMPATIBLE_PRIORS = IncompatiblePriors()


def tb_conditional(u, v, a, b, sigma, tau):
    """Conditional probability of tau at the second station given sigma.

    Unreachable in forward simulation when sigma disagrees with the
    deterministic first-station outcome; querying that branch returns the
    INCOMPATIBLE_PRIORS sentinel instead of a number.
    """
    s, t = tb_outcomes(u, v, a, b)
    if float(s) != float(sigma):
        return INCOMPATIBLE_PRIORS
    return 1.0 if float(t) == float(tau) else 0.0


def tb_extension_law(p: float, family: int, a, b) -> JointLaw2x2:
    """Averaged law of the two indeterministic extensions.

    Family 1 keeps the bit a function of (u, v, a) and gives
    (1 - (2p-1) sigma*tau a.b)/4; family 2 ties the bit to the actual
    outcome and gives (1 - p sigma*tau a.b)/4.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    if family not in (1, 2):
        raise ValueError(f"family must be 1 or 2, got {family!r}")
    t = float(np.dot(assert_unit(a, "a"), assert_unit(b, "b")))
    k = (2.0 * p - 1.0) if family == 1 else p
    q = k * t
    return JointLaw2x2(np.array([[1 - q, 1 + q], [1 + q, 1 - q]]) / 4.0)


def tb_extension_sample(p: float, family: int, u, v, a, b, stream: RandomStream):
    """Sampled outcomes of the indeterministic extensions.

    The first station outputs its deterministic value with probability p
    and the flipped value otherwise. Family 1 computes the bit from
    (u, v, a); family 2 computes it from the realized sigma.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    u = np.atleast_2d(np.asarray(u, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    n = u.shape[0]
    S = sgn(u @ a)
    keep = stream.uniform(n) < p
    sigma = np.where(keep, S, -S)
    if family == 1:
        c = S * sgn(v @ a)
    elif family == 2:
        c = sigma * sgn(v @ a)
    else:
        raise ValueError(f"family must be 1 or 2, got {family!r}")
    tau = -sgn(np.sum((u + c[:, None] * v) * b, axis=-1))
    return sigma, tau


def tb_freewill_density(u, v, c, a, b):
    """Hidden-variable density of the constrained-choice reading.

    Uniform over (u, v) times an indicator selecting the bit value
    compatible with the setting: c must equal sgn(u.a)*sgn(v.a).
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    want = sgn(np.sum(u * a, axis=-1)) * sgn(np.sum(v * a, axis=-1))
    match = np.asarray(c) == want
    return np.where(match, 1.0 / (4.0 * math.pi) ** 2, 0.0)


def tb_freewill_sample(a, b, n: int, stream: RandomStream):
    """Draw (u, v, c) with u, v uniform and c fixed by the constraint."""
    u = stream.sphere(n)
    v = stream.sphere(n)
    c = sgn(u @ a) * sgn(v @ a)
    return u, v, c


# ---------------------------------------------------------------------------
# Maximal-measurement-dependence model (deterministic outcomes)


def hall_f(u, a, b):
    """Correlation kernel sgn(u.a) * sgn(-u.b) * (a.b), with the partner
    spin fixed to -u. Invariant under u -> -u."""
    u = np.asarray(u, dtype=float)
    t = float(np.dot(a, b))
    return sgn(np.sum(u * a, axis=-1)) * sgn(-np.sum(u * b, axis=-1)) * t


def _hall_g(f):
    """(1 - f)/(8 arccos f) with the removable singularity at f -> 1
    evaluated as its limit 0."""
    f = np.asarray(f, dtype=float)
    near_one = f > 1.0 - 1e-9
    safe = np.where(near_one, 0.0, f)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = (1.0 - safe) / (8.0 * np.arccos(safe))
    return np.where(near_one, 0.0, g)


def hall_density(u, a, b):
    """Setting-conditioned density of the hidden spin u on the sphere."""
    out = _hall_g(hall_f(u, a, b))
    return float(out) if np.ndim(out) == 0 else out


def hall_settings_conditional(u, a, b):
    """Conditional density of the settings pair (a, b) given u, under a
    uniform prior on settings; equals hall_density / (4*pi)."""
    out = _hall_g(hall_f(u, a, b)) / (4.0 * math.pi)
    return float(out) if np.ndim(out) == 0 else out


def _check_hall_envelope():
    f = np.linspace(-1.0, 1.0, 100_001)
    peak = float(_hall_g(f).max())
    if HALL_ENVELOPE < 1.05 * peak:
        raise AssertionError(
            f"rejection envelope {HALL_ENVELOPE} below 1.05 * scanned peak {peak}")


_check_hall_envelope()


def hall_sample(a, b, n: int, stream: RandomStream) -> np.ndarray:
    """Draw n hidden spins from hall_density by rejection against the
    constant envelope HALL_ENVELOPE.

    Aborts if any candidate density exceeds the envelope, which would
    silently bias acceptance.
    """
    a = assert_unit(a, "a")
    b = assert_unit(b, "b")
    out = np.empty((n, 3))
    filled = 0
    while filled < n:
        m = max(2 * (n - filled), 1024)
        cand = stream.sphere(m)
        dens = hall_density(cand, a, b)
        if np.any(dens > HALL_ENVELOPE):
            raise RuntimeError(
                f"envelope violation: density {float(dens.max())} > {HALL_ENVELOPE}")
        acc = stream.uniform(m) * HALL_ENVELOPE < dens
        take = cand[acc][: n - filled]
        out[filled:filled + len(take)] = take
        filled += len(take)
    return out


def hall_outcomes(u, a, b):
    """Deterministic outcomes sigma = sgn(u.a), tau = sgn(-u.b)."""
    u = np.asarray(u, dtype=float)
    sigma = sgn(np.sum(u * a, axis=-1))
    tau = sgn(-np.sum(u * b, axis=-1))
    return sigma, tau


# ---------------------------------------------------------------------------
# Setting-tied atomic model (Malus outcomes) and the bound-breaking mixture


def pinned_spin_sample(a, b, n: int, stream: RandomStream):
    """Draw hidden spins from the four setting-tied atoms.

    Coins c in {0, 1} and d in {-1, +1} are uniform; c = 0 puts the spin
    at u = d*a, c = 1 puts it at u = -d*b (so the partner spin -u equals
    d*b). Each of the four atoms carries weight 1/4.
    """
    a = assert_unit(a, "a")
    b = assert_unit(b, "b")
    c = stream.bits(n)
    d = stream.signs(n)
    u = np.where((c == 0)[:, None], d[:, None] * a, -d[:, None] * b)
    return u, c, d


def pinned_spin_outcomes(u, a, b, stream: RandomStream):
    """Independent Malus draws on each side: sigma from (u, a), tau from
    (-u, b)."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    sigma = malus_draw(u, a, stream)
    tau = malus_draw(-u, b, stream)
    return sigma, tau


def mixed_law(a, b) -> JointLaw2x2:
    """Joint law (1 - sigma*tau sgn(a.b))/4 of the mixture that keeps the
    atomic hidden-spin distribution but replaces Malus outcomes with the
    deterministic sign rule.

    At a.b = 0 the sgn(0) = +1 convention applies; callers that care can
    flag orthogonal settings.
    """
    s = sgn(float(np.dot(assert_unit(a, "a"), assert_unit(b, "b"))))
    p = np.array([[1 - s, 1 + s], [1 + s, 1 - s]]) / 4.0
    return JointLaw2x2(p)


# ---------------------------------------------------------------------------
# Model registry, analytic laws, and Monte Carlo law estimation


@dataclass(frozen=True)
class ModelFlags:
    """Hypothesis compliance of a model; every flag is exercised by the
    property suite rather than merely declared."""

    deterministic: bool
    setting_independent: bool
    reducible_correlations: bool
    uncorrelated_choice: bool
    malus_compliant: bool


_MODEL_FLAGS = {
    "tb": ModelFlags(True, False, True, True, False),
    "tb-ext1": ModelFlags(False, False, True, True, False),
    "tb-ext2": ModelFlags(False, True, False, True, False),
    "tb-freewill": ModelFlags(True, True, True, False, False),
    "pinned": ModelFlags(False, True, True, False, True),
    "hall": ModelFlags(True, True, True, False, False),
    "mixed": ModelFlags(True, True, True, False, False),
}

MODEL_IDS = tuple(_MODEL_FLAGS)


def model_flags(model_id: str) -> ModelFlags:
    try:
        return _MODEL_FLAGS[model_id]
    except KeyError:
        raise KeyError(f"unknown model {model_id!r}; known: {sorted(_MODEL_FLAGS)}") from None


def analytic_law(model_id: str, a, b, p: float | None = None) -> JointLaw2x2:
    """Closed-form joint law, for the models that have one."""
    if model_id in ("singlet", "pinned", "hall", "tb", "tb-freewill"):
        return singlet_law(a, b)
    if model_id == "mixed":
        return mixed_law(a, b)
    if model_id == "uniform":
        return uniform_law()
    if model_id in ("tb-ext1", "tb-ext2"):
        if p is None:
            raise ValueError(f"{model_id} needs the mixing probability p")
        return tb_extension_law(p, 1 if model_id == "tb-ext1" else 2, a, b)
    raise KeyError(f"no analytic law for model {model_id!r}")


def sample_outcomes(model_id: str, a, b, n: int, stream: RandomStream,
                    p: float | None = None):
    """Draw n outcome pairs from the named model at fixed settings."""
    a = assert_unit(a, "a")
    b = assert_unit(b, "b")
    if model_id == "tb" or model_id == "tb-freewill":
        # Identical outcome statistics; they differ in who carries the bit,
        # which only the protocol runners account for.
        u = stream.sphere(n)
        v = stream.sphere(n)
        return tb_outcomes(u, v, a, b)
    if model_id in ("tb-ext1", "tb-ext2"):
        if p is None:
            raise ValueError(f"{model_id} needs the mixing probability p")
        u = stream.sphere(n)
        v = stream.sphere(n)
        return tb_extension_sample(p, 1 if model_id == "tb-ext1" else 2, u, v, a, b, stream)
    if model_id == "pinned":
        u, _, _ = pinned_spin_sample(a, b, n, stream)
        return pinned_spin_outcomes(u, a, b, stream)
    if model_id == "hall":
        u = hall_sample(a, b, n, stream)
        return hall_outcomes(u, a, b)
    if model_id == "mixed":
        u, _, _ = pinned_spin_sample(a, b, n, stream)
        return hall_outcomes(u, a, b)
    raise KeyError(f"unknown sampling model {model_id!r}")


def estimate_law(model_id: str, a, b, n: int, stream: RandomStream,
                 p: float | None = None) -> JointLaw2x2:
    """Monte Carlo estimate of the joint law at fixed settings."""
    sigma, tau = sample_outcomes(model_id, a, b, n, stream, p=p)
    return JointLaw2x2.from_outcomes(sigma, tau)
