"""Correlators, CHSH statistics, master-probability feasibility, and the
card-deck factorability counterexample.

The CHSH parameter is checked against three thresholds: 2 (the bound for
any master probability), 2*sqrt(2) (the quantum maximum), and the
algebraic ceiling 4. Feasibility of a correlator/marginal vector against
the master-probability polytope is decided twice, by an exact rational
LP over the 16 outcome atoms and by the facet inequalities, and the two
verdicts are cross-validated.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .exactlp import feasible_point
from .geometry import RandomStream
from .models import JointLaw2x2, sample_outcomes, malus_marginal, hall_sample, \
    pinned_spin_sample, tb_freewill_sample, sgn

BELL_BOUND = 2.0
CIRELSON_BOUND = 2.0 * math.sqrt(2.0)
ALGEBRAIC_BOUND = 4.0

# Outcome quadruples (sigma, tau, sigma2, tau2) in a fixed order.
_QUAD = list(itertools.product((1, -1), repeat=4))


@dataclass(frozen=True)
class CorrelatorEstimate:
    """Correlator value with its Monte Carlo uncertainty (0 if analytic)."""

    value: float
    std_error: float = 0.0
    n_trials: int = 0

    def as_dict(self) -> dict:
        return {"value": self.value, "std_error": self.std_error, "n_trials": self.n_trials}


def correlator(source) -> CorrelatorEstimate:
    """Correlator of sigma*tau from a JointLaw2x2 or a pair of outcome arrays."""
    if isinstance(source, JointLaw2x2):
        value = source.correlator()
        n = source.n_trials or 0
        se = math.sqrt(max(0.0, 1.0 - value * value) / n) if n else 0.0
        return CorrelatorEstimate(value, se, n)
    sigma, tau = source
    prod = np.asarray(sigma) * np.asarray(tau)
    n = prod.size
    if n == 0:
        raise ValueError("cannot estimate a correlator from zero trials")
    value = float(prod.mean())
    se = float(prod.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return CorrelatorEstimate(value, se, n)


@dataclass
class ChshReport:
    """CHSH statistic E = |C1 + C2 + C3 - C4| and its bound comparisons."""

    E: float
    correlators: tuple
    settings: dict
    exceeds_bell: bool
    exceeds_cirelson: bool

    def as_dict(self) -> dict:
        return {
            "E": self.E,
            "correlators": [c.as_dict() for c in self.correlators],
            "settings": self.settings,
            "exceeds_bell": self.exceeds_bell,
            "exceeds_cirelson": self.exceeds_cirelson,
        }


def chsh_from_correlators(c1: CorrelatorEstimate, c2: CorrelatorEstimate,
                          c3: CorrelatorEstimate, c4: CorrelatorEstimate,
                          settings: dict | None = None) -> ChshReport:
    """Combine C(a,b), C(a2,b), C(a,b2), C(a2,b2); the last enters with a
    minus sign."""
    E = abs(c1.value + c2.value + c3.value - c4.value)
    return ChshReport(
        E=E,
        correlators=(c1, c2, c3, c4),
        settings=settings or {},
        exceeds_bell=E > BELL_BOUND,
        exceeds_cirelson=E > CIRELSON_BOUND,
    )


def _settings_dict(a, a2, b, b2) -> dict:
    return {k: [float(x) for x in v] for k, v in
            (("a", a), ("a2", a2), ("b", b), ("b2", b2))}


def chsh_analytic(model_id: str, a, a2, b, b2, p: float | None = None) -> ChshReport:
    """CHSH from a model's closed-form law at the four setting pairs."""
    from .models import analytic_law

    cs = [correlator(analytic_law(model_id, x, y, p=p))
          for x, y in ((a, b), (a2, b), (a, b2), (a2, b2))]
    return chsh_from_correlators(*cs, settings=_settings_dict(a, a2, b, b2))


def chsh_mc(model_id: str, a, a2, b, b2, n: int, stream: RandomStream,
            p: float | None = None) -> ChshReport:
    """CHSH from n Monte Carlo trials per setting pair."""
    cs = [correlator(sample_outcomes(model_id, x, y, n, stream, p=p))
          for x, y in ((a, b), (a2, b), (a, b2), (a2, b2))]
    return chsh_from_correlators(*cs, settings=_settings_dict(a, a2, b, b2))


# ---------------------------------------------------------------------------
# Master probability over the four counterfactual outcomes


class MasterProb16:
    """Candidate joint distribution over (sigma, tau, sigma2, tau2) in
    {+-1}^4, held as exact rationals."""

    def __init__(self, q):
        q = [Fraction(x) for x in q]
        if len(q) != 16:
            raise ValueError("master probability needs 16 entries")
        if any(x < 0 for x in q):
            raise ValueError("master probability entries must be nonnegative")
        if sum(q) != 1:
            raise ValueError("master probability must sum to exactly 1")
        self.q = q

    @classmethod
    def uniform(cls) -> "MasterProb16":
        return cls([Fraction(1, 16)] * 16)

    @classmethod
    def random(cls, stream: RandomStream, resolution: int = 1000) -> "MasterProb16":
        """Random rational distribution: integer weights normalized exactly."""
        w = [int(x) for x in stream.integers(0, resolution, 16)]
        if sum(w) == 0:
            w[0] = 1
        total = sum(w)
        return cls([Fraction(x, total) for x in w])

    def correlators(self):
        """Exact (C(a,b), C(a2,b), C(a,b2), C(a2,b2)) induced by the master."""
        c = [Fraction(0)] * 4
        for (s, t, s2, t2), w in zip(_QUAD, self.q):
            c[0] += s * t * w
            c[1] += s2 * t * w
            c[2] += s * t2 * w
            c[3] += s2 * t2 * w
        return tuple(c)

    def marginals(self):
        """Exact single-outcome means (m_a, m_a2, m_b, m_b2)."""
        m = [Fraction(0)] * 4
        for (s, t, s2, t2), w in zip(_QUAD, self.q):
            m[0] += s * w
            m[1] += s2 * w
            m[2] += t * w
            m[3] += t2 * w
        return tuple(m)

    def chsh_value(self) -> Fraction:
        c1, c2, c3, c4 = self.correlators()
        return abs(c1 + c2 + c3 - c4)

    def as_dict(self) -> dict:
        return {f"q({s:+d},{t:+d},{s2:+d},{t2:+d})": float(w)
                for (s, t, s2, t2), w in zip(_QUAD, self.q)}


# The 8 facet sign patterns: odd number of -1 coefficients.
CHSH_FACETS = tuple(s for s in itertools.product((1, -1), repeat=4)
                    if s[0] * s[1] * s[2] * s[3] == -1)


def _facet_name(signs) -> str:
    return "CHSH[" + "".join("+" if s > 0 else "-" for s in signs) + "]"


@dataclass
class FeasibilityResult:
    feasible: bool
    witness: MasterProb16 | None
    facet_violated: str | None
    lp_feasible: bool
    facet_feasible: bool | None

    def as_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "witness": self.witness.as_dict() if self.witness else None,
            "facet_violated": self.facet_violated,
            "lp_feasible": self.lp_feasible,
            "facet_feasible": self.facet_feasible,
        }


def _facet_check(C, M):
    """Exact facet test: pairwise-law nonnegativity plus the 8 CHSH facets.
    Returns (feasible, worst violated facet name or None)."""
    worst = None
    worst_gap = Fraction(0)
    pair_m = [(M[0], M[2]), (M[1], M[2]), (M[0], M[3]), (M[1], M[3])]
    pair_names = ["ab", "a2b", "ab2", "a2b2"]
    for i in range(4):
        ma, mb = pair_m[i]
        for s in (1, -1):
            for t in (1, -1):
                val = 1 + s * ma + t * mb + s * t * C[i]
                if val < 0 and -val > worst_gap:
                    worst_gap = -val
                    worst = f"pair[{pair_names[i]}]({s:+d},{t:+d})"
    for signs in CHSH_FACETS:
        val = sum(si * ci for si, ci in zip(signs, C))
        if val > 2 and val - 2 > worst_gap:
            worst_gap = val - 2
            worst = _facet_name(signs)
    return worst is None, worst


def fine_feasibility(correlators4, marginals4=None, correlator_tol=None,
                     marginal_tol=None) -> FeasibilityResult:
    """Decide whether a master probability reproduces the given pairwise
    correlators (order: C(a,b), C(a2,b), C(a,b2), C(a2,b2)) and single
    marginals (m_a, m_a2, m_b, m_b2; default 0).

    Two independent criteria run: (i) exact phase-1 LP over the 16
    nonnegative atoms, (ii) the facet inequalities (pairwise-law
    nonnegativity plus the 8 CHSH facets). With zero tolerances they are
    cross-validated and any disagreement raises. With nonzero tolerances
    each constraint is relaxed to a band (for Monte Carlo estimates) and
    the LP alone decides.
    """
    C = [Fraction(x) for x in correlators4]
    M = [Fraction(x) for x in (marginals4 if marginals4 is not None else [0, 0, 0, 0])]
    ct = [Fraction(x) for x in (correlator_tol if correlator_tol is not None else [0] * 4)]
    mt = [Fraction(x) for x in (marginal_tol if marginal_tol is not None else [0] * 4)]
    if len(C) != 4 or len(M) != 4 or len(ct) != 4 or len(mt) != 4:
        raise ValueError("need 4 correlators, 4 marginals, and 4+4 tolerances")
    for i, c in enumerate(C):
        if abs(c) > 1 + ct[i]:
            raise ValueError(f"inconsistent input: |C[{i}]| = {float(abs(c))} > 1")
    for i, m in enumerate(M):
        if abs(m) > 1 + mt[i]:
            raise ValueError(f"inconsistent input: |marginal[{i}]| = {float(abs(m))} > 1")

    corr_rows = [[Fraction(s * t) for (s, t, _, _) in _QUAD],
                 [Fraction(s2 * t) for (_, t, s2, _) in _QUAD],
                 [Fraction(s * t2) for (s, _, _, t2) in _QUAD],
                 [Fraction(s2 * t2) for (_, _, s2, t2) in _QUAD]]
    marg_rows = [[Fraction(s) for (s, _, _, _) in _QUAD],
                 [Fraction(t) for (_, t, _, _) in _QUAD],
                 [Fraction(s2) for (_, _, s2, _) in _QUAD],
                 [Fraction(t2) for (_, _, _, t2) in _QUAD]]
    # Marginal order in the LP follows (m_a, m_b, m_a2, m_b2) remapped below.
    marg_rows = [marg_rows[0], marg_rows[2], marg_rows[1], marg_rows[3]]

    A_eq = [[Fraction(1)] * 16]
    b_eq = [Fraction(1)]
    A_ub = []
    b_ub = []
    for rows, vals, tols in ((corr_rows, C, ct), (marg_rows, M, mt)):
        for row, val, tol in zip(rows, vals, tols):
            if tol == 0:
                A_eq.append(row)
                b_eq.append(val)
            else:
                A_ub.append(row)
                b_ub.append(val + tol)
                A_ub.append([-x for x in row])
                b_ub.append(tol - val)

    x = feasible_point(A_eq, b_eq, A_ub, b_ub)
    lp_feasible = x is not None
    witness = MasterProb16(x) if lp_feasible else None
    if lp_feasible and all(c == 0 for c in C) and all(m == 0 for m in M):
        witness = MasterProb16.uniform()  # canonical witness for the trivial input

    relaxed = any(t != 0 for t in ct + mt)
    facet_feasible, violated = _facet_check(C, M)
    if not relaxed and facet_feasible != lp_feasible:
        raise AssertionError(
            f"feasibility cross-validation failed: LP says {lp_feasible}, "
            f"facets say {facet_feasible} for C={[float(c) for c in C]}")
    feasible = lp_feasible
    return FeasibilityResult(
        feasible=feasible,
        witness=witness,
        facet_violated=None if feasible else violated,
        lp_feasible=lp_feasible,
        facet_feasible=None if relaxed else facet_feasible,
    )


def counterfactual_correlators(model_id: str, a, a2, b, b2, n: int,
                               stream: RandomStream):
    """Correlators at the four setting pairs evaluated on a single frozen
    batch of hidden variables.

    The hidden variables are drawn once from the model's distribution at
    the reference pair (a, b); outcomes at every setting pair are then
    computed from the same draw (with common per-side noise for the
    stochastic model), which is the counterfactual reading under which a
    master probability exists.
    """
    pairs = ((a, b), (a2, b), (a, b2), (a2, b2))
    if model_id == "pinned":
        u, _, _ = pinned_spin_sample(a, b, n, stream)
        noise_a = stream.uniform(n)
        noise_b = stream.uniform(n)
        outs = []
        for (x, y) in pairs:
            sig = np.where(noise_a < malus_marginal(u, x, 1), 1.0, -1.0)
            tau = np.where(noise_b < malus_marginal(-u, y, 1), 1.0, -1.0)
            outs.append((sig, tau))
    elif model_id == "hall":
        u = hall_sample(a, b, n, stream)
        outs = [(sgn(u @ x), sgn(-(u @ y))) for (x, y) in pairs]
    elif model_id == "tb-freewill":
        u, v, c = tb_freewill_sample(a, b, n, stream)
        outs = [(sgn(u @ x), -sgn((u + c[:, None] * v) @ y)) for (x, y) in pairs]
    else:
        raise KeyError(f"no counterfactual sampler for model {model_id!r}")
    return tuple(correlator(o) for o in outs)


# ---------------------------------------------------------------------------
# Probability-chain identity and the card-deck counterexample


@dataclass
class BayesChainResult:
    holds: bool
    n_indeterminate: int
    max_error: float


def bayes_chain_check(joint, tol: float = 1e-12) -> BayesChainResult:
    """Verify P(e_1..e_k) = prod_j P(e_j | e_1..e_{j-1}) on a finite joint.

    Conditionals with a zero-probability prefix are 0/0; they are marked
    indeterminate and skipped, and the product over the defined factors
    must still match the probability of the longest defined prefix.
    """
    joint = np.asarray(joint, dtype=float)
    if joint.size == 0 or abs(float(joint.sum()) - 1.0) > 1e-9:
        raise ValueError("joint must be a normalized probability table")
    k = joint.ndim
    n_indeterminate = 0
    max_error = 0.0
    for idx in itertools.product(*(range(s) for s in joint.shape)):
        prev = 1.0
        product = 1.0
        defined_prefix_prob = 1.0
        for j in range(k):
            prefix_prob = float(joint[idx[: j + 1]].sum()) if j + 1 < k else float(joint[idx])
            if prev == 0.0:
                n_indeterminate += k - j
                break
            product *= prefix_prob / prev
            defined_prefix_prob = prefix_prob
            prev = prefix_prob
        max_error = max(max_error, abs(product - defined_prefix_prob))
        if prev == 0.0 and float(joint[idx]) != 0.0:
            # impossible by monotonicity of prefixes; guards table errors
            return BayesChainResult(False, n_indeterminate, math.inf)
    return BayesChainResult(max_error <= tol, n_indeterminate, max_error)


@dataclass(frozen=True)
class CardDeckModel:
    """Two-card dealer: each pair holds one King and one Queen, one Black
    and one Red card; deck_mix[i] is deck i's fraction of (King-Red,
    Queen-Black) pairs, the rest being (King-Black, Queen-Red)."""

    deck_mix: tuple
    deck_prior: tuple

    def __post_init__(self):
        mix = tuple(Fraction(x) for x in self.deck_mix)
        prior = tuple(Fraction(x) for x in self.deck_prior)
        object.__setattr__(self, "deck_mix", mix)
        object.__setattr__(self, "deck_prior", prior)
        if len(mix) != len(prior):
            raise ValueError("need one prior per deck")
        if any(not 0 <= x <= 1 for x in mix):
            raise ValueError("deck mixes must lie in [0, 1]")
        if sum(prior) != 1:
            raise ValueError("deck priors must sum to exactly 1")


def two_deck_example() -> CardDeckModel:
    """The two-deck example: 30/70 and 70/30 mixes, decks equally likely."""
    return CardDeckModel(deck_mix=(Fraction(3, 10), Fraction(7, 10)),
                         deck_prior=(Fraction(1, 2), Fraction(1, 2)))


def card_deck_stats(model: CardDeckModel) -> dict:
    """Exact per-deck joint P(King at left, Black at right | deck), the
    product of the corresponding marginals, and the factorability flag.

    The left observer gets each card of the extracted pair with
    probability 1/2; a (King-Red, Queen-Black) pair yields the joint
    event only when the King goes left.
    """
    decks = []
    for mix in model.deck_mix:
        joint = mix / 2
        p_king = Fraction(1, 2)
        p_black = Fraction(1, 2)
        product = p_king * p_black
        decks.append({
            "joint": joint,
            "p_king": p_king,
            "p_black": p_black,
            "product": product,
            "factorizes": joint == product,
        })
    return {"decks": decks,
            "all_factorize": all(d["factorizes"] for d in decks)}
