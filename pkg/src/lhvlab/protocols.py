"""Two-station + entangler protocol runners with exact resource metering.

Every classical realization runs as a sequential trial machine
(vectorized over trials) with explicit per-party random streams:
entangler, station A, station B, the station-to-station shared stream
(only where the protocol grants one), and the entangler's sampling
stream for the watch-driven variant. Station outcome rules read only
their own setting, their local/global hidden variables, and logged
channel messages, so corrupting one side cannot move the other side's
outcomes in the zero-communication protocols.

Channel accounting is exact: counters are incremented per trial, not
estimated, and a nonzero station-to-station count marks the run
communication-assisted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .geometry import RandomStream, assert_unit, planar_setting, sgn, substream
from .models import JointLaw2x2, malus_draw, singlet_law


class PartyRole(str, Enum):
    ENTANGLER = "entangler"
    STATION_A = "station_a"
    STATION_B = "station_b"
    REFEREE = "referee"


class CausalMode(str, Enum):
    SETTINGS_CAUSE_LAMBDA = "settings_cause_lambda"
    LAMBDA_CAUSES_SETTINGS = "lambda_causes_settings"
    ACTION_AT_A_DISTANCE = "action_at_a_distance"


# Stream ids per party; fixed so runs are reproducible and so that one
# party's draws can never shift another's.
STREAM_ENTANGLER = 0
STREAM_A = 1
STREAM_B = 2
STREAM_SHARED_AB = 3
STREAM_W0 = 4
STREAM_REFEREE = 5

CSV_HEADER = "trial_index,model,c,d,u_dot_a,u_dot_b,sigma,tau,detA,detB,bitsAB,bitsBA"


class WatchDesyncError(RuntimeError):
    """A station's reconstructed watch vector differs from the entangler's."""


@dataclass
class MeteredChannel:
    sender: PartyRole
    receiver: PartyRole
    payload_bits: np.ndarray | None = None  # per-trial payload length

    @property
    def bits_sent(self) -> int:
        return 0 if self.payload_bits is None else int(self.payload_bits.sum())

    def log(self):
        if self.payload_bits is None:
            return []
        idx = np.nonzero(self.payload_bits)[0]
        return [(int(i), int(self.payload_bits[i])) for i in idx]


class ChannelLedger:
    """All channels of one run, keyed by (sender, receiver)."""

    def __init__(self, n_trials: int):
        self.n_trials = n_trials
        self.channels: dict = {}

    def send(self, sender: PartyRole, receiver: PartyRole, bits_per_trial) -> None:
        ch = self.channels.setdefault((sender, receiver), MeteredChannel(sender, receiver))
        bits = np.broadcast_to(np.asarray(bits_per_trial, dtype=np.int64),
                               (self.n_trials,)).copy()
        ch.payload_bits = bits if ch.payload_bits is None else ch.payload_bits + bits

    def bits(self, sender: PartyRole, receiver: PartyRole) -> int:
        ch = self.channels.get((sender, receiver))
        return ch.bits_sent if ch else 0

    @property
    def station_to_station_bits(self) -> int:
        return (self.bits(PartyRole.STATION_A, PartyRole.STATION_B)
                + self.bits(PartyRole.STATION_B, PartyRole.STATION_A))

    @property
    def communication_assisted(self) -> bool:
        return self.station_to_station_bits > 0

    def as_dict(self) -> dict:
        return {
            "bits_a_to_b": self.bits(PartyRole.STATION_A, PartyRole.STATION_B),
            "bits_b_to_a": self.bits(PartyRole.STATION_B, PartyRole.STATION_A),
            "communication_assisted": self.communication_assisted,
        }


@dataclass
class TrialTranscript:
    """One trial's record, expanded from the columnar batch."""

    trial_index: int
    model: str
    u: np.ndarray
    v: np.ndarray | None
    c: float | None
    d: float | None
    a_requested: np.ndarray | None
    b_requested: np.ndarray | None
    a_used: np.ndarray
    b_used: np.ndarray
    sigma: float | None
    tau: float | None
    detected_a: bool
    detected_b: bool
    bits_a_to_b: int
    bits_b_to_a: int
    shared_draws: int
    causal_mode: CausalMode


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.9g}"


class TranscriptBatch:
    """Column-oriented per-trial records for one protocol run."""

    def __init__(self, model: str, causal_mode: CausalMode, u, a_used, b_used,
                 sigma, tau, v=None, c=None, d=None, a_requested=None,
                 b_requested=None, detected_a=None, detected_b=None,
                 bits_a_to_b=0, bits_b_to_a=0, shared_draws=0):
        self.model = model
        self.causal_mode = causal_mode
        n = len(u)
        self.n = n
        self.u = np.asarray(u)
        self.v = None if v is None else np.asarray(v)
        self.c = None if c is None else np.asarray(c)
        self.d = None if d is None else np.asarray(d)
        self.a_used = np.broadcast_to(np.asarray(a_used, float), (n, 3))
        self.b_used = np.broadcast_to(np.asarray(b_used, float), (n, 3))
        self.a_requested = None if a_requested is None else np.broadcast_to(
            np.asarray(a_requested, float), (n, 3))
        self.b_requested = None if b_requested is None else np.broadcast_to(
            np.asarray(b_requested, float), (n, 3))
        self.sigma = np.asarray(sigma)
        self.tau = np.asarray(tau)
        ones = np.ones(n, dtype=bool)
        self.detected_a = ones if detected_a is None else np.asarray(detected_a, bool)
        self.detected_b = ones if detected_b is None else np.asarray(detected_b, bool)
        self.bits_a_to_b = np.broadcast_to(np.asarray(bits_a_to_b, np.int64), (n,))
        self.bits_b_to_a = np.broadcast_to(np.asarray(bits_b_to_a, np.int64), (n,))
        self.shared_draws = np.broadcast_to(np.asarray(shared_draws, np.int64), (n,))

    def __len__(self) -> int:
        return self.n

    def u_dot_a(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.u, self.a_used)

    def u_dot_b(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.u, self.b_used)

    def row(self, i: int) -> TrialTranscript:
        return TrialTranscript(
            trial_index=i,
            model=self.model,
            u=self.u[i],
            v=None if self.v is None else self.v[i],
            c=None if self.c is None else float(self.c[i]),
            d=None if self.d is None else float(self.d[i]),
            a_requested=None if self.a_requested is None else self.a_requested[i],
            b_requested=None if self.b_requested is None else self.b_requested[i],
            a_used=self.a_used[i],
            b_used=self.b_used[i],
            sigma=float(self.sigma[i]) if self.detected_a[i] else None,
            tau=float(self.tau[i]) if self.detected_b[i] else None,
            detected_a=bool(self.detected_a[i]),
            detected_b=bool(self.detected_b[i]),
            bits_a_to_b=int(self.bits_a_to_b[i]),
            bits_b_to_a=int(self.bits_b_to_a[i]),
            shared_draws=int(self.shared_draws[i]),
            causal_mode=self.causal_mode,
        )

    def to_csv(self, fh) -> None:
        """Stream one row per trial under the fixed header."""
        fh.write(CSV_HEADER + "\n")
        ua = self.u_dot_a()
        ub = self.u_dot_b()
        for i in range(self.n):
            row = [
                str(i), self.model,
                _fmt(None if self.c is None else self.c[i]),
                _fmt(None if self.d is None else self.d[i]),
                _fmt(ua[i]), _fmt(ub[i]),
                _fmt(self.sigma[i]) if self.detected_a[i] else "",
                _fmt(self.tau[i]) if self.detected_b[i] else "",
                _fmt(bool(self.detected_a[i])), _fmt(bool(self.detected_b[i])),
                str(int(self.bits_a_to_b[i])), str(int(self.bits_b_to_a[i])),
            ]
            fh.write(",".join(row) + "\n")


def binned_outcome_counts(t, sigma, tau, n_bins: int = 12):
    """Per-bin outcome counts and overlap sums for trials binned by the
    realized setting overlap t = a.b. Counts from independent runs may be
    summed before calling deviation_from_binned_counts."""
    t = np.asarray(t, float)
    sigma = np.asarray(sigma)
    tau = np.asarray(tau)
    edges = np.linspace(-1.0, 1.0, n_bins + 1)
    idx = np.clip(np.digitize(t, edges) - 1, 0, n_bins - 1)
    counts = np.zeros((n_bins, 2, 2), dtype=np.int64)
    sp = sigma > 0
    tp = tau > 0
    for i, (sm, tm) in enumerate(((sp, tp), (sp, ~tp), (~sp, tp), (~sp, ~tp))):
        np.add.at(counts[:, i // 2, i % 2], idx[sm & tm], 1)
    t_sums = np.bincount(idx, weights=t, minlength=n_bins)
    return counts, t_sums


def deviation_from_binned_counts(counts, t_sums) -> dict:
    """Worst absolute deviation of the per-bin empirical laws from the
    singlet table at each bin's mean overlap.

    The law is linear in the overlap, so comparing against the bin-mean
    overlap introduces no discretization bias.
    """
    counts = np.asarray(counts)
    t_sums = np.asarray(t_sums, float)
    max_dev = 0.0
    min_count = None
    bins = []
    for k in range(counts.shape[0]):
        cnt = int(counts[k].sum())
        if cnt == 0:
            continue
        law = counts[k] / cnt
        tmean = float(t_sums[k]) / cnt
        q = np.array([[1 - tmean, 1 + tmean], [1 + tmean, 1 - tmean]]) / 4.0
        dev = float(np.abs(law - q).max())
        max_dev = max(max_dev, dev)
        min_count = cnt if min_count is None else min(min_count, cnt)
        bins.append({"t_mean": tmean, "count": cnt, "max_abs_dev": dev})
    return {"max_abs_dev": max_dev, "n_bins": counts.shape[0],
            "min_bin_count": min_count or 0, "bins": bins}


def binned_singlet_deviation(t, sigma, tau, n_bins: int = 12) -> dict:
    """Compare outcomes against the singlet law, binning trials by the
    realized setting overlap t = a.b."""
    return deviation_from_binned_counts(*binned_outcome_counts(t, sigma, tau, n_bins))


@dataclass
class ProtocolResult:
    model: str
    n_trials: int
    law: JointLaw2x2
    channels: ChannelLedger
    causal_mode: CausalMode
    shared_draws_total: int = 0
    transcripts: TranscriptBatch | None = None
    singlet_comparison: dict | None = None
    extras: dict = field(default_factory=dict)

    def summary(self) -> dict:
        out = {
            "model": self.model,
            "n_trials": self.n_trials,
            "law": self.law.as_dict(),
            "correlator": self.law.correlator(),
            "channels": self.channels.as_dict(),
            "shared_draws_total": self.shared_draws_total,
            "causal_mode": self.causal_mode.value,
        }
        if self.singlet_comparison is not None:
            out["singlet_comparison"] = {
                k: self.singlet_comparison[k]
                for k in ("max_abs_dev", "n_bins", "min_bin_count")}
        out.update(self.extras)
        return out


def _resolve_policy(policy, n: int, stream: RandomStream):
    """Per-trial settings from a policy: 'random' draws from the given
    station stream; a single vector or a list of vectors is used as-is
    (lists cycle). Random draws always burn the same stream budget."""
    if isinstance(policy, str):
        if policy == "random":
            return stream.sphere(n)
        raise ValueError(f"unknown settings policy {policy!r}")
    arr = np.asarray(policy, dtype=float)
    if arr.ndim == 1:
        assert_unit(arr, "setting")
        return np.broadcast_to(arr, (n, 3))
    reps = int(np.ceil(n / arr.shape[0]))
    return np.tile(arr, (reps, 1))[:n]


# ---------------------------------------------------------------------------
# One-bit communication protocol


def run_tb_protocol(n_trials: int, a, b, seed: int, record: bool = True) -> ProtocolResult:
    """Shared uniform (u, v) from the entangler; station A computes sigma
    and a single bit that crosses the A->B channel every trial; station B
    combines the bit with its shared hidden variables.

    The A->B meter reads exactly n_trials bits, B->A exactly 0.
    """
    a = assert_unit(a, "a")
    b = assert_unit(b, "b")
    ent = substream(seed, STREAM_ENTANGLER)
    u = ent.sphere(n_trials)
    v = ent.sphere(n_trials)

    # Station A: local outcome and the communicated bit.
    sigma = sgn(u @ a)
    c = sigma * sgn(v @ a)

    channels = ChannelLedger(n_trials)
    channels.send(PartyRole.STATION_A, PartyRole.STATION_B, 1)
    channels.send(PartyRole.STATION_B, PartyRole.STATION_A, 0)

    # Station B: own setting, shared (u, v), received bit. Never reads a.
    tau = _station_b_tb(u, v, c, b)

    law = JointLaw2x2.from_outcomes(sigma, tau)
    transcripts = TranscriptBatch(
        "tb", CausalMode.SETTINGS_CAUSE_LAMBDA, u, a, b, sigma, tau, v=v, c=c,
        a_requested=a, b_requested=b, bits_a_to_b=1, bits_b_to_a=0,
    ) if record else None
    return ProtocolResult("tb", n_trials, law, channels,
                          CausalMode.SETTINGS_CAUSE_LAMBDA, transcripts=transcripts)


def _station_b_tb(u, v, c_received, b):
    return -sgn(np.sum((u + np.asarray(c_received)[:, None] * v) * b, axis=-1))


def run_tb_freewill(n_trials: int, a, b, seed: int, record: bool = True) -> ProtocolResult:
    """Constrained-choice reading of the one-bit protocol: the bit is a
    hidden variable and station A's setting must satisfy
    c = sgn(u.a) sgn(v.a); no station-to-station channel carries anything.

    The requested setting is always used; the constraint selects c, which
    is the dependent variable of the hidden-variable distribution.
    """
    a = assert_unit(a, "a")
    b = assert_unit(b, "b")
    ent = substream(seed, STREAM_ENTANGLER)
    u = ent.sphere(n_trials)
    v = ent.sphere(n_trials)
    c = sgn(u @ a) * sgn(v @ a)

    sigma = sgn(u @ a)
    tau = _station_b_freewill(u, v, c, b)

    channels = ChannelLedger(n_trials)
    channels.send(PartyRole.STATION_A, PartyRole.STATION_B, 0)
    channels.send(PartyRole.STATION_B, PartyRole.STATION_A, 0)
    law = JointLaw2x2.from_outcomes(sigma, tau)
    transcripts = TranscriptBatch(
        "tb-freewill", CausalMode.SETTINGS_CAUSE_LAMBDA, u, a, b, sigma, tau,
        v=v, c=c, a_requested=a, b_requested=b,
    ) if record else None
    return ProtocolResult("tb-freewill", n_trials, law, channels,
                          CausalMode.SETTINGS_CAUSE_LAMBDA, transcripts=transcripts)


def _station_b_freewill(u, v, c_hidden, b):
    # Reads only global hidden variables and the local setting.
    return -sgn(np.sum((u + np.asarray(c_hidden)[:, None] * v) * b, axis=-1))


# ---------------------------------------------------------------------------
# Shared-coin realization (zero communication, two shared draws per trial)


def run_shared_coin(n_trials: int, seed: int, a_policy="random",
                              b_policy="random", record: bool = True) -> ProtocolResult:
    """Stations hold identical pseudo-random streams producing coins
    (c, d) each trial. When c = 0, station A orients along d*u and
    station B chooses freely; when c = 1 the roles reverse. Outcomes are
    Malus draws from each station's own stream. Zero bits cross between
    the stations; the shared stream is metered as 2 draws per trial.
    """
    ent = substream(seed, STREAM_ENTANGLER)
    shared = substream(seed, STREAM_SHARED_AB)
    sa = substream(seed, STREAM_A)
    sb = substream(seed, STREAM_B)

    u = ent.sphere(n_trials)
    v = -u
    c = shared.bits(n_trials)
    d = shared.signs(n_trials)

    a_free = _resolve_policy(a_policy, n_trials, sa)
    b_free = _resolve_policy(b_policy, n_trials, sb)
    forced_a = (c == 0)
    a_used = np.where(forced_a[:, None], d[:, None] * u, a_free)
    b_used = np.where(~forced_a[:, None], d[:, None] * v, b_free)

    sigma = malus_draw(u, a_used, sa)
    tau = malus_draw(v, b_used, sb)

    channels = ChannelLedger(n_trials)
    channels.send(PartyRole.STATION_A, PartyRole.STATION_B, 0)
    channels.send(PartyRole.STATION_B, PartyRole.STATION_A, 0)

    law = JointLaw2x2.from_outcomes(sigma, tau)
    t = np.einsum("ij,ij->i", a_used, b_used)
    comparison = binned_singlet_deviation(t, sigma, tau)
    transcripts = TranscriptBatch(
        "shared-coin", CausalMode.LAMBDA_CAUSES_SETTINGS, u,
        a_used, b_used, sigma, tau, v=v, c=c, d=d,
        a_requested=a_free, b_requested=b_free, shared_draws=2,
    ) if record else None
    return ProtocolResult("shared-coin", n_trials, law, channels,
                          CausalMode.LAMBDA_CAUSES_SETTINGS,
                          shared_draws_total=2 * n_trials,
                          transcripts=transcripts, singlet_comparison=comparison)


# ---------------------------------------------------------------------------
# Detection-loophole realization


@dataclass
class EfficiencyReport:
    mode: str
    n_pairs: int
    n_coincidences: int
    efficiency: float
    conditional_law: JointLaw2x2
    singlet_deviation: float
    expected_efficiency: float
    per_setting: dict = field(default_factory=dict)
    transcripts: TranscriptBatch | None = None

    def summary(self) -> dict:
        return {
            "mode": self.mode,
            "n_pairs": self.n_pairs,
            "n_coincidences": self.n_coincidences,
            "efficiency": self.efficiency,
            "expected_efficiency": self.expected_efficiency,
            "conditional_law": self.conditional_law.as_dict(),
            "singlet_deviation": self.singlet_deviation,
        }


def _fibonacci_antipodal_grid(n_directions: int) -> np.ndarray:
    """Antipodally closed set of n unit directions (n even): a Fibonacci
    spiral on the upper hemisphere plus the antipodes, so index i and
    i + n/2 are opposite."""
    if n_directions % 2 or n_directions < 2:
        raise ValueError("need an even number of directions >= 2")
    m = n_directions // 2
    k = np.arange(m)
    z = (k + 0.5) / m
    phi = 2.0 * math.pi * k * (math.sqrt(5.0) - 1.0) / 2.0
    r = np.sqrt(1.0 - z * z)
    upper = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    return np.vstack([upper, -upper])


def run_detection_loophole(n_trials: int, mode: str, seed: int,
                           settings_a=None, settings_b=None,
                           delta_omega: float | None = None,
                           n_directions: int | None = None,
                           record: bool = False) -> EfficiencyReport:
    """Each particle carries a bit and a hidden spin; the particle whose
    bit is set fires only when its station's setting coincides with the
    spin axis, the other behaves as a plain Malus detector.

    mode 'symmetric': two settings per side, the spin uniform over the
    eight values +-a_i, +-b_j, the firing bit on a random side; expected
    efficiency 1/4. mode 'asymmetric': side A always fires, the spin
    uniform over +-b_j; expected efficiency 1/2. mode 'sphere': settings
    and spin drawn from an antipodally closed grid of N cells of solid
    angle delta_omega = 4*pi/N; expected efficiency delta_omega/(2*pi).
    """
    ent = substream(seed, STREAM_ENTANGLER)
    sa = substream(seed, STREAM_A)
    sb = substream(seed, STREAM_B)

    if mode in ("symmetric", "asymmetric"):
        if settings_a is None:
            settings_a = np.array([planar_setting(0.0), planar_setting(90.0)])
        if settings_b is None:
            settings_b = np.array([planar_setting(45.0), planar_setting(135.0)])
        settings_a = np.atleast_2d(np.asarray(settings_a, float))
        settings_b = np.atleast_2d(np.asarray(settings_b, float))
        if mode == "symmetric":
            u_values = np.vstack([settings_a, -settings_a, settings_b, -settings_b])
            expected_eff = 2.0 / len(u_values)
            c_a = ent.bits(n_trials)
        else:
            u_values = np.vstack([settings_b, -settings_b])
            expected_eff = 2.0 / len(u_values)
            c_a = np.zeros(n_trials, dtype=np.int64)
        # Duplicate vectors (not antipodes) would double-weight an atom.
        gram = u_values @ u_values.T - 2.0 * np.eye(len(u_values))
        if gram.max() > 1.0 - 1e-6:
            raise ValueError("instruction-set directions must be pairwise distinct")
        ia = sa.integers(0, len(settings_a), n_trials)
        ib = sb.integers(0, len(settings_b), n_trials)
        a_used = settings_a[ia]
        b_used = settings_b[ib]
        iu = ent.integers(0, len(u_values), n_trials)
        u = u_values[iu]
        match_a = np.abs(np.einsum("ij,ij->i", u, a_used)) >= 1.0 - 1e-9
        match_b = np.abs(np.einsum("ij,ij->i", u, b_used)) >= 1.0 - 1e-9
    elif mode == "sphere":
        if n_directions is None:
            if delta_omega is None:
                raise ValueError("sphere mode needs delta_omega or n_directions")
            n_directions = 2 * int(round(2.0 * math.pi / delta_omega))
        grid = _fibonacci_antipodal_grid(n_directions)
        half = n_directions // 2
        expected_eff = 2.0 / n_directions
        c_a = ent.bits(n_trials)
        ia = sa.integers(0, n_directions, n_trials)
        ib = sb.integers(0, n_directions, n_trials)
        iu = ent.integers(0, n_directions, n_trials)
        a_used = grid[ia]
        b_used = grid[ib]
        u = grid[iu]
        anti = (iu + half) % n_directions
        match_a = (iu == ia) | (anti == ia)
        match_b = (iu == ib) | (anti == ib)
    else:
        raise ValueError(f"unknown detection mode {mode!r}")

    v = -u
    c_b = 1 - c_a
    fires_a = (c_a == 0) | match_a
    fires_b = (c_b == 0) | match_b
    coincidence = fires_a & fires_b

    sigma = malus_draw(u, a_used, sa)
    tau = malus_draw(v, b_used, sb)

    n_coinc = int(np.count_nonzero(coincidence))
    if n_coinc == 0:
        raise RuntimeError("no coincidences recorded; cannot form conditional law")
    cond_law = JointLaw2x2.from_outcomes(sigma[coincidence], tau[coincidence])

    per_setting = {}
    if mode in ("symmetric", "asymmetric"):
        dev = 0.0
        for i in range(len(settings_a)):
            for j in range(len(settings_b)):
                m = coincidence & (ia == i) & (ib == j)
                if not np.any(m):
                    continue
                law_ij = JointLaw2x2.from_outcomes(sigma[m], tau[m])
                ref = singlet_law(settings_a[i], settings_b[j])
                per_setting[f"a{i}b{j}"] = {
                    "law": law_ij.as_dict(),
                    "n": int(np.count_nonzero(m)),
                    "max_abs_dev": law_ij.max_abs_diff(ref),
                }
                dev = max(dev, law_ij.max_abs_diff(ref))
    else:
        # Per-trial reference comparison: mean indicator minus the exact
        # singlet entry at each trial's realized settings.
        t = np.einsum("ij,ij->i", a_used, b_used)[coincidence]
        sc = sigma[coincidence]
        tc = tau[coincidence]
        dev = 0.0
        for s in (1.0, -1.0):
            for tt in (1.0, -1.0):
                emp = ((sc == s) & (tc == tt)).astype(float)
                ref = (1.0 - s * tt * t) / 4.0
                dev = max(dev, abs(float(np.mean(emp - ref))))

    transcripts = TranscriptBatch(
        f"detection-{mode}", CausalMode.SETTINGS_CAUSE_LAMBDA, u, a_used,
        b_used, sigma, tau, v=v, c=c_a, detected_a=fires_a, detected_b=fires_b,
    ) if record else None
    return EfficiencyReport(
        mode=mode,
        n_pairs=n_trials,
        n_coincidences=n_coinc,
        efficiency=n_coinc / n_trials,
        conditional_law=cond_law,
        singlet_deviation=float(dev),
        expected_efficiency=float(expected_eff),
        per_setting=per_setting,
        transcripts=transcripts,
    )


# ---------------------------------------------------------------------------
# Watch-driven realization (shared randomness only with the entangler)


@dataclass(frozen=True)
class Watch:
    """Two-hand watch; hand periods are mutually incommensurable surds so
    the induced orbit equidistributes on the sphere."""

    period_small: float
    period_large: float


WATCH_A = Watch(1.0, math.sqrt(2.0))
WATCH_B = Watch(math.sqrt(3.0), math.sqrt(5.0))
WATCH_0 = Watch(math.sqrt(7.0), math.sqrt(11.0))
EMISSION_STEP = math.pi / 10.0
TIME_OF_FLIGHT = 1.0


def watch_vector(t, watch: Watch):
    """Map hand phases to a direction, area-preserving: the small hand's
    phase fixes cos(theta) in [-1, 1], the large hand's phase the azimuth."""
    t = np.asarray(t, dtype=float)
    ps = np.mod(t / watch.period_small, 1.0)
    pl = np.mod(t / watch.period_large, 1.0)
    z = 2.0 * ps - 1.0
    phi = 2.0 * math.pi * pl
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    out = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)
    return out


def station_watch_vectors(arrival_times, watch: Watch) -> np.ndarray:
    """Reconstruct the emission-epoch watch vector at a station: subtract
    the known time of flight, then snap to the emission tick so the
    reconstruction is exact rather than drifting by float roundoff."""
    k = np.rint((np.asarray(arrival_times) - TIME_OF_FLIGHT) / EMISSION_STEP)
    return watch_vector(k * EMISSION_STEP, watch)


def run_watch_realization(n_trials: int, model: str, seed: int,
                          record: bool = True, start_tick: int = 0) -> ProtocolResult:
    """Entangler and stations hold synchronized watches; the per-trial
    settings are the watch vectors, so no station-to-station shared
    randomness exists (each station shares state only with the entangler).

    model 'pinned': the entangler flips a watch-choice coin and a side
    coin, pitches spins +-z_j, and the stations apply Malus detectors.
    model 'hall': the entangler draws the spin from the
    setting-conditioned density via its own sampling stream and the
    station outcomes are deterministic signs.
    """
    if model not in ("pinned", "hall"):
        raise ValueError(f"watch realization model must be pinned or hall, got {model!r}")
    ent = substream(seed, STREAM_ENTANGLER)
    sa = substream(seed, STREAM_A)
    sb = substream(seed, STREAM_B)

    ticks = start_tick + np.arange(n_trials, dtype=float)
    t_emit = ticks * EMISSION_STEP
    z_a = watch_vector(t_emit, WATCH_A)
    z_b = watch_vector(t_emit, WATCH_B)

    arrival = t_emit + TIME_OF_FLIGHT
    a_used = station_watch_vectors(arrival, WATCH_A)
    b_used = station_watch_vectors(arrival, WATCH_B)
    if not (np.array_equal(a_used, z_a) and np.array_equal(b_used, z_b)):
        raise WatchDesyncError("station watch reconstruction differs from entangler")

    if model == "pinned":
        j = ent.bits(n_trials)
        d = ent.signs(n_trials)
        zj = np.where((j == 0)[:, None], z_a, z_b)
        u = d[:, None] * zj
        sigma = malus_draw(u, a_used, sa)
        tau = malus_draw(-u, b_used, sb)
        c_col: np.ndarray | None = j
        d_col: np.ndarray | None = d
    else:
        w0 = substream(seed, STREAM_W0)
        u = _sample_hall_per_trial(z_a, z_b, w0)
        sigma = sgn(np.einsum("ij,ij->i", u, a_used))
        tau = sgn(-np.einsum("ij,ij->i", u, b_used))
        c_col = None
        d_col = None

    channels = ChannelLedger(n_trials)
    channels.send(PartyRole.STATION_A, PartyRole.STATION_B, 0)
    channels.send(PartyRole.STATION_B, PartyRole.STATION_A, 0)

    law = JointLaw2x2.from_outcomes(sigma, tau)
    t = np.einsum("ij,ij->i", a_used, b_used)
    comparison = binned_singlet_deviation(t, sigma, tau)
    transcripts = TranscriptBatch(
        f"watch-{model}", CausalMode.LAMBDA_CAUSES_SETTINGS, u, a_used, b_used,
        sigma, tau, v=-u, c=c_col, d=d_col,
        a_requested=a_used, b_requested=b_used,
    ) if record else None
    return ProtocolResult(f"watch-{model}", n_trials, law, channels,
                          CausalMode.LAMBDA_CAUSES_SETTINGS,
                          transcripts=transcripts, singlet_comparison=comparison)


def _sample_hall_per_trial(a_rows: np.ndarray, b_rows: np.ndarray,
                           stream: RandomStream) -> np.ndarray:
    """Rejection-sample one hidden spin per trial from the
    setting-conditioned density with per-trial settings."""
    from .models import HALL_ENVELOPE, _hall_g

    n = len(a_rows)
    out = np.empty((n, 3))
    pending = np.arange(n)
    while pending.size:
        cand = stream.sphere(pending.size)
        accept_draw = stream.uniform(pending.size)
        t = np.einsum("ij,ij->i", a_rows[pending], b_rows[pending])
        f = (sgn(np.einsum("ij,ij->i", cand, a_rows[pending]))
             * sgn(-np.einsum("ij,ij->i", cand, b_rows[pending])) * t)
        dens = _hall_g(f)
        if np.any(dens > HALL_ENVELOPE):
            raise RuntimeError("envelope violation in per-trial sampling")
        acc = accept_draw * HALL_ENVELOPE < dens
        out[pending[acc]] = cand[acc]
        pending = pending[~acc]
    return out


# ---------------------------------------------------------------------------
# Signaling discrimination experiment


@dataclass
class SignalingResult:
    mode: str
    n_trials: int
    usable_mask: np.ndarray
    usable_fraction: float
    intended: np.ndarray
    received: np.ndarray
    success_rate: float
    empirical_entropy: float

    def summary(self) -> dict:
        return {
            "mode": self.mode,
            "n_trials": self.n_trials,
            "n_usable": int(self.usable_mask.sum()),
            "usable_fraction": self.usable_fraction,
            "success_rate": self.success_rate,
            "empirical_entropy": self.empirical_entropy,
        }


def _binary_entropy(bits: np.ndarray) -> float:
    if bits.size == 0:
        return 0.0
    p = float(np.mean(bits))
    h = 0.0
    for q in (p, 1.0 - p):
        if q > 0.0:
            h -= q * math.log2(q)
    return h


def run_signaling_experiment(message, mode: str, n_trials: int, seed: int,
                             angle_a: float = 0.0, angle_b: float = 90.0) -> SignalingResult:
    """Attempted instantaneous signaling over the setting-tied model with
    both stations restricted to two orthogonal axes.

    Station A reads the hidden spin mid-flight; on the half of trials
    where it lies along +-a she switches toward +-b to encode the next
    message bit, and station B reads the bit from its certain outcome.
    In 'action' mode the switch genuinely re-forces the remote spin, so
    the message arrives verbatim. In 'slave-will' mode the apparent
    switch is itself dictated by a fresh hidden draw, and the bits B
    decodes are fair coin flips regardless of the message.
    """
    if mode not in ("action", "slave-will"):
        raise ValueError(f"mode must be 'action' or 'slave-will', got {mode!r}")
    a = planar_setting(angle_a)
    b = planar_setting(angle_b)
    if abs(float(np.dot(a, b))) > 1e-9:
        raise ValueError("signaling protocol requires orthogonal axes")
    message = np.asarray(message, dtype=np.int64)
    if message.size == 0 or np.any((message != 0) & (message != 1)):
        raise ValueError("message must be a nonempty bit sequence")

    ent = substream(seed, STREAM_ENTANGLER)
    atom = ent.integers(0, 4, n_trials)  # 0:+a 1:-a 2:+b 3:-b
    usable = atom < 2
    n_usable = int(np.count_nonzero(usable))

    intended = message[np.arange(n_usable) % message.size]

    if mode == "action":
        # Switch target d*(+-b); action-at-a-distance re-forces u = +-b.
        u_final = np.where((intended == 1)[:, None], -b, b)
    else:
        fresh = ent.signs(n_usable)
        u_final = fresh[:, None] * b
    v_final = -u_final
    tau = sgn(v_final @ b)
    received = (tau > 0).astype(np.int64)

    success = float(np.mean(received == intended)) if n_usable else 0.0
    return SignalingResult(
        mode=mode,
        n_trials=n_trials,
        usable_mask=usable,
        usable_fraction=n_usable / n_trials,
        intended=intended,
        received=received,
        success_rate=success,
        empirical_entropy=_binary_entropy(received),
    )


# ---------------------------------------------------------------------------
# Conspiracy audit: pre-declared settings


@dataclass
class AuditResult:
    mode: str
    n_trials: int
    deviations: int
    deviations_match_u: bool
    law: JointLaw2x2
    singlet_deviation: float

    def summary(self) -> dict:
        return {
            "mode": self.mode,
            "n_trials": self.n_trials,
            "deviations": self.deviations,
            "deviations_match_u": self.deviations_match_u,
            "law": self.law.as_dict(),
            "singlet_deviation": self.singlet_deviation,
        }


def run_conspiracy_audit(n_trials: int, a, b, mode: str, seed: int) -> AuditResult:
    """Both stations commit to a settings list before any pair is
    produced, then the run counts trials whose used settings differ from
    the declaration.

    mode 'honest': the stations comply; with the settings fixed
    externally the hidden spin cannot track them, so the spin is uniform,
    no deviations occur, and the observed law departs from the singlet.
    mode 'slave': the hidden variables dictate one station's setting each
    trial; every deviation lands exactly on +-u and the singlet survives.
    mode 'third-party': an independent party re-imposes the declared
    settings at the last moment; deviations drop back to zero.
    """
    if mode not in ("honest", "slave", "third-party"):
        raise ValueError(f"unknown audit mode {mode!r}")
    a = assert_unit(a, "a")
    b = assert_unit(b, "b")
    ent = substream(seed, STREAM_ENTANGLER)
    shared = substream(seed, STREAM_SHARED_AB)
    sa = substream(seed, STREAM_A)
    sb = substream(seed, STREAM_B)

    u = ent.sphere(n_trials)
    if mode == "slave":
        c = shared.bits(n_trials)
        d = shared.signs(n_trials)
        forced_a = (c == 0)
        a_used = np.where(forced_a[:, None], d[:, None] * u, np.broadcast_to(a, (n_trials, 3)))
        b_used = np.where(~forced_a[:, None], -d[:, None] * u, np.broadcast_to(b, (n_trials, 3)))
    else:
        a_used = np.broadcast_to(a, (n_trials, 3))
        b_used = np.broadcast_to(b, (n_trials, 3))

    sigma = malus_draw(u, a_used, sa)
    tau = malus_draw(-u, b_used, sb)

    dev_a = ~np.all(a_used == a, axis=1)
    dev_b = ~np.all(b_used == b, axis=1)
    deviations = int(np.count_nonzero(dev_a) + np.count_nonzero(dev_b))

    match = True
    if deviations:
        ua = np.abs(np.einsum("ij,ij->i", u, a_used)[dev_a])
        ub = np.abs(np.einsum("ij,ij->i", u, b_used)[dev_b])
        match = bool(np.all(ua >= 1.0 - 1e-9) and np.all(ub >= 1.0 - 1e-9))

    law = JointLaw2x2.from_outcomes(sigma, tau)
    if mode == "slave":
        t = np.einsum("ij,ij->i", a_used, b_used)
        dev = binned_singlet_deviation(t, sigma, tau)["max_abs_dev"]
    else:
        dev = law.max_abs_diff(singlet_law(a, b))
    return AuditResult(mode, n_trials, deviations, match, law, float(dev))
