"""Two-alternative forced-choice study machinery.

A plan is the full list of trials: every (figure, unordered method
pair) at least once, plus extra repetitions spread round-robin over the
least-covered pairs.  The scheduler hands each participant the globally
least-answered pair they have not yet answered, which keeps coverage
balanced (max and min pair coverage never drift more than one apart).
Responses append to an NDJSON log, one fsynced line per answer, so a
crashed service can rebuild its exact state by replaying the file.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import stats as _scipy_stats

from .errors import InsufficientRaters, OrphanTrialId, TooFewMethods

__all__ = [
    "PlannedTrial",
    "IssuedTrial",
    "TrialResponse",
    "WinTable",
    "ConcordanceResult",
    "generate_plan",
    "save_plan",
    "load_plan",
    "Scheduler",
    "next_trial",
    "append_response",
    "read_log",
    "win_table",
    "kendalls_w_from_ranks",
    "kendalls_w",
    "concordance_by_dataset",
]


def _trial_id(figure_id: str, method_a: str, method_b: str, repetition: int) -> str:
    key = f"{figure_id}|{method_a}|{method_b}|{repetition}"
    return hashlib.sha1(key.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class PlannedTrial:
    """One scheduled comparison; methods are stored in sorted order."""

    trial_id: str
    figure_id: str
    method_a: str
    method_b: str
    repetition: int

    @property
    def pair(self) -> tuple[str, str, str]:
        return (self.figure_id, self.method_a, self.method_b)


@dataclass(frozen=True)
class IssuedTrial:
    """A planned trial bound to a participant, with sides assigned."""

    trial_id: str
    figure_id: str
    participant_id: str
    left_method: str
    right_method: str


@dataclass(frozen=True)
class TrialResponse:
    trial_id: str
    participant_id: str
    left_method: str
    right_method: str
    choice: str  # "left" | "right"
    timestamp_ms: int = 0  # milliseconds since epoch; 0 when unrecorded

    @property
    def chosen_method(self) -> str:
        return self.left_method if self.choice == "left" else self.right_method

    @property
    def rejected_method(self) -> str:
        return self.right_method if self.choice == "left" else self.left_method


def generate_plan(
    figures: list[str],
    methods: list[str],
    repetitions_target: int = 0,
    seed: int = 0,
) -> list[PlannedTrial]:
    """Build the trial list.

    ``repetitions_target`` is the desired total number of trials; it is
    silently raised to full coverage (every figure x pair once) when
    smaller.  Extra trials beyond coverage go round-robin to the pairs
    with the fewest repetitions, in an order shuffled by ``seed``.
    """
    methods = sorted(set(methods))
    if len(methods) < 2:
        raise TooFewMethods(f"need at least two methods, got {len(methods)}")
    figures = list(dict.fromkeys(figures))
    pairs = list(combinations(methods, 2))

    units = [(fig, a, b) for fig in figures for (a, b) in pairs]
    plan = [
        PlannedTrial(_trial_id(fig, a, b, 0), fig, a, b, 0) for (fig, a, b) in units
    ]

    extra = repetitions_target - len(plan)
    if extra > 0:
        order = list(units)
        random.Random(seed).shuffle(order)
        reps = {unit: 1 for unit in units}
        i = 0
        for _ in range(extra):
            fig, a, b = order[i % len(order)]
            rep = reps[(fig, a, b)]
            reps[(fig, a, b)] = rep + 1
            plan.append(PlannedTrial(_trial_id(fig, a, b, rep), fig, a, b, rep))
            i += 1
    return plan


def save_plan(plan: list[PlannedTrial], path) -> None:
    payload = [
        {
            "trial_id": t.trial_id,
            "figure_id": t.figure_id,
            "method_a": t.method_a,
            "method_b": t.method_b,
            "repetition": t.repetition,
        }
        for t in plan
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_plan(path) -> list[PlannedTrial]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return [
        PlannedTrial(
            trial_id=e["trial_id"],
            figure_id=e["figure_id"],
            method_a=e["method_a"],
            method_b=e["method_b"],
            repetition=int(e["repetition"]),
        )
        for e in payload
    ]


# -------------------------------------------------------------- scheduler


class Scheduler:
    """Assigns trials to participants and tracks coverage.

    State is derived from the plan plus the replayed response log;
    outstanding (issued but unanswered) trials live only in memory and
    are deliberately forgotten on restart.  Re-asking for a trial while
    one is outstanding returns the same assignment.
    """

    def __init__(self, plan: list[PlannedTrial]):
        if not plan:
            raise TooFewMethods("plan is empty")
        self.plan = list(plan)
        self.by_trial_id = {t.trial_id: t for t in self.plan}
        # Pair order follows first appearance in the plan; ties in
        # coverage break toward the earlier pair.
        self.pair_order: list[tuple[str, str, str]] = []
        self.trials_by_pair: dict[tuple[str, str, str], list[PlannedTrial]] = {}
        for t in self.plan:
            if t.pair not in self.trials_by_pair:
                self.pair_order.append(t.pair)
                self.trials_by_pair[t.pair] = []
            self.trials_by_pair[t.pair].append(t)
        for trials in self.trials_by_pair.values():
            trials.sort(key=lambda t: t.repetition)

        self.answered_by_pair: dict[tuple[str, str, str], int] = {
            p: 0 for p in self.pair_order
        }
        self.answered_by_trial: dict[str, int] = {t.trial_id: 0 for t in self.plan}
        self.seen: set[tuple[str, str]] = set()  # (trial_id, participant_id)
        self.participant_pairs: dict[str, set[tuple[str, str, str]]] = {}
        self.outstanding: dict[str, IssuedTrial] = {}  # participant -> issued
        self.outstanding_by_pair: dict[tuple[str, str, str], int] = {
            p: 0 for p in self.pair_order
        }

    # -- log replay -----------------------------------------------------

    def replay(self, responses: list[TrialResponse]) -> int:
        """Apply logged responses; returns how many were accepted."""
        accepted = 0
        for resp in responses:
            if self.record(resp):
                accepted += 1
        return accepted

    # -- issue / record ---------------------------------------------------

    def next_trial(self, participant_id: str) -> IssuedTrial | None:
        """The participant's next comparison, or None when they are done."""
        if participant_id in self.outstanding:
            return self.outstanding[participant_id]

        answered = self.participant_pairs.get(participant_id, set())
        best_pair = None
        best_load = None
        for pair in self.pair_order:
            if pair in answered:
                continue
            load = self.answered_by_pair[pair] + self.outstanding_by_pair[pair]
            if best_load is None or load < best_load:
                best_pair = pair
                best_load = load
        if best_pair is None:
            return None

        trials = self.trials_by_pair[best_pair]
        trial = min(trials, key=lambda t: (self.answered_by_trial[t.trial_id], t.repetition))
        left = self._left_method(trial, participant_id)
        right = trial.method_b if left == trial.method_a else trial.method_a
        issued = IssuedTrial(trial.trial_id, trial.figure_id, participant_id, left, right)
        self.outstanding[participant_id] = issued
        self.outstanding_by_pair[best_pair] += 1
        return issued

    @staticmethod
    def _left_method(trial: PlannedTrial, participant_id: str) -> str:
        # Deterministic but participant-dependent side assignment, so
        # the same method does not always sit on the same side.
        digest = hashlib.sha1(
            f"{trial.trial_id}|{participant_id}".encode("utf-8")
        ).digest()
        return trial.method_a if digest[0] % 2 == 0 else trial.method_b

    def record(self, resp: TrialResponse) -> bool:
        """Count a response; False when it is a duplicate.

        Unknown trial ids raise OrphanTrialId.  The first response per
        (trial, participant) wins; later ones are ignored.
        """
        trial = self.by_trial_id.get(resp.trial_id)
        if trial is None:
            raise OrphanTrialId(f"response references unknown trial {resp.trial_id!r}")

        issued = self.outstanding.get(resp.participant_id)
        if issued is not None and issued.trial_id == resp.trial_id:
            del self.outstanding[resp.participant_id]
            self.outstanding_by_pair[trial.pair] -= 1

        key = (resp.trial_id, resp.participant_id)
        if key in self.seen:
            return False
        self.seen.add(key)
        self.answered_by_pair[trial.pair] += 1
        self.answered_by_trial[resp.trial_id] += 1
        self.participant_pairs.setdefault(resp.participant_id, set()).add(trial.pair)
        return True

    # -- progress ---------------------------------------------------------

    def is_outstanding(self, participant_id: str, trial_id: str) -> bool:
        issued = self.outstanding.get(participant_id)
        return issued is not None and issued.trial_id == trial_id

    def progress(self) -> dict:
        counts = list(self.answered_by_pair.values())
        histogram: dict[int, int] = {}
        for c in counts:
            histogram[c] = histogram.get(c, 0) + 1
        return {
            "answered": int(len(self.seen)),
            "pairs": len(self.pair_order),
            "trials": len(self.plan),
            "coverage_histogram": {str(k): v for k, v in sorted(histogram.items())},
        }


def next_trial(
    participant_id: str,
    plan: list[PlannedTrial],
    log: list[TrialResponse],
) -> IssuedTrial | None:
    """Stateless wrapper: rebuild scheduler state from the log and issue."""
    sched = Scheduler(plan)
    sched.replay(log)
    return sched.next_trial(participant_id)


# ------------------------------------------------------------ NDJSON log


def append_response(path, resp: TrialResponse) -> None:
    """Append one response and force it to disk before returning."""
    line = json.dumps(
        {
            "trial_id": resp.trial_id,
            "participant_id": resp.participant_id,
            "left_method": resp.left_method,
            "right_method": resp.right_method,
            "choice": resp.choice,
            "timestamp_ms": resp.timestamp_ms,
        }
    )
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(line + "\n")
        fh.flush()
        os.fsync(fh.fileno())


def read_log(path) -> list[TrialResponse]:
    """Replay an NDJSON response log, tolerating a torn final line."""
    out: list[TrialResponse] = []
    if not os.path.exists(path):
        return out
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                e = json.loads(line)
            except json.JSONDecodeError:
                # A crash mid-append can tear the last line; everything
                # before it is intact, so skip rather than fail.
                continue
            out.append(
                TrialResponse(
                    trial_id=e["trial_id"],
                    participant_id=e["participant_id"],
                    left_method=e["left_method"],
                    right_method=e["right_method"],
                    choice=e["choice"],
                    timestamp_ms=int(e.get("timestamp_ms", 0)),
                )
            )
    return out


# ------------------------------------------------------------- analysis


@dataclass(frozen=True)
class WinTable:
    """Per-method wins and trial counts; every trial is one win, one loss."""

    methods: tuple[str, ...]
    wins: dict[str, int]
    totals: dict[str, int]

    def win_pct(self, method: str) -> float:
        n = self.totals.get(method, 0)
        return self.wins.get(method, 0) / n if n else 0.0


@dataclass(frozen=True)
class ConcordanceResult:
    w: float
    chi_squared: float
    degrees_of_freedom: int
    p_value: float
    rater_count: int
    method_count: int
    per_rater_rankings: tuple[tuple[float, ...], ...]


def _dedupe(responses: list[TrialResponse]) -> list[TrialResponse]:
    seen: set[tuple[str, str]] = set()
    out = []
    for resp in responses:
        key = (resp.trial_id, resp.participant_id)
        if key in seen:
            continue
        seen.add(key)
        out.append(resp)
    return out


def win_table(
    responses: list[TrialResponse],
    plan: list[PlannedTrial] | None = None,
) -> WinTable:
    """Wins and appearances per method over deduplicated responses.

    When a plan is given, responses referencing trials outside it raise
    OrphanTrialId.
    """
    known = {t.trial_id for t in plan} if plan is not None else None
    wins: dict[str, int] = {}
    totals: dict[str, int] = {}
    for resp in _dedupe(responses):
        if known is not None and resp.trial_id not in known:
            raise OrphanTrialId(
                f"response references unknown trial {resp.trial_id!r}"
            )
        for m in (resp.left_method, resp.right_method):
            totals[m] = totals.get(m, 0) + 1
        winner = resp.chosen_method
        wins[winner] = wins.get(winner, 0) + 1
    methods = tuple(sorted(totals))
    return WinTable(methods=methods, wins=wins, totals=totals)


def kendalls_w_from_ranks(ranks: np.ndarray) -> ConcordanceResult:
    """Kendall's coefficient of concordance with the tie correction.

    ``ranks`` is (raters, items); each row holds that rater's ranking
    of all items (average ranks for ties).  Significance comes from the
    chi-squared approximation with items-1 degrees of freedom.
    """
    ranks = np.asarray(ranks, dtype=np.float64)
    if ranks.ndim != 2:
        raise ValueError("ranks must be a 2-D (raters x items) array")
    m, n = ranks.shape
    if m < 2:
        raise InsufficientRaters(f"need at least two raters, got {m}")
    if n < 2:
        raise TooFewMethods(f"need at least two items, got {n}")

    column_sums = ranks.sum(axis=0)
    s = float(np.sum((column_sums - m * (n + 1) / 2.0) ** 2))

    tie_term = 0.0
    for row in ranks:
        _, counts = np.unique(row, return_counts=True)
        tie_term += float(np.sum(counts.astype(np.float64) ** 3 - counts))

    denom = m * m * (n ** 3 - n) - m * tie_term
    w = 12.0 * s / denom if denom > 0 else 0.0
    chi2 = m * (n - 1) * w
    df = n - 1
    p = float(_scipy_stats.chi2.sf(chi2, df))
    return ConcordanceResult(
        w=float(w),
        chi_squared=float(chi2),
        degrees_of_freedom=df,
        p_value=p,
        rater_count=m,
        method_count=n,
        per_rater_rankings=tuple(tuple(float(v) for v in row) for row in ranks),
    )


def _rater_ranks(
    responses: list[TrialResponse], methods: tuple[str, ...]
) -> np.ndarray:
    """Per-rater rankings of the methods by that rater's win rate.

    Rank 1 is the method the rater preferred most; methods a rater
    never saw get win rate 0 and share the bottom ranks.
    """
    raters = sorted({r.participant_id for r in responses})
    rows = []
    for rater in raters:
        wins = {m: 0 for m in methods}
        seen = {m: 0 for m in methods}
        for resp in responses:
            if resp.participant_id != rater:
                continue
            for m in (resp.left_method, resp.right_method):
                if m in seen:
                    seen[m] += 1
            if resp.chosen_method in wins:
                wins[resp.chosen_method] += 1
        rates = np.array(
            [wins[m] / seen[m] if seen[m] else 0.0 for m in methods]
        )
        # rankdata assigns 1 to the smallest, so negate for "1 = best".
        rows.append(_scipy_stats.rankdata(-rates, method="average"))
    return np.array(rows, dtype=np.float64)


def kendalls_w(
    responses: list[TrialResponse],
    methods: list[str] | tuple[str, ...],
) -> ConcordanceResult:
    """Agreement between participants on the method ranking."""
    methods = tuple(sorted(set(methods)))
    if len(methods) < 2:
        raise TooFewMethods(f"need at least two methods, got {len(methods)}")
    responses = _dedupe(responses)
    raters = {r.participant_id for r in responses}
    if len(raters) < 2:
        raise InsufficientRaters(f"need at least two raters, got {len(raters)}")
    return kendalls_w_from_ranks(_rater_ranks(responses, methods))


def concordance_by_dataset(
    responses: list[TrialResponse],
    methods: list[str] | tuple[str, ...],
    plan: list[PlannedTrial],
    dataset_partition: dict[str, str] | None = None,
) -> dict[str, ConcordanceResult]:
    """Pooled concordance plus one result per dataset.

    ``dataset_partition`` maps figure ids to dataset names; figures not
    mentioned fall into the pooled result only.  Datasets whose slice
    has fewer than two raters are skipped rather than erroring.
    """
    by_trial = {t.trial_id: t for t in plan}
    responses = _dedupe(responses)
    for resp in responses:
        if resp.trial_id not in by_trial:
            raise OrphanTrialId(
                f"response references unknown trial {resp.trial_id!r}"
            )

    out = {"pooled": kendalls_w(responses, methods)}
    if dataset_partition:
        slices: dict[str, list[TrialResponse]] = {}
        for resp in responses:
            figure = by_trial[resp.trial_id].figure_id
            dataset = dataset_partition.get(figure)
            if dataset is not None:
                slices.setdefault(dataset, []).append(resp)
        for dataset in sorted(slices):
            try:
                out[dataset] = kendalls_w(slices[dataset], methods)
            except InsufficientRaters:
                continue
    return out
