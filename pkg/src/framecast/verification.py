"""Forecast verification: continuous scores, contingency-based categorical
scores, ROC/AUC, and stratified report assembly.

Continuous metrics (MSE, MAE, PCC) average over every target pixel and time.
Categorical metrics binarize both forecast and observation at an event
threshold tau (inclusive, value >= tau counts as an event) and reduce the
resulting contingency counts. Scores whose denominator is zero are reported
as explicit undefined markers (None), never coerced to 0, so degenerate
cases cannot inflate apparent skill.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FramecastError

DEFAULT_TAUS = (1.0, 2.0, 8.0)
DEFAULT_PERCENTILE_BINS = ((0, 20), (20, 40), (40, 60), (60, 80), (80, 95))


class UndefinedMetricError(FramecastError):
    """A score is mathematically undefined for the given inputs."""


def _check_shapes(pred, obs):
    pred = np.asarray(pred, dtype=np.float64)
    obs = np.asarray(obs, dtype=np.float64)
    if pred.shape != obs.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs obs {obs.shape}")
    return pred, obs


def mse(pred, obs) -> float:
    """Mean squared error over all target pixels and times."""
    pred, obs = _check_shapes(pred, obs)
    return float(np.mean((pred - obs) ** 2))


def mae(pred, obs) -> float:
    """Mean absolute error over all target pixels and times."""
    pred, obs = _check_shapes(pred, obs)
    return float(np.mean(np.abs(pred - obs)))


def pcc(pred, obs) -> float:
    """Pearson correlation over all target pixels and times.

    Raises UndefinedMetricError when either input has zero variance; the
    caller decides whether that surfaces as an undefined report entry.
    """
    pred, obs = _check_shapes(pred, obs)
    dp = pred - pred.mean()
    do = obs - obs.mean()
    denom = np.sqrt((dp * dp).sum()) * np.sqrt((do * do).sum())
    if denom == 0.0:
        raise UndefinedMetricError("correlation undefined for constant input")
    return float((dp * do).sum() / denom)


def binarize(values, tau) -> np.ndarray:
    """Threshold-exceedance indicator: value >= tau (inclusive)."""
    return np.asarray(values) >= tau


@dataclass(frozen=True)
class ContingencyTable:
    """Counts of hits, false alarms, misses, and correct rejections."""

    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("contingency counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def contingency(pred, obs, tau) -> ContingencyTable:
    """Contingency counts for threshold-exceedance events at tau."""
    pred, obs = _check_shapes(pred, obs)
    p = binarize(pred, tau)
    o = binarize(obs, tau)
    return ContingencyTable(
        tp=int(np.sum(p & o)),
        fp=int(np.sum(p & ~o)),
        fn=int(np.sum(~p & o)),
        tn=int(np.sum(~p & ~o)),
    )


def csi(table: ContingencyTable) -> float | None:
    """Critical success index TP / (TP + FP + FN); None if no events at all."""
    denom = table.tp + table.fp + table.fn
    return table.tp / denom if denom else None


def far(table: ContingencyTable) -> float | None:
    """False alarm ratio FP / (TP + FP); None when nothing was forecast."""
    denom = table.tp + table.fp
    return table.fp / denom if denom else None


def pod(table: ContingencyTable) -> float | None:
    """Probability of detection TP / (TP + FN); None when nothing was observed."""
    denom = table.tp + table.fn
    return table.tp / denom if denom else None


def pofd(table: ContingencyTable) -> float | None:
    """Probability of false detection FP / (FP + TN); distinct from FAR."""
    denom = table.fp + table.tn
    return table.fp / denom if denom else None


@dataclass(frozen=True)
class ROCCurve:
    """(POFD, POD) points swept over decision thresholds, anchored at the corners."""

    points: np.ndarray  # (n, 2) rows of (pofd, pod)

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 2:
            raise ValueError("ROC points must be (n, 2)")
        if points.min() < 0.0 or points.max() > 1.0:
            raise ValueError("ROC coordinates must lie in [0, 1]")
        if np.any(np.diff(points[:, 0]) < 0):
            raise ValueError("POFD must be non-decreasing along the curve")
        object.__setattr__(self, "points", points)

    @property
    def pofd_values(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def pod_values(self) -> np.ndarray:
        return self.points[:, 1]


def roc_curve(scores, obs, tau_event, gammas) -> ROCCurve:
    """ROC curve of continuous forecast scores against observed exceedances.

    Observations binarize at tau_event; for every decision threshold gamma
    the forecast event is score >= gamma, giving one (POFD, POD) point.
    Points are sorted by POFD and anchored at (0, 0) and (1, 1).

    Raises UndefinedMetricError when the observations contain no event or no
    non-event pixels (either rate is then 0/0).
    """
    gammas = list(gammas)
    if not gammas:
        raise ValueError("gamma list must be non-empty")
    scores, obs = _check_shapes(scores, obs)
    events = binarize(obs, tau_event)
    n_event = int(events.sum())
    n_nonevent = events.size - n_event
    if n_event == 0 and n_nonevent == 0:
        raise UndefinedMetricError("ROC undefined: no pixels to classify")
    if n_event == 0 or n_nonevent == 0:
        raise UndefinedMetricError(
            "ROC undefined: observations are single-class at this threshold"
        )
    pts = []
    for gamma in gammas:
        # tau is already applied to obs; gamma thresholds the forecast scores
        forecast = scores >= gamma
        tp = int(np.sum(forecast & events))
        fp = int(np.sum(forecast & ~events))
        fn = int(np.sum(~forecast & events))
        tn = int(np.sum(~forecast & ~events))
        pts.append((fp / (fp + tn), tp / (tp + fn)))
    pts.sort(key=lambda p: (p[0], p[1]))
    pts = [(0.0, 0.0)] + pts + [(1.0, 1.0)]
    return ROCCurve(np.asarray(pts))


def auc(curve: ROCCurve) -> float:
    """Area under the ROC curve by the trapezoid rule over POFD."""
    x = curve.pofd_values
    y = curve.pod_values
    return float(np.trapezoid(y, x))


def default_gammas(*arrays, count: int = 33) -> np.ndarray:
    """Evenly spaced decision thresholds spanning the given score arrays."""
    top = max(float(np.max(a)) for a in arrays if np.asarray(a).size)
    return np.linspace(0.0, max(top, 1e-12), count)


# ---- reports ----------------------------------------------------------------


@dataclass(frozen=True)
class MetricRow:
    lead_minutes: int
    metric: str
    value: float | None
    threshold: float | None = None
    stratum: str | None = None
    seed: str | None = None


_RANGES = {"csi": (0.0, 1.0), "far": (0.0, 1.0), "auc": (0.0, 1.0),
           "pod": (0.0, 1.0), "pofd": (0.0, 1.0), "pcc": (-1.0, 1.0)}


@dataclass
class MetricReport:
    """Flat collection of scored rows plus CSV / text serialization."""

    rows: list[MetricRow] = field(default_factory=list)

    def add(self, **kwargs):
        self.rows.append(MetricRow(**kwargs))

    def extend(self, other: "MetricReport"):
        self.rows.extend(other.rows)

    def validate(self):
        """Range checks plus strictly increasing leads within each series."""
        series = {}
        for row in self.rows:
            low_high = _RANGES.get(row.metric)
            if row.value is not None and low_high is not None:
                low, high = low_high
                if not low - 1e-12 <= row.value <= high + 1e-12:
                    raise ValueError(
                        f"{row.metric} value {row.value} outside [{low}, {high}]"
                    )
            key = (row.metric, row.threshold, row.stratum, row.seed)
            series.setdefault(key, []).append(row.lead_minutes)
        for key, leads in series.items():
            if any(b <= a for a, b in zip(leads, leads[1:])):
                raise ValueError(f"lead times not strictly increasing for {key}")

    def select(self, **conditions) -> list[MetricRow]:
        out = []
        for row in self.rows:
            if all(getattr(row, k) == v for k, v in conditions.items()):
                out.append(row)
        return out

    def to_csv(self, path, comments: list[str] | None = None):
        with Path(path).open("w", newline="", encoding="utf-8") as f:
            for line in comments or []:
                f.write(f"# {line}\n")
            writer = csv.writer(f)
            writer.writerow(
                ["lead_minutes", "threshold", "stratum", "seed", "metric", "value", "undefined"]
            )
            for row in self.rows:
                writer.writerow(
                    [
                        row.lead_minutes,
                        "" if row.threshold is None else repr(float(row.threshold)),
                        row.stratum or "",
                        row.seed or "",
                        row.metric,
                        "" if row.value is None else repr(float(row.value)),
                        int(row.value is None),
                    ]
                )

    @classmethod
    def from_csv(cls, path) -> "MetricReport":
        report = cls()
        with Path(path).open("r", newline="", encoding="utf-8") as f:
            rows = [r for r in csv.reader(line for line in f if not line.startswith("#"))]
        for raw in rows[1:]:
            lead, threshold, stratum, seed, metric, value, undefined = raw
            report.add(
                lead_minutes=int(lead),
                metric=metric,
                value=None if int(undefined) else float(value),
                threshold=float(threshold) if threshold else None,
                stratum=stratum or None,
                seed=seed or None,
            )
        return report

    def to_text(self) -> str:
        lines = ["lead  threshold  stratum  seed  metric  value"]
        for row in self.rows:
            value = "undefined" if row.value is None else f"{row.value:.6f}"
            lines.append(
                f"{row.lead_minutes:>4}  {row.threshold if row.threshold is not None else '-':>9}"
                f"  {row.stratum or '-':>7}  {row.seed or '-':>4}  {row.metric:>6}  {value}"
            )
        return "\n".join(lines) + "\n"


def _defined(fn, *args):
    try:
        return fn(*args)
    except UndefinedMetricError:
        return None


def stratify_by_lead_time(
    pred_frames,
    obs_frames,
    step_minutes: int,
    taus=DEFAULT_TAUS,
    gammas=None,
    stratum: str | None = None,
    seed: str | None = None,
) -> MetricReport:
    """Score each forecast frame independently; lead k is k * step_minutes.

    Continuous scores (mse, mae, pcc) come out once per lead; categorical
    scores (csi, far, pod, pofd) and ROC AUC once per lead and threshold.
    """
    pred, obs = _check_shapes(pred_frames, obs_frames)
    if pred.ndim != 3:
        raise ValueError(f"expected (horizon, H, W) frames, got shape {pred.shape}")
    if gammas is None:
        gammas = default_gammas(pred, obs)
    report = MetricReport()
    for k in range(pred.shape[0]):
        lead = (k + 1) * step_minutes
        p, o = pred[k], obs[k]
        report.add(lead_minutes=lead, metric="mse", value=mse(p, o),
                   stratum=stratum, seed=seed)
        report.add(lead_minutes=lead, metric="mae", value=mae(p, o),
                   stratum=stratum, seed=seed)
        report.add(lead_minutes=lead, metric="pcc", value=_defined(pcc, p, o),
                   stratum=stratum, seed=seed)
        for tau in taus:
            table = contingency(p, o, tau)
            for name, score in (("csi", csi(table)), ("far", far(table)),
                                ("pod", pod(table)), ("pofd", pofd(table))):
                report.add(lead_minutes=lead, metric=name, value=score,
                           threshold=tau, stratum=stratum, seed=seed)
            def curve_auc():
                return auc(roc_curve(p, o, tau, gammas))
            report.add(lead_minutes=lead, metric="auc", value=_defined(curve_auc),
                       threshold=tau, stratum=stratum, seed=seed)
    return report


def assign_percentile_bins(means, bins=DEFAULT_PERCENTILE_BINS):
    """Map per-event means to percentile bins (low < p <= high), or None.

    The percentile of an event is its rank midpoint in the set,
    100 * (rank - 0.5) / n with rank 1-based over the sorted means (ties
    keep input order), so a lone event sits at the 50th percentile. The
    default bins deliberately leave everything above the 95th percentile
    unassigned.
    """
    means = np.asarray(means, dtype=np.float64)
    order = np.argsort(means, kind="stable")
    ranks = np.empty(means.size, dtype=np.int64)
    ranks[order] = np.arange(1, means.size + 1)
    percentiles = 100.0 * (ranks - 0.5) / means.size
    labels = []
    for p in percentiles:
        chosen = None
        for low, high in bins:
            if low < p <= high:
                chosen = (low, high)
                break
        labels.append(chosen)
    return labels


def stratify_by_percentile_bin(
    event_pairs,
    bins=DEFAULT_PERCENTILE_BINS,
    step_minutes: int = 30,
    taus=DEFAULT_TAUS,
    seed: str | None = None,
) -> MetricReport:
    """Per-bin verification of (pred_target, obs_target) frame pairs.

    Events land in intensity bins by the percentile of their observed mean;
    an empty bin simply contributes no rows.
    """
    pairs = list(event_pairs)
    if not pairs:
        raise ValueError("need at least one (pred, obs) pair")
    means = [float(np.asarray(obs).mean()) for _, obs in pairs]
    labels = assign_percentile_bins(means, bins)
    report = MetricReport()
    for bin_edges in bins:
        members = [pairs[i] for i, lab in enumerate(labels) if lab == tuple(bin_edges)]
        if not members:
            continue
        stratum = f"p{bin_edges[0]}-{bin_edges[1]}"
        report.extend(
            _pooled_lead_report(members, step_minutes, taus, stratum=stratum, seed=seed)
        )
    return report


def _pooled_lead_report(members, step_minutes, taus, stratum, seed) -> MetricReport:
    """Lead-by-lead scores with all member events pooled per lead."""
    horizon = np.asarray(members[0][0]).shape[0]
    report = MetricReport()
    for k in range(horizon):
        lead = (k + 1) * step_minutes
        p = np.stack([np.asarray(pred)[k] for pred, _ in members])
        o = np.stack([np.asarray(obs)[k] for _, obs in members])
        report.add(lead_minutes=lead, metric="mse", value=mse(p, o), stratum=stratum, seed=seed)
        report.add(lead_minutes=lead, metric="mae", value=mae(p, o), stratum=stratum, seed=seed)
        report.add(lead_minutes=lead, metric="pcc", value=_defined(pcc, p, o),
                   stratum=stratum, seed=seed)
        for tau in taus:
            table = contingency(p, o, tau)
            for name, score in (("csi", csi(table)), ("far", far(table))):
                report.add(lead_minutes=lead, metric=name, value=score,
                           threshold=tau, stratum=stratum, seed=seed)
    return report


def evaluate_catchments(
    pred_frames,
    obs_frames,
    masks: dict[str, np.ndarray],
    taus=DEFAULT_TAUS,
    step_minutes: int = 30,
    gammas=None,
    seed: str | None = None,
) -> MetricReport:
    """Detection skill (ROC AUC) restricted to named spatial subregions.

    Each mask selects the pixels of one subregion; scores are computed per
    subregion, per event threshold, per lead. An empty mask yields undefined
    markers for that subregion.
    """
    pred, obs = _check_shapes(pred_frames, obs_frames)
    if gammas is None:
        gammas = default_gammas(pred, obs)
    report = MetricReport()
    for name, mask in masks.items():
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != pred.shape[1:]:
            raise ValueError(
                f"mask {name!r} shape {mask.shape} does not match fields {pred.shape[1:]}"
            )
        for k in range(pred.shape[0]):
            lead = (k + 1) * step_minutes
            p = pred[k][mask]
            o = obs[k][mask]
            for tau in taus:
                if p.size == 0:
                    value = None
                else:
                    value = _defined(lambda: auc(roc_curve(p, o, tau, gammas)))
                report.add(lead_minutes=lead, metric="auc", value=value,
                           threshold=tau, stratum=name, seed=seed)
    return report


def aggregate_over_seeds(reports: list[MetricReport]) -> MetricReport:
    """Mean and +/-1 std across seed runs of the same report layout.

    Rows are matched on (lead, metric, threshold, stratum). A value that is
    undefined in any seed stays undefined in the aggregate; the std of a
    single seed is an undefined marker.
    """
    if not reports:
        raise ValueError("need at least one report to aggregate")
    buckets: dict[tuple, list[float | None]] = {}
    order: list[tuple] = []
    for report in reports:
        for row in report.rows:
            key = (row.lead_minutes, row.metric, row.threshold, row.stratum)
            if key not in buckets:
                buckets[key] = []
                order.append(key)
            buckets[key].append(row.value)
    out = MetricReport()
    for key in order:
        lead, metric, threshold, stratum = key
        values = buckets[key]
        defined = [v for v in values if v is not None]
        if len(defined) != len(values):
            mean_value, std_value = None, None
        else:
            mean_value = float(np.mean(defined))
            std_value = float(np.std(defined, ddof=1)) if len(defined) > 1 else None
        out.add(lead_minutes=lead, metric=metric, value=mean_value,
                threshold=threshold, stratum=stratum, seed="mean")
        out.add(lead_minutes=lead, metric=metric, value=std_value,
                threshold=threshold, stratum=stratum, seed="std")
    return out
