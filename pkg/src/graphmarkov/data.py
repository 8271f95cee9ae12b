"""State-sequence ingestion, masking, missing-value injection, normalization,
temporal splitting, and windowing into training samples.

A state series is a T x S matrix of sensor readings plus a binary mask of the
same shape; missing readings are zero-filled so that values * mask == values
always holds. Operations never mutate a series; they return new ones.
"""

import csv
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

DEFAULT_STEP_SECONDS = 300.0


@dataclass(frozen=True)
class NormStats:
    """Affine [0,1] normalization parameters (taken over observed entries)."""

    vmin: float
    vmax: float

    @property
    def span(self) -> float:
        return self.vmax - self.vmin


@dataclass(frozen=True)
class StateSeries:
    """T x S readings with a parallel binary observation mask.

    values[t, s] is zero wherever mask[t, s] is zero. Timestamps are epoch
    seconds, strictly increasing with constant spacing. norm records the
    normalization applied to the values, if any.
    """

    values: np.ndarray
    mask: np.ndarray
    timestamps: np.ndarray
    norm: NormStats | None = None

    def __post_init__(self):
        values = _frozen(self.values)
        mask = _frozen(self.mask)
        timestamps = _frozen(self.timestamps)
        if values.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {values.shape}")
        if mask.shape != values.shape:
            raise ValueError(f"mask shape {mask.shape} != values shape {values.shape}")
        if timestamps.shape != (values.shape[0],):
            raise ValueError("timestamps length must equal the number of steps")
        if not np.all((mask == 0.0) | (mask == 1.0)):
            raise ValueError("mask entries must be 0 or 1")
        if np.any(values[mask == 0.0] != 0.0):
            raise ValueError("missing entries must be zero-filled")
        if values.shape[0] >= 2:
            gaps = np.diff(timestamps)
            if np.any(gaps <= 0):
                raise ValueError("timestamps must be strictly increasing")
            if np.max(gaps) - np.min(gaps) > 1e-6:
                raise ValueError("timestamps must have constant spacing")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "timestamps", timestamps)

    @property
    def steps(self) -> int:
        return self.values.shape[0]

    @property
    def size(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Sample:
    """One training window: n input steps (oldest first) and the next step as
    the label."""

    inputs: np.ndarray
    input_mask: np.ndarray
    label: np.ndarray
    label_mask: np.ndarray

    @property
    def history(self) -> int:
        return self.inputs.shape[0]


@dataclass(frozen=True)
class SplitSpec:
    """Contiguous temporal split fractions (train, validation, test)."""

    train_fraction: float = 0.6
    val_fraction: float = 0.2
    test_fraction: float = 0.2

    def __post_init__(self):
        fracs = (self.train_fraction, self.val_fraction, self.test_fraction)
        if any(not 0.0 < f < 1.0 for f in fracs):
            raise ValueError(f"split fractions must each lie in (0,1), got {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {fracs}")


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=np.float64)
    out.setflags(write=False)
    return out


def synthesize_timestamps(steps: int, step_seconds: float = DEFAULT_STEP_SECONDS) -> np.ndarray:
    """Epoch-0-based timestamps at a fixed interval (default 5 minutes)."""
    return np.arange(steps, dtype=np.float64) * step_seconds


def ingest_csv(path) -> StateSeries:
    """Read a speed CSV into a StateSeries.

    The file may carry an optional header row of sensor IDs and an optional
    first column of ISO-8601 timestamps; both are detected by type-sniffing
    the first two rows/columns. Empty cells and literal zeros are treated as
    missing (mask 0, value 0). When no timestamp column is present,
    timestamps are synthesized at 5-minute spacing from epoch 0.

    Raises:
        ValueError: ragged rows, unparseable values, or non-monotonic
            timestamps.
    """
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise ValueError(f"speed file {path} is empty")

    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"speed file {path} has ragged rows (widths {sorted(widths)})")

    sniff_row = rows[1] if len(rows) >= 2 else rows[0]
    has_time_col = _parse_iso(sniff_row[0]) is not None
    data_start_col = 1 if has_time_col else 0

    has_header = any(
        cell.strip() != "" and not _is_float(cell) for cell in rows[0][data_start_col:]
    )
    data_rows = rows[1:] if has_header else rows
    if not data_rows:
        raise ValueError(f"speed file {path} has a header but no data rows")

    steps = len(data_rows)
    sensors = len(data_rows[0]) - data_start_col
    if sensors < 1:
        raise ValueError(f"speed file {path} has no sensor columns")

    values = np.zeros((steps, sensors))
    mask = np.ones((steps, sensors))
    times = np.zeros(steps) if has_time_col else None
    for t, row in enumerate(data_rows):
        if has_time_col:
            stamp = _parse_iso(row[0])
            if stamp is None:
                raise ValueError(f"unparseable timestamp {row[0]!r} at data row {t}")
            times[t] = stamp
        for s, cell in enumerate(row[data_start_col:]):
            text = cell.strip()
            if text == "":
                mask[t, s] = 0.0
                continue
            try:
                v = float(text)
            except ValueError:
                raise ValueError(f"unparseable value {cell!r} at data row {t}, column {s}") from None
            if v == 0.0:
                mask[t, s] = 0.0
            else:
                values[t, s] = v

    if times is None:
        times = synthesize_timestamps(steps)
    elif steps >= 2 and np.any(np.diff(times) <= 0):
        raise ValueError(f"speed file {path} has non-monotonic timestamps")
    return StateSeries(values=values, mask=mask, timestamps=times)


def write_speed_csv(path, series: StateSeries, sensor_ids: list[str] | None = None) -> None:
    """Write a StateSeries as a speed CSV with a header row and an ISO-8601
    timestamp column; missing entries become empty cells."""
    if sensor_ids is None:
        sensor_ids = [f"sensor_{s}" for s in range(series.size)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp"] + list(sensor_ids))
        for t in range(series.steps):
            stamp = datetime.fromtimestamp(series.timestamps[t], tz=timezone.utc)
            row = [stamp.strftime("%Y-%m-%dT%H:%M:%S")]
            for s in range(series.size):
                row.append(repr(float(series.values[t, s])) if series.mask[t, s] else "")
            writer.writerow(row)


def inject_missing(series: StateSeries, rate: float, seed: int) -> StateSeries:
    """Drop a random fraction of the currently-observed entries.

    Each observed entry is independently masked out with probability `rate`
    (so the new missing count is binomial). Previously missing entries stay
    missing. Deterministic for a given seed.

    Raises:
        ValueError: rate outside [0, 1).
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"missing rate must lie in [0,1), got {rate}")
    if rate == 0.0:
        return series
    rng = np.random.default_rng(seed)
    drop = (rng.random(series.values.shape) < rate) & (series.mask == 1.0)
    mask = np.where(drop, 0.0, series.mask)
    values = np.where(drop, 0.0, series.values)
    return StateSeries(values=values, mask=mask, timestamps=series.timestamps, norm=series.norm)


def observed_stats(series: StateSeries) -> NormStats:
    """Min/max over observed entries only.

    Raises:
        ValueError: no observed entries, or constant observed values.
    """
    observed = series.values[series.mask == 1.0]
    if observed.size == 0:
        raise ValueError("series has no observed entries to compute stats from")
    vmin, vmax = float(observed.min()), float(observed.max())
    if vmax == vmin:
        raise ValueError(f"constant series (min == max == {vmin}); cannot normalize")
    return NormStats(vmin=vmin, vmax=vmax)


def normalize(series: StateSeries, stats: NormStats | None = None) -> tuple[StateSeries, NormStats]:
    """Map observed values through (v - min) / (max - min); missing entries
    stay zero. When stats are omitted they are computed from this series'
    observed entries; pass training-split stats to normalize validation/test
    data without leakage."""
    if stats is None:
        stats = observed_stats(series)
    if stats.span == 0:
        raise ValueError("degenerate stats: max equals min")
    values = np.where(series.mask == 1.0, (series.values - stats.vmin) / stats.span, 0.0)
    out = StateSeries(values=values, mask=series.mask, timestamps=series.timestamps, norm=stats)
    return out, stats


def denormalize(values: np.ndarray, stats: NormStats) -> np.ndarray:
    """Affine inverse of normalize: v * (max - min) + min.

    Raises:
        ValueError: stats absent.
    """
    if stats is None:
        raise ValueError("cannot denormalize without stats")
    return np.asarray(values) * stats.span + stats.vmin


def split(series: StateSeries, spec: SplitSpec) -> tuple[StateSeries, StateSeries, StateSeries]:
    """Contiguous temporal partition train -> validation -> test.

    Boundary indices floor the fractions; the remainder goes to the test
    part.

    Raises:
        ValueError: series too short for a non-empty partition.
    """
    t = series.steps
    n_train = int(spec.train_fraction * t)
    n_val = int(spec.val_fraction * t)
    n_test = t - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(f"series of {t} steps too short to split {spec}")
    parts = []
    for lo, hi in ((0, n_train), (n_train, n_train + n_val), (n_train + n_val, t)):
        parts.append(
            StateSeries(
                values=series.values[lo:hi],
                mask=series.mask[lo:hi],
                timestamps=series.timestamps[lo:hi],
                norm=series.norm,
            )
        )
    return parts[0], parts[1], parts[2]


def window(series: StateSeries, n: int, label_series: StateSeries | None = None) -> list[Sample]:
    """Slide an n-step window over the series, producing T - n samples.

    Sample k covers input steps k .. k+n-1 (oldest first) and the label step
    k+n. Inputs and masks come from `series`; labels and label masks come
    from `label_series` when given (so inputs can carry injected missingness
    while labels keep the original observations), else from `series` itself.

    Raises:
        ValueError: fewer than n+1 steps, or label series mismatch.
    """
    if n < 1:
        raise ValueError("window length must be >= 1")
    if series.steps < n + 1:
        raise ValueError(f"need at least {n + 1} steps to window, got {series.steps}")
    labels = series if label_series is None else label_series
    if labels.steps != series.steps or labels.size != series.size:
        raise ValueError("label series shape must match the input series")
    samples = []
    for k in range(series.steps - n):
        samples.append(
            Sample(
                inputs=series.values[k : k + n],
                input_mask=series.mask[k : k + n],
                label=labels.values[k + n],
                label_mask=labels.mask[k + n],
            )
        )
    return samples


@dataclass(frozen=True)
class DatasetBundle:
    """Windowed train/val/test samples plus everything needed to interpret
    them: the normalization stats and the label-step timestamps per part."""

    train: list
    val: list
    test: list
    stats: NormStats
    train_label_times: np.ndarray
    val_label_times: np.ndarray
    test_label_times: np.ndarray


def prepare_datasets(
    series: StateSeries,
    n: int,
    missing_rate: float,
    seed: int,
    spec: SplitSpec | None = None,
) -> DatasetBundle:
    """Full data pipeline: inject missingness, normalize with training-split
    stats, split contiguously, and window each part.

    Injection corrupts inputs only: windows draw inputs and input masks from
    the injected series but labels and label masks from the pre-injection
    series, so injected entries still serve as labels while genuinely unknown
    ones stay excluded from the loss.
    """
    if spec is None:
        spec = SplitSpec()
    injected = inject_missing(series, missing_rate, seed)

    n_train = int(spec.train_fraction * series.steps)
    train_slice = StateSeries(
        values=injected.values[:n_train],
        mask=injected.mask[:n_train],
        timestamps=injected.timestamps[:n_train],
    )
    stats = observed_stats(train_slice)

    injected_norm, _ = normalize(injected, stats)
    original_norm, _ = normalize(series, stats)

    in_parts = split(injected_norm, spec)
    label_parts = split(original_norm, spec)

    windowed = [
        window(inp, n, label_series=lab) for inp, lab in zip(in_parts, label_parts)
    ]
    label_times = [part.timestamps[n:] for part in in_parts]
    return DatasetBundle(
        train=windowed[0],
        val=windowed[1],
        test=windowed[2],
        stats=stats,
        train_label_times=label_times[0],
        val_label_times=label_times[1],
        test_label_times=label_times[2],
    )


def _is_float(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def _parse_iso(text: str) -> float | None:
    try:
        stamp = datetime.fromisoformat(text.strip())
    except ValueError:
        return None
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp.timestamp()
