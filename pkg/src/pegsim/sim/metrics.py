"""Per-step metrics frames, CSV encoding and peg-restoration analysis."""

from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass, fields
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Union

from ..fixed import SCALE, div, fmt, parse


@dataclass(frozen=True)
class MetricsFrame:
    step: int
    a: int  # real-world price
    b: int  # virtual mark (last clearing price)
    d: int  # (b - a) / a, rounded down
    r: int  # swap rate
    R_E: int  # central bank long-term rate
    index: int
    oi_long: int
    oi_short: int
    trades: int
    volume: int
    miner_pnl: int
    reserve: int
    fee_sink: int
    usde_outstanding: int
    cs_long: int
    exm_supply: int
    solvency_headroom: int
    liquidations: int

    @staticmethod
    def spread(a: int, b: int) -> int:
        return div(b - a, a)


COLUMNS = [f.name for f in fields(MetricsFrame)]
INT_COLUMNS = {"step", "trades", "liquidations"}


def to_row(frame: MetricsFrame) -> List[str]:
    return [str(v) if name in INT_COLUMNS else fmt(v) for name, v in zip(COLUMNS, astuple(frame))]


def write_csv(frames: Iterable[MetricsFrame], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(COLUMNS)
    for fr in frames:
        w.writerow(to_row(fr))


def read_csv(fh) -> List[MetricsFrame]:
    out = []
    for row in csv.DictReader(fh):
        vals = {k: int(v) if k in INT_COLUMNS else parse(v) for k, v in row.items()}
        out.append(MetricsFrame(**vals))
    return out


def to_csv_text(frames: Iterable[MetricsFrame]) -> str:
    buf = io.StringIO()
    write_csv(frames, buf)
    return buf.getvalue()


Series = Sequence[Union[MetricsFrame, int, float, Fraction]]


def _abs_d(item) -> Fraction:
    if isinstance(item, MetricsFrame):
        return abs(Fraction(item.d, SCALE))
    return abs(Fraction(item))


def restoration_time(metrics: Series, epsilon, persistence: int = 1, shock_step: int = 0) -> Optional[int]:
    """Steps from ``shock_step`` until |d| < epsilon starts to hold for ``persistence`` frames.

    ``metrics`` may be metrics frames (d in fixed point, indexed by position)
    or plain spread values. Returns None when the peg is never restored.
    """
    eps = Fraction(epsilon)
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    if persistence < 1:
        raise ValueError("persistence must be at least 1")
    run = 0
    for i in range(shock_step, len(metrics)):
        if _abs_d(metrics[i]) < eps:
            run += 1
            if run == persistence:
                return i - persistence + 1 - shock_step
        else:
            run = 0
    return None


def max_abs_spread(metrics: Sequence[MetricsFrame], start: int = 0) -> int:
    return max((abs(m.d) for m in metrics[start:]), default=0)
