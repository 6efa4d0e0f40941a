"""UTC time helpers used across the suite.

All timestamps in gridops are timezone-aware UTC datetimes; availability
arithmetic runs on an integer minute grid (minutes since the Unix epoch).
"""

from __future__ import annotations

from datetime import date, datetime, timedelta, timezone

UTC = timezone.utc


def utcnow() -> datetime:
    return datetime.now(UTC)


def ensure_utc(ts: datetime) -> datetime:
    """Reject naive datetimes; convert aware ones to UTC."""
    if ts.tzinfo is None:
        raise ValueError("naive datetime; all gridops timestamps are UTC-aware")
    return ts.astimezone(UTC)


def parse_ts(text: str) -> datetime:
    """Parse an ISO-8601 timestamp, accepting a trailing 'Z'."""
    ts = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=UTC)
    return ts.astimezone(UTC)


def format_ts(ts: datetime) -> str:
    """ISO-8601 with 'Z' suffix, second precision (stable wire form)."""
    return ensure_utc(ts).replace(microsecond=0).strftime("%Y-%m-%dT%H:%M:%SZ")


def to_minute(ts: datetime) -> int:
    """Minutes since the epoch, floored."""
    return int(ensure_utc(ts).timestamp() // 60)


def ceil_minute(ts: datetime) -> int:
    """First minute index m with minute-start(m) >= ts."""
    seconds = ensure_utc(ts).timestamp()
    return -int(-seconds // 60)


def minute_start(minute: int) -> datetime:
    return datetime.fromtimestamp(minute * 60, UTC)


def is_minute_aligned(ts: datetime) -> bool:
    ts = ensure_utc(ts)
    return ts.second == 0 and ts.microsecond == 0


def add_months(day: date, months: int) -> date:
    """Calendar month shift; day-of-month must exist in the target month."""
    month_index = day.month - 1 + months
    year = day.year + month_index // 12
    month = month_index % 12 + 1
    return day.replace(year=year, month=month)


def business_days_between(opened: date, solved: date) -> int:
    """Count Mon-Fri days in (opened, solved], date granularity.

    Same-day resolution counts as zero; a weekend contributes nothing.
    """
    if solved < opened:
        raise ValueError("solved before opened")
    days = 0
    cursor = opened
    while cursor < solved:
        cursor += timedelta(days=1)
        if cursor.weekday() < 5:
            days += 1
    return days
