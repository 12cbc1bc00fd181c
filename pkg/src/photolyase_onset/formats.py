"""Plain-text file formats: ``key=value`` configs, CSV tables, reports.

Floats are written in scientific notation with 17 significant digits so
every double survives a write/read round trip unchanged.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile

from .assay import AliquotMeasurement
from .errors import InputError

TRAJECTORY_HEADER = ("t_s", "ps_molar")
MEASUREMENT_HEADER = ("gel_time_s", "bound_counts", "unbound_counts", "ps_estimate_molar")


class ConfigError(InputError):
    """Bad configuration: unknown or missing key, or an unparsable value."""

    def __init__(self, key, message):
        super().__init__(f"config key {key!r}: {message}")
        self.key = key


class DataFormatError(InputError):
    """Malformed data file; ``line`` is 1-based."""

    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


def fmt_float(x: float) -> str:
    return f"{x:.16e}"


def fmt_value(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return fmt_float(x)
    return str(x)


def parse_config(text: str) -> dict:
    """Parse flat ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line, f"line {lineno} is not of the form key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(key, f"line {lineno} has an empty key")
        if key in out:
            raise ConfigError(key, f"duplicated on line {lineno}")
        out[key] = value
    return out


def write_atomic(path: str, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trajectory_csv(samples) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRAJECTORY_HEADER)
    for s in samples:
        writer.writerow((fmt_float(s.t), fmt_float(s.ps)))
    return buf.getvalue()


def measurements_csv(measurements) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MEASUREMENT_HEADER)
    for m in measurements:
        writer.writerow((fmt_float(m.gel_time), m.bound_counts, m.unbound_counts, fmt_float(m.ps_estimate)))
    return buf.getvalue()


def read_measurements(text: str, p0: float) -> list[AliquotMeasurement]:
    """Parse the measurement CSV written by :func:`measurements_csv`."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise DataFormatError(1, "empty file")
    header = tuple(cell.strip() for cell in rows[0])
    if header != MEASUREMENT_HEADER:
        raise DataFormatError(1, f"expected header {','.join(MEASUREMENT_HEADER)}, got {','.join(header)}")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(MEASUREMENT_HEADER):
            raise DataFormatError(lineno, f"expected {len(MEASUREMENT_HEADER)} fields, got {len(row)}")
        try:
            gel_time = float(row[0])
            bound = int(row[1])
            unbound = int(row[2])
            ps = float(row[3])
        except ValueError as exc:
            raise DataFormatError(lineno, f"non-numeric cell ({exc})") from None
        if not (math.isfinite(gel_time) and math.isfinite(ps)):
            raise DataFormatError(lineno, "non-finite value")
        if bound < 0 or unbound < 0:
            raise DataFormatError(lineno, "negative counts")
        out.append(AliquotMeasurement(gel_time, bound, unbound, ps, p0))
    return out


def report_lines(values: dict) -> str:
    return "".join(f"{key}={fmt_value(value)}\n" for key, value in values.items())
