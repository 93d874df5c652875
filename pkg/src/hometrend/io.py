"""File formats: daily CSVs, metadata, report tables, GeoJSON, manifest.

Daily files use the schema ``station_id,date,tmax,tmin`` with ISO-8601
dates; an empty field or ``NA`` is a missing value. All floats are written
with 6 significant digits, p-values with 4, so outputs are compact and
bit-reproducible.
"""

from __future__ import annotations

import csv
import hashlib
import json
from datetime import date
from pathlib import Path

from .errors import InputError
from .homogeneity import HomogeneityBattery
from .series import DailySeries, StationMeta, Variable

NA = "NA"

HOMOGENEITY_COLUMNS = [
    "station",
    "u_pt",
    "p_pt",
    "t_snht",
    "p_snht",
    "v_blrt",
    "p_blrt",
    "u_but",
    "p_but",
    "rejects",
    "class",
]

TREND_COLUMNS = [
    "station",
    "dataset",
    "variable",
    "period",
    "n",
    "s",
    "var_s",
    "var_s_star",
    "z",
    "p",
    "significant",
    "sen_per_decade",
]


def fmt(value: float | None) -> str:
    return NA if value is None else format(float(value), ".6g")


def fmt_p(value: float | None) -> str:
    return NA if value is None else format(float(value), ".4g")


def _parse_value(text: str, path: Path, line: int) -> float | None:
    text = text.strip()
    if text == "" or text.upper() == NA:
        return None
    try:
        return float(text)
    except ValueError:
        raise InputError(f"{path}:{line}: non-numeric value {text!r}") from None


def _parse_date(text: str, path: Path, line: int) -> date:
    try:
        return date.fromisoformat(text.strip())
    except ValueError:
        raise InputError(f"{path}:{line}: malformed date {text!r}") from None


def load_station_csv(path: str | Path) -> tuple[str, DailySeries, DailySeries]:
    """Read one station's daily file into (station_id, tmax, tmin)."""
    path = Path(path)
    tmax: dict[date, float | None] = {}
    tmin: dict[date, float | None] = {}
    station_id = None
    duplicates = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header] != [
            "station_id",
            "date",
            "tmax",
            "tmin",
        ]:
            raise InputError(f"{path}: expected header station_id,date,tmax,tmin")
        for i, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise InputError(f"{path}:{i}: expected 4 fields, got {len(row)}")
            sid = row[0].strip()
            if station_id is None:
                station_id = sid
            elif sid != station_id:
                raise InputError(
                    f"{path}:{i}: mixed station ids {station_id!r} and {sid!r}"
                )
            d = _parse_date(row[1], path, i)
            if d in tmax:
                duplicates.append(d)
            tmax[d] = _parse_value(row[2], path, i)
            tmin[d] = _parse_value(row[3], path, i)
    if station_id is None:
        raise InputError(f"{path}: no data rows")
    if duplicates:
        listing = ", ".join(d.isoformat() for d in sorted(set(duplicates)))
        raise InputError(f"{path}: duplicate dates: {listing}")
    return (
        station_id,
        DailySeries(station_id, Variable.TMAX, dict(sorted(tmax.items()))),
        DailySeries(station_id, Variable.TMIN, dict(sorted(tmin.items()))),
    )


def write_station_csv(path: str | Path, tmax: DailySeries, tmin: DailySeries):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["station_id", "date", "tmax", "tmin"])
        for d in sorted(set(tmax.records) | set(tmin.records)):
            hi, lo = tmax.records.get(d), tmin.records.get(d)
            writer.writerow(
                [
                    tmax.station_id,
                    d.isoformat(),
                    NA if hi is None else format(hi, ".10g"),
                    NA if lo is None else format(lo, ".10g"),
                ]
            )


def load_metadata_csv(path: str | Path) -> dict[str, StationMeta]:
    """Read ``station_id,name,lat,lon,elev,zone`` into StationMeta by id."""
    path = Path(path)
    out: dict[str, StationMeta] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header] != [
            "station_id",
            "name",
            "lat",
            "lon",
            "elev",
            "zone",
        ]:
            raise InputError(f"{path}: expected header station_id,name,lat,lon,elev,zone")
        for i, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 6:
                raise InputError(f"{path}:{i}: expected 6 fields, got {len(row)}")
            sid = row[0].strip()
            if sid in out:
                raise InputError(f"{path}:{i}: duplicate station id {sid!r}")
            elev = _parse_value(row[4], path, i)
            try:
                out[sid] = StationMeta(
                    station_id=sid,
                    name=row[1].strip(),
                    latitude=float(row[2]),
                    longitude=float(row[3]),
                    elevation=elev,
                    zone=row[5].strip() or None,
                )
            except ValueError:
                raise InputError(f"{path}:{i}: non-numeric coordinate") from None
    return out


def write_csv(path: str | Path, columns: list[str], rows: list[dict]):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def battery_row(station_id: str, battery: HomogeneityBattery, month: int | None = None):
    """One homogeneity table row in the fixed PT/SNHT/BLRT/BUT layout."""
    pt, snht_r, blrt, but = battery.results
    row = {"station": station_id}
    if month is not None:
        row["month"] = month
    row.update(
        {
            "u_pt": fmt(pt.statistic),
            "p_pt": fmt_p(pt.p_value),
            "t_snht": fmt(snht_r.statistic),
            "p_snht": fmt_p(snht_r.p_value),
            "v_blrt": fmt(blrt.statistic),
            "p_blrt": fmt_p(blrt.p_value),
            "u_but": fmt(but.statistic),
            "p_but": fmt_p(but.p_value),
            "rejects": battery.n_rejections,
            "class": battery.station_class.value,
        }
    )
    return row


def export_geojson(trend_rows: list[dict], metadata: dict[str, StationMeta]) -> dict:
    """Point FeatureCollection of trend rows; coordinates are [lon, lat]."""
    features = []
    for row in trend_rows:
        sid = row["station"]
        meta = metadata.get(sid)
        if meta is None:
            raise InputError(f"station {sid!r} missing from metadata")
        properties = {
            "station": sid,
            "name": meta.name,
            "dataset": row["dataset"],
            "variable": row["variable"],
            "period": row["period"],
            "n": int(row["n"]),
            "sen_per_decade": float(row["sen_per_decade"]),
            "p": float(row["p"]),
            "significant": row["significant"] in (True, "true"),
        }
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "Point",
                    "coordinates": [meta.longitude, meta.latitude],
                },
                "properties": properties,
            }
        )
    return {"type": "FeatureCollection", "features": features}


def write_json(path: str | Path, payload: dict):
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()
