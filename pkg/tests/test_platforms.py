import io
import json
from math import log10, pi

import pytest
from hypothesis import given, strategies as st

from squeezekerr.errors import NonPositiveValue, SchemaError
from squeezekerr.platforms import (
    PlatformRecord,
    coupling_rate,
    ingest_table,
    listed_values,
    read_records,
    reports_to_csv,
    reports_to_json,
    required_squeezing_db,
    round_significant,
    sort_by_squeezing,
)

HEADER = "name,mass_kg,freq_hz,beta_n_per_m3,damping_rate_hz\n"


def test_round_significant():
    assert round_significant(64.47) == 64
    assert round_significant(105.2) == 110
    assert round_significant(0.0123) == 0.012
    assert round_significant(0.0) == 0.0


def test_coupling_rate_formula():
    # C nanotube row: 3 hbar beta / (8 m^2 (2 pi f)^2)
    g = coupling_rate(8e-21, 2.5e8, 6e12)
    assert g == pytest.approx(1.5, rel=0.05)
    assert coupling_rate(1.0, 1.0, 0.0) == 0.0
    with pytest.raises(NonPositiveValue):
        coupling_rate(0.0, 1.0, 1.0)


def test_bundled_table_reproduces_listed_columns():
    records = ingest_table()
    listed = listed_values()
    assert len(records) == len(listed) == 21
    for rec, ref in zip(records, listed):
        rep = required_squeezing_db(rec)
        assert rep.g_value == pytest.approx(ref["g"], rel=0.1), rec.name
        assert abs(rep.rounded_db - ref["squeezing_db"]) <= 1.0, rec.name


def test_anchor_rows():
    reps = {r.name: required_squeezing_db(r) for r in ingest_table()}
    assert round(reps["C nanotube"].squeezing_db) == 64
    assert reps["SiC beam"].rounded_db == 110


def test_strict_reading_adds_log_two_pi():
    rec = ingest_table()[0]
    rep = required_squeezing_db(rec, strict_si=True)
    assert rep.strict_g_hz == pytest.approx(rep.g_value / (2 * pi))
    assert rep.strict_squeezing_db - rep.squeezing_db == pytest.approx(10 * log10(2 * pi))
    assert required_squeezing_db(rec).strict_squeezing_db is None


@given(st.floats(0.1, 10.0), st.floats(0.1, 10.0))
def test_db_is_invariant_under_common_rate_scaling(scale_beta, scale_rate):
    base = PlatformRecord("x", 1e-18, 1e6, 1e10, 1e3)
    scaled = PlatformRecord("x", 1e-18, 1e6, 1e10 * scale_beta, 1e3 * scale_beta)
    assert required_squeezing_db(scaled).squeezing_db == pytest.approx(
        required_squeezing_db(base).squeezing_db, abs=1e-9)
    bigger = PlatformRecord("x", 1e-18, 1e6, 1e10, 1e3 * scale_rate)
    assert required_squeezing_db(bigger).squeezing_db - required_squeezing_db(base).squeezing_db \
        == pytest.approx(10 * log10(scale_rate), abs=1e-9)


def test_schema_errors():
    with pytest.raises(SchemaError, match="missing"):
        read_records(io.StringIO("name,mass_kg\nx,1\n"))
    with pytest.raises(SchemaError, match="unknown"):
        read_records(io.StringIO(HEADER.strip() + ",colour\nx,1,1,1,1,red\n"))
    with pytest.raises(SchemaError, match="empty"):
        read_records(io.StringIO(HEADER + "x,1,,1,1\n"))
    with pytest.raises(SchemaError, match="cannot parse"):
        read_records(io.StringIO(HEADER + "x,1,abc,1,1\n"))


def test_non_positive_value_names_row():
    with pytest.raises(NonPositiveValue, match="row 3"):
        read_records(io.StringIO(HEADER + "a,1,1,1,1\nb,-1,1,1,1\n"))


def test_ingest_from_path_and_outputs(tmp_path):
    path = tmp_path / "devices.csv"
    path.write_text(HEADER + "big,1e-18,1e5,1e8,1e3\nsmall,1e-21,1e8,1e12,1e6\n")
    reps = [required_squeezing_db(r, strict_si=True) for r in ingest_table(path)]
    ordered = sort_by_squeezing(reps)
    assert [r.rounded_db for r in ordered] == sorted(r.rounded_db for r in reps)
    text = reports_to_csv(reps, strict=True)
    assert text.splitlines()[0] == (
        "name,g,s_squared,squeezing_db,g_over_2pi_hz,s_squared_strict,squeezing_db_strict")
    data = json.loads(reports_to_json(reps))
    assert data[0]["name"] == "big" and set(data[0]) == {"name", "g", "s_squared", "squeezing_db"}
