from __future__ import annotations

import random
from datetime import datetime, timezone
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridops.accounting import (
    Dimension,
    HOURS_PER_CPU_YEAR,
    JobType,
    Metric,
    UsageFilter,
    UsageRecord,
    UsageStore,
    export_xml,
    import_xml,
    merge_streams,
    normalize,
    parse_batch_log,
    parse_hms,
    query_usage,
    utilization,
)
from gridops.errors import InvalidDims, UnknownSite, ZeroCapacity

import oracles
from conftest import AEGIS01

UTC = timezone.utc

GOOD_SERIAL = (
    "05/10/2009 14:23:11;E;123.ce.example.org;user=meteo001 group=meteo queue=seegrid "
    "start=1241965100 end=1241972300 exec_host=wn01/0 "
    "resources_used.walltime=02:00:00 resources_used.cput=01:58:21"
)
GOOD_MPI = (
    "05/10/2009 14:23:11;E;124.ce.example.org;user=meteo001 group=meteo queue=seegrid "
    "start=1241965100 end=1241968700 exec_host=wn01/0+wn01/1+wn02/0+wn02/1 "
    "resources_used.walltime=01:00:00 resources_used.cput=00:58:00"
)


class TestParser:
    def test_serial_line(self):
        records, errors = parse_batch_log(AEGIS01, GOOD_SERIAL)
        assert errors == []
        (job,) = records
        assert job.walltime_s == 7200
        assert job.cores == 1
        assert job.job_type is JobType.SERIAL
        assert job.vo == "meteo"

    def test_mpi_line_four_slots(self):
        records, _ = parse_batch_log(AEGIS01, GOOD_MPI)
        (job,) = records
        assert job.cores == 4
        assert job.job_type is JobType.MPI
        assert job.exec_slots[0] == ("wn01", 0)

    def test_missing_end_is_error(self):
        line = GOOD_SERIAL.replace("end=1241972300 ", "")
        records, errors = parse_batch_log(AEGIS01, line)
        assert records == []
        assert len(errors) == 1
        assert errors[0].line_no == 1
        assert "end" in errors[0].reason

    def test_non_e_lines_ignored(self):
        text = "\n".join(
            [
                "05/10/2009 14:00:00;S;99.ce;user=x group=y queue=q",
                GOOD_SERIAL,
                "05/10/2009 14:00:02;Q;99.ce;queue=q",
                "garbage without structure",
            ]
        )
        records, errors = parse_batch_log(AEGIS01, text)
        assert len(records) == 1
        assert errors == []

    def test_end_before_start_is_error(self):
        line = GOOD_SERIAL.replace("end=1241972300", "end=1241965000")
        records, errors = parse_batch_log(AEGIS01, line)
        assert records == [] and len(errors) == 1

    def test_bad_walltime_is_error(self):
        line = GOOD_SERIAL.replace("02:00:00", "02:61:00")
        records, errors = parse_batch_log(AEGIS01, line)
        assert records == [] and len(errors) == 1

    def test_parse_hms_unbounded_hours(self):
        assert parse_hms("120:00:30") == 120 * 3600 + 30


class TestNormalize:
    def test_mpi_walltime_times_cores(self, registry):
        records, _ = parse_batch_log(AEGIS01, GOOD_MPI)
        usage = normalize(records[0], registry)
        assert usage.cpu_hours == Fraction(4)  # 3600 s x 4 slots
        assert usage.country == "Serbia"
        assert usage.job_type is JobType.MPI

    def test_serial_max_rule(self, registry):
        records, _ = parse_batch_log(AEGIS01, GOOD_SERIAL)
        usage = normalize(records[0], registry)
        assert usage.cpu_hours == Fraction(2)  # max(7101, 7200) / 3600

    def test_serial_zero(self, registry):
        line = GOOD_SERIAL.replace("02:00:00", "00:00:00").replace("01:58:21", "00:00:00")
        records, _ = parse_batch_log(AEGIS01, line)
        assert normalize(records[0], registry).cpu_hours == 0

    def test_unknown_site(self, registry):
        records, _ = parse_batch_log("site-nope", GOOD_SERIAL)
        with pytest.raises(UnknownSite):
            normalize(records[0], registry)


def usage(job_id="1", site=AEGIS01, vo="seegrid", country="Serbia", end=None,
          cores=1, hours=1, job_type=JobType.SERIAL):
    return UsageRecord(
        job_id=job_id,
        site=site,
        vo=vo,
        country=country,
        end=end or datetime(2009, 6, 1, tzinfo=UTC),
        cores=cores,
        cpu_hours=Fraction(hours),
        job_type=job_type,
    )


class TestMerge:
    def test_mpi_wins_collision(self):
        serial = [usage(job_id="7", hours=1)]
        mpi = [usage(job_id="7", hours=4, cores=4, job_type=JobType.MPI)]
        merged = merge_streams(serial, mpi)
        assert len(merged) == 1
        assert merged[0].cpu_hours == 4

    def test_disjoint_streams_concatenate_sorted(self):
        a = usage(job_id="1", end=datetime(2009, 6, 2, tzinfo=UTC))
        b = usage(job_id="2", end=datetime(2009, 6, 1, tzinfo=UTC))
        merged = merge_streams([a], [b])
        assert [r.job_id for r in merged] == ["2", "1"]

    def test_merge_idempotent(self):
        serial = [usage(job_id=str(i)) for i in range(5)]
        mpi = [usage(job_id="3", hours=9, cores=3, job_type=JobType.MPI)]
        once = merge_streams(serial, mpi)
        twice = merge_streams(once, mpi)
        assert once == twice

    def test_store_applies_mpi_wins_incrementally(self):
        store = UsageStore()
        store.add(usage(job_id="9", hours=1))
        store.add(usage(job_id="9", hours=6, cores=6, job_type=JobType.MPI))
        store.add(usage(job_id="9", hours=1))  # serial replay loses
        (record,) = store.records()
        assert record.cpu_hours == 6


class TestQuery:
    def test_invalid_dims(self):
        with pytest.raises(InvalidDims):
            query_usage([], UsageFilter(), Dimension.VO, Dimension.VO, Metric.CPU_HOURS)

    def test_empty_result_is_zero_table(self):
        table = query_usage([], UsageFilter(), Dimension.VO, Dimension.COUNTRY,
                            Metric.CPU_HOURS)
        assert table.cells == {}
        assert table.grand_total() == 0

    def test_cpu_years_conversion_exact(self):
        records = [usage(hours=8766), usage(job_id="2", hours=4383)]
        hours = query_usage(records, UsageFilter(), Dimension.VO, Dimension.SITE,
                            Metric.CPU_HOURS)
        years = query_usage(records, UsageFilter(), Dimension.VO, Dimension.SITE,
                            Metric.CPU_YEARS)
        for key, value in years.cells.items():
            assert value * HOURS_PER_CPU_YEAR == hours.cells[key]  # exact, Fractions

    def test_filters_compose(self):
        records = [
            usage(job_id="1", vo="seegrid"),
            usage(job_id="2", vo="meteo"),
            usage(job_id="3", vo="seegrid", country="Bulgaria", site="site-bg01-ipp"),
        ]
        table = query_usage(records, UsageFilter(vo="seegrid", country="Serbia"),
                            Dimension.VO, Dimension.COUNTRY, Metric.JOB_COUNT)
        assert table.grand_total() == 1

    def test_window_filter_half_open(self):
        records = [
            usage(job_id="1", end=datetime(2009, 6, 1, tzinfo=UTC)),
            usage(job_id="2", end=datetime(2009, 7, 1, tzinfo=UTC)),
        ]
        win = (datetime(2009, 6, 1, tzinfo=UTC), datetime(2009, 7, 1, tzinfo=UTC))
        table = query_usage(records, UsageFilter(window=win), Dimension.VO,
                            Dimension.MONTH, Metric.JOB_COUNT)
        assert table.grand_total() == 1


class TestUtilization:
    def test_paper_scale_case(self):
        window = (datetime(2008, 5, 1, tzinfo=UTC), datetime(2010, 5, 1, 12, tzinfo=UTC))
        assert utilization(16_400_000, 1050, window) == pytest.approx(0.891, abs=0.01)

    def test_zero_usage(self):
        window = (datetime(2009, 1, 1, tzinfo=UTC), datetime(2009, 1, 2, tzinfo=UTC))
        assert utilization(0, 10, window) == 0.0

    def test_full_capacity(self):
        window = (datetime(2009, 1, 1, tzinfo=UTC), datetime(2009, 1, 2, tzinfo=UTC))
        assert utilization(240, 10, window) == 1.0

    def test_overflow_clamped(self):
        window = (datetime(2009, 1, 1, tzinfo=UTC), datetime(2009, 1, 2, tzinfo=UTC))
        assert utilization(9999, 10, window) == 1.0

    def test_zero_capacity(self):
        window = (datetime(2009, 1, 1, tzinfo=UTC), datetime(2009, 1, 2, tzinfo=UTC))
        with pytest.raises(ZeroCapacity):
            utilization(1, 0, window)


class TestXml:
    def test_two_by_two_structure(self):
        records = [
            usage(job_id="1", vo="seegrid", country="Serbia"),
            usage(job_id="2", vo="seegrid", country="Bulgaria"),
            usage(job_id="3", vo="meteo", country="Serbia"),
            usage(job_id="4", vo="meteo", country="Bulgaria"),
        ]
        table = query_usage(records, UsageFilter(), Dimension.VO, Dimension.COUNTRY,
                            Metric.CPU_HOURS)
        doc = export_xml(table)
        assert doc.count("<cell ") == 4
        assert doc.count("<row-total ") == 2
        assert doc.count("<col-total ") == 2
        assert doc.count("<grand-total ") == 1
        assert 'value="4.000"' in doc

    def test_empty_table(self):
        table = query_usage([], UsageFilter(), Dimension.VO, Dimension.COUNTRY,
                            Metric.CPU_HOURS)
        doc = export_xml(table)
        assert doc.count("<cell ") == 0
        assert 'value="0.000"' in doc

    def test_round_trip_equality(self):
        records = [usage(job_id=str(i), hours=i + 1) for i in range(6)]
        table = query_usage(records, UsageFilter(), Dimension.VO, Dimension.MONTH,
                            Metric.CPU_HOURS)
        again = import_xml(export_xml(table))
        assert again.cells == table.cells
        assert again.grand_total() == table.grand_total()
        assert (again.rows_dim, again.cols_dim, again.metric) == (
            table.rows_dim, table.cols_dim, table.metric,
        )


# -- properties ---------------------------------------------------------------

vo_strategy = st.sampled_from(["seegrid", "meteo", "seismo", "env", "ops"])
country_strategy = st.sampled_from(["Serbia", "Bulgaria", "Greece", "Turkey"])


@st.composite
def usage_records(draw, min_size=0, max_size=40):
    n = draw(st.integers(min_value=min_size, max_value=max_size))
    out = []
    for i in range(n):
        out.append(
            usage(
                job_id=str(i),
                vo=draw(vo_strategy),
                country=draw(country_strategy),
                site="site-" + draw(country_strategy).lower(),
                end=datetime(2009, 1 + draw(st.integers(min_value=0, max_value=11)), 3,
                             tzinfo=UTC),
                hours=draw(st.integers(min_value=0, max_value=5000)),
                job_type=draw(st.sampled_from(list(JobType))),
            )
        )
    return out


DIMS = [Dimension.VO, Dimension.COUNTRY, Dimension.SITE, Dimension.MONTH, Dimension.JOB_TYPE]


@given(usage_records())
@settings(max_examples=60)
def test_grand_total_invariant_under_pivot_choice(records):
    totals = set()
    for rows in DIMS:
        for cols in DIMS:
            if rows is cols:
                continue
            table = query_usage(records, UsageFilter(), rows, cols, Metric.CPU_HOURS)
            totals.add(table.grand_total())
    assert len(totals) == 1


@given(usage_records(min_size=1))
@settings(max_examples=60)
def test_partition_slicing(records):
    whole = query_usage(records, UsageFilter(), Dimension.VO, Dimension.MONTH,
                        Metric.CPU_HOURS).grand_total()
    by_country = Fraction(0)
    for country in {r.country for r in records}:
        by_country += query_usage(
            records, UsageFilter(country=country), Dimension.VO, Dimension.MONTH,
            Metric.CPU_HOURS
        ).grand_total()
    assert by_country == whole


@given(usage_records())
@settings(max_examples=60)
def test_query_matches_group_by_oracle(records):
    table = query_usage(records, UsageFilter(), Dimension.VO, Dimension.COUNTRY,
                        Metric.CPU_HOURS)
    expected = oracles.group_by(
        records, lambda r: r.vo, lambda r: r.country, lambda r: r.cpu_hours
    )
    assert table.cells == expected


@given(st.lists(st.integers(min_value=0, max_value=10**6), min_size=1, max_size=30))
@settings(max_examples=60)
def test_xml_round_trip_on_milli_grid(milli_values):
    table = query_usage([], UsageFilter(), Dimension.VO, Dimension.COUNTRY,
                        Metric.CPU_HOURS)
    for i, mv in enumerate(milli_values):
        table.cells[(f"vo{i}", f"c{i % 3}")] = Fraction(mv, 1000)
    again = import_xml(export_xml(table))
    assert again.cells == table.cells


@given(usage_records(min_size=1))
@settings(max_examples=40)
def test_mpi_correction_never_loses_hours(records):
    mpi_stream = [
        UsageRecord(
            job_id=r.job_id, site=r.site, vo=r.vo, country=r.country, end=r.end,
            cores=max(2, r.cores * 2),
            cpu_hours=r.cpu_hours * max(2, r.cores * 2),
            job_type=JobType.MPI,
        )
        for r in records
    ]
    merged = merge_streams(records, mpi_stream)
    by_key = {r.key: r for r in merged}
    for r in records:
        assert by_key[r.key].cpu_hours >= r.cpu_hours


def test_parser_totality_small_fuzz():
    rng = random.Random(1234)
    base = GOOD_SERIAL
    lines = []
    for _ in range(500):
        chars = list(base)
        for _ in range(rng.randint(0, 12)):
            op = rng.random()
            pos = rng.randrange(len(chars))
            if op < 0.4:
                chars[pos] = chr(rng.randint(1, 255))
            elif op < 0.7 and len(chars) > 2:
                del chars[pos]
            else:
                chars.insert(pos, chr(rng.randint(32, 126)))
        lines.append("".join(chars))
    text = "\n".join(lines)
    records, errors = parse_batch_log(AEGIS01, text)
    e_lines = sum(1 for line in text.splitlines()
                  if len(line.split(";", 3)) >= 2 and line.split(";", 3)[1] == "E")
    assert len(records) + len(errors) >= e_lines
