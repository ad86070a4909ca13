import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synthset.catalog import DEFAULT_BRANDS
from synthset.dataset import SampleRecord, format_id
from synthset.errors import ConfigError
from synthset.metrics import (
    PredictionRow,
    RunSeries,
    accuracy,
    aggregate_runs,
    cell_hundredths,
    confusion,
    curve_csv,
    curve_svg,
    load_predictions,
    load_runs,
    macro_accuracy,
    per_class_accuracy,
    render_normalized,
    throughput_report,
)
from synthset.sampler import Mode

VW_ROW_TALLIES = {
    # 99 rows with actual=Volkswagen; the reference row's blanks are zeros.
    "Volkswagen": 90,
    "Ford": 3,
    "BMW": 1,
    "Audi": 0,
    "Opel": 0,
    "Mercedes": 3,
    "Renault": 2,
    "Skoda": 0,
}


def _vw_fixture() -> list[PredictionRow]:
    """100-row set: the Volkswagen row tallies above plus one non-VW row."""
    rows = []
    k = 0
    for predicted, count in VW_ROW_TALLIES.items():
        for _ in range(count):
            rows.append(PredictionRow(f"s{k}", "Volkswagen", predicted))
            k += 1
    rows.append(PredictionRow(f"s{k}", "Ford", "Ford"))
    return rows


def test_all_correct_gives_identity_pattern():
    rows = [PredictionRow(f"s{i}", b, b) for i, b in enumerate(DEFAULT_BRANDS)]
    cm = confusion(rows, DEFAULT_BRANDS)
    for i in range(8):
        assert cm.row_normalized[i][i] == 1.0
        assert sum(cm.counts[i]) == 1
    assert accuracy(rows, DEFAULT_BRANDS) == 1.0


def test_reference_vw_row_reproduced_at_two_decimal_rendering():
    cm = confusion(_vw_fixture(), DEFAULT_BRANDS)
    rendered = render_normalized(cm)
    assert rendered[0] == ["0.90", "0.03", "0.01", "", "", "0.03", "0.02", ""]
    # The rendered row undershoots 1 by exactly the truncation slack.
    total = sum(float(c) for c in rendered[0] if c)
    assert total == pytest.approx(0.99)


def test_rendered_rows_sum_close_to_one_on_table_style_fixtures():
    cm = confusion(_vw_fixture(), DEFAULT_BRANDS)
    for cells, row in zip(render_normalized(cm), cm.counts):
        if sum(row) == 0:
            continue
        total = sum(float(c) for c in cells if c)
        assert 0.98 <= total <= 1.0 + 1e-9


def test_per_class_diagonal_matches_reference_at_rendering():
    per_class = per_class_accuracy(_vw_fixture(), DEFAULT_BRANDS)
    assert per_class["Volkswagen"] == pytest.approx(90 / 99)
    q = cell_hundredths(90, 99)
    assert f"{q // 100}.{q % 100:02d}" == "0.90"


def test_unknown_brand_names_the_row():
    rows = [PredictionRow("s0", "Volkswagen", "Tesla")]
    with pytest.raises(ConfigError, match="s0"):
        confusion(rows, DEFAULT_BRANDS)


def test_counts_conserve_mass_and_match_bruteforce_oracle():
    import random

    rng = random.Random(5)
    rows = [
        PredictionRow(f"s{i}", rng.choice(DEFAULT_BRANDS), rng.choice(DEFAULT_BRANDS))
        for i in range(500)
    ]
    cm = confusion(rows, DEFAULT_BRANDS)
    assert cm.total == 500
    # Brute-force tally oracle.
    expected = {(a, p): 0 for a in DEFAULT_BRANDS for p in DEFAULT_BRANDS}
    for r in rows:
        expected[(r.actual, r.predicted)] += 1
    for i, a in enumerate(DEFAULT_BRANDS):
        for j, p in enumerate(DEFAULT_BRANDS):
            assert cm.counts[i][j] == expected[(a, p)]
        row_total = sum(cm.counts[i])
        if row_total:
            for j in range(8):
                assert cm.row_normalized[i][j] == pytest.approx(cm.counts[i][j] / row_total)
            assert sum(cm.row_normalized[i]) == pytest.approx(1.0, abs=1e-9)


def test_accuracy_three_quarters_exact():
    rows = [
        PredictionRow("a", "Ford", "Ford"),
        PredictionRow("b", "Ford", "Ford"),
        PredictionRow("c", "Ford", "Ford"),
        PredictionRow("d", "Ford", "BMW"),
    ]
    assert accuracy(rows, DEFAULT_BRANDS) == 0.75


def test_accuracy_equals_trace_over_total():
    rows = _vw_fixture()
    cm = confusion(rows, DEFAULT_BRANDS)
    trace = sum(cm.counts[i][i] for i in range(8))
    assert accuracy(rows, DEFAULT_BRANDS) == trace / cm.total


def test_macro_vs_micro_accuracy():
    rows = _vw_fixture()
    micro = accuracy(rows, DEFAULT_BRANDS)
    macro = macro_accuracy(rows, DEFAULT_BRANDS)
    assert micro == pytest.approx(91 / 100)
    assert macro == pytest.approx((90 / 99 + 1.0) / 2)


def test_prediction_file_loading(tmp_path):
    path = tmp_path / "preds.csv"
    path.write_text("# comment\nimg-1,Volkswagen,Ford\nimg-2,Skoda,Skoda\n", encoding="utf-8")
    rows = load_predictions(path)
    assert rows == [
        PredictionRow("img-1", "Volkswagen", "Ford"),
        PredictionRow("img-2", "Skoda", "Skoda"),
    ]


# --- learning-curve aggregation ---


def test_single_repetition_collapses_band():
    rows = aggregate_runs(RunSeries([{"dataset_size": 100, "accuracies": [0.5]}]))
    assert rows[0]["std"] == 0.0
    assert rows[0]["band_low"] == rows[0]["band_high"] == 0.5


def test_reference_combined_point_at_12k():
    rows = aggregate_runs(RunSeries([{"dataset_size": 12_000, "accuracies": [0.58, 0.64]}]))
    point = rows[0]
    assert point["mean"] == pytest.approx(0.61, abs=1e-12)
    assert point["std"] == pytest.approx(0.03, abs=1e-12)
    assert point["band_low"] == pytest.approx(0.58, abs=1e-12)
    assert point["band_high"] == pytest.approx(0.64, abs=1e-12)


@settings(max_examples=100)
@given(st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=9))
def test_aggregate_matches_two_pass_oracle(accs):
    rows = aggregate_runs(RunSeries([{"dataset_size": 10, "accuracies": accs}]))
    mean = sum(accs) / len(accs)
    var = sum((a - mean) ** 2 for a in accs) / len(accs)  # population
    assert abs(rows[0]["mean"] - mean) < 1e-12
    assert abs(rows[0]["std"] - math.sqrt(var)) < 1e-12


@given(st.permutations([0.52, 0.61, 0.58, 0.66, 0.57]))
def test_aggregate_is_permutation_invariant(perm):
    base = aggregate_runs(RunSeries([{"dataset_size": 5, "accuracies": [0.52, 0.61, 0.58, 0.66, 0.57]}]))
    other = aggregate_runs(RunSeries([{"dataset_size": 5, "accuracies": list(perm)}]))
    assert base == other


def test_aggregate_sorted_by_size_and_curve_artifacts(tmp_path):
    series = RunSeries(
        [
            {"dataset_size": 50_000, "accuracies": [0.67, 0.66]},
            {"dataset_size": 12_000, "accuracies": [0.58, 0.64]},
        ]
    )
    rows = aggregate_runs(series)
    assert [r["dataset_size"] for r in rows] == [12_000, 50_000]
    csv_text = curve_csv(rows)
    assert csv_text.splitlines()[0] == "dataset_size,repetitions,mean,std,band_low,band_high"
    svg = curve_svg(rows)
    assert svg.startswith("<svg") and "polyline" in svg


def test_load_runs_groups_by_size(tmp_path):
    path = tmp_path / "runs.csv"
    path.write_text("12000,0.58\n12000,0.64\n25000,0.66\n", encoding="utf-8")
    series = load_runs(path)
    assert series.points == [
        {"dataset_size": 12000, "accuracies": [0.58, 0.64]},
        {"dataset_size": 25000, "accuracies": [0.66]},
    ]


# --- throughput ---


def _timed_record(i, latency, mode=Mode.TEXT_TO_IMAGE):
    return SampleRecord(
        id=format_id(i),
        image_path="images/Ford/x.png",
        brand="Ford",
        brand_index=1,
        model="Focus",
        year=2010,
        color="blue",
        mode=mode,
        prompt="p",
        bbox=(0.1, 0.1, 0.5, 0.5),
        gate_score=1.0,
        backend_model="m",
        latency_seconds=latency,
        seed=1,
    )


def test_mean_0p85_seconds_from_ten_records():
    records = [_timed_record(i, 0.85) for i in range(10)]
    report = throughput_report(records)
    assert report["images"] == 10
    assert report["wall_seconds"] == pytest.approx(8.5)
    assert report["mean_seconds_per_image"] == pytest.approx(0.85)


def test_per_mode_means_partition_the_records():
    records = [_timed_record(i, 0.85) for i in range(10)]
    records += [_timed_record(10 + i, 2.33, mode=Mode.IMAGE_TO_IMAGE) for i in range(5)]
    report = throughput_report(records)
    assert report["per_mode"]["t2i"]["mean_seconds_per_image"] == pytest.approx(0.85)
    assert report["per_mode"]["i2i"]["mean_seconds_per_image"] == pytest.approx(2.33)
    assert report["per_mode"]["t2i"]["images"] == 10
    assert report["per_mode"]["i2i"]["images"] == 5


@given(st.lists(st.floats(0.001, 10, allow_nan=False), min_size=1, max_size=50))
def test_throughput_mean_matches_summation_oracle(latencies):
    records = [_timed_record(i, l) for i, l in enumerate(latencies)]
    report = throughput_report(records)
    assert report["mean_seconds_per_image"] == pytest.approx(sum(latencies) / len(latencies))
