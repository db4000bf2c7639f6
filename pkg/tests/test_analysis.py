import csv
import io
import json

import numpy as np
import pytest

from qftmpo.analysis import (
    StudyResult,
    aqft_rank_study,
    doubling_window,
    hs_error_study,
    loglinear_slope,
    middle_bond,
    middle_tensor_difference,
    ordering_study,
    periodic_study,
    rotation_scheme_study,
    scaling_benchmark,
    significant_weights,
    spectrum_convergence_study,
    spectrum_study,
    spectrum_tail_slope,
    tensor_convergence_study,
)
from qftmpo.circuits import RotationScheme, compile_to_mpo, nearest_neighbor_qft_circuit
from qftmpo.errors import NumericalError
from qftmpo.tensor import TruncationPolicy


class TestHelpers:
    def test_middle_bond(self):
        assert middle_bond(2) == 0
        assert middle_bond(3) == 1
        assert middle_bond(8) == 3
        assert middle_bond(9) == 4

    def test_loglinear_slope_exact(self):
        x = np.arange(5)
        y = 10.0 ** (-2.0 * x + 1)
        assert loglinear_slope(x, y) == pytest.approx(-2.0, abs=1e-12)

    def test_loglinear_slope_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            loglinear_slope([0, 1], [1.0, 0.0])

    def test_significant_weights_drops_floor(self):
        p = np.array([1.0, 1e-3, 1e-9, 1e-30, 1e-31])
        mask = significant_weights(p)
        assert list(mask) == [True, True, True, False, False]

    def test_significant_weights_keeps_short_spectra(self):
        p = np.array([1e-30, 1e-31])
        assert significant_weights(p).sum() == 2

    def test_spectrum_tail_slope(self):
        p = 10.0 ** (-1.5 * np.arange(8))
        assert spectrum_tail_slope(p) == pytest.approx(-1.5, abs=1e-10)


class TestStudyResult:
    def make(self):
        return StudyResult(
            study="demo",
            metadata={"alpha": 1, "beta": [1, 2]},
            rows=[{"n": 2, "value": 0.5}, {"n": 3, "value": 0.25, "extra": True}],
        )

    def test_csv_has_metadata_comments_and_all_columns(self):
        text = self.make().to_csv()
        lines = text.strip().split("\n")
        assert lines[0] == "# study: demo"
        assert any(line.startswith("# alpha: 1") for line in lines)
        header = next(line for line in lines if not line.startswith("#"))
        assert header == "n,value,extra"
        data = [line for line in lines if not line.startswith("#")][1:]
        assert data[0] == "2,0.5,"
        assert data[1] == "3,0.25,true"

    def test_csv_parses_with_stdlib(self):
        text = self.make().to_csv()
        body = [line for line in text.strip().split("\n") if not line.startswith("#")]
        rows = list(csv.DictReader(io.StringIO("\n".join(body))))
        assert rows[0]["n"] == "2"
        assert float(rows[1]["value"]) == 0.25

    def test_json_roundtrip(self):
        doc = json.loads(self.make().to_json())
        assert doc["study"] == "demo"
        assert doc["schema_version"] == 1
        assert doc["rows"][1]["extra"] is True

    def test_file_output(self, tmp_path):
        res = self.make()
        res.to_csv(tmp_path / "r.csv")
        res.to_json(tmp_path / "r.json")
        assert (tmp_path / "r.csv").read_text().startswith("# study: demo")
        assert json.loads((tmp_path / "r.json").read_text())["study"] == "demo"


class TestSpectrumStudies:
    def test_spectrum_rows_and_decay(self):
        res = spectrum_study([6, 8])
        assert {row["n"] for row in res.rows} == {6, 8}
        for n in (6, 8):
            p = [row["probability"] for row in res.rows if row["n"] == n]
            assert sum(p) == pytest.approx(1.0, abs=1e-10)
            assert all(a >= b for a, b in zip(p, p[1:]))
            assert float(res.metadata["tail_slopes"][str(n)]) < -1.0

    def test_spectrum_convergence_decreases(self):
        res = spectrum_convergence_study([6, 10, 14], n_ref=16)
        diffs = [row["mean_abs_diff"] for row in res.rows]
        assert diffs[0] > diffs[-1]
        assert diffs[-1] < 1e-3

    def test_tensor_convergence_decreases(self):
        res = tensor_convergence_study([6, 10, 14], n_ref=16)
        diffs = [row["mean_abs_diff"] for row in res.rows]
        assert diffs[0] > diffs[-1]
        assert diffs[-1] < 1e-2

    def test_middle_tensor_difference_self_is_zero(self):
        mpo = compile_to_mpo(nearest_neighbor_qft_circuit(8), TruncationPolicy(1e-14))
        assert middle_tensor_difference(mpo, mpo) == pytest.approx(0.0, abs=1e-14)


class TestHsErrorStudy:
    def test_error_decreases_with_rank(self):
        res = hs_error_study([8], [2, 4, 6, 8])
        errs = {row["rank"]: row["hs_error"] for row in res.rows}
        assert errs[2] > errs[4] > errs[6]
        assert errs[8] < 1e-12
        assert float(res.metadata["slopes"]["8"]) < -1.0

    def test_multiple_sizes_share_shape(self):
        res = hs_error_study([6, 9], [2, 4])
        assert len(res.rows) == 4


class TestPeriodicStudy:
    def test_peaks_match_oracle_at_full_rank(self):
        res = periodic_study([8], [3, 5], rank_list=[16])
        for row in res.rows:
            assert row["max_peak_error"] < 1e-10
            assert row["peak_prob_exact"] > 0.7

    def test_low_rank_still_close_here(self):
        # the transform itself fits in rank 16; rank 4 visibly degrades
        res = periodic_study([8], [5], rank_list=[4, 16])
        errs = {row["rank"]: row["max_peak_error"] for row in res.rows}
        assert errs[16] < 1e-10
        assert errs[4] > errs[16]

    def test_offset_row_fields(self):
        res = periodic_study([6], [4], rank_list=[16], offset=1)
        assert res.rows[0]["offset"] == 1
        assert res.rows[0]["max_peak_error"] < 1e-10


class TestAqftStudy:
    def test_growth_regime_passes_checks(self):
        res = aqft_rank_study([10], bandwidth_list=[5, 6, 7, 8, 9, 10])
        ranks = {row["bandwidth"]: row["max_bond_rank"] for row in res.rows}
        full = res.metadata["full_qft_ranks"]["10"]
        for b, rank in ranks.items():
            if b < 10:
                assert rank > full

    def test_below_growth_regime_raises(self):
        with pytest.raises(NumericalError):
            aqft_rank_study([10], bandwidth_list=[1, 2], check=True)

    def test_check_off_reports_small_ranks(self):
        res = aqft_rank_study([8], bandwidth_list=[1, 2, 3], check=False)
        ranks = {row["bandwidth"]: row["max_bond_rank"] for row in res.rows}
        assert ranks[1] == 1
        assert ranks[2] == 2
        assert ranks[3] == 4

    def test_saturation_reports_lower_bound(self):
        res = aqft_rank_study([12], bandwidth_list=[8], rank_ceiling=16, check=False)
        row = res.rows[0]
        assert row["saturated"] is True
        assert row["max_bond_rank"] == 17

    def test_doubling_window(self):
        per_b = {2: (4, False), 3: (8, False), 4: (16, False),
                 5: (18, False), 6: (12, False)}
        assert doubling_window(per_b) == [2, 3, 4]


class TestRotationStudy:
    def test_rows_and_contrast(self):
        res = rotation_scheme_study(
            [10],
            [RotationScheme.standard(), RotationScheme.base_n(3),
             RotationScheme.power_law(2)],
        )
        by_scheme = {row["scheme"]: row for row in res.rows}
        std = by_scheme["standard"]
        assert not std["saturated"]
        assert by_scheme["base-n:3"]["tail_slope"] < std["tail_slope"]
        pl = by_scheme["power-law:2"]
        assert pl["saturated"] or pl["max_bond_rank"] > std["max_bond_rank"]

    def test_accepts_scheme_strings(self):
        res = rotation_scheme_study([6], ["standard", "base-n:4"])
        assert {row["scheme"] for row in res.rows} == {"standard", "base-n:4"}


class TestOrderingStudy:
    def test_exhaustive_at_four(self):
        res = ordering_study(4)
        assert len(res.rows) == 24
        assert res.metadata["bit_reversal"] == "3-2-1-0"
        assert res.metadata["bit_reversal"] in res.metadata["optimal_permutations"]
        best = res.metadata["minimum_rank"]
        assert best == min(row["max_schmidt_rank"] for row in res.rows)

    def test_identity_permutation_is_worse(self):
        res = ordering_study(4)
        by_perm = {row["permutation"]: row["max_schmidt_rank"] for row in res.rows}
        assert by_perm["0-1-2-3"] > by_perm["3-2-1-0"]

    def test_size_cap(self):
        with pytest.raises(ValueError):
            ordering_study(9)
        with pytest.raises(ValueError):
            ordering_study(1)


class TestScalingBenchmark:
    def test_rows_and_fit(self):
        res = scaling_benchmark([16, 32], repeats=1)
        assert len(res.rows) == 2
        for row in res.rows:
            assert row["seconds"] > 0
            assert row["mpo_max_rank"] <= 16
        assert res.metadata["fitted_exponent"] is not None
        assert res.metadata["repeats"] == 1
