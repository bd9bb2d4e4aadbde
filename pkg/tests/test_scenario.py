import csv
import math

import numpy as np
import pytest

from cvqkd_finite.errors import DataFileError, DomainError, UnphysicalStateError
from cvqkd_finite.estimation import expected_keyrate_k1
from cvqkd_finite.finite_size import BlockPlan, SecurityBudget, delta_n
from cvqkd_finite.gaussian import ChannelModel
from cvqkd_finite.modulation import ProtocolSpec, Scheme
from cvqkd_finite.montecarlo import TrialConfig, sample_pairs
from cvqkd_finite.scenario import (
    ROW_COLUMNS,
    Scenario,
    achievable_distance,
    epsilon_split,
    estimate_from_file,
    evaluate,
    figure1_table,
    figure2_table,
    figure3_table,
    figure4_table,
    optimize_va,
    read_pairs,
    scan,
    scan_table,
)

pytestmark = pytest.mark.filterwarnings("ignore::cvqkd_finite.errors.SmallSampleWarning")

FIFTY = Scenario(scheme=Scheme.FOUR_STATE, distance_km=50.0, xi=0.005, n_total=1e10)


def rate_at(scn, va):
    return expected_keyrate_k1(scn.spec(va), scn.channel(), scn.plan(), scn.budget, scn.beta).rate


def parse_csv(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.reader(lines))


class TestScenario:
    def test_defaults(self):
        s = Scenario(distance_km=10.0)
        assert (s.beta, s.eta, s.m_fraction) == (0.8, 0.6, 0.5)
        assert s.budget == SecurityBudget(1e-10, 1e-10, 1e-10, 1e-10)
        assert s.plan().n_key == s.plan().n_est

    def test_channel_from_distance(self):
        ch = Scenario(distance_km=50.0).channel()
        assert ch.t_lin == pytest.approx(0.6 * 0.1)

    def test_exclusive_channel(self):
        with pytest.raises(DomainError):
            Scenario(distance_km=1.0, transmission=0.5)
        with pytest.raises(DomainError):
            Scenario().channel()

    def test_metadata_complete(self):
        meta = FIFTY.metadata()
        for key in ("scheme", "distance_km", "xi", "n_total", "eps_pe", "eps_pa", "eps_total", "beta", "eta"):
            assert key in meta


class TestOptimizeVa:
    def test_positive_at_fifty_km(self):
        opt = optimize_va(FIFTY)
        assert opt.rate > 0 and opt.status == "ok"
        assert not opt.at_boundary

    def test_local_maximum(self):
        opt = optimize_va(FIFTY)
        assert rate_at(FIFTY, 1.1 * opt.va) < opt.rate
        assert rate_at(FIFTY, 0.9 * opt.va) < opt.rate

    def test_refinement_beats_grid(self):
        opt = optimize_va(FIFTY)
        grid = np.logspace(-2, 2, 41)
        assert opt.rate >= max(rate_at(FIFTY, v) for v in grid)

    def test_ideal_gaussian_hits_boundary(self):
        scn = Scenario(scheme=Scheme.GAUSSIAN, transmission=1.0, eta=1.0, xi=0.0, n_total=1e16)
        opt = optimize_va(scn)
        assert opt.at_boundary
        assert opt.va == pytest.approx(100.0, rel=1e-2)
        rates = [rate_at(scn, v) for v in (1.0, 10.0, 100.0)]
        assert rates[0] < rates[1] < rates[2]

    def test_no_key(self):
        opt = optimize_va(FIFTY.with_(n_total=1e6))
        assert opt.rate <= 0 and opt.status == "no positive key"


class TestScan:
    def test_singleton_equals_keyrate(self):
        (row,) = scan(FIFTY, "distance", [50.0])
        direct = evaluate(FIFTY)
        assert row.values()[1:] == direct.values()[1:]
        assert row.axis_value == 50.0

    def test_rows_in_order_with_jobs(self):
        grid = [80.0, 10.0, 40.0]
        serial = scan(FIFTY, "distance", grid, jobs=1)
        parallel = scan(FIFTY, "distance", grid, jobs=3)
        assert [r.axis_value for r in parallel] == grid
        assert serial == parallel

    def test_blocklength_axis(self):
        rows = scan(FIFTY, "blocklength", [1e8, 1e12])
        assert rows[1].rate > rows[0].rate

    def test_transmission_axis_overrides_distance(self):
        (row,) = scan(FIFTY, "transmission", [0.06])
        assert row.rate == pytest.approx(evaluate(FIFTY).rate, rel=1e-6)

    def test_unknown_axis(self):
        with pytest.raises(DomainError):
            scan(FIFTY, "colour", [1.0])

    def test_fixed_va(self):
        row = evaluate(FIFTY.with_(va=0.3))
        assert row.va_opt == 0.3
        assert row.rate == pytest.approx(rate_at(FIFTY, 0.3))

    def test_table_schema(self):
        t = scan_table(FIFTY, "xi", [0.001, 0.01])
        rows = parse_csv(t.to_csv())
        assert tuple(rows[0]) == ("xi",) + ROW_COLUMNS
        assert len(rows) == 3
        assert "# axis=xi" in t.to_csv()

    def test_deterministic_csv(self):
        assert scan_table(FIFTY, "xi", [0.002]).to_csv() == scan_table(FIFTY, "xi", [0.002]).to_csv()


class TestFigures:
    def test_figure1(self):
        t = figure1_table(n_grid=[1e6, 1e7, 1e8])
        assert t.columns == ("eps", "n", "delta_n")
        by_eps = {}
        for eps, n, d in t.rows:
            by_eps.setdefault(n, []).append((eps, d))
        # smaller eps gives a larger penalty: top to bottom is 1e-10 ... 1e-6 reversed
        for n, vals in by_eps.items():
            ds = [d for _, d in sorted(vals)]
            assert all(a > b for a, b in zip(ds, ds[1:]))

    def test_figure2(self):
        t = figure2_table(m_grid=[1e8])
        assert t.columns == ("loss_db", "distance_km", "transmission", "m", "delta_xi")
        assert [r[0] for r in t.rows] == [5, 10, 15, 20]
        assert all(a[4] < b[4] for a, b in zip(t.rows, t.rows[1:]))
        assert t.rows[1][2] == pytest.approx(0.1)

    def test_figure3_small_block_is_null(self):
        t = figure3_table(block_lengths=(1e6,), xis=(0.001, 0.005, 0.01), d_max=60, d_step=5)
        cols = t.columns
        for r in t.rows:
            row = dict(zip(cols, r))
            if row["distance_km"] >= 25:
                assert row["rate"] <= 0

    def test_figure3_schema(self):
        t = figure3_table(block_lengths=(1e10,), xis=(0.005,), d_max=10, d_step=5)
        assert t.columns == ("n_total", "xi", "distance_km") + ROW_COLUMNS
        assert len(t.rows) == 3
        assert t.meta["figure"] == 3

    def test_figure4_eight_dim_better(self):
        t = figure4_table(block_lengths=(1e10,), d_max=60, d_step=20)
        assert t.columns[0] == "scheme"
        r4 = [r[-2] for r in t.rows if r[0] == "four-state"]
        r8 = [r[-2] for r in t.rows if r[0] == "eight-dim"]
        assert len(r4) == len(r8) == 4
        assert all(b >= a for a, b in zip(r4, r8))


class TestAchievableDistance:
    def test_grows_with_block_length(self):
        base = Scenario(xi=0.005)
        d8 = achievable_distance(base.with_(n_total=1e8), tol_km=0.5)
        d12 = achievable_distance(base.with_(n_total=1e12), tol_km=0.5)
        assert 0 < d8 < d12

    def test_zero_when_never_positive(self):
        assert achievable_distance(Scenario(xi=0.005, n_total=1e5), tol_km=1.0) == 0.0


class TestEpsilonSplit:
    def test_large_n_insensitive(self):
        n, res = 10**7, 2e-10
        plan = BlockPlan(n, n, 0)
        eps_bar, eps_pa = epsilon_split(n, res)
        assert eps_bar + eps_pa == pytest.approx(res)
        best = delta_n(plan, SecurityBudget(0, 0, eps_bar, eps_pa))
        ds = []
        for lr in np.linspace(-1, 1, 41):
            r = 10.0**lr
            ds.append(delta_n(plan, SecurityBudget(0, 0, res * r / (1 + r), res / (1 + r))))
        assert best <= min(ds)
        assert max(ds) < 1.05 * min(ds)

    def test_large_n_favours_smoothing(self):
        eps_bar, eps_pa = epsilon_split(10**7, 2e-10)
        assert eps_bar > 100 * eps_pa

    def test_small_n_moves_toward_pa(self):
        r_small = np.divide(*epsilon_split(10**2, 2e-10))
        r_large = np.divide(*epsilon_split(10**7, 2e-10))
        assert r_small < r_large / 100
        r_tiny = np.divide(*epsilon_split(5, 2e-10))
        assert r_tiny < 1

    def test_more_budget_less_penalty(self):
        n = 10**7
        plan = BlockPlan(n, n, 0)
        d1 = delta_n(plan, SecurityBudget(0, 0, *epsilon_split(n, 2e-10)))
        d2 = delta_n(plan, SecurityBudget(0, 0, *epsilon_split(n, 4e-10)))
        assert d2 < d1

    @pytest.mark.parametrize("res", [0.0, -1e-10, 1.0])
    def test_bad_residual(self, res):
        with pytest.raises(DomainError):
            epsilon_split(10**7, res)


class TestDataFiles:
    def write(self, tmp_path, text, name="d.csv"):
        p = tmp_path / name
        p.write_text(text)
        return p

    def test_header_comments_and_semicolons(self, tmp_path):
        p = self.write(tmp_path, "# run 3\nx,y\n1.0,0.5\n\n-1.0;-0.4\n")
        x, y = read_pairs(p)
        assert x.tolist() == [1.0, -1.0] and y.tolist() == [0.5, -0.4]

    def test_empty(self, tmp_path):
        with pytest.raises(DataFileError):
            read_pairs(self.write(tmp_path, ""))

    def test_bad_line_reported(self, tmp_path):
        p = self.write(tmp_path, "1,2\n3,4\n5,abc\n")
        with pytest.raises(DataFileError, match="line 3"):
            read_pairs(p)

    def test_wrong_columns(self, tmp_path):
        with pytest.raises(DataFileError, match="line 1"):
            read_pairs(self.write(tmp_path, "1,2,3\n"))

    def test_non_finite(self, tmp_path):
        with pytest.raises(DataFileError, match="line 2"):
            read_pairs(self.write(tmp_path, "1,2\nnan,4\n"))

    def test_identical_data_is_unphysical(self, tmp_path):
        rows = "\n".join(f"{v},{v}" for v in np.linspace(-2, 2, 50))
        with pytest.raises(UnphysicalStateError, match="shot noise"):
            estimate_from_file(self.write(tmp_path, rows), 1.0, 0.05)

    def test_round_trip(self, tmp_path):
        spec = ProtocolSpec(Scheme.GAUSSIAN, 2.0)
        ch = ChannelModel(0.5, 0.05)
        cfg = TrialConfig.from_channel(spec, ch, 20000, seed=4)
        x, y = sample_pairs(cfg)
        p = tmp_path / "pairs.csv"
        np.savetxt(p, np.column_stack([x, y]), delimiter=",", header="x,y", comments="")
        out, rep = estimate_from_file(p, 2.0, 0.05, n_total=10**6)
        assert out.t_min <= math.sqrt(0.5) and ch.sigma2 <= out.sigma2_max
        assert out.t_hat == pytest.approx(math.sqrt(0.5), abs=5 * math.sqrt(ch.sigma2 / (20000 * 2.0)))
        assert out.sigma2_hat == pytest.approx(ch.sigma2, abs=5 * ch.sigma2 * math.sqrt(2 / 20000))
        assert rep.delta_n == pytest.approx(delta_n(BlockPlan(10**6, 10**6 - 20000, 20000), SecurityBudget(eps_pe=0.05)))

    def test_no_key_left(self, tmp_path):
        p = self.write(tmp_path, "1,0.9\n-1,-1.2\n1,1.1\n")
        with pytest.raises(DomainError, match="no raw key"):
            estimate_from_file(p, 1.0, 0.05, n_total=3)
