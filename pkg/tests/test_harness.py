import math

import numpy as np
import pytest

from levycodec import levy_model as lm
from levycodec.errors import SweepFailedError
from levycodec.harness import (
    ExperimentConfig,
    RDPoint,
    codec_params,
    envelope,
    exit_tail_experiment,
    rd_from_csv,
    rd_slopes,
    rd_to_csv,
    roundtrip_trial,
    slope_fit,
    sweep,
    theory_curves,
    theory_to_csv,
    trial_on_path,
)
from levycodec.levy_model import CompoundPoisson, GaussianOnly, LevyTriplet, Stable, Tabulated
from levycodec.path_sim import CadlagPath, SimConfig, make_rng

from .conftest import FAMILIES

ZERO = LevyTriplet(GaussianOnly(), allow_degenerate=True)
FAST_SIM = SimConfig(grid_step=2.0**-10)


def same_points(a, b):
    """Field-wise equality treating NaN as equal to NaN."""
    if len(a) != len(b):
        return False
    for pa, pb in zip(a, b):
        for name in pa.__dataclass_fields__:
            x, y = getattr(pa, name), getattr(pb, name)
            if not (x == y or (isinstance(x, float) and math.isnan(x) and math.isnan(y))):
                return False
    return True


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(ZERO, (0.1, 0.2))
        with pytest.raises(ValueError):
            ExperimentConfig(ZERO, (0.1,), replicas=0)
        with pytest.raises(ValueError):
            ExperimentConfig(ZERO, (0.1,), mode="lossless")

    def test_dict_round_trip(self):
        cfg = ExperimentConfig(FAMILIES["cp_exp"], (0.3, 0.1), 7, 2.0, FAST_SIM, "quant", 4.0, 5.0)
        assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


class TestRoundtripTrial:
    def test_zero_process(self):
        cfg = ExperimentConfig(ZERO, (0.1,), replicas=1, sim=FAST_SIM)
        r = roundtrip_trial(ZERO, 0.1, cfg)
        # m falls back to 1: one empty box
        assert r.bits == 1 and r.error == 0.0 and r.certificate_ok and r.M == 0

    def test_injected_single_jump(self):
        tr = LevyTriplet(CompoundPoisson(2.0, Tabulated([(1.3, 0.5), (-1.3, 0.5)])))
        eps = 0.5
        params = codec_params(tr, eps)
        # symmetric measure: b(eps) = 0; F1(0.5) = 2, two boxes as in the codec example
        assert params.b_eps == pytest.approx(0.0, abs=1e-15) and params.m == pytest.approx(2.0)
        r = trial_on_path(CadlagPath([0.4], [1.3]), params, tol=0.0)
        assert r.bits == len("0011011011")
        assert r.error == pytest.approx(0.1 * 1.3 + 0.5 * 0.2)
        assert r.certificate_ok and r.M == 1

    def test_stable_certificates(self):
        tr = FAMILIES["stable15"]
        cfg = ExperimentConfig(tr, (0.05,), sim=FAST_SIM)
        for i in range(20):
            assert roundtrip_trial(tr, 0.05, cfg, rng=make_rng(1, 0, i)).certificate_ok


class TestSweep:
    def test_zero_process(self):
        cfg = ExperimentConfig(ZERO, (0.1,), replicas=1, sim=FAST_SIM)
        (pt,) = sweep(cfg)
        assert pt.mean_bits == 1 and pt.max_bits == 1 and pt.mean_error_lp == 0.0
        assert pt.f_total == 0.0 and math.isnan(pt.bit_budget)

    def test_csv_round_trip_and_file(self, tmp_path):
        cfg = ExperimentConfig(FAMILIES["cpoisson"], (0.3, 0.1), replicas=5, sim=FAST_SIM, mode="quant")
        out = tmp_path / "rd.csv"
        pts = sweep(cfg, out=str(out))
        text = out.read_text()
        assert text == rd_to_csv(pts)
        assert text.startswith("# schema=rdpoint/1\n")
        assert same_points(rd_from_csv(text), pts)
        for pt in pts:
            assert pt.max_bits >= pt.mean_bits >= 0 and pt.f_total == pt.f1 + pt.f2
            assert pt.max_bits <= pt.bit_budget

    def test_serial_and_parallel_identical(self):
        cfg = ExperimentConfig(FAMILIES["stable12"], (0.2, 0.1), replicas=6, sim=FAST_SIM)
        assert rd_to_csv(sweep(cfg)) == rd_to_csv(sweep(cfg, workers=2))
        assert rd_to_csv(sweep(cfg)) == rd_to_csv(sweep(cfg))

    def test_stable_envelope_and_error(self):
        tr = FAMILIES["stable15"]
        cfg = ExperimentConfig(tr, (0.3, 0.1, 0.05), replicas=20, sim=FAST_SIM)
        for pt in sweep(cfg):
            assert 0.1 * pt.f_total <= pt.mean_bits <= 10 * pt.f_total
            assert pt.mean_error_lp <= 3 * pt.eps + pt.tol
            assert pt.cert_failures == 0 and pt.failed == 0

    def test_failures_abort(self):
        # a jump count far above the simulation guard makes every replica fail
        tr = LevyTriplet(Stable(1.9, 1.0, 1.0))
        cfg = ExperimentConfig(tr, (1e-4,), replicas=2, sim=SimConfig(small_jump_cutoff_ratio=0.01))
        with pytest.raises(SweepFailedError):
            sweep(cfg)

    def test_csv_rejects_unknown_schema(self):
        with pytest.raises(ValueError):
            rd_from_csv("eps,mean_bits\n")


class TestSlopeFit:
    def test_power_law(self):
        fit = slope_fit([(x, x**2) for x in (1.0, 2.0, 3.0, 4.0, 5.0)])
        assert fit.slope == pytest.approx(2.0, abs=1e-12) and fit.r2 == pytest.approx(1.0)

    def test_constant(self):
        fit = slope_fit([(x, 3.0) for x in (1.0, 2.0, 4.0)])
        assert fit.slope == pytest.approx(0.0, abs=1e-14) and fit.r2 == 1.0

    def test_linear(self):
        fit = slope_fit([(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)], transform="linear")
        assert fit.slope == pytest.approx(2.0) and fit.intercept == pytest.approx(1.0)

    @pytest.mark.parametrize("pts", [
        [(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)],
        [(1.0, 1.0), (2.0, 2.0)],
        [(1.0, -1.0), (2.0, 2.0), (3.0, 3.0)],
    ])
    def test_rejections(self, pts):
        with pytest.raises(ValueError):
            slope_fit(pts)

    def test_rd_slopes_and_envelope(self):
        pts = [RDPoint(e, 10 / e, 20 / e, e, 2 * e, e, 1 / e, 0.0, 1 / e, 5, 0.0)
               for e in (0.4, 0.2, 0.1, 0.05)]
        s = rd_slopes(pts)
        assert s["bits_vs_inv_eps"]["slope"] == pytest.approx(1.0)
        assert s["error_vs_bits"]["slope"] == pytest.approx(-1.0)
        env = envelope(pts)
        assert env.lower == pytest.approx(10) and env.ratio == pytest.approx(1.0)


class TestTheoryCurves:
    def test_gaussian_f1_bound_slope(self):
        tr = LevyTriplet(GaussianOnly(), sigma2=1.0)
        grid = [0.05, 0.02, 0.01, 0.005, 0.002]
        rows = [r for r in theory_curves(tr, grid) if r["kind"] == "F1Bound"]
        assert all(r["degenerate_flag"] == 0 for r in rows)
        # n = floor(F1(2 eps)/18) is an integer part, so compare to the smooth eps^-2 loosely
        fit = slope_fit([(r["eps"], r["rate_nats"]) for r in rows])
        assert fit.slope == pytest.approx(-2.0, abs=0.05)
        f2_rows = [r for r in theory_curves(tr, grid) if r["kind"] == "F2Bound"]
        assert all(r["degenerate_flag"] == 1 for r in f2_rows)

    def test_stable_f2_bound_scaling(self):
        tr = LevyTriplet(Stable(1.2, 0.5, 0.5))
        grid = [1e-2, 5e-3, 2e-3, 1e-3, 5e-4]
        rows = [r for r in theory_curves(tr, grid) if r["kind"] == "F2Bound"]
        fit = slope_fit([(r["eps"], r["rate_nats"]) for r in rows])
        # kappa -> 1 as the tail mass grows, leaving the eps^-alpha of F2
        assert fit.slope == pytest.approx(-1.2, abs=0.01)
        assert all(r["rate_bits"] == pytest.approx(r["rate_nats"] * lm.LOG2E) for r in rows)

    def test_degenerate_flags(self):
        tr = LevyTriplet(CompoundPoisson(0.9, Tabulated([(2.0, 1.0)])))
        rows = theory_curves(tr, [1.0, 0.5])
        assert all(r["degenerate_flag"] == 1 for r in rows)
        text = theory_to_csv(rows)
        assert text.splitlines()[0].startswith("eps,kind,rate_nats,rate_bits")
        assert len(text.splitlines()) == 5


def test_exit_tail_rows():
    tr = LevyTriplet(GaussianOnly(), sigma2=1.0)
    rows = exit_tail_experiment(tr, [0.1, 0.05], [0.5, 1.0], SimConfig(grid_step=2.0**-12), 200)
    assert len(rows) == 4
    for r in rows:
        assert 0.0 <= r.exceedance <= 1.0 and r.std_error > 0
        assert r.exceedance <= r.bound + 3 * r.std_error
    assert np.all(np.isfinite([r.bound for r in rows]))
