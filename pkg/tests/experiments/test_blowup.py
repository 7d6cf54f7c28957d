import math

import numpy as np
import pytest

from analysis.charflow import compute_blowup
from common.config import BlowupConfig, GridsConfig
from common.errors import PreconditionError
from common.models import ProfileParams
from experiments.blowup import blowup_sample, focus_nodes, localize, run_blowup

SCAN_POINTS = 20_000


@pytest.fixture(scope="module")
def cfg():
    return BlowupConfig()


@pytest.fixture(scope="module")
def grids():
    return GridsConfig(scan_points=SCAN_POINTS)


@pytest.fixture
def loc(blowup_flow, cfg):
    tau_min = cfg.tau_scale * blowup_flow.t_eps * 2.0**-cfg.k_max
    return localize(blowup_flow, blowup_flow.t_eps - tau_min)


class TestLocalize:
    def test_requires_focusing(self):
        flow = compute_blowup(ProfileParams(epsilon=1.0), SCAN_POINTS)

        with pytest.raises(PreconditionError, match="focusing"):
            localize(flow, 0.1)

    def test_window_inside_mollified_scale(self, loc, blowup_flow):
        eps = blowup_flow.params.epsilon

        assert loc.eta == pytest.approx((eps - blowup_flow.nu_eps) / 2)
        assert loc.delta > 0

    def test_zetas_ordered(self, loc, blowup_flow):
        t = 0.9 * blowup_flow.t_eps
        zetas = loc.zetas(t)

        assert zetas[0] < zetas[1] < loc.nu < zetas[2] < zetas[3]
        assert loc.nu - loc.eta <= zetas[0]
        assert zetas[3] <= loc.nu + loc.eta

    def test_zetas_hit_offsets(self, loc, blowup_flow):
        t = 0.9 * blowup_flow.t_eps
        offsets = blowup_flow.phi_offset(t, np.array(loc.zetas(t)), loc.nu)
        d = loc.delta

        np.testing.assert_allclose(offsets, [-2 * d, -d, d, 2 * d], rtol=1e-6)

    def test_cutoffs(self, loc):
        d = loc.delta
        q, _, _ = loc.psi1_jet(np.array([0.0, 2 * d, -3 * d]))

        np.testing.assert_array_equal(q, [1.0, 0.0, 0.0])
        assert float(loc.psi2(0.0)) == 1.0
        assert float(loc.psi2(1.5 * d)) == 0.0

    def test_x2_mass(self, loc):
        assert loc.delta <= loc.x2_mass() <= 2 * loc.delta


class TestBlowupSample:
    def test_focus_nodes(self, loc, blowup_flow, cfg, grids):
        t = 0.95 * blowup_flow.t_eps
        z1, _, _, z4 = loc.zetas(t)

        nodes = focus_nodes(loc, t, cfg, grids)

        assert nodes[0] == pytest.approx(z1)
        assert nodes[-1] == pytest.approx(z4)
        assert np.all(np.diff(nodes) > 0)
        assert np.min(np.abs(nodes - loc.nu)) == 0.0
        assert len(focus_nodes(loc, t, cfg, grids, refine=2)) > len(nodes)

    def test_early_sample(self, loc, blowup_flow, cfg, grids):
        tau = cfg.tau_scale * blowup_flow.t_eps

        sample = blowup_sample(loc, tau, cfg, grids, loc.x2_mass())

        assert sample.t == pytest.approx(blowup_flow.t_eps - tau)
        assert all(math.isfinite(v) for v in (sample.i1, sample.i2, sample.i3))
        assert sample.norm_sq > 0
        assert sample.signs_ok
        assert set(sample.quadrants) == {"alpha", "beta", "gamma", "delta"}
        assert 0 < sample.kappa < loc.eta

    @pytest.mark.slow
    def test_full_run(self, cfg, grids, blowup_flow):
        report = run_blowup(cfg, grids, threads=4, flow=blowup_flow)

        assert report.passed
        assert len(report.samples) == cfg.k_max + 1
        assert report.i2_fit.exponent >= 1 + cfg.base_margin
        assert report.cross_check_rel_diff <= cfg.cross_check_tol
        i1 = [c for c in report.checks if c.name == "|I1| exponent"][0]
        assert i1.required and i1.passed
