import math

import numpy as np
import pytest

import sigprop


def test_kernels():
    assert sigprop.kappa(1.0) == pytest.approx(1.0)
    assert sigprop.kappa(0.0) == pytest.approx(1.0 / math.pi)
    qt, pt = sigprop.propagate_phi(2.0, 0.5)
    assert qt == pytest.approx(1.0)
    assert pt == pytest.approx(0.25)


def test_theory_curves():
    h = sigprop.ModelHyper(0.31, 0.61)
    t = sigprop.run_trajectory(1.0, 0.2, h, 12)
    assert t.num_blocks == 12
    assert t.q.shape == (25,)
    fwd = sigprop.forward_apjn(t, h)
    bwd = sigprop.backward_apjn(t, h)
    assert fwd[0] == pytest.approx(1.0)
    assert bwd[-1] == pytest.approx(1.0)
    assert np.all(np.diff(fwd) >= 0)
    ext = sigprop.forward_extended(t, sigprop.ModelHyper(0.31, 0.61, context_n=32))
    assert ext["k_over_j"][0] == 0.0


def test_asymptotics():
    law = sigprop.asymptotic_law(sigprop.ModelHyper(0.7, math.sqrt(2) * 0.7))
    assert law.regime == "critical_powerlaw"
    assert law.zeta == pytest.approx(0.5)
    curve = sigprop.asymptotic_curve(law, [25.0, 100.0], 100.0, "backward")
    assert curve == pytest.approx([2.0, 1.0])
    erf = sigprop.asymptotic_law(sigprop.ModelHyper(0.0, 1.0, norm="erf"))
    assert erf.lambda_inv == pytest.approx(8 / math.pi**2)
    with pytest.raises(sigprop.NoInteriorRoot):
        sigprop.solve_c_star(sigprop.ModelHyper(0.5, 0.0, norm="erf"))


def test_simulator():
    c = sigprop.TransformerConfig()
    c.d, c.n, c.blocks, c.seed = 16, 4, 2, 1
    x = sigprop.permutation_symmetric_tokens(1.0, 0.2, c.n, c.d, seed=3)
    assert x.shape == (4, 16)
    states = sigprop.forward(c, x)
    assert len(states) == c.output_state + 1
    np.testing.assert_array_equal(states[0], x)
    e = sigprop.hutchinson_apjn(c, x, 0, c.output_state, n_probes=4, n_seeds=2)
    assert e["value"] > 0 and len(e["per_seed"]) == 2
    prof = sigprop.backward_profile(c, x, n_probes=4, n_seeds=2)
    assert prof["value"][0] == pytest.approx(e["value"])
    with pytest.raises(sigprop.ShapeError):
        sigprop.forward(c, np.ones((3, 16)))


def test_harness(tmp_path):
    r = sigprop.run("mode = theory\nblocks = 4\n", str(tmp_path))
    assert r.exit_code == 0
    assert (tmp_path / "curves.csv").read_text().count("\n") == 5
    assert '"complete"' in (tmp_path / "manifest.json").read_text()
    assert "fig4b" in sigprop.figure_tags()
    with pytest.raises(sigprop.ConfigError):
        sigprop.run("no_such_key = 1\n", str(tmp_path))
