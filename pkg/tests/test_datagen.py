import numpy as np
import pytest

from vatscm.datagen import TREATED_ID, GenSpec, generate, ramp_effect
from vatscm.ingest import PipelineConfig, load_panel, write_panel
from vatscm.panel import StudyDesign, validate_panel
from vatscm.scm import fit_weights

DESIGN = StudyDesign.default()


def test_noise_free_recovery():
    spec = GenSpec(donor_count=6, true_weights={"D01": 0.5, "D02": 0.3, "D03": 0.2}, seed=0)
    panel, truth = generate(spec)
    fit = fit_weights(panel)
    for i in panel.donor_ids:
        assert abs(fit.weights[i] - truth.weights[i]) <= 1e-4


def test_gap_equals_injected_effect():
    effect = ramp_effect(DESIGN, 8.0, start_offset=3)
    panel, truth = generate(GenSpec(effect=effect, seed=1))
    fit = fit_weights(panel)
    assert {m: v for m, v in truth.effect.items() if v} == effect
    for m in DESIGN.months():
        assert abs(fit.gap[m] - effect.get(m, 0.0)) <= 1e-6
    assert min(effect) == DESIGN.treatment_start.shift(3)


def test_seed_determinism():
    a, _ = generate(GenSpec(noise_sd=0.3, seed=42))
    b, _ = generate(GenSpec(noise_sd=0.3, seed=42))
    c, _ = generate(GenSpec(noise_sd=0.3, seed=43))
    assert a == b
    assert a != c


@pytest.mark.parametrize("seed", range(20))
def test_always_valid(seed):
    panel, truth = generate(GenSpec(donor_count=2 + seed % 9, true_weights={"D01": 0.7, "D02": 0.3},
                                    noise_sd=0.5, seed=seed))
    assert validate_panel(panel) == []
    assert panel.treated.id == TREATED_ID


def test_error_grows_with_noise():
    means = []
    for sigma in (0.0, 0.1, 0.5):
        errs = []
        for seed in range(100):
            panel, truth = generate(GenSpec(noise_sd=sigma, seed=seed))
            fit = fit_weights(panel)
            errs.append(np.mean([abs(fit.gap[m] - truth.effect.get(m, 0.0)) for m in DESIGN.post_months()]))
        means.append(float(np.mean(errs)))
    assert means[0] <= 1e-6
    assert means[0] < means[1] < means[2]
    # roughly linear in sigma
    assert 2.0 < means[2] / means[1] < 12.0


@pytest.mark.parametrize("kw", [dict(donor_count=1, true_weights={"D01": 1.0}), dict(noise_sd=-0.1),
                                dict(true_weights={"D01": 0.5, "D02": 0.6}), dict(true_weights={"D99": 1.0}),
                                dict(effect={DESIGN.pre_end: 1.0})])
def test_invalid_spec(kw):
    with pytest.raises(ValueError):
        GenSpec(**kw)


def test_csv_round_trip(tmp_path):
    panel, _ = generate(GenSpec(noise_sd=0.2, seed=7))
    path = tmp_path / "panel.csv"
    write_panel(panel, path)
    cfg = PipelineConfig(treated_id=panel.treated.id, donor_ids=panel.donor_ids)
    back = load_panel([path], cfg)
    assert back.treated.observations == panel.treated.observations
    for a, b in zip(back.donors, panel.donors):
        assert a.id == b.id and a.observations == b.observations
