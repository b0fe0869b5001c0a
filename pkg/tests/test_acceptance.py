import pandas as pd
import pytest

from app.harness.acceptance import (
    FAILED,
    PASSED,
    SKIPPED,
    denoiser_checks,
    ordering_checks,
    personalization_checks,
    run_checks,
    tradeoff_checks,
)
from app.harness.reports import write_table
from app.schemas import AcceptanceConfig

CONFIG = AcceptanceConfig()


def _status(results):
    return {r.check: r.status for r in results}


def _privacy(policy=0.9, pbooster=0.6, rand=0.3, policy_norm=0.6, rand_norm=0.2):
    return pd.DataFrame([
        {"env": "surrogate", "obfuscator": "policy", "privacy": policy, "privacy_norm": policy_norm},
        {"env": "surrogate", "obfuscator": "pbooster", "privacy": pbooster, "privacy_norm": 0.4},
        {"env": "surrogate", "obfuscator": "rand", "privacy": rand, "privacy_norm": rand_norm},
        {"env": "world", "obfuscator": "policy", "privacy": 0.1, "privacy_norm": 0.1},
    ])


def _ttests(p_value=0.001, mean_diff=0.3, n=120):
    return pd.DataFrame([{"env": "surrogate", "obfuscator": "policy", "baseline": "pbooster",
                          "mean_diff": mean_diff, "p_value": p_value, "n": n}])


# ──────────────────────────────────────────────────────────────
# Obfuscator ordering
# ──────────────────────────────────────────────────────────────
def test_ordering_passes_on_a_clear_ranking():
    results = ordering_checks(_privacy(), _ttests(), CONFIG)
    assert _status(results) == {"obfuscator_ordering": PASSED, "ordering_significance": PASSED,
                                "ordering_ratio": PASSED}
    assert results[2].value == pytest.approx(3.0)


def test_ordering_fails_when_pbooster_beats_the_policy():
    results = _status(ordering_checks(_privacy(policy=0.5), _ttests(mean_diff=-0.1), CONFIG))
    assert results["obfuscator_ordering"] == FAILED
    assert results["ordering_significance"] == FAILED


@pytest.mark.parametrize("ttests", [_ttests(p_value=0.2), _ttests(n=40)])
def test_ordering_significance_needs_small_p_and_enough_personas(ttests):
    assert _status(ordering_checks(_privacy(), ttests, CONFIG))["ordering_significance"] == FAILED


def test_ordering_ratio_below_threshold_fails():
    results = ordering_checks(_privacy(policy_norm=0.25), _ttests(), CONFIG)
    assert _status(results)["ordering_ratio"] == FAILED
    assert results[2].value == pytest.approx(1.25)


def test_ordering_ratio_is_skipped_without_positive_rand_norm():
    assert _status(ordering_checks(_privacy(rand_norm=0.0), _ttests(), CONFIG))["ordering_ratio"] == SKIPPED


def test_ordering_reads_the_configured_environment():
    results = ordering_checks(_privacy(), _ttests(), AcceptanceConfig(ordering_env="world"))
    assert set(_status(results).values()) == {SKIPPED}


# ──────────────────────────────────────────────────────────────
# Denoiser
# ──────────────────────────────────────────────────────────────
def _utility(den_gain=0.4, sur_gain=0.1, losses=(0.20, 0.22, 0.23)):
    rows = [{"obfuscator": "policy", "denoiser": "surrogate", "u_gain_norm": sur_gain, "u_loss": 0.5}]
    for name, loss in zip(("policy", "pbooster", "rand"), losses):
        rows.append({"obfuscator": name, "denoiser": "denoiser",
                     "u_gain_norm": den_gain if name == "policy" else 0.3, "u_loss": loss})
    return pd.DataFrame(rows)


def test_denoiser_checks_pass():
    assert set(_status(denoiser_checks(_utility(), CONFIG)).values()) == {PASSED}


@pytest.mark.parametrize("den,sur", [(0.1, 0.4), (0.4, -0.1), (0.2, 0.2)])
def test_denoiser_gain_needs_denoiser_above_positive_surrogate(den, sur):
    assert _status(denoiser_checks(_utility(den, sur), CONFIG))["denoiser_gain"] == FAILED


def test_denoiser_spread_across_obfuscators():
    results = denoiser_checks(_utility(losses=(0.1, 0.2, 0.3)), CONFIG)
    assert _status(results)["denoiser_spread"] == FAILED
    assert results[1].value == pytest.approx(0.2)


# ──────────────────────────────────────────────────────────────
# Privacy-utility tradeoff
# ──────────────────────────────────────────────────────────────
def _sweep(privacy_at_half=0.8, den_loss=0.1, none_loss=0.5):
    rows = []
    for alpha, privacy in ((0.2, 0.4), (0.5, privacy_at_half)):
        for denoiser, loss in (("denoiser", den_loss), ("none", none_loss)):
            rows.append({"obfuscator": "policy", "alpha": alpha, "denoiser": denoiser,
                         "privacy": privacy, "u_loss": loss})
    return pd.DataFrame(rows)


def test_tradeoff_checks_pass():
    results = tradeoff_checks(_sweep(), CONFIG)
    assert set(_status(results).values()) == {PASSED}
    assert results[1].value == pytest.approx(0.2)


def test_privacy_falling_with_budget_is_a_violation():
    results = tradeoff_checks(_sweep(privacy_at_half=0.3), CONFIG)
    assert _status(results)["privacy_monotone"] == FAILED
    assert "policy 0.2->0.5" in results[0].detail


def test_tradeoff_utility_ratio_above_threshold_fails():
    assert _status(tradeoff_checks(_sweep(den_loss=0.4), CONFIG))["tradeoff_utility"] == FAILED


def test_tradeoff_utility_skipped_without_rows_at_alpha():
    results = tradeoff_checks(_sweep(), AcceptanceConfig(tradeoff_alpha=0.3))
    assert _status(results)["tradeoff_utility"] == SKIPPED


# ──────────────────────────────────────────────────────────────
# Personalization
# ──────────────────────────────────────────────────────────────
def _personalization(reductions=(0.3, 0.6, 0.8), d_sens=(0.7, 0.4, 0.2)):
    rows = [{"policy": "standard", "lam": None, "d_sens": 1.0, "d_sens_reduction": 0.0}]
    for lam, reduction, d in zip((0.5, 1.0, 2.0), reductions, d_sens):
        rows.append({"policy": "personalized", "lam": lam, "d_sens": d, "d_sens_reduction": reduction})
    return pd.DataFrame(rows)


def test_personalization_checks_pass():
    assert set(_status(personalization_checks(_personalization(), 1.0, CONFIG)).values()) == {PASSED}


def test_personalization_reduction_is_read_at_the_configured_lambda():
    results = _status(personalization_checks(_personalization(), 0.5, CONFIG))
    assert results["d_sens_reduction"] == FAILED
    assert _status(personalization_checks(_personalization(), 3.0, CONFIG))["d_sens_reduction"] == SKIPPED


def test_d_sens_rising_with_lambda_fails_the_trend():
    results = personalization_checks(_personalization(d_sens=(0.4, 0.5, 0.2)), 1.0, CONFIG)
    assert _status(results)["d_sens_lambda_trend"] == FAILED
    assert results[1].value == 1


# ──────────────────────────────────────────────────────────────
# Tables on disk
# ──────────────────────────────────────────────────────────────
def test_run_checks_without_tables_skips_everything(tmp_path):
    results = run_checks(tmp_path, CONFIG)
    assert len(results) == 9
    assert {r.status for r in results} == {SKIPPED}


def test_run_checks_reads_written_tables(tmp_path):
    write_table(_privacy().to_dict("records"), tmp_path / "privacy.csv", "abc", json_mirror=False)
    write_table(_ttests().to_dict("records"), tmp_path / "privacy_ttests.csv", "abc", json_mirror=False)
    write_table(_utility().to_dict("records"), tmp_path / "utility.csv", "abc", json_mirror=False)
    write_table(_personalization().to_dict("records"), tmp_path / "personalization.csv", "abc", json_mirror=False)
    results = _status(run_checks(tmp_path, CONFIG, lam=1.0))
    assert len(results) == 9
    assert results["privacy_monotone"] == SKIPPED
    assert {results[c] for c in results if c not in ("privacy_monotone", "tradeoff_utility")} == {PASSED}
    rows = [r.row() for r in run_checks(tmp_path, CONFIG)]
    assert set(rows[0]) == {"check", "status", "value", "threshold", "detail"}
