"""
Directional checks over a finished run's report tables.

Each check compares one measured quantity with the threshold the run is
expected to clear and becomes a row of metrics/acceptance.csv. A check
whose table is missing or whose quantity is undefined is `skipped`.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from app.harness.experiments import REFERENCE_OBFUSCATOR, monotonicity_violations
from app.harness.reports import read_table
from app.schemas import AcceptanceConfig

logger = logging.getLogger(__name__)

PASSED = "passed"
FAILED = "failed"
SKIPPED = "skipped"

ORDER = (REFERENCE_OBFUSCATOR, "pbooster", "rand")


@dataclass(frozen=True)
class CheckResult:
    check: str
    status: str
    value: Optional[float] = None
    threshold: Optional[float] = None
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status == PASSED

    def row(self) -> Dict[str, object]:
        return asdict(self)


def _verdict(check: str, ok: bool, value: float, threshold: float, detail: str = "") -> CheckResult:
    return CheckResult(check, PASSED if ok else FAILED, float(value), float(threshold), detail)


def _skip(check: str, detail: str) -> CheckResult:
    return CheckResult(check, SKIPPED, detail=detail)


def _select(frame: pd.DataFrame, **where) -> pd.DataFrame:
    for column, value in where.items():
        if column not in frame.columns:
            return frame.iloc[0:0]
        if isinstance(value, float):
            frame = frame[np.isclose(frame[column].astype(float), value)]
        else:
            frame = frame[frame[column] == value]
    return frame


def _value(frame: pd.DataFrame, column: str, **where) -> Optional[float]:
    rows = _select(frame, **where)
    if rows.empty or column not in rows.columns or pd.isna(rows[column].iloc[0]):
        return None
    return float(rows[column].iloc[0])


# ──────────────────────────────────────────────────────────────
# Checks
# ──────────────────────────────────────────────────────────────
def ordering_checks(privacy: pd.DataFrame, ttests: pd.DataFrame, config: AcceptanceConfig) -> List[CheckResult]:
    """policy > pbooster > rand on privacy, the first gap significant, and the P^Norm ratio to rand."""
    env = config.ordering_env
    p = {name: _value(privacy, "privacy", env=env, obfuscator=name) for name in ORDER}
    missing = [name for name, value in p.items() if value is None]
    if missing:
        reason = f"no {env} privacy for {', '.join(missing)}"
        return [_skip("obfuscator_ordering", reason), _skip("ordering_significance", reason),
                _skip("ordering_ratio", reason)]

    policy, pbooster, rand = (p[name] for name in ORDER)
    gap = min(policy - pbooster, pbooster - rand)
    results = [_verdict("obfuscator_ordering", gap > 0, gap, 0.0,
                        f"policy={policy:.4f} pbooster={pbooster:.4f} rand={rand:.4f}")]

    p_value = _value(ttests, "p_value", env=env, obfuscator=REFERENCE_OBFUSCATOR, baseline="pbooster")
    mean_diff = _value(ttests, "mean_diff", env=env, obfuscator=REFERENCE_OBFUSCATOR, baseline="pbooster")
    n = _value(ttests, "n", env=env, obfuscator=REFERENCE_OBFUSCATOR, baseline="pbooster")
    if p_value is None or mean_diff is None:
        results.append(_skip("ordering_significance", "paired test against pbooster is undefined"))
    else:
        ok = mean_diff > 0 and p_value < config.p_value and n >= config.min_personas
        results.append(_verdict("ordering_significance", ok, p_value, config.p_value,
                                f"mean_diff={mean_diff:.4f} n={int(n)}"))

    policy_norm = _value(privacy, "privacy_norm", env=env, obfuscator=REFERENCE_OBFUSCATOR)
    rand_norm = _value(privacy, "privacy_norm", env=env, obfuscator="rand")
    if policy_norm is None or rand_norm is None or rand_norm <= 0:
        results.append(_skip("ordering_ratio", "P^Norm of rand is undefined or not positive"))
    else:
        ratio = policy_norm / rand_norm
        results.append(_verdict("ordering_ratio", ratio >= config.ordering_ratio, ratio, config.ordering_ratio))
    return results


def denoiser_checks(utility: pd.DataFrame, config: AcceptanceConfig) -> List[CheckResult]:
    """Trained denoiser beats the surrogate-only estimate, with U_Loss nearly flat across obfuscators."""
    results = []
    den = _value(utility, "u_gain_norm", obfuscator=REFERENCE_OBFUSCATOR, denoiser="denoiser")
    sur = _value(utility, "u_gain_norm", obfuscator=REFERENCE_OBFUSCATOR, denoiser="surrogate")
    if den is None or sur is None:
        results.append(_skip("denoiser_gain", "U_Gain^Norm is undefined"))
    else:
        results.append(_verdict("denoiser_gain", den > sur > 0, den - sur, 0.0,
                                f"denoiser={den:.4f} surrogate={sur:.4f}"))

    losses = _select(utility, denoiser="denoiser")
    if len(losses) < 2:
        results.append(_skip("denoiser_spread", "fewer than two obfuscators were denoised"))
    else:
        spread = float(losses["u_loss"].max() - losses["u_loss"].min())
        results.append(_verdict("denoiser_spread", spread <= config.utility_spread, spread, config.utility_spread))
    return results


def tradeoff_checks(sweep: pd.DataFrame, config: AcceptanceConfig) -> List[CheckResult]:
    """Privacy nondecreasing in the budget, and the denoiser's U_Loss cut at `tradeoff_alpha`."""
    results = []
    per_budget = sweep.drop_duplicates(subset=["obfuscator", "alpha"])[["obfuscator", "alpha", "privacy"]]
    violations = monotonicity_violations(per_budget.to_dict("records"))
    detail = "; ".join(f"{name} {lo:g}->{hi:g}" for name, lo, hi in violations)
    results.append(_verdict("privacy_monotone", not violations, len(violations), 0, detail))

    alpha = config.tradeoff_alpha
    den = _value(sweep, "u_loss", obfuscator=REFERENCE_OBFUSCATOR, denoiser="denoiser", alpha=alpha)
    none = _value(sweep, "u_loss", obfuscator=REFERENCE_OBFUSCATOR, denoiser="none", alpha=alpha)
    if den is None or none is None or none <= 0:
        results.append(_skip("tradeoff_utility", f"no utility rows at alpha={alpha:g}"))
    else:
        ratio = den / none
        results.append(_verdict("tradeoff_utility", ratio <= config.tradeoff_ratio, ratio, config.tradeoff_ratio))
    return results


def personalization_checks(frame: pd.DataFrame, lam: float, config: AcceptanceConfig) -> List[CheckResult]:
    """D_sens reduction of the personalized policy at `lam`, and D_sens falling as lambda grows."""
    results = []
    reduction = _value(frame, "d_sens_reduction", policy="personalized", lam=float(lam))
    if reduction is None:
        results.append(_skip("d_sens_reduction", f"no personalized row at lam={lam:g}"))
    else:
        results.append(_verdict("d_sens_reduction", reduction >= config.d_sens_reduction, reduction,
                                config.d_sens_reduction))

    sweep = _select(frame, policy="personalized").sort_values("lam")
    if len(sweep) < 2:
        results.append(_skip("d_sens_lambda_trend", "fewer than two lambda values"))
    else:
        rises = int((np.diff(sweep["d_sens"].to_numpy(dtype=float)) > 0).sum())
        results.append(_verdict("d_sens_lambda_trend", rises == 0, rises, 0))
    return results


# ──────────────────────────────────────────────────────────────
def _table(metrics_dir: Path, name: str) -> Optional[pd.DataFrame]:
    path = metrics_dir / f"{name}.csv"
    return read_table(path) if path.exists() else None


def run_checks(metrics_dir: str | Path, config: AcceptanceConfig, lam: float = 1.0) -> List[CheckResult]:
    metrics_dir = Path(metrics_dir)
    privacy, ttests = _table(metrics_dir, "privacy"), _table(metrics_dir, "privacy_ttests")
    utility, sweep = _table(metrics_dir, "utility"), _table(metrics_dir, "sweep_alpha")
    personalization = _table(metrics_dir, "personalization")

    results: List[CheckResult] = []
    if privacy is None or ttests is None:
        results += [_skip(c, "privacy tables missing")
                    for c in ("obfuscator_ordering", "ordering_significance", "ordering_ratio")]
    else:
        results += ordering_checks(privacy, ttests, config)
    if utility is None:
        results += [_skip(c, "utility table missing") for c in ("denoiser_gain", "denoiser_spread")]
    else:
        results += denoiser_checks(utility, config)
    if sweep is None:
        results += [_skip(c, "sweep table missing") for c in ("privacy_monotone", "tradeoff_utility")]
    else:
        results += tradeoff_checks(sweep, config)
    if personalization is None:
        results += [_skip(c, "personalization table missing") for c in ("d_sens_reduction", "d_sens_lambda_trend")]
    else:
        results += personalization_checks(personalization, lam, config)

    for r in results:
        if r.status == FAILED:
            logger.warning("Check %s failed: value=%.4g threshold=%.4g %s", r.check, r.value, r.threshold, r.detail)
    logger.info("Acceptance: %d passed, %d failed, %d skipped",
                sum(r.status == PASSED for r in results), sum(r.status == FAILED for r in results),
                sum(r.status == SKIPPED for r in results))
    return results
