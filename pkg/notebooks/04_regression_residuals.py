"""
Regression over the amount
==========================

Legitimate contracts spend roughly what was sanctioned. Fit log definitive
value on log sanctioned amount, excluding outliers round by round, and flag
contracts whose spending sits far above the fitted line.
"""

import io

import numpy as np

from procuraudit.features import contract_features
from procuraudit.ingest import parse_csv
from procuraudit.regress import fit_ols, residual_scores, robust_fit
from procuraudit.synth import SynthConfig, generate

text, truth = generate(SynthConfig(n_contracts=1000, anomaly_rate=0.02, seed=8))
records, _ = parse_csv(io.BytesIO(text.encode("utf-8")))
feats = [contract_features(r) for r in records]
x = np.array([f.log_cuantia for f in feats])
y = np.array([f.log_valor_definitivo for f in feats])
X = np.column_stack([np.ones_like(x), x])

# %%
plain = fit_ols(X, y)
robust = robust_fit(X, y, row_keys=[r.row_index for r in records])
print("plain  coefficients", np.round(plain.coefficients, 4), "sigma", round(plain.sigma, 4))
print("robust coefficients", np.round(robust.coefficients, 4), "sigma", round(robust.sigma, 4))
print(len(robust.excluded_rows), "rows excluded while fitting")

# %%
# Only over-spending is flagged; spending far below the line is not.
scores = residual_scores(robust, X, y)
planted = {t["row"] for t in truth if t["kind"] == "planted_anomaly"}
flagged = {r.row_index for r, f in zip(records, scores.overspend_flag) if f}
print("flagged", len(flagged), "| planted", len(planted), "| overlap", len(flagged & planted))
print("largest z:", np.round(np.sort(scores.z)[-5:], 2))
