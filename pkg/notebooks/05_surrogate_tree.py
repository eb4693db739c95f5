"""
Explaining the flags with a surrogate tree
==========================================

Label the forest's top-k contracts as 1 and everything else as 0, then fit a
shallow CART tree. The tree and its Gini importances show which features
separate the flagged rows.
"""

import io

from procuraudit.ingest import parse_csv
from procuraudit.pipeline import PipelineConfig, report, score
from procuraudit.synth import SynthConfig, generate

text, truth = generate(SynthConfig(n_contracts=1000, anomaly_rate=0.01, seed=2))
records, _ = parse_csv(io.BytesIO(text.encode("utf-8")))
cfg = PipelineConfig.from_dict({"use_text": False, "top_k": 10})
result = score(records, cfg)
rep = report(result.table, result.featurized.matrix, cfg)

# %%
print(rep.tree.to_text(rep.column_names))

# %%
for name, imp in rep.importance.items[:5]:
    print(f"{imp:.3f}  {name}")

# %%
planted = {t["row"] for t in truth if t["kind"] == "planted_anomaly"}
for row in rep.rows:
    mark = "*" if row["row_key"] in planted else " "
    print(f"{mark} #{row['rank']:2d} row {row['row_key']:4d} {row['score']:.4f}  {row['explanation']}")
print(len(planted & {r["row_key"] for r in rep.rows}), "of", len(planted), "planted rows made the top-k")
