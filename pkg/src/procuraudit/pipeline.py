"""Clean, score and report stages shared by the CLI and the notebooks."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import explain, features, iforest, ingest, regress, text
from .errors import SingleClassError

logger = logging.getLogger(__name__)

SCORE_COLUMNS = (
    "row_key",
    "contract_id",
    "expected_path",
    "score",
    "residual",
    "z",
    "overspend_flag",
    "overdraw_flag",
    "date_inconsistency_flag",
    "tipo_contrato",
    "tipo_modalidad",
)
REPORT_COLUMNS = (
    "rank",
    "row_key",
    "contract_id",
    "score",
    "z",
    "overspend_flag",
    "overdraw_flag",
    "date_inconsistency_flag",
    "tipo_contrato",
    "tipo_modalidad",
    "explanation",
)


def fmt(v) -> str:
    """Stable text form for CSV cells; floats use 17 significant digits."""
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


@dataclass
class TextConfig:
    min_df_fraction: float = 0.0001
    max_df_fraction: float = 0.5
    max_features: int = 10000
    min_token_len: int = 2
    stopwords: str | None = None
    columns: tuple[str, ...] = ("DETALLE_OBJETO",)

    def params(self) -> text.VectorizerParams:
        return text.VectorizerParams(
            min_df_fraction=self.min_df_fraction,
            max_df_fraction=self.max_df_fraction,
            max_features=self.max_features,
            stopword_list=frozenset(text.load_stopwords(self.stopwords)),
            min_token_len=self.min_token_len,
        )


@dataclass
class RegressionConfig:
    z_threshold: float = 3.0
    max_iter: int = 5
    design_columns: tuple[str, ...] = ("num:log_cuantia",)
    target: str = "num:log_valor_definitivo"


@dataclass
class ExplainConfig:
    max_depth: int = 5
    min_samples_split: int = 2
    label_source: str = "model_topk"
    label_file: str | None = None

    def __post_init__(self):
        if self.label_source not in ("model_topk", "external_file"):
            raise ValueError("label_source must be 'model_topk' or 'external_file'")
        if self.label_source == "external_file" and not self.label_file:
            raise ValueError("label_source 'external_file' needs label_file")


@dataclass
class PipelineConfig:
    schema: ingest.SchemaConfig = field(default_factory=ingest.SchemaConfig)
    vectorizer: TextConfig = field(default_factory=TextConfig)
    forest: iforest.ForestParams = field(default_factory=iforest.ForestParams)
    regression: RegressionConfig = field(default_factory=RegressionConfig)
    explain: ExplainConfig = field(default_factory=ExplainConfig)
    top_k: int = 10
    use_text: bool = True
    use_categoricals: bool = True
    categorical_fields: tuple[str, ...] = features.CATEGORICAL_FIELDS
    categorical_min_count: int = 5
    workers: int = 1

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> PipelineConfig:
        data = dict(data)
        kw = {}
        if "schema" in data:
            kw["schema"] = ingest.SchemaConfig.from_dict(data.pop("schema"))
        if "vectorizer" in data:
            v = dict(data.pop("vectorizer"))
            if "columns" in v:
                v["columns"] = tuple(v["columns"])
            kw["vectorizer"] = TextConfig(**v)
        if "forest" in data:
            kw["forest"] = iforest.ForestParams(**data.pop("forest"))
        if "regression" in data:
            r = dict(data.pop("regression"))
            if "design_columns" in r:
                r["design_columns"] = tuple(r["design_columns"])
            kw["regression"] = RegressionConfig(**r)
        if "explain" in data:
            kw["explain"] = ExplainConfig(**data.pop("explain"))
        if "categorical_fields" in data:
            kw["categorical_fields"] = tuple(data.pop("categorical_fields"))
        data.pop("synth", None)
        kw.update(data)
        return cls(**kw)

    @classmethod
    def from_json(cls, path: str | Path) -> PipelineConfig:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "schema": self.schema.to_dict(),
            "vectorizer": asdict(self.vectorizer),
            "forest": asdict(self.forest),
            "regression": asdict(self.regression),
            "explain": asdict(self.explain),
            "top_k": self.top_k,
            "use_text": self.use_text,
            "use_categoricals": self.use_categoricals,
            "categorical_fields": list(self.categorical_fields),
            "categorical_min_count": self.categorical_min_count,
            "workers": self.workers,
        }


@dataclass
class CleanResult:
    records: list[ingest.RawContract]
    diagnostics: list[ingest.Diagnostic]
    rows_in: int
    duplicates_removed: int
    date_inversions: int

    def summary(self) -> str:
        return (
            f"rows in: {self.rows_in}\n"
            f"rows out: {len(self.records)}\n"
            f"duplicates removed: {self.duplicates_removed}\n"
            f"date inversions found: {self.date_inversions}\n"
            f"diagnostics: {len(self.diagnostics)}\n"
        )


def clean(source, cfg: PipelineConfig) -> CleanResult:
    records, diags = ingest.parse_csv(source, cfg.schema)
    kept, removed = ingest.deduplicate(records)
    inversions = sum(
        features.derive_date_flag(r.fechacreacion, r.fechaestadoadjudicado) == 1 for r in kept
    )
    return CleanResult(kept, diags, len(records), removed, inversions)


def run_clean(input_path: str | Path, out_dir: str | Path, cfg: PipelineConfig) -> CleanResult:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = clean(input_path, cfg)
    with open(out_dir / "cleaned.csv", "w", encoding="utf-8", newline="") as fh:
        ingest.write_csv(result.records, fh, cfg.schema)
    with open(out_dir / "diagnostics.jsonl", "w", encoding="utf-8") as fh:
        ingest.write_diagnostics(result.diagnostics, fh)
    return result


@dataclass
class Featurized:
    matrix: features.FeatureMatrix
    contract_features: list[features.ContractFeatures]
    vocabulary: text.Vocabulary | None
    counts: text.SparseCounts | None


def featurize(records: Sequence[ingest.RawContract], cfg: PipelineConfig) -> Featurized:
    feats = [features.contract_features(r) for r in records]
    cats = None
    if cfg.use_categoricals:
        cats = {
            name: features.one_hot([r.get(name) for r in records], cfg.categorical_min_count)
            for name in cfg.categorical_fields
            if name in cfg.schema.column_map
        }
    vocab = counts = None
    if cfg.use_text:
        docs = []
        for r in records:
            joined = " ".join(r.get(c) or "" for c in cfg.vectorizer.columns)
            docs.append(text.tokenize(joined, cfg.vectorizer.min_token_len))
        vocab = text.build_vocabulary(docs, cfg.vectorizer.params())
        counts = text.vectorize(docs, vocab)
    text_block = (vocab, counts) if vocab is not None else None
    matrix = features.assemble_matrix(feats, cats, text_block)
    return Featurized(matrix, feats, vocab, counts)


@dataclass
class ScoreResult:
    featurized: Featurized
    forest: iforest.IsolationForest
    scores: iforest.ScoreVector
    model: regress.LinearModel
    residuals: regress.ResidualScores
    table: list[dict]

    def manifest(self, cfg: PipelineConfig) -> dict:
        m = self.featurized.matrix
        return {
            "n_rows": m.shape[0],
            "n_columns": m.shape[1],
            "blocks": dict(m.blocks),
            "vocabulary_size": len(self.featurized.vocabulary) if self.featurized.vocabulary else 0,
            "use_text": cfg.use_text,
            "use_categoricals": cfg.use_categoricals,
        }


def _regression_inputs(matrix: features.FeatureMatrix, rcfg: RegressionConfig):
    cols = list(rcfg.design_columns)
    X = np.column_stack([np.ones(matrix.shape[0])] + [matrix.column(c) for c in cols])
    y = matrix.column(rcfg.target)
    observed = np.ones(matrix.shape[0], dtype=bool)
    for c in cols + [rcfg.target]:
        name = "flag:missing_" + c.split(":", 1)[1]
        if name in matrix.column_names:
            observed &= matrix.column(name) == 0
    return X, y, observed


def score(records: Sequence[ingest.RawContract], cfg: PipelineConfig) -> ScoreResult:
    """Featurize, fit the forest and the robust regression, join per-row scores."""
    fz = featurize(records, cfg)
    m = fz.matrix
    forest = iforest.build_forest(m, cfg.forest, n_jobs=cfg.workers)
    sv = iforest.score(forest, m)

    X, y, observed = _regression_inputs(m, cfg.regression)
    keys = [k[1] for k in m.row_keys]
    fit_keys = [k for k, o in zip(keys, observed) if o]
    model = regress.robust_fit(
        X[observed],
        y[observed],
        cfg.regression.z_threshold,
        cfg.regression.max_iter,
        row_keys=fit_keys,
    )
    rs = regress.residual_scores(model, X, y, cfg.regression.z_threshold)

    table = []
    for i, (rec, cf) in enumerate(zip(records, fz.contract_features)):
        table.append(
            {
                "row_key": rec.row_index,
                "contract_id": rec.id_objeto_contrato,
                "expected_path": float(sv.expected_path[i]),
                "score": float(sv.score[i]),
                "residual": float(rs.residual[i]),
                "z": float(rs.z[i]),
                "overspend_flag": int(rs.overspend_flag[i]),
                "overdraw_flag": cf.overdraw_flag,
                "date_inconsistency_flag": cf.date_inconsistency_flag,
                "tipo_contrato": rec.tipo_contrato,
                "tipo_modalidad": rec.tipo_modalidad,
            }
        )
    return ScoreResult(fz, forest, sv, model, rs, table)


def write_table(rows: Sequence[dict], columns: Sequence[str], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r[c]) for c in columns])


def run_score(input_path: str | Path, out_dir: str | Path, cfg: PipelineConfig) -> ScoreResult:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records, _ = ingest.parse_csv(input_path, cfg.schema)
    result = score(records, cfg)
    write_table(result.table, SCORE_COLUMNS, out_dir / "scores.csv")
    result.featurized.matrix.to_csv(out_dir / "features.csv")
    (out_dir / "forest.json").write_text(result.forest.to_json(), encoding="utf-8")
    (out_dir / "regression.json").write_text(result.model.to_json(), encoding="utf-8")
    (out_dir / "manifest.json").write_text(
        json.dumps(result.manifest(cfg), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    if result.featurized.vocabulary is not None:
        (out_dir / "vocabulary.json").write_text(result.featurized.vocabulary.to_json(), encoding="utf-8")
        with open(out_dir / "counts.csv", "w", encoding="utf-8", newline="") as fh:
            result.featurized.counts.write_triplets(fh)
    return result


def read_scores(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["row_key"] = int(r["row_key"])
        r["score"] = float(r["score"])
        r["z"] = float(r["z"])
        r["contract_id"] = r["contract_id"] or None
    return rows


def read_labels(path: str | Path) -> dict[int, int]:
    """External labels: CSV with columns ``row_key,label`` (label 0 or 1)."""
    with open(path, encoding="utf-8", newline="") as fh:
        return {int(r["row_key"]): int(r["label"]) for r in csv.DictReader(fh)}


@dataclass
class Report:
    rows: list[dict]
    tree: explain.DecisionTree | None
    importance: explain.ImportanceReport | None
    column_names: list[str]
    warnings: list[str] = field(default_factory=list)

    def explain_text(self) -> str:
        out = io.StringIO()
        for w in self.warnings:
            out.write(f"warning: {w}\n")
        if self.tree is None:
            out.write("no surrogate tree fitted\n")
            return out.getvalue()
        out.write("Surrogate decision tree (1 = flagged)\n\n")
        out.write(self.tree.to_text(self.column_names))
        out.write("\nFeature importance\n\n")
        for name, imp in self.importance.items:
            out.write(f"{name}\t{format(imp, '.6f')}\n")
        return out.getvalue()


def rank_rows(score_rows: Sequence[dict], k: int) -> list[dict]:
    ranked = iforest.rank_anomalies(
        [r["score"] for r in score_rows], k, row_keys=[r["row_key"] for r in score_rows]
    )
    by_key = {r["row_key"]: r for r in score_rows}
    return [by_key[key] for key, _ in ranked]


def report(
    score_rows: Sequence[dict],
    matrix: features.FeatureMatrix,
    cfg: PipelineConfig,
    labels: dict[int, int] | None = None,
) -> Report:
    """Rank the top-k rows and explain them with a surrogate decision tree.

    ``labels`` maps row keys to 0/1; when absent the top-k rows are labelled
    1 and the rest 0.
    """
    warnings = []
    n = len(score_rows)
    k = cfg.top_k
    if k >= n:
        warnings.append(f"top_k={k} >= {n} rows; reporting every row")
        k = n
    top = rank_rows(score_rows, k)
    keys = [rk[1] for rk in matrix.row_keys]
    if labels is None:
        flagged = {r["row_key"] for r in top}
        y = np.array([int(key in flagged) for key in keys])
    else:
        y = np.array([labels.get(key, 0) for key in keys])

    tree = importance = None
    try:
        tree = explain.fit_tree(
            matrix, y, explain.TreeParams(cfg.explain.max_depth, cfg.explain.min_samples_split)
        )
        importance = explain.feature_importance(tree, matrix.column_names)
    except SingleClassError:
        if labels is not None:
            raise
        warnings.append("every row is flagged; surrogate tree skipped")

    rank_of = {name: i for i, (name, _) in enumerate(importance.items)} if importance else {}
    row_of = {key: i for i, key in enumerate(keys)}
    rows = []
    for rank, r in enumerate(top, start=1):
        explanation = ""
        if tree is not None:
            path = tree.decision_path(matrix.rows[row_of[r["row_key"]]])
            used = []
            for node in path[:-1]:
                name = matrix.column_names[tree.nodes[node].feature]
                if name not in used and name in rank_of:
                    used.append(name)
            used.sort(key=lambda nm: rank_of[nm])
            explanation = ";".join(used[:3])
        rows.append({**r, "rank": rank, "explanation": explanation})
    for w in warnings:
        logger.warning(w)
    return Report(rows, tree, importance, list(matrix.column_names), warnings)


def run_report(scores_path: str | Path, out_dir: str | Path, cfg: PipelineConfig) -> Report:
    scores_path = Path(scores_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    score_rows = read_scores(scores_path)
    matrix = features.FeatureMatrix.from_csv(scores_path.parent / "features.csv")
    labels = None
    if cfg.explain.label_source == "external_file":
        labels = read_labels(cfg.explain.label_file)
    rep = report(score_rows, matrix, cfg, labels)
    write_table(rep.rows, REPORT_COLUMNS, out_dir / "report.csv")
    (out_dir / "explain.txt").write_text(rep.explain_text(), encoding="utf-8")
    if rep.tree is not None:
        (out_dir / "tree.json").write_text(rep.tree.to_json(rep.column_names), encoding="utf-8")
        (out_dir / "importance.csv").write_text(rep.importance.to_csv(), encoding="utf-8")
    return rep
