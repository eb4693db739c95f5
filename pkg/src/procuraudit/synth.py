"""Synthetic contract extracts with known ground truth.

Normal contracts draw ``log_cuantia ~ N(13, 2)`` and
``log_valor_definitivo = 0.97 * log_cuantia + N(0, 0.25)`` (0.25 is the
variance), which puts the Pearson correlation of the two log amounts near
0.97.  Planted anomalies multiply the definitive value by 5 to 10 and carry
an unusual description word.  Duplicates re-emit an earlier contract's id and
creation date with perturbed amounts, always after the original row.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from datetime import date, timedelta

import numpy as np

from .features import pearson
from .ingest import DEFAULT_HEADERS, FIELDS, parse_csv

CONTRACT_TYPES = ("Compraventa", "Suministro", "Obra", "Prestacion de Servicios")
MODALITIES = (
    "Licitacion Publica",
    "Subasta",
    "Seleccion Abreviada de Menor Cuantia (Ley 1150 de 2007)",
    "Contratacion Directa (Ley 1150 de 2007)",
)
ENTITIES = (
    ("890980040", "Municipio de Envigado", "Territorial", "Municipal"),
    ("899999061", "Alcaldia Mayor de Bogota", "Territorial", "Distrital"),
    ("890399029", "Gobernacion del Valle del Cauca", "Territorial", "Departamental"),
    ("899999001", "Ministerio de Educacion Nacional", "Nacional", "Centralizado"),
    ("830039102", "Instituto Nacional de Vias", "Nacional", "Descentralizado"),
    ("800103923", "Hospital San Vicente", "Territorial", "Descentralizado"),
)
STATES = ("Celebrado", "Liquidado", "Adjudicado", "Terminado Anormalmente")

DEFAULT_TEMPLATES = (
    "Suministro de {item} para las sedes de la entidad",
    "Compra de {item} con destino a la {place}",
    "Prestacion de servicios de {service} para la {place}",
    "Construccion y mejoramiento de {work} en el municipio",
    "Mantenimiento preventivo y correctivo de {item}",
    "Adquisicion de {item} para el programa de {program}",
    "Obra civil de {work} del sector {place}",
)
_FILL = {
    "item": ("equipos de computo", "papeleria", "vehiculos", "medicamentos", "mobiliario", "alimentos", "combustible"),
    "place": ("secretaria de salud", "institucion educativa", "alcaldia", "biblioteca publica", "estacion de policia"),
    "service": ("vigilancia", "aseo", "transporte", "asesoria juridica", "capacitacion"),
    "work": ("vias terciarias", "acueducto", "alcantarillado", "puente vehicular", "polideportivo"),
    "program": ("alimentacion escolar", "atencion primaria", "vivienda social", "seguridad ciudadana"),
}
RARE_WORDS = (
    "yate", "helicoptero", "joyeria", "champana", "caviar", "orquidea", "esmeralda",
    "licoreria", "casino", "hipodromo", "avioneta", "blindaje", "pirotecnia", "trufas",
    "submarino", "mausoleo", "porcelana", "tapiceria", "escultura", "relojeria",
)

KINDS = ("normal", "planted_anomaly", "duplicate", "date_inverted")


@dataclass(frozen=True)
class SynthConfig:
    n_contracts: int = 1000
    anomaly_rate: float = 0.01
    seed: int = 0
    duplicate_rate: float = 0.0
    date_inversion_rate: float = 0.0
    vocab_pool: tuple[str, ...] = field(default=DEFAULT_TEMPLATES)

    def __post_init__(self):
        object.__setattr__(self, "vocab_pool", tuple(self.vocab_pool))
        if self.n_contracts < 10:
            raise ValueError("n_contracts must be >= 10")
        if not 0 <= self.anomaly_rate <= 0.2:
            raise ValueError("anomaly_rate must lie in [0, 0.2]")
        for name in ("duplicate_rate", "date_inversion_rate"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.anomaly_rate + self.date_inversion_rate > 1:
            raise ValueError("anomaly_rate + date_inversion_rate must not exceed 1")
        if not self.vocab_pool:
            raise ValueError("vocab_pool must not be empty")


def _pesos(v: float) -> str:
    """Integer pesos with '.' thousands grouping."""
    return f"{int(round(v)):,}".replace(",", ".")


def _describe(rng: np.random.Generator, templates: tuple[str, ...]) -> str:
    tpl = templates[rng.integers(len(templates))]
    slots = {k: v[rng.integers(len(v))] for k, v in _FILL.items()}
    return tpl.format(**slots)


def generate(cfg: SynthConfig) -> tuple[str, list[dict]]:
    """Generate a CSV extract (default headers, comma decimals) and its ground truth.

    Ground-truth entries are ``{"row": line_number, "kind": kind}`` where
    ``line_number`` matches the ``row_index`` the ingest parser assigns.
    """
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_contracts
    n_anom = int(round(cfg.anomaly_rate * n))
    n_inv = int(round(cfg.date_inversion_rate * n))
    n_dup = int(round(cfg.duplicate_rate * n))

    kinds = np.array(["normal"] * n, dtype=object)
    chosen = rng.permutation(n)
    kinds[chosen[:n_anom]] = "planted_anomaly"
    kinds[chosen[n_anom : n_anom + n_inv]] = "date_inverted"

    log_c = rng.normal(13.0, 2.0, n)
    log_v = 0.97 * log_c + rng.normal(0.0, 0.5, n)
    cuantia = np.exp(log_c)
    valor = np.exp(log_v)
    inflate = rng.uniform(5.0, 10.0, n)
    valor = np.where(kinds == "planted_anomaly", valor * inflate, valor)

    start = date(2007, 1, 1)
    span = (date(2012, 12, 31) - start).days - 120
    rows: list[dict] = []
    for i in range(n):
        nit, entity, nivel, orden = ENTITIES[rng.integers(len(ENTITIES))]
        created = start + timedelta(days=int(rng.integers(span)))
        convocado = created + timedelta(days=int(rng.integers(1, 10)))
        if kinds[i] == "date_inverted":
            awarded = created - timedelta(days=int(rng.integers(1, 60)))
        else:
            awarded = convocado + timedelta(days=int(rng.integers(5, 60)))
        signed = max(awarded, created) + timedelta(days=int(rng.integers(1, 15)))
        detail = _describe(rng, cfg.vocab_pool)
        if kinds[i] == "planted_anomaly":
            detail += " " + RARE_WORDS[rng.integers(len(RARE_WORDS))]
        additions = valor[i] * rng.uniform(0.05, 0.5) if rng.random() < 0.15 else 0.0
        ctype = CONTRACT_TYPES[rng.integers(len(CONTRACT_TYPES))]
        rows.append(
            {
                "NIVEL": nivel,
                "ORDEN": orden,
                "NIT_ENTIDAD": nit,
                "NOMBRE_ENTIDAD": entity,
                "TIPO_MODALIDAD": MODALITIES[rng.integers(len(MODALITIES))],
                "NUMERO_CONSTANCIA": f"{created.year % 100:02d}-{rng.integers(1, 16)}-{i + 10000}",
                "ID_OBJETO_CONTRATO": f"CT-{i + 1:06d}",
                "OBJETO_CONTRATO": ctype,
                "DETALLE_OBJETO": detail,
                "TIPO_CONTRATO": ctype,
                "CUANTIA": cuantia[i],
                "VALOR_DEFINITIVO": valor[i],
                "FECHACREACION": created,
                "FECHAESTADOBORRADOR": created,
                "FECHAESTADODESCARTADO": None,
                "FECHAESTADOCONVOCADO": convocado,
                "FECHAESTADOADJUDICADO": awarded,
                "FECHAESTADOTERMANORMALDESPCONV": None,
                "FECHAESTADOTERMANORMALDESPCONV_1": None,
                "FECHAESTADOTERMANORMALDESPCONV_2": None,
                "FECHAESTADOTERMANORMALDESPCONV_3": None,
                "ESTADO_PROCESO": STATES[rng.integers(len(STATES))],
                "NOMBRE_CONTRATISTA": f"Contratista {int(rng.integers(1, 300)):03d} S.A.S.",
                "NIT_CONTRATISTA": str(900000000 + int(rng.integers(1, 300))),
                "FECHA_FIRMA_CONTRATO": signed,
                "VALOR_CONTRATO": valor[i],
                "VALOR_ADICIONES": additions,
                "VALOR_TOTAL": valor[i] + additions,
                "_kind": kinds[i],
            }
        )

    # Duplicates land strictly after their source row.
    order_keys = [float(i) for i in range(n)]
    for src in rng.choice(n, size=n_dup, replace=True) if n_dup else []:
        src = int(src)
        dup = dict(rows[src])
        factor = rng.uniform(0.5, 1.5)
        for col in ("CUANTIA", "VALOR_DEFINITIVO", "VALOR_CONTRATO", "VALOR_TOTAL"):
            dup[col] = dup[col] * factor
        dup["_kind"] = "duplicate"
        rows.append(dup)
        order_keys.append(src + 0.5 + rng.uniform(0.0, n - src - 0.5))
    order = sorted(range(len(rows)), key=lambda j: (order_keys[j], j))

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([DEFAULT_HEADERS[f] for f in FIELDS])
    truth = []
    for line, j in enumerate(order, start=2):
        r = rows[j]
        out = []
        for f in FIELDS:
            v = r[f]
            if v is None:
                out.append("")
            elif isinstance(v, date):
                out.append(v.isoformat())
            elif isinstance(v, float):
                out.append(_pesos(v))
            else:
                out.append(v)
        w.writerow(out)
        truth.append({"row": line, "kind": r["_kind"]})
    return buf.getvalue(), truth


def truth_jsonl(truth: list[dict]) -> str:
    return "".join(json.dumps(t) + "\n" for t in truth)


def planted_gaussian(
    n: int = 500, d: int = 5, n_outliers: int = 5, distance: float = 8.0, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Standard-normal cloud with ``n_outliers`` rows moved to ``distance`` sigma.

    Each outlier sits at the given distance from the origin along an
    independent random direction.  Returns ``(X, outlier_rows)``.
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    rows = np.sort(rng.choice(n, size=n_outliers, replace=False))
    dirs = rng.standard_normal((n_outliers, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    X[rows] = distance * dirs
    return X, rows


def log_amount_correlation(csv_text: str) -> float:
    """Pearson correlation of ``ln(1+x)`` amounts in a generated extract."""
    recs, _ = parse_csv(io.BytesIO(csv_text.encode("utf-8")))
    pairs = [(r.cuantia, r.valor_definitivo) for r in recs if r.cuantia is not None and r.valor_definitivo is not None]
    return pearson([math.log1p(a) for a, _ in pairs], [math.log1p(b) for _, b in pairs])
