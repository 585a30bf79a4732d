"""Benchmark scenarios, their split structure, and score aggregation.

Scenario files are line-delimited JSON, one object per line with the fields
of :class:`Scenario`. Blob references are paths relative to the file.
"""

from __future__ import annotations

import enum
import json
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import SchemaError, ValidationError
from .verifiers import BENCH_METRICS, BenchScores

# Full benchmark shape: 50 brands x 4 products x 2 demographic framings.
FULL_BRANDS = 50
PRODUCTS_PER_BRAND = 4
FULL_SIZE = 400
SPLIT_SIZES = {"Hillclimb": 200, "ValidationInDomain": 160, "ValidationOOD": 40}


class DemographicType(enum.Enum):
    Stereotypical = "Stereotypical"
    Unconventional = "Unconventional"


class Split(enum.Enum):
    Hillclimb = "Hillclimb"
    ValidationInDomain = "ValidationInDomain"
    ValidationOOD = "ValidationOOD"


_STR_FIELDS = ("brand", "product", "gender", "age", "location", "interest", "logo_ref", "product_ref")


@dataclass(frozen=True)
class Scenario:
    id: int
    brand: str
    product: str
    gender: str
    age: str
    location: str
    interest: str
    demographic_type: DemographicType
    logo_ref: str
    product_ref: str
    split: Split

    def six_point_prompt(self) -> str:
        return (f"{self.brand} builds {self.product}, targeting {self.gender} aged {self.age} in "
                f"{self.location} who are interested in {self.interest}.")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["demographic_type"] = self.demographic_type.value
        d["split"] = self.split.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> Scenario:
        if not isinstance(d, dict):
            raise SchemaError("expected a JSON object", field="<line>")
        missing = [k for k in ("id", *_STR_FIELDS, "demographic_type", "split") if k not in d]
        if missing:
            raise SchemaError(f"missing field(s) {missing}", field=missing[0])
        extra = sorted(set(d) - {"id", *_STR_FIELDS, "demographic_type", "split"})
        if extra:
            raise SchemaError(f"unknown field(s) {extra}", field=extra[0])
        if not isinstance(d["id"], int) or isinstance(d["id"], bool):
            raise SchemaError("id must be an integer", field="id")
        for k in _STR_FIELDS:
            if not isinstance(d[k], str) or not d[k].strip():
                raise SchemaError("must be a non-empty string", field=k)
        try:
            demo = DemographicType(d["demographic_type"])
        except ValueError:
            raise SchemaError(f"unknown value {d['demographic_type']!r}", field="demographic_type") from None
        try:
            split = Split(d["split"])
        except ValueError:
            raise SchemaError(f"unknown value {d['split']!r}", field="split") from None
        return cls(d["id"], *(d[k].strip() for k in _STR_FIELDS[:6]), demo, d["logo_ref"], d["product_ref"], split)


def parse_scenarios(lines: Iterable[str], source: str = "<scenarios>") -> list[Scenario]:
    out = []
    for n, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            out.append(Scenario.from_dict(json.loads(line)))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{source}:{n}: malformed JSON ({exc.msg})", field="<line>") from None
        except SchemaError as exc:
            raise SchemaError(f"{source}:{n}: {exc}", field=exc.field) from None
    validate_scenarios(out)
    return out


def load_scenarios(path: str | Path) -> list[Scenario]:
    path = Path(path)
    with path.open() as fh:
        return parse_scenarios(fh, str(path))


def validate_scenarios(scenarios: Sequence[Scenario]) -> None:
    """Unique ids; each (brand, product) has exactly one scenario per demographic type, in one split."""
    dup = [i for i, c in Counter(s.id for s in scenarios).items() if c > 1]
    if dup:
        raise ValidationError(f"duplicate scenario id(s) {sorted(dup)[:5]}")
    groups: dict[tuple[str, str], list[Scenario]] = defaultdict(list)
    for s in scenarios:
        groups[(s.brand, s.product)].append(s)
    for (brand, product), members in groups.items():
        types = sorted(m.demographic_type.value for m in members)
        if types != ["Stereotypical", "Unconventional"]:
            ids = [m.id for m in members]
            raise ValidationError(f"{brand} / {product} (ids {ids}) is not a stereotypical/unconventional pair: {types}")
        if members[0].split is not members[1].split:
            raise ValidationError(f"{brand} / {product} pair is split across {members[0].split.value} "
                                  f"and {members[1].split.value}")


def summarize(scenarios: Sequence[Scenario]) -> dict:
    per_brand = defaultdict(set)
    for s in scenarios:
        per_brand[s.brand].add(s.product)
    splits = Counter(s.split.value for s in scenarios)
    return {
        "scenarios": len(scenarios),
        "brands": len(per_brand),
        "products_per_brand": sorted(Counter(len(v) for v in per_brand.values()).items()),
        "demographics": dict(Counter(s.demographic_type.value for s in scenarios)),
        "splits": {k.value: splits.get(k.value, 0) for k in Split},
        "hillclimb": splits.get("Hillclimb", 0),
        "validation": splits.get("ValidationInDomain", 0) + splits.get("ValidationOOD", 0),
    }


def validate_full_benchmark(scenarios: Sequence[Scenario]) -> dict:
    """Check the complete 400-scenario layout and return its summary."""
    validate_scenarios(scenarios)
    s = summarize(scenarios)
    problems = []
    if s["scenarios"] != FULL_SIZE:
        problems.append(f"{s['scenarios']} scenarios, expected {FULL_SIZE}")
    if s["brands"] != FULL_BRANDS:
        problems.append(f"{s['brands']} brands, expected {FULL_BRANDS}")
    if s["products_per_brand"] != [(PRODUCTS_PER_BRAND, FULL_BRANDS)]:
        problems.append(f"products per brand {s['products_per_brand']}, expected {PRODUCTS_PER_BRAND} each")
    for name, want in SPLIT_SIZES.items():
        if s["splits"][name] != want:
            problems.append(f"{name} has {s['splits'][name]}, expected {want}")
    if problems:
        raise ValidationError("; ".join(problems))
    return s


def synthetic_scenarios(brands: int = FULL_BRANDS, products: int = PRODUCTS_PER_BRAND) -> list[Scenario]:
    """A placeholder scenario set with the benchmark's shape (no real assets).

    Brands are assigned to splits in blocks: the first half to Hillclimb, then
    80% / 20% of the rest to in-domain / out-of-domain validation.
    """
    half = brands // 2
    in_domain = half + round((brands - half) * 0.8)
    locations = ("Austin, TX", "Lagos", "Osaka", "Lyon", "Lima", "Pune", "Tallinn", "Perth")
    out = []
    sid = 0
    for b in range(brands):
        split = Split.Hillclimb if b < half else Split.ValidationInDomain if b < in_domain else Split.ValidationOOD
        for p in range(products):
            for demo, gender, age in ((DemographicType.Stereotypical, "Female", "25-34"),
                                      (DemographicType.Unconventional, "Male", "55-64")):
                out.append(Scenario(
                    sid, f"Brand{b:02d}", f"Product{b:02d}-{p}", gender, age, locations[(b + p) % len(locations)],
                    ("home cooking", "trail running", "budget travel", "board games")[p % 4], demo,
                    f"assets/brand{b:02d}/logo.png", f"assets/brand{b:02d}/product{p}.png", split))
                sid += 1
    return out


def write_scenarios(scenarios: Sequence[Scenario], path: str | Path) -> None:
    Path(path).write_text("".join(json.dumps(s.to_dict(), sort_keys=True) + "\n" for s in scenarios))


def aggregate(results: Sequence[BenchScores]) -> dict[str, float]:
    """Per-metric means plus ``Avg``, the mean of the four metric means."""
    if not results:
        raise ValidationError("cannot aggregate an empty result list")
    n = len(results)
    means = {m: sum(r.values[i] for r in results) / n for i, m in enumerate(BENCH_METRICS)}
    means["Avg"] = sum(means[m] for m in BENCH_METRICS) / len(BENCH_METRICS)
    return means
