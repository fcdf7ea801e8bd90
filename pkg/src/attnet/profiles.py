"""Community characterization and super-community grouping.

Each labeled community becomes a feature vector: shares of the six
categories of interest plus internationality (Shannon entropy, natural
log, of the member-country distribution). Features are standardized to
Z-scores, clustered by Ward agglomeration, cut at the knee point of the
merge-distance profile, optionally split by a declarative rule, and named
by a configurable rulebook.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .ingest import CATEGORIES

logger = logging.getLogger(__name__)

# feature columns used for super-community clustering
CATEGORIES_OF_INTEREST = (
    "Science",
    "Healthcare",
    "Media",
    "Government & Politics",
    "Public Services",
    "Political Supporter",
)
INTERNATIONALITY = "Internationality"
FEATURE_COLUMNS = CATEGORIES_OF_INTEREST + (INTERNATIONALITY,)

SUPER_COMMUNITIES = ("InternationalSciHealth", "NationalElite", "Political", "Other")


class ProfileError(Exception):
    pass


@dataclass
class CommunityProfile:
    label: str
    size: int
    category_share: dict  # all 13 categories -> fraction, sums to 1
    retweet_share: float
    internationality: Optional[float]  # None when no member has a known country
    located_users: int = 0


def entropy(counts: Sequence[float]) -> float:
    """Shannon entropy, natural log, of a count/weight vector."""
    arr = np.asarray(counts, dtype=np.float64)
    arr = arr[arr > 0]
    if arr.size == 0:
        raise ProfileError("entropy of empty distribution")
    p = arr / arr.sum()
    return float(-np.sum(p * np.log(p)))


def profile_communities(
    assignment: np.ndarray,
    community_labels: dict,
    user_ids: Sequence[str],
    categories: dict,
    countries: dict,
    out_degrees: np.ndarray,
    tweet_weights: Optional[dict] = None,
) -> list[CommunityProfile]:
    """Per-community size, category shares, retweet share, internationality.

    `assignment` and `out_degrees` are indexed like `user_ids`. Users absent
    from the category table default to "Other". `tweet_weights` switches the
    entropy to tweet-level weighting (user country counted once per located
    tweet instead of once per user).
    """
    total_weight = float(out_degrees.sum())
    by_comm: dict[int, list[int]] = {}
    for i, c in enumerate(assignment):
        by_comm.setdefault(int(c), []).append(i)
    profiles = []
    for cid in sorted(by_comm, key=lambda c: community_labels.get(c, "")):
        label = community_labels.get(cid)
        if label is None or label == "residual":
            continue
        members = by_comm[cid]
        cat_counts = {c: 0 for c in CATEGORIES}
        country_w: dict[str, float] = {}
        rt = 0.0
        for i in members:
            uid = user_ids[i]
            cat_counts[categories.get(uid, "Other")] += 1
            rt += float(out_degrees[i])
            country = countries.get(uid)
            if country is not None:
                w = 1.0
                if tweet_weights is not None:
                    w = float(tweet_weights.get(uid, 0.0))
                if w > 0:
                    country_w[country] = country_w.get(country, 0.0) + w
        size = len(members)
        shares = {c: n / size for c, n in cat_counts.items()}
        h = entropy(list(country_w.values())) if country_w else None
        if h is None:
            logger.warning("community %s has no located users; internationality missing", label)
        profiles.append(
            CommunityProfile(
                label=label,
                size=size,
                category_share=shares,
                retweet_share=rt / total_weight if total_weight > 0 else 0.0,
                internationality=h,
                located_users=len(country_w),
            )
        )
    profiles.sort(key=lambda p: (len(p.label), p.label))
    return profiles


@dataclass
class FeatureMatrix:
    labels: list  # community labels, row order
    columns: tuple  # FEATURE_COLUMNS
    raw: np.ndarray  # (n, 7); missing internationality imputed w/ column mean
    z: np.ndarray  # per-column Z-scores (population std)
    imputed: list = field(default_factory=list)  # labels with imputed internationality
    warnings: list = field(default_factory=list)


def standardize(profiles: Sequence[CommunityProfile]) -> FeatureMatrix:
    """Z-score the six category shares plus internationality across communities.

    Missing internationality values are imputed with the column mean of the
    observed values (so they land at Z = 0) and flagged. Constant columns
    map to all-zero Z with a warning.
    """
    if len(profiles) < 2:
        raise ProfileError("standardization needs at least 2 communities")
    labels = [p.label for p in profiles]
    n = len(profiles)
    raw = np.zeros((n, len(FEATURE_COLUMNS)))
    for i, p in enumerate(profiles):
        for j, cat in enumerate(CATEGORIES_OF_INTEREST):
            raw[i, j] = p.category_share[cat]
    h_col = np.array(
        [p.internationality if p.internationality is not None else np.nan for p in profiles]
    )
    imputed = []
    if np.isnan(h_col).any():
        observed = h_col[~np.isnan(h_col)]
        fill = float(observed.mean()) if observed.size else 0.0
        imputed = [labels[i] for i in np.flatnonzero(np.isnan(h_col))]
        h_col = np.where(np.isnan(h_col), fill, h_col)
    raw[:, -1] = h_col

    warnings = []
    mean = raw.mean(axis=0)
    std = raw.std(axis=0)  # population std
    z = np.zeros_like(raw)
    for j in range(raw.shape[1]):
        if std[j] == 0.0:
            warnings.append(f"constant feature column {FEATURE_COLUMNS[j]!r}; Z set to 0")
        else:
            z[:, j] = (raw[:, j] - mean[j]) / std[j]
    return FeatureMatrix(labels, FEATURE_COLUMNS, raw, z, imputed, warnings)


# ---------------------------------------------------------------------------
# Ward agglomeration


@dataclass
class Dendrogram:
    """Merge list in scipy linkage convention.

    merges[t] = (a, b, height, size): clusters a and b (original rows are
    0..n-1, merged clusters n, n+1, ...) joined at Euclidean Ward height.
    """

    n: int
    merges: list

    def heights(self) -> np.ndarray:
        return np.array([m[2] for m in self.merges])

    def cut(self, k: int) -> list[list[int]]:
        """Row-index groups after cutting at k clusters."""
        if not 1 <= k <= self.n:
            raise ProfileError(f"cannot cut {self.n} rows at k={k}")
        members = {i: [i] for i in range(self.n)}
        for t, (a, b, _h, _s) in enumerate(self.merges[: self.n - k]):
            members[self.n + t] = members.pop(a) + members.pop(b)
        return sorted((sorted(g) for g in members.values()), key=lambda g: g[0])

    def to_json_obj(self) -> dict:
        return {
            "n": self.n,
            "merges": [
                {"a": a, "b": b, "height": h, "size": s} for a, b, h, s in self.merges
            ],
        }


def ward_cluster(fm: FeatureMatrix | np.ndarray) -> Dendrogram:
    """Ward minimum-variance agglomeration via Lance-Williams updates.

    Works on Euclidean distances over Z-scores; two singletons merge at
    their plain Euclidean distance. Ties pick the lexicographically
    smallest active pair.
    """
    pts = fm.z if isinstance(fm, FeatureMatrix) else np.asarray(fm, dtype=np.float64)
    n = pts.shape[0]
    if n < 2:
        raise ProfileError("ward clustering needs at least 2 rows")
    # squared distances, updated in place; inactive rows masked with inf
    diff = pts[:, None, :] - pts[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    np.fill_diagonal(d2, np.inf)
    sizes = {i: 1 for i in range(n)}
    cluster_id = list(range(n))  # slot -> current cluster id
    active = [True] * n
    merges = []
    slots = d2  # alias, slot-indexed
    for t in range(n - 1):
        best = (math.inf, -1, -1)
        for i in range(n):
            if not active[i]:
                continue
            for j in range(i + 1, n):
                if not active[j]:
                    continue
                if slots[i, j] < best[0]:
                    best = (slots[i, j], i, j)
        _, i, j = best
        ci, cj = cluster_id[i], cluster_id[j]
        a, b = min(ci, cj), max(ci, cj)
        ni, nj = sizes[ci], sizes[cj]
        height = math.sqrt(max(slots[i, j], 0.0))
        merges.append((a, b, height, ni + nj))
        # Lance-Williams on squared distances for Ward linkage
        dij2 = slots[i, j]
        for m in range(n):
            if not active[m] or m == i or m == j:
                continue
            nm = sizes[cluster_id[m]]
            new = (
                (ni + nm) * slots[i, m] + (nj + nm) * slots[j, m] - nm * dij2
            ) / (ni + nj + nm)
            slots[i, m] = new
            slots[m, i] = new
        active[j] = False
        new_id = n + t
        sizes[new_id] = ni + nj
        cluster_id[i] = new_id
    return Dendrogram(n, merges)


@dataclass
class KneeResult:
    k: int
    second_differences: dict  # k -> value
    no_clear_knee: bool = False


def knee_point(dendrogram: Dendrogram) -> KneeResult:
    """Cluster count at the sharpest bend of the merge-distance profile.

    f(k) = inter-cluster distance of the merge that produces k clusters;
    k maximizes the discrete second difference f(k-1) - 2 f(k) + f(k+1),
    ties to the smallest k.
    """
    n = dendrogram.n
    if len(dendrogram.merges) < 3:
        raise ProfileError("knee point needs at least 3 merges")
    h = dendrogram.heights()
    f = lambda k: h[n - k - 1]  # noqa: E731 - height producing k clusters
    ks = range(2, n - 1)
    second = {k: float(f(k - 1) - 2.0 * f(k) + f(k + 1)) for k in ks}
    best_k = min(ks, key=lambda k: (-second[k], k))
    spread = max(second.values()) - min(second.values())
    scale = max(abs(v) for v in second.values())
    no_clear = scale == 0.0 or spread < 1e-9 * max(1.0, float(h.max()))
    if no_clear:
        best_k = min(ks)
        logger.warning("no clear knee; defaulting to k=%d", best_k)
    return KneeResult(best_k, second, no_clear)


# ---------------------------------------------------------------------------
# rulebook and super-community assignment


@dataclass(frozen=True)
class NamingRule:
    name: str
    any_above: tuple = ()
    all_above: tuple = ()
    none_above: tuple = ()
    threshold: float = 0.0

    def matches(self, z_by_feature: dict) -> bool:
        if self.any_above and not any(z_by_feature[f] > self.threshold for f in self.any_above):
            return False
        if any(z_by_feature[f] <= self.threshold for f in self.all_above):
            return False
        if any(z_by_feature[f] > self.threshold for f in self.none_above):
            return False
        return True


@dataclass(frozen=True)
class SplitRule:
    designated: tuple = ("Science",)
    require_internationality: bool = True
    threshold: float = 0.0

    def selects(self, z_by_feature: dict) -> bool:
        if not any(z_by_feature[f] > self.threshold for f in self.designated):
            return False
        if self.require_internationality and z_by_feature[INTERNATIONALITY] <= self.threshold:
            return False
        return True


@dataclass
class Rulebook:
    rules: list  # NamingRule, ordered
    precedence: list  # names, highest first; empty disables tie resolution
    split: SplitRule = field(default_factory=SplitRule)

    @classmethod
    def default(cls) -> "Rulebook":
        return cls.from_json_obj(json.loads(_DEFAULT_RULEBOOK_JSON))

    @classmethod
    def load(cls, path: Path) -> "Rulebook":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_obj(json.load(fh))

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Rulebook":
        rules = [
            NamingRule(
                name=r["name"],
                any_above=tuple(r.get("any_above", ())),
                all_above=tuple(r.get("all_above", ())),
                none_above=tuple(r.get("none_above", ())),
                threshold=float(r.get("threshold", 0.0)),
            )
            for r in obj["rules"]
        ]
        sp = obj.get("split", {})
        split = SplitRule(
            designated=tuple(sp.get("designated", ("Science",))),
            require_internationality=bool(sp.get("require_internationality", True)),
            threshold=float(sp.get("threshold", 0.0)),
        )
        return cls(rules=rules, precedence=list(obj.get("precedence", ())), split=split)

    def name_cluster(self, z_by_feature: dict) -> str:
        matched = [r.name for r in self.rules if r.matches(z_by_feature)]
        if not matched:
            raise ProfileError(
                "no naming rule matched cluster with Z "
                + json.dumps({k: round(v, 3) for k, v in z_by_feature.items()})
            )
        if len(matched) == 1:
            return matched[0]
        if self.precedence:
            ranked = [n for n in self.precedence if n in matched]
            if ranked:
                return ranked[0]
        raise ProfileError(f"ambiguous naming: rules {matched} all match; set precedence")


_DEFAULT_RULEBOOK_JSON = json.dumps(
    {
        "precedence": ["InternationalSciHealth", "NationalElite", "Political", "Other"],
        "rules": [
            {
                "name": "InternationalSciHealth",
                "any_above": ["Science", "Healthcare"],
                "all_above": ["Internationality"],
            },
            {
                "name": "NationalElite",
                "any_above": ["Healthcare", "Media", "Public Services"],
                "none_above": ["Internationality"],
            },
            {
                "name": "Political",
                "any_above": ["Political Supporter", "Government & Politics"],
            },
            {
                "name": "Other",
                "none_above": [
                    "Science",
                    "Healthcare",
                    "Media",
                    "Government & Politics",
                    "Public Services",
                    "Political Supporter",
                ],
            },
        ],
        "split": {"designated": ["Science"], "require_internationality": True},
    }
)


def assign_super_communities(
    fm: FeatureMatrix,
    dendrogram: Dendrogram,
    k: int,
    rulebook: Optional[Rulebook] = None,
) -> dict[str, str]:
    """Cut at k clusters, apply the split rule, name clusters by the rulebook.

    Returns community label -> super-community name, covering every row.
    """
    rulebook = rulebook or Rulebook.default()
    clusters = dendrogram.cut(k)
    final: list[list[int]] = []
    for rows in clusters:
        selected = [i for i in rows if rulebook.split.selects(_zmap(fm, i))]
        rest = [i for i in rows if i not in selected]
        if selected and rest:
            final.append(selected)
            final.append(rest)
        else:
            final.append(rows)
    mapping: dict[str, str] = {}
    for rows in final:
        zmean = {
            col: float(fm.z[rows, j].mean()) for j, col in enumerate(fm.columns)
        }
        name = rulebook.name_cluster(zmean)
        for i in rows:
            mapping[fm.labels[i]] = name
    return mapping


def _zmap(fm: FeatureMatrix, row: int) -> dict:
    return {col: float(fm.z[row, j]) for j, col in enumerate(fm.columns)}


def write_default_rulebook(path: Path) -> None:
    path.write_text(json.dumps(json.loads(_DEFAULT_RULEBOOK_JSON), indent=2) + "\n")
