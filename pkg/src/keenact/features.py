"""User co-participation features, item tag TF-IDF, and FM input assembly.

Scorer inputs are sparse concatenations of ordered blocks:

    [user id one-hot |U|] [item id one-hot |V|] [user features d_U]
    [item features d_T] [activity one-hot |Z|]

The activity block exists only in the Act layout; the id blocks can be
switched off for pure cold-start experiments.
"""

from __future__ import annotations

from dataclasses import dataclass
from collections import defaultdict

import numpy as np
from scipy import sparse


@dataclass(frozen=True)
class SparseVector:
    """Sorted sparse vector: strictly increasing indices, no stored zeros."""

    indices: np.ndarray
    values: np.ndarray
    dim: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)
        if idx.shape != val.shape:
            raise ValueError("indices and values length mismatch")
        if idx.size:
            if np.any(np.diff(idx) <= 0):
                raise ValueError("indices must be strictly increasing")
            if idx[0] < 0 or idx[-1] >= self.dim:
                raise ValueError(f"index outside [0, {self.dim})")
            if np.any(val == 0.0):
                raise ValueError("zeros must not be stored")

    @classmethod
    def from_entries(cls, entries, dim: int) -> "SparseVector":
        entries = sorted((int(i), float(x)) for i, x in entries if x != 0.0)
        idx = np.array([i for i, _ in entries], dtype=np.int64)
        val = np.array([x for _, x in entries], dtype=np.float64)
        return cls(idx, val, dim)

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def to_entries(self) -> list[tuple[int, float]]:
        return [(int(i), float(x)) for i, x in zip(self.indices, self.values)]


class FeatureMatrix:
    """One sparse feature row per entity, all rows sharing one dimension."""

    def __init__(self, matrix: sparse.csr_matrix, entity_kind: str):
        if entity_kind not in ("user", "item"):
            raise ValueError(f"unknown entity kind {entity_kind!r}")
        m = sparse.csr_matrix(matrix, dtype=np.float64)
        m.eliminate_zeros()
        m.sort_indices()
        self.matrix = m
        self.entity_kind = entity_kind

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Return (indices, values) views of one row."""
        if not (0 <= i < self.n_rows):
            raise IndexError(f"row {i} outside [0, {self.n_rows})")
        start, end = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        return self.matrix.indices[start:end].astype(np.int64), self.matrix.data[start:end]

    def row_vector(self, i: int) -> SparseVector:
        idx, val = self.row(i)
        return SparseVector(idx.copy(), val.copy(), self.dim)


def empty_features(n_rows: int, entity_kind: str) -> FeatureMatrix:
    """Zero-width feature matrix for datasets without side information."""
    return FeatureMatrix(sparse.csr_matrix((n_rows, 0), dtype=np.float64), entity_kind)


def co_participation_features(train) -> FeatureMatrix:
    """Count, for each user pair, shared (item, activity-type) combinations.

    Entry (u, u') is the number of (v, z) combinations both users acted
    on, i.e. co-forks plus co-watches and so on.  The diagonal is forced
    to zero.  Computed from the training split only.
    """
    if train.n_triples == 0:
        raise ValueError("empty training store")
    catalog = train.catalog
    pair_ids: dict[tuple[int, int], int] = {}
    rows, cols = [], []
    for u, v, z in train.triples:
        key = (v, z)
        j = pair_ids.setdefault(key, len(pair_ids))
        rows.append(u)
        cols.append(j)
    incidence = sparse.csr_matrix(
        (np.ones(len(rows)), (rows, cols)),
        shape=(catalog.n_users, len(pair_ids)),
        dtype=np.float64,
    )
    co = (incidence @ incidence.T).tocsr()
    co.setdiag(0.0)
    co.eliminate_zeros()
    return FeatureMatrix(co, "user")


def l2_normalize_rows(feats: FeatureMatrix) -> FeatureMatrix:
    """Scale each row to unit L2 norm; zero rows stay zero.

    Raw co-participation counts grow with corpus density and would
    dwarf the identity one-hots inside a scorer, so the training
    pipeline feeds them through this.
    """
    m = feats.matrix.tocsr().astype(np.float64)
    norms = np.sqrt(np.asarray(m.multiply(m).sum(axis=1)).ravel())
    norms[norms == 0.0] = 1.0
    scaled = sparse.diags(1.0 / norms) @ m
    return FeatureMatrix(scaled.tocsr(), feats.entity_kind)


def tfidf_item_features(tags: dict, catalog) -> FeatureMatrix:
    """TF-IDF rows over description tags, L2-normalized per item.

    tf is the raw count of a tag on the item; idf(t) uses add-one
    smoothing, ln((1 + |V|) / (1 + df(t))) + 1.  Items without tags get
    zero rows.  ``tags`` maps raw item ids to tag lists; unknown items
    are ignored.
    """
    tag_counts: dict[int, dict[str, int]] = {}
    df: dict[str, int] = defaultdict(int)
    for raw_id, tag_list in tags.items():
        v = catalog.item_index.get(raw_id)
        if v is None:
            continue
        counts: dict[str, int] = defaultdict(int)
        for t in tag_list:
            counts[t] += 1
        if counts:
            tag_counts[v] = dict(counts)
            for t in counts:
                df[t] += 1
    vocab = {t: j for j, t in enumerate(sorted(df))}
    n_items = catalog.n_items
    idf = {t: np.log((1.0 + n_items) / (1.0 + df[t])) + 1.0 for t in vocab}

    rows, cols, vals = [], [], []
    for v, counts in tag_counts.items():
        entries = [(vocab[t], c * idf[t]) for t, c in counts.items()]
        norm = np.sqrt(sum(x * x for _, x in entries))
        for j, x in entries:
            rows.append(v)
            cols.append(j)
            vals.append(x / norm)
    mat = sparse.csr_matrix((vals, (rows, cols)), shape=(n_items, len(vocab)), dtype=np.float64)
    return FeatureMatrix(mat, "item")


def read_tag_file(path) -> dict[str, list[str]]:
    """Read lines of ``item_id<TAB>tag1,tag2,...`` into a tag map."""
    tags: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            item, _, tag_field = line.partition("\t")
            tag_list = [t.strip() for t in tag_field.split(",") if t.strip()]
            tags[item.strip()] = tag_list
    return tags


def save_feature_matrix(feats: FeatureMatrix, path) -> None:
    """Persist as triplet text: header ``dims: R C`` then row\\tcol\\tvalue lines."""
    coo = feats.matrix.tocoo()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"dims: {feats.n_rows} {feats.dim}\n")
        for r, c, x in zip(coo.row, coo.col, coo.data):
            fh.write(f"{int(r)}\t{int(c)}\t{float(x)!r}\n")


def load_feature_matrix(path, entity_kind: str) -> FeatureMatrix:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("dims: "):
            raise ValueError(f"{path}: missing 'dims: R C' header")
        n_rows, n_cols = (int(x) for x in header[len("dims: "):].split())
        rows, cols, vals = [], [], []
        for line in fh:
            if not line.strip():
                continue
            r, c, x = line.split("\t")
            rows.append(int(r))
            cols.append(int(c))
            vals.append(float(x))
    mat = sparse.csr_matrix((vals, (rows, cols)), shape=(n_rows, n_cols), dtype=np.float64)
    return FeatureMatrix(mat, entity_kind)


@dataclass(frozen=True)
class FeatureLayout:
    """Block offsets for scorer inputs.

    ``n_activities == 0`` describes the Keen layout (no activity block).
    Disabled id blocks have zero width; all offsets stay contiguous.
    """

    n_users: int
    n_items: int
    d_user: int
    d_item: int
    n_activities: int = 0
    use_user_ids: bool = True
    use_item_ids: bool = True

    @property
    def user_id_offset(self) -> int:
        return 0

    @property
    def item_id_offset(self) -> int:
        return self.n_users if self.use_user_ids else 0

    @property
    def user_feat_offset(self) -> int:
        return self.item_id_offset + (self.n_items if self.use_item_ids else 0)

    @property
    def item_feat_offset(self) -> int:
        return self.user_feat_offset + self.d_user

    @property
    def activity_offset(self) -> int:
        return self.item_feat_offset + self.d_item

    @property
    def dim(self) -> int:
        return self.activity_offset + self.n_activities

    def blocks(self) -> list[tuple[str, int, int]]:
        """(name, offset, size) for each enabled block, in layout order."""
        out = []
        if self.use_user_ids:
            out.append(("user_id", self.user_id_offset, self.n_users))
        if self.use_item_ids:
            out.append(("item_id", self.item_id_offset, self.n_items))
        out.append(("user_features", self.user_feat_offset, self.d_user))
        out.append(("item_features", self.item_feat_offset, self.d_item))
        if self.n_activities:
            out.append(("activity", self.activity_offset, self.n_activities))
        return out

    def to_dict(self) -> dict:
        return {
            "n_users": self.n_users,
            "n_items": self.n_items,
            "d_user": self.d_user,
            "d_item": self.d_item,
            "n_activities": self.n_activities,
            "use_user_ids": self.use_user_ids,
            "use_item_ids": self.use_item_ids,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureLayout":
        return cls(**d)

    @classmethod
    def for_keen(cls, catalog, user_feats: FeatureMatrix, item_feats: FeatureMatrix, id_onehots: bool = True) -> "FeatureLayout":
        return cls(
            n_users=catalog.n_users,
            n_items=catalog.n_items,
            d_user=user_feats.dim,
            d_item=item_feats.dim,
            n_activities=0,
            use_user_ids=id_onehots,
            use_item_ids=id_onehots,
        )

    @classmethod
    def for_act(cls, catalog, user_feats: FeatureMatrix, item_feats: FeatureMatrix, id_onehots: bool = True) -> "FeatureLayout":
        return cls(
            n_users=catalog.n_users,
            n_items=catalog.n_items,
            d_user=user_feats.dim,
            d_item=item_feats.dim,
            n_activities=catalog.n_activities,
            use_user_ids=id_onehots,
            use_item_ids=id_onehots,
        )


def user_part(u: int, layout: FeatureLayout, user_feats: FeatureMatrix) -> tuple[np.ndarray, np.ndarray]:
    """User-side entries (id one-hot + feature block), absolute indices."""
    if not (0 <= u < layout.n_users):
        raise ValueError(f"user id {u} outside [0, {layout.n_users})")
    fidx, fval = user_feats.row(u)
    if layout.use_user_ids:
        idx = np.concatenate(([layout.user_id_offset + u], layout.user_feat_offset + fidx))
        val = np.concatenate(([1.0], fval))
        return idx.astype(np.int64), val.astype(np.float64)
    return (layout.user_feat_offset + fidx).astype(np.int64), fval.astype(np.float64)


def item_part(
    v: int,
    layout: FeatureLayout,
    item_feats: FeatureMatrix,
    cold: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Item-side entries; a cold item contributes features only, no one-hot."""
    if not (0 <= v < layout.n_items):
        raise ValueError(f"item id {v} outside [0, {layout.n_items})")
    fidx, fval = item_feats.row(v)
    if layout.use_item_ids and not cold:
        idx = np.concatenate(([layout.item_id_offset + v], layout.item_feat_offset + fidx))
        val = np.concatenate(([1.0], fval))
        return idx.astype(np.int64), val.astype(np.float64)
    return (layout.item_feat_offset + fidx).astype(np.int64), fval.astype(np.float64)


def activity_part(z: int, layout: FeatureLayout) -> tuple[np.ndarray, np.ndarray]:
    if layout.n_activities == 0:
        raise ValueError("layout has no activity block")
    if not (0 <= z < layout.n_activities):
        raise ValueError(f"activity id {z} outside [0, {layout.n_activities})")
    return np.array([layout.activity_offset + z], dtype=np.int64), np.array([1.0])


def _merge_parts(parts, dim: int) -> SparseVector:
    idx = np.concatenate([p[0] for p in parts]) if parts else np.empty(0, dtype=np.int64)
    val = np.concatenate([p[1] for p in parts]) if parts else np.empty(0)
    order = np.argsort(idx, kind="stable")
    return SparseVector(idx[order], val[order], dim)


def assemble_keen_input(
    u: int,
    v: int,
    layout: FeatureLayout,
    user_feats: FeatureMatrix,
    item_feats: FeatureMatrix,
    cold_item: bool = False,
) -> SparseVector:
    """Concatenate user and item blocks into one Keen scorer input."""
    return _merge_parts(
        [user_part(u, layout, user_feats), item_part(v, layout, item_feats, cold=cold_item)],
        layout.dim,
    )


def assemble_act_input(
    u: int,
    v: int,
    z: int,
    layout: FeatureLayout,
    user_feats: FeatureMatrix,
    item_feats: FeatureMatrix,
    cold_item: bool = False,
) -> SparseVector:
    """Keen blocks plus the activity one-hot, for the Act scorer."""
    return _merge_parts(
        [
            user_part(u, layout, user_feats),
            item_part(v, layout, item_feats, cold=cold_item),
            activity_part(z, layout),
        ],
        layout.dim,
    )
