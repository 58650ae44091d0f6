"""Entry-level sensitivity accounting for the cross-product matrix.

Adding or removing one record changes S = Z^T Z by an outer product z z^T
with every coordinate of z in [0, 1], so each upper-triangle entry moves by
at most 1. The plan then exploits design structure to shrink the bill:

1. a dummy's diagonal entry equals its intercept cross term (d^2 = d), so
   the diagonal entry reuses the same noise draw instead of buying its own;
2. cross products of two levels of the same categorical are identically
   zero and receive no noise;
3. the intercept-by-dummy-block entries of one categorical form a count
   vector in which a single record touches one coordinate, so the whole
   block has joint sensitivity 1 and is billed as one group;
4. the same argument applies when a numeric column (or the response, which
   is just another unit-scaled column) multiplies a dummy block: the block
   of partial sums is billed as one group.

The l1 total is therefore the number of billed units (singletons plus
groups), each of sensitivity 1; the matching l2 total is its square root.
The separate row bound sqrt(p + 1) is what the Wishart path consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidParameterError
from .design import ColumnInfo


@dataclass(frozen=True)
class EntryRole:
    """How one upper-triangle entry of S is handled by the noise step."""

    kind: str  # "unique" | "group" | "duplicate" | "zero"
    slot: int | None = None  # noise slot index for unique/group entries
    source: tuple[int, int] | None = None  # mirrored entry for duplicates
    group_id: str | None = None


@dataclass(frozen=True)
class SensitivityPlan:
    columns: tuple[ColumnInfo, ...]
    roles: dict  # (i, j) with i <= j -> EntryRole
    n_slots: int
    groups: tuple[str, ...]
    l1_total: float
    row_l2_bound: float
    slot_entries: tuple[tuple[int, int], ...] = field(default=())  # slot -> entry

    @property
    def d(self) -> int:
        return len(self.columns)

    @property
    def l2_total(self) -> float:
        """l2 sensitivity of the billed-unit vector (each unit moves <= 1)."""
        return math.sqrt(self.l1_total)

    @property
    def max_row_sq_norm(self) -> float:
        """Exact max of ||z||^2 over unit-scaled rows: one slot per
        intercept/numeric/response plus at most one live dummy per
        categorical."""
        cats = {c.categorical for c in self.columns if c.kind == "dummy"}
        plain = sum(1 for c in self.columns if c.kind != "dummy")
        return float(plain + len(cats))

    def structural_zero_mask(self) -> np.ndarray:
        mask = np.zeros((self.d, self.d), dtype=bool)
        for (i, j), role in self.roles.items():
            if role.kind == "zero":
                mask[i, j] = mask[j, i] = True
        return mask


def sensitivity_plan(columns: tuple[ColumnInfo, ...]) -> SensitivityPlan:
    """Classify every upper-triangle entry of S and total up the bill."""
    d = len(columns)
    if d < 2:
        raise InvalidParameterError("a design needs at least one predictor and a response")
    intercept_idx = next((i for i, c in enumerate(columns) if c.kind == "intercept"), None)

    # dummy indexes per categorical, in column order
    blocks: dict[str, list[int]] = {}
    for i, c in enumerate(columns):
        if c.kind == "dummy":
            blocks.setdefault(c.categorical, []).append(i)

    roles: dict[tuple[int, int], EntryRole] = {}
    slot_entries: list[tuple[int, int]] = []
    groups: list[str] = []

    def new_slot(entry: tuple[int, int]) -> int:
        slot_entries.append(entry)
        return len(slot_entries) - 1

    # group billing applies to blocks with two or more dummies; a lone dummy
    # entry is an ordinary singleton at the same unit sensitivity
    grouped: dict[tuple[int, int], str] = {}
    for cat, idxs in blocks.items():
        if len(idxs) < 2:
            continue
        for i, c in enumerate(columns):
            if c.kind == "dummy":
                continue
            gid = f"{c.name}*{cat}"
            groups.append(gid)
            for j in idxs:
                grouped[(min(i, j), max(i, j))] = gid

    for i in range(d):
        for j in range(i, d):
            ci, cj = columns[i], columns[j]
            same_cat_dummies = (
                ci.kind == "dummy"
                and cj.kind == "dummy"
                and ci.categorical == cj.categorical
                and i != j
            )
            if same_cat_dummies:
                roles[(i, j)] = EntryRole(kind="zero")
            elif i == j and ci.kind == "dummy" and intercept_idx is not None:
                src = (min(intercept_idx, i), max(intercept_idx, i))
                roles[(i, j)] = EntryRole(kind="duplicate", source=src)
            elif (i, j) in grouped:
                roles[(i, j)] = EntryRole(kind="group", slot=new_slot((i, j)), group_id=grouped[(i, j)])
            else:
                roles[(i, j)] = EntryRole(kind="unique", slot=new_slot((i, j)))

    # duplicates must mirror an entry that actually owns a slot
    for (i, j), role in roles.items():
        if role.kind == "duplicate" and roles[role.source].slot is None:
            roles[(i, j)] = EntryRole(kind="unique", slot=new_slot((i, j)))

    n_singletons = sum(1 for r in roles.values() if r.kind == "unique")
    l1_total = float(n_singletons + len(groups))
    return SensitivityPlan(
        columns=columns,
        roles=roles,
        n_slots=len(slot_entries),
        groups=tuple(groups),
        l1_total=l1_total,
        row_l2_bound=math.sqrt(d),
        slot_entries=tuple(slot_entries),
    )
