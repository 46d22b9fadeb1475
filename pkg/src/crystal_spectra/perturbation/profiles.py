"""Non-periodic measures and potentials on a crystal.

Both are lattice fields: ``vertex_values(cells)`` returns an array of shape
``(P, n)`` and ``edge_values(cells)`` one of shape ``(P, l)`` for any array of
lattice points of shape ``(P, d)``.  Values on reversed edges equal those on
the positive lift, so reversal symmetry holds by construction.

A *base selector* names the base elements a rule applies to:
``"vertex:<name>"``, ``"edge:<position>"`` (0-based position in the
descriptor's edge list), ``"vertex:*"``, ``"edge:*"`` or ``"*"``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ValidationError

__all__ = [
    "RadialLaw",
    "TableEntry",
    "ScalarField",
    "PerturbedMeasure",
    "PotentialSplit",
    "parse_selector",
    "load_profile",
    "profile_from_dict",
]


def parse_selector(crystal, text, where="base"):
    """Turn a base selector into ``(vertex_mask, edge_mask)`` boolean arrays."""
    vmask = np.zeros(crystal.n, dtype=bool)
    emask = np.zeros(crystal.l, dtype=bool)
    if text == "*":
        return ~vmask, ~emask
    kind, _, name = str(text).partition(":")
    if kind == "vertex":
        if name == "*":
            return ~vmask, emask
        names = crystal.vertex_names
        if name not in names:
            raise ValidationError(where, f"unknown vertex {name!r}")
        vmask[names.index(name)] = True
        return vmask, emask
    if kind == "edge":
        if name == "*":
            return vmask, ~emask
        try:
            k = int(name)
        except ValueError:
            raise ValidationError(where, f"edge position must be an integer, got {name!r}") from None
        if not 0 <= k < crystal.l:
            raise ValidationError(where, f"edge position {k} out of range")
        emask[k] = True
        return vmask, emask
    raise ValidationError(where, "expected 'vertex:<name>', 'edge:<position>' or '*'")


@dataclass(frozen=True)
class RadialLaw:
    """``amplitude * (1 + |mu|_inf) ** (-exponent)`` on the selected base elements."""

    exponent: float
    amplitude: float
    base: str = "*"

    def values(self, cells):
        r = np.abs(np.asarray(cells)).max(axis=-1)
        return self.amplitude * (1.0 + r) ** (-self.exponent)


@dataclass(frozen=True)
class TableEntry:
    base: str
    mu: tuple
    value: float


def _matches(cells, mu):
    return np.all(np.asarray(cells) == np.asarray(mu, dtype=np.int64), axis=-1)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Finite table plus radial laws, summed; zero everywhere else.

    Evaluated on the selected base elements only; used for potential parts.
    """

    crystal: object
    table: tuple = ()
    laws: tuple = ()
    _masks: dict = field(init=False, repr=False)

    def __post_init__(self):
        masks = {}
        for i, item in enumerate(tuple(self.table) + tuple(self.laws)):
            masks[i] = parse_selector(self.crystal, item.base)
            if isinstance(item, TableEntry) and len(item.mu) != self.crystal.dim:
                raise ValidationError("mu", f"expected {self.crystal.dim} components")
        object.__setattr__(self, "_masks", masks)

    @property
    def is_zero(self):
        return not self.table and not self.laws

    @property
    def support_radius(self):
        """Sup-norm radius of the table support; ``None`` if a law is present."""
        if self.laws:
            return None
        return max((int(np.abs(e.mu).max(initial=0)) for e in self.table), default=-1)

    def _eval(self, cells, part):
        cells = np.asarray(cells, dtype=np.int64).reshape(-1, self.crystal.dim)
        width = self.crystal.n if part == 0 else self.crystal.l
        out = np.zeros((cells.shape[0], width))
        for i, item in enumerate(tuple(self.table) + tuple(self.laws)):
            mask = self._masks[i][part]
            if not mask.any():
                continue
            if isinstance(item, TableEntry):
                hit = _matches(cells, item.mu)
                out[np.ix_(hit, mask)] += item.value
            else:
                out[:, mask] += item.values(cells)[:, None]
        return out

    def vertex_values(self, cells):
        return self._eval(cells, 0)

    def edge_values(self, cells):
        return self._eval(cells, 1)


class PerturbedMeasure:
    """``m = m_Gamma * table factors * prod(1 + law)``.

    ``multipliers`` are table entries whose ``value`` is a positive factor;
    ``laws`` are radial laws added to 1 (amplitude > -1 keeps positivity).
    """

    def __init__(self, crystal, multipliers=(), laws=()):
        for i, e in enumerate(multipliers):
            if not e.value > 0:
                raise ValidationError(f"measure_multipliers[{i}].factor", "must be > 0")
        for i, law in enumerate(laws):
            if law.exponent < 0 or law.amplitude <= -1:
                raise ValidationError(f"radial_laws[{i}]", "need exponent >= 0 and amplitude > -1")
        self.crystal = crystal
        self.multipliers = tuple(multipliers)
        self.laws = tuple(laws)
        self._masks = [parse_selector(crystal, e.base) for e in self.multipliers]
        self._law_masks = [parse_selector(crystal, law.base) for law in self.laws]

    @classmethod
    def periodic(cls, crystal):
        return cls(crystal)

    @property
    def is_periodic(self):
        return not self.laws and all(e.value == 1.0 for e in self.multipliers)

    @property
    def support_radius(self):
        if self.laws:
            return None
        return max((int(np.abs(e.mu).max(initial=0)) for e in self.multipliers), default=-1)

    def _factor(self, cells, part):
        cells = np.asarray(cells, dtype=np.int64).reshape(-1, self.crystal.dim)
        width = self.crystal.n if part == 0 else self.crystal.l
        out = np.ones((cells.shape[0], width))
        for e, masks in zip(self.multipliers, self._masks):
            hit = _matches(cells, e.mu)
            out[np.ix_(hit, masks[part])] *= e.value
        for law, masks in zip(self.laws, self._law_masks):
            out[:, masks[part]] *= 1.0 + law.values(cells)[:, None]
        return out

    def vertex_values(self, cells):
        return self.crystal.m_vertex * self._factor(cells, 0)

    def edge_values(self, cells):
        return self.crystal.m_edge * self._factor(cells, 1)


@dataclass(frozen=True, eq=False)
class PotentialSplit:
    """``R = R_Gamma + R_S + R_L`` with the two non-periodic parts as scalar fields."""

    crystal: object
    short: ScalarField
    long: ScalarField

    @classmethod
    def periodic(cls, crystal):
        return cls(crystal, ScalarField(crystal), ScalarField(crystal))

    @property
    def is_periodic(self):
        return self.short.is_zero and self.long.is_zero

    def vertex_values(self, cells):
        return self.crystal.r_vertex + self.short.vertex_values(cells) + self.long.vertex_values(cells)

    def edge_values(self, cells):
        return self.crystal.r_edge + self.short.edge_values(cells) + self.long.edge_values(cells)

    def difference(self):
        """Field of ``R - R_Gamma``."""
        return _Sum(self.short, self.long)


class _Sum:
    def __init__(self, *parts):
        self.parts = parts

    def vertex_values(self, cells):
        return sum(p.vertex_values(cells) for p in self.parts)

    def edge_values(self, cells):
        return sum(p.edge_values(cells) for p in self.parts)


# ---------------------------------------------------------------------------
# profile files
# ---------------------------------------------------------------------------

def _number(x, where):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ValidationError(where, "expected a number")
    return float(x)


def _mu(x, where):
    if not isinstance(x, (list, tuple)) or not all(isinstance(c, int) and not isinstance(c, bool) for c in x):
        raise ValidationError(where, "expected a list of integers")
    return tuple(x)


def _law(item, where):
    if not isinstance(item, dict):
        raise ValidationError(where, "expected an object")
    return RadialLaw(
        exponent=_number(item.get("exponent"), f"{where}.exponent"),
        amplitude=_number(item.get("amplitude"), f"{where}.amplitude"),
        base=str(item.get("base", "*")),
    )


def _scalar_items(items, where):
    table, laws = [], []
    if isinstance(items, dict):
        items = [items]
    if not isinstance(items, list):
        raise ValidationError(where, "expected a list")
    for i, item in enumerate(items):
        w = f"{where}[{i}]"
        if not isinstance(item, dict):
            raise ValidationError(w, "expected an object")
        if "exponent" in item:
            laws.append(_law(item, w))
        else:
            table.append(TableEntry(str(item.get("base", "*")), _mu(item.get("mu"), f"{w}.mu"),
                                    _number(item.get("value"), f"{w}.value")))
    return table, laws


def profile_from_dict(crystal, data):
    """``(PerturbedMeasure, PotentialSplit)`` from a profile document."""
    if not isinstance(data, dict):
        raise ValidationError("profile", "expected a JSON object")
    known = {"measure_multipliers", "radial_laws", "potential"}
    extra = set(data) - known
    if extra:
        raise ValidationError(sorted(extra)[0], "unknown field")
    mults = []
    for i, item in enumerate(data.get("measure_multipliers", [])):
        w = f"measure_multipliers[{i}]"
        if not isinstance(item, dict):
            raise ValidationError(w, "expected an object")
        mults.append(TableEntry(str(item.get("base", "*")), _mu(item.get("mu"), f"{w}.mu"),
                                _number(item.get("factor"), f"{w}.factor")))
    laws = [_law(item, f"radial_laws[{i}]") for i, item in enumerate(data.get("radial_laws", []))]
    for i, e in enumerate(mults):
        if len(e.mu) != crystal.dim:
            raise ValidationError(f"measure_multipliers[{i}].mu", f"expected {crystal.dim} components")
        parse_selector(crystal, e.base, f"measure_multipliers[{i}].base")
    for i, law in enumerate(laws):
        parse_selector(crystal, law.base, f"radial_laws[{i}].base")
    measure = PerturbedMeasure(crystal, mults, laws)

    pot = data.get("potential", {})
    if not isinstance(pot, dict):
        raise ValidationError("potential", "expected an object")
    parts = {}
    for key in ("R_S", "R_L"):
        table, plaws = _scalar_items(pot.get(key, []), f"potential.{key}")
        for i, e in enumerate(table):
            if len(e.mu) != crystal.dim:
                raise ValidationError(f"potential.{key}[{i}].mu", f"expected {crystal.dim} components")
            parse_selector(crystal, e.base, f"potential.{key}[{i}].base")
        for law in plaws:
            parse_selector(crystal, law.base, f"potential.{key}.base")
        parts[key] = ScalarField(crystal, tuple(table), tuple(plaws))
    return measure, PotentialSplit(crystal, parts["R_S"], parts["R_L"])


def load_profile(crystal, path):
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError("profile", f"invalid JSON: {exc}") from None
    return profile_from_dict(crystal, data)
