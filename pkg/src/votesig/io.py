"""JSON and CSV formats for laws, signatures and curves.

Floats are written with 17 significant digits so that every double
round-trips exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

from .laws import DiscreteLaw, GridDensity, HybridLaw, Law, LawValidationError, make_named, validate
from .signature import SignedSignature, VotingCurve

FLOAT_FMT = ".17g"


class FormatError(ValueError):
    """A file does not follow its documented schema."""


def fmt(x) -> str:
    return format(float(x), FLOAT_FMT)


def _num(obj, key, where):
    try:
        val = obj[key]
    except (KeyError, TypeError):
        raise FormatError(f"{where}: missing field {key!r}") from None
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise FormatError(f"{where}: field {key!r} must be a number, got {val!r}")
    if not math.isfinite(val):
        raise FormatError(f"{where}: field {key!r} must be finite")
    return val


def _num_list(obj, key, where):
    val = obj.get(key, [])
    if not isinstance(val, list):
        raise FormatError(f"{where}: field {key!r} must be a list")
    out = np.array(val, dtype=float) if val else np.array([])
    if not np.all(np.isfinite(out)):
        raise FormatError(f"{where}: field {key!r} contains non-finite values")
    return out


# --- laws ----------------------------------------------------------------------------------


def law_from_json(obj, where: str = "law") -> Law:
    """Parse and validate a law JSON object."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise FormatError(f"{where}: expected an object with a 'kind' field")
    kind = obj["kind"]
    if kind == "discrete":
        atoms = obj.get("atoms")
        if not isinstance(atoms, list) or not atoms:
            raise FormatError(f"{where}: 'atoms' must be a non-empty list")
        law = DiscreteLaw.from_atoms(
            (_num(a, "q", f"{where}.atoms[{i}]"), _num(a, "weight", f"{where}.atoms[{i}]"))
            for i, a in enumerate(atoms)
        )
    elif kind == "grid_density":
        law = GridDensity(_num_list(obj, "nodes", where), _num_list(obj, "values", where))
    elif kind == "hybrid":
        disc = law_from_json(obj.get("discrete"), f"{where}.discrete")
        dens = law_from_json(obj.get("density"), f"{where}.density")
        if not isinstance(disc, DiscreteLaw) or not isinstance(dens, GridDensity):
            raise FormatError(f"{where}: hybrid needs a discrete part and a grid_density part")
        law = HybridLaw(disc, dens, float(_num(obj, "discrete_weight", where)))
    elif kind == "oscillation":
        j_max = obj.get("j_max", 10)
        if not isinstance(j_max, int) or j_max < 1:
            raise FormatError(f"{where}: j_max must be an integer >= 1")
        return make_named("oscillation", j_max=j_max)
    elif kind == "margin_worst_case":
        params = {k: _num(obj, k, where) for k in ("C", "kappa", "t0")}
        if not (params["C"] > 0 and params["kappa"] > 0 and 0 < params["t0"] <= 0.5):
            raise LawValidationError(f"{where}: need C > 0, kappa > 0, 0 < t0 <= 1/2; got {params}")
        return make_named("margin_worst_case", **params)
    elif kind == "figure1":
        return make_named("figure1", name=obj.get("name"))
    else:
        raise FormatError(f"{where}: unknown law kind {kind!r}")
    validate(law)
    return law


def law_to_json(law: Law) -> dict:
    if isinstance(law, DiscreteLaw):
        return {"kind": "discrete", "atoms": [{"q": float(q), "weight": float(w)} for q, w in law.atoms]}
    if isinstance(law, GridDensity):
        return {"kind": "grid_density", "nodes": law.nodes.tolist(), "values": law.values.tolist()}
    if isinstance(law, HybridLaw):
        return {"kind": "hybrid", "discrete": law_to_json(law.discrete),
                "density": law_to_json(law.density), "discrete_weight": float(law.discrete_weight)}
    raise TypeError(f"not a latent law: {type(law).__name__}")


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise FormatError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None


def load_law(path) -> Law:
    return law_from_json(_load_json(path), str(path))


# --- signatures ----------------------------------------------------------------------------


def signature_to_json(sig: SignedSignature) -> dict:
    out = {"atoms": [{"r": float(r), "weight": float(w)} for r, w in zip(sig.atom_r, sig.atom_w)],
           "g_nodes": [], "g_values": []}
    if sig.has_density:
        out["g_nodes"] = sig.g_nodes.tolist()
        out["g_values"] = sig.g_values_by_r.tolist()
    return out


def signature_from_json(obj, where: str = "signature") -> SignedSignature:
    if not isinstance(obj, dict):
        raise FormatError(f"{where}: expected a JSON object")
    atoms = obj.get("atoms", [])
    if not isinstance(atoms, list):
        raise FormatError(f"{where}: 'atoms' must be a list")
    r = [_num(a, "r", f"{where}.atoms[{i}]") for i, a in enumerate(atoms)]
    w = [_num(a, "weight", f"{where}.atoms[{i}]") for i, a in enumerate(atoms)]
    nodes, vals = _num_list(obj, "g_nodes", where), _num_list(obj, "g_values", where)
    if nodes.size != vals.size:
        raise FormatError(f"{where}: g_nodes and g_values differ in length")
    allr = np.concatenate([np.asarray(r, dtype=float), nodes])
    if allr.size and (allr.min() < 0 or allr.max() > 0.25):
        raise FormatError(f"{where}: radii must lie in [0, 1/4]")
    return SignedSignature.from_r_grid(r, w, nodes, vals)


def load_signature(path) -> SignedSignature:
    return signature_from_json(_load_json(path), str(path))


# --- curves --------------------------------------------------------------------------------


def curve_csv(values) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "votes", "V"])
    for n, v in enumerate(np.asarray(values, dtype=float)):
        w.writerow([n, 2 * n + 1, fmt(v)])
    return buf.getvalue()


def mc_curve_csv(mc) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "votes", "V", "stderr", "n_examples", "seed"])
    for n, (v, se) in enumerate(zip(mc.values, mc.stderr)):
        w.writerow([n, 2 * n + 1, fmt(v), fmt(se), mc.n_examples, mc.seed])
    return buf.getvalue()


def read_curve_csv(path) -> VotingCurve:
    """Read an ``n,votes,V`` curve; rows must run n = 0, 1, 2, ... with votes = 2n+1."""
    try:
        fh = open(path, newline="")
    except FileNotFoundError:
        raise FormatError(f"{path}: no such file") from None
    values = []
    with fh:
        rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    if not rows or [c.strip() for c in rows[0][:3]] != ["n", "votes", "V"]:
        raise FormatError(f"{path}: expected header 'n,votes,V'")
    for i, row in enumerate(rows[1:]):
        try:
            n, votes, v = int(row[0]), int(row[1]), float(row[2])
        except (ValueError, IndexError):
            raise FormatError(f"{path}: data row {i + 1} is not 'int,int,real': {row}") from None
        if n != i or votes != 2 * n + 1:
            raise FormatError(f"{path}: data row {i + 1} has n={n}, votes={votes}; expected n={i}, votes={2 * i + 1}")
        if not 0.0 <= v <= 1.0:
            raise FormatError(f"{path}: V={v} at n={n} is not a probability")
        values.append(v)
    if not values:
        raise FormatError(f"{path}: no curve rows")
    return VotingCurve(np.array(values))
