"""The shipped operators: squares, universal quantification and the
generic aggregation operators built from a registry entry."""
from __future__ import annotations

from ..lang import ast as A
from ..monoids import NotCancellative, registry_lookup
from .operators import InstrumentationOperator, UnknownOperator
from .opfile import make_operator

SQUARE_RULES = [
    {"id": "R1", "pattern": "$y = $alpha;",
     "template": "$y = $alpha; x_sq = $alpha * $alpha; x_shad = $y;",
     "meta": {"y": "Int", "alpha": "lit"}},
    {"id": "R2", "pattern": "$y = $x + $alpha;",
     "template": """
        assert($x == x_shad);
        x_sq = x_sq + 2 * $alpha * $x + $alpha * $alpha;
        $y = $x + $alpha;
        x_shad = $y;""",
     "meta": {"y": "Int", "x": "Int", "alpha": "lit"}},
    {"id": "R3", "pattern": "$y = $alpha * $x;",
     "template": """
        assert($x == x_shad);
        x_sq = $alpha * $alpha * x_sq;
        $y = $alpha * $x;
        x_shad = $y;""",
     "meta": {"y": "Int", "x": "Int", "alpha": "lit"}},
    {"id": "R4", "pattern": "$y = $x * $x;",
     "template": "assert($x == x_shad); $y = x_sq;",
     "meta": {"y": "Int", "x": "Int"}},
]


def square() -> InstrumentationOperator:
    return make_operator("square", [("x_sq", "Int", "0"), ("x_shad", "Int", "0")],
                         SQUARE_RULES, "x_sq == x_shad * x_shad")


def _default_lit(t: A.Type) -> str:
    return "false" if t == A.BOOL else "0"


def forall(pred: A.Lambda, elem: A.Type = A.INT) -> InstrumentationOperator:
    """Universal quantification over ``pred``, tracking one interval."""
    arr = str(A.ArrayT(elem))
    meta = {"a": arr, "b": arr, "i": "atom Int", "x": f"atom {elem}"}
    store = """
        if (qu_lo == qu_hi || $i < qu_lo - 1 || $i > qu_hi ||
            (@P($x, $i) && !qu_P && qu_lo <= $i && $i < qu_hi)) {
            qu_lo = $i; qu_hi = $i + 1; qu_P = @P($x, $i);
        } else {
            assert(qu_ar == $a); qu_P = qu_P && @P($x, $i);
            if (qu_lo - 1 == $i) {
                qu_lo = $i;
            } else if (qu_hi == $i) {
                qu_hi = $i + 1;
            }
        }
        $b = store($a, $i, $x);
        qu_ar = $b;"""
    select = """
        $x = select($a, $i);
        if (qu_lo == qu_hi || $i < qu_lo - 1 || $i > qu_hi) {
            qu_lo = $i; qu_hi = $i + 1; qu_P = @P($x, $i); qu_ar = $a;
        } else {
            assert(qu_ar == $a);
            if (qu_lo - 1 == $i) {
                qu_lo = $i; qu_P = qu_P && @P($x, $i);
            } else if (qu_hi == $i) {
                qu_hi = $i + 1; qu_P = qu_P && @P($x, $i);
            }
        }"""
    quant = """
        if ($u <= $l) {
            $b = true;
        } else {
            if (qu_P) {
                assert(qu_ar == $a && $l >= qu_lo && $u <= qu_hi);
            } else {
                assert(qu_ar == $a && $l <= qu_lo && $u >= qu_hi);
            }
            $b = qu_P;
        }"""
    rules = [
        {"id": "store", "pattern": "$b = store($a, $i, $x);", "template": store, "meta": meta},
        {"id": "select", "pattern": "$x = select($a, $i);", "template": select,
         "meta": {"a": arr, "i": "atom Int", "x": str(elem)}},
        {"id": "forall", "pattern": "$b = \\forall($a, $l, $u, @P);", "template": quant,
         "meta": {"a": arr, "b": "Bool", "l": "atom Int", "u": "atom Int"}},
    ]
    ghosts = [("qu_lo", "Int", "0"), ("qu_hi", "Int", "0"),
              ("qu_ar", arr, f"const({_default_lit(elem)})"), ("qu_P", "Bool", "true")]
    # an empty interval must carry qu_P = true, otherwise the quantifier
    # rule could answer false for a range it never inspected
    inv = ("(qu_lo == qu_hi && qu_P) || "
           "(qu_lo < qu_hi && qu_P == \\forall(qu_ar, qu_lo, qu_hi, @P))")
    return make_operator("forall", ghosts, rules, inv, pred, ("forall",))


def build_aggregation_operator(key: str, cancellative: bool, pred: A.Lambda | None = None,
                               elem: A.Type | None = None) -> InstrumentationOperator:
    """Interval-tracking operator for the registry aggregator ``key``.

    Without cancellation a store strictly inside the tracked interval
    resets tracking to that single index; with it the old element is
    taken out of ``ag_val`` and the new one combined in.
    """
    spec = registry_lookup(key, pred)
    if cancellative and (not spec.cancellative or not spec.monoid.commutative):
        raise NotCancellative(key)
    if spec.predicated and pred is None:
        raise ValueError(f"aggregator {key} needs a predicate")
    elem = elem or spec.elem_type or A.INT
    arr = str(A.ArrayT(elem))
    head = f"{key}, @P" if spec.predicated else key
    lift = f"\\lift{{{head}}}"
    comb = f"\\combine{{{key}}}"
    inside = "" if cancellative else " || (ag_lo <= $i && $i < ag_hi)"
    update = ""
    if cancellative:
        update = f"""
            }} else {{
                ag_val = {comb}(\\uncombine{{{key}}}(ag_val, {lift}(select(ag_ar, $i), $i)), {lift}($x, $i));"""
    store = f"""
        if (ag_lo == ag_hi || $i < ag_lo - 1 || $i > ag_hi{inside}) {{
            ag_lo = $i; ag_hi = $i + 1; ag_val = {lift}($x, $i);
        }} else {{
            assert(ag_ar == $a);
            if (ag_lo - 1 == $i) {{
                ag_val = {comb}({lift}($x, $i), ag_val); ag_lo = $i;
            }} else if (ag_hi == $i) {{
                ag_val = {comb}(ag_val, {lift}($x, $i)); ag_hi = $i + 1;{update}
            }}
        }}
        $b = store($a, $i, $x);
        ag_ar = $b;"""
    select = f"""
        $x = select($a, $i);
        if (ag_lo == ag_hi || $i < ag_lo - 1 || $i > ag_hi) {{
            ag_lo = $i; ag_hi = $i + 1; ag_val = {lift}($x, $i); ag_ar = $a;
        }} else {{
            assert(ag_ar == $a);
            if (ag_lo - 1 == $i) {{
                ag_val = {comb}({lift}($x, $i), ag_val); ag_lo = $i;
            }} else if (ag_hi == $i) {{
                ag_val = {comb}(ag_val, {lift}($x, $i)); ag_hi = $i + 1;
            }}
        }}"""
    fin = f"\\finalize{{{key}}}"
    aggr = f"""
        if ($u <= $l) {{
            $r = {fin}(\\unit{{{key}}});
        }} else {{
            assert(ag_ar == $a && $l == ag_lo && $u == ag_hi);
            $r = {fin}(ag_val);
        }}"""
    source = spec.source
    if source in A.QUANT_NAMES or spec.predicated:
        call = f"\\{source}($a, $l, $u, @P)"
    else:
        call = f"\\{source}($a, $l, $u)"
    agg_meta = {"a": arr, "r": str(spec.result_type), "l": "atom Int", "u": "atom Int"}
    rules = [
        {"id": "store", "pattern": "$b = store($a, $i, $x);", "template": store,
         "meta": {"a": arr, "b": arr, "i": "atom Int", "x": f"atom {elem}"}},
        {"id": "select", "pattern": "$x = select($a, $i);", "template": select,
         "meta": {"a": arr, "i": "atom Int", "x": str(elem)}},
        {"id": "aggregate", "pattern": f"$r = {call};", "template": aggr, "meta": agg_meta},
    ]
    carrier = spec.monoid.carrier
    ghosts = [("ag_lo", "Int", "0"), ("ag_hi", "Int", "0"),
              ("ag_val", str(carrier), f"\\unit{{{key}}}"),
              ("ag_ar", arr, f"const({_default_lit(elem)})")]
    fold_head = f"{key}, @P" if spec.predicated else key
    inv = f"ag_lo <= ag_hi && ag_val == \\fold{{{fold_head}}}(ag_ar, ag_lo, ag_hi)"
    name = key if cancellative == spec.cancellative else f"{key}-{'c' if cancellative else 'nc'}"
    return make_operator(name, ghosts, rules, inv, pred, (key,))


# which registry entry and variant each builtin name uses
BUILTINS = {
    "sum": ("sum", True),
    "numof": ("numof", True),
    "max": ("max", False),
    "min": ("min", False),
    "exists": ("exists-cancellative", True),
    "product": ("product-cancellative", True),
}

BUILTIN_NAMES = ("square", "forall", "exists", "max", "min", "sum", "product", "numof")
PREDICATED = ("forall", "exists", "numof")


def builtin_operator(name: str, pred: A.Lambda | None = None,
                     elem: A.Type | None = None) -> InstrumentationOperator:
    if name == "square":
        return square()
    if name == "forall":
        if pred is None:
            raise ValueError("forall needs a predicate")
        return forall(pred, elem or A.INT)
    if name in BUILTINS:
        key, canc = BUILTINS[name]
        return build_aggregation_operator(key, canc, pred, elem)
    # registry keys, optionally suffixed with -nc / -c, are accepted too
    for suffix, canc in (("-nc", False), ("-c", True)):
        if name.endswith(suffix) and name[:-len(suffix)] in _registry_keys():
            return build_aggregation_operator(name[:-len(suffix)], canc, pred, elem)
    if name in _registry_keys():
        spec = registry_lookup(name)
        return build_aggregation_operator(name, spec.cancellative, pred, elem)
    raise UnknownOperator(name)


def _registry_keys():
    from ..monoids import REGISTRY
    return REGISTRY.keys()


def program_predicate(p: A.Program, kinds=("forall", "exists", "numof")) -> A.Lambda | None:
    """The first lambda of a quantifier or aggregate of the given kinds."""
    for s in A.walk(p.body):
        for e in A.stmt_exprs(s):
            for x in A.subexprs(e):
                if isinstance(x, A.Quant) and x.kind in kinds and isinstance(x.pred, A.Lambda):
                    return x.pred
                if isinstance(x, A.Aggregate) and x.name in kinds and isinstance(x.pred, A.Lambda):
                    return x.pred
    return None


def program_elem_type(p: A.Program) -> A.Type | None:
    """Element type of the first array aggregated in ``p``."""
    for s in A.walk(p.body):
        for e in A.stmt_exprs(s):
            for x in A.subexprs(e):
                if isinstance(x, (A.Quant, A.Aggregate)) and isinstance(x.array, A.Var):
                    t = p.vocab.get(x.array.name)
                    if isinstance(t, A.ArrayT):
                        return t.elem
    return None


def operator_for_program(name: str, p: A.Program, pred: A.Lambda | None = None) -> InstrumentationOperator:
    """Instantiate a builtin, taking predicate and element type from ``p``
    when not supplied."""
    kinds = {"forall": ("forall",), "exists": ("exists",), "numof": ("numof",)}.get(
        name, ("forall", "exists", "numof"))
    if pred is None and (name in PREDICATED or name.startswith(("numof", "exists", "forall"))):
        pred = program_predicate(p, kinds)
        if pred is None:
            pred = A.Lambda("x", "i", A.BoolLit(True))
    return builtin_operator(name, pred, program_elem_type(p))
