#!/usr/bin/env python3
"""Independent oracle for set-match and hardness verdicts.

Reads an eval-pair fixture (JSON list of {id, gold, pred, ...}) and prints one
JSON object per pair: {"id": N, "set_match": bool, "hardness": str}.

Two modes:
  - default: a self-contained implementation of the benchmark's exact-set-match
    (component multisets, aliases resolved to table names, values ignored) and
    hardness thresholds, written against the published procedure and sharing no
    code with the Rust implementation under test.
  - SPIDER_EVAL_DIR=<dir>: delegates to the official evaluation script
    (evaluation.py / process_sql.py from the benchmark repo) when available.

Usage: spider_oracle.py <eval_pairs.json> [tables.json]
"""
import json
import os
import re
import sys

KEYWORDS = ("select", "from", "where", "group", "having", "order", "limit",
            "intersect", "union", "except")
SET_OPS = ("intersect", "union", "except")


def tokenize(sql):
    """Lowercasing tokenizer; quoted strings collapse to a VALUE token."""
    out = []
    i, n = 0, len(sql)
    while i < n:
        c = sql[i]
        if c.isspace():
            i += 1
        elif c in "'\"":
            j = i + 1
            while j < n and sql[j] != c:
                j += 1
            out.append("__value__")
            i = j + 1
        elif c.isalnum() or c == "_" or c == ".":
            j = i
            while j < n and (sql[j].isalnum() or sql[j] in "._"):
                j += 1
            tok = sql[i:j].lower()
            out.append("__value__" if re.fullmatch(r"[0-9.]+", tok) else tok)
            i = j
        elif sql[i:i + 2] in ("<=", ">=", "!=", "<>"):
            out.append("!=" if sql[i:i + 2] == "<>" else sql[i:i + 2])
            i += 2
        else:
            out.append(c)
            i += 1
    return out


def split_top(tokens, seps):
    """Split a token list on any of `seps` at parenthesis depth 0."""
    parts, cur, depth = [], [], 0
    for tok in tokens:
        if tok == "(":
            depth += 1
        elif tok == ")":
            depth -= 1
        if depth == 0 and tok in seps:
            parts.append(cur)
            cur = [tok]  # keep the separator at the head
        else:
            cur.append(tok)
    parts.append(cur)
    return parts


def clause_slices(tokens):
    """Map clause name -> token list for one set-op-free query."""
    slices = {}
    current, body, depth = None, [], 0
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok == "(":
            depth += 1
        elif tok == ")":
            depth -= 1
        two = tok + " " + tokens[i + 1] if i + 1 < len(tokens) else ""
        if depth == 0 and two in ("group by", "order by"):
            if current:
                slices[current] = body
            current, body = two.replace(" ", "_"), []
            i += 2
            continue
        if depth == 0 and tok in ("select", "from", "where", "having", "limit"):
            if current:
                slices[current] = body
            current, body = tok, []
            i += 1
            continue
        body.append(tok)
        i += 1
    if current:
        slices[current] = body
    return slices


def parse_from(tokens):
    """-> (table multiset, alias map, join condition multiset)."""
    tables, aliases, conds = [], {}, []
    segs = split_top(tokens, ("join", ","))
    for seg in segs:
        seg = [t for t in seg if t not in ("join", ",")]
        if not seg:
            continue
        on_idx = None
        depth = 0
        for k, t in enumerate(seg):
            if t == "(":
                depth += 1
            elif t == ")":
                depth -= 1
            elif t == "on" and depth == 0:
                on_idx = k
                break
        source, on_part = (seg, []) if on_idx is None else (seg[:on_idx], seg[on_idx + 1:])
        if source and source[0] == "(":
            name = "sub"
            rest = source[source.index(")") + 1:] if ")" in source else []
        else:
            name = source[0] if source else "?"
            rest = source[1:]
        alias = None
        if rest[:1] == ["as"] and len(rest) > 1:
            alias = rest[1]
        elif rest:
            alias = rest[0]
        tables.append(name)
        if alias:
            aliases[alias] = name
        if on_part:
            for cond in split_top(on_part, ("and",)):
                cond = [t for t in cond if t != "and"]
                if len(cond) == 3 and cond[1] == "=":
                    conds.append(cond)
    return tables, aliases, conds


def resolve(tok, aliases):
    if "." in tok and not tok.startswith("__"):
        qual, col = tok.split(".", 1)
        return aliases.get(qual, qual) + "." + col
    return tok


def norm_tokens(tokens, aliases):
    return [resolve(t, aliases) for t in tokens]


def cond_normal_form(tokens, aliases):
    """Nested sorted normal form over or/and with subqueries recursed."""
    or_parts = split_top(tokens, ("or",))
    if len(or_parts) > 1:
        parts = sorted(cond_normal_form([t for t in p if t != "or"], aliases)
                       for p in or_parts)
        return "or(" + ";".join(parts) + ")"
    and_parts = split_top(tokens, ("and",))
    if len(and_parts) > 1:
        parts = sorted(cond_normal_form([t for t in p if t != "and"], aliases)
                       for p in and_parts)
        return "and(" + ";".join(parts) + ")"
    toks = tokens
    # parenthesized group or subquery
    if toks and toks[0] == "(" and toks[-1] == ")" and "select" not in toks[1:2]:
        inner = toks[1:-1]
        if inner and inner[0] != "select":
            return cond_normal_form(inner, aliases)
    # embedded subquery: normalize it recursively
    if "(" in toks and "select" in toks:
        start = toks.index("(")
        if toks[start + 1] == "select":
            depth, end = 0, start
            for k in range(start, len(toks)):
                if toks[k] == "(":
                    depth += 1
                elif toks[k] == ")":
                    depth -= 1
                    if depth == 0:
                        end = k
                        break
            head = norm_tokens(toks[:start], aliases)
            sub = normal_form(toks[start + 1:end])
            tail = norm_tokens(toks[end + 1:], aliases)
            return " ".join(head) + " (" + sub + ") " + " ".join(tail)
    return " ".join(norm_tokens(toks, aliases))


def normal_form(tokens):
    """Order-insensitive component form of one query (set chain aware)."""
    chain = split_top(tokens, SET_OPS)
    head = chain[0]
    slices = clause_slices(head)
    tables, aliases, on_conds = parse_from(slices.get("from", []))

    sel = slices.get("select", [])
    distinct = sel[:1] == ["distinct"]
    if distinct:
        sel = sel[1:]
    items = sorted(" ".join(norm_tokens([t for t in item if t != ","], aliases))
                   for item in split_top(sel, (",",)))

    on_forms = sorted("=".join(sorted([resolve(c[0], aliases), resolve(c[2], aliases)]))
                      for c in on_conds)

    where = cond_normal_form(slices["where"], aliases) if "where" in slices else ""
    having = cond_normal_form(slices["having"], aliases) if "having" in slices else ""
    group = sorted(" ".join(norm_tokens([t for t in g if t != ","], aliases))
                   for g in split_top(slices.get("group_by", []), (",",))) \
        if "group_by" in slices else []

    order = "-"
    if "order_by" in slices:
        toks = slices["order_by"]
        direction = "asc"
        if toks and toks[-1] in ("asc", "desc"):
            direction = toks[-1]
            toks = toks[:-1]
        keys = sorted(" ".join(norm_tokens([t for t in k if t != ","], aliases))
                      for k in split_top(toks, (",",)))
        order = ",".join(keys) + " " + direction

    tail = "-"
    if len(chain) > 1:
        op = chain[1][0]
        rest = chain[1][1:]
        for extra in chain[2:]:
            rest.extend(extra)
        tail = op + " " + normal_form(rest)

    return ("select[%s%s] from[%s] on[%s] where[%s] group[%s] having[%s] "
            "order[%s] limit[%s] tail[%s]") % (
        "distinct " if distinct else "", ",".join(items),
        ",".join(sorted(tables)), ",".join(on_forms), where,
        ",".join(group), having, order,
        "present" if "limit" in slices else "-", tail)


# --- hardness ---------------------------------------------------------------

def count_or_like(tokens):
    ors = sum(1 for p in split_top(tokens, ("or",))[1:] if p)
    likes = sum(1 for t in tokens if t == "like")
    return ors, likes


def count_leaves(tokens):
    total = 0
    for or_part in split_top(tokens, ("or",)):
        stripped = [t for t in or_part if t != "or"]
        total += len([p for p in split_top(stripped, ("and",)) if [t for t in p if t != "and"]])
    return total


def hardness(tokens):
    chain = split_top(tokens, SET_OPS)
    head = chain[0]
    slices = clause_slices(head)
    tables, _, _ = parse_from(slices.get("from", []))

    comp1 = 0
    for clause in ("where", "group_by", "order_by", "limit"):
        if clause in slices:
            comp1 += 1
    comp1 += max(0, len(tables) - 1)
    for clause in ("where", "having"):
        if clause in slices:
            ors, likes = count_or_like(slices[clause])
            comp1 += ors + likes

    comp2 = 1 if len(chain) > 1 else 0
    for clause in ("where", "having"):
        toks = slices.get(clause, [])
        for k, t in enumerate(toks):
            if t == "(" and k + 1 < len(toks) and toks[k + 1] == "select":
                comp2 += 1

    others = 0
    aggs = 0
    for clause in ("select", "where", "having", "order_by"):
        toks = slices.get(clause, [])
        aggs += sum(1 for t in toks if t in ("count", "sum", "avg", "min", "max"))
    # nested aggregates belong to the subquery, not the outer query
    for clause in ("where", "having"):
        toks = slices.get(clause, [])
        depth = 0
        for t in toks:
            if t == "(":
                depth += 1
            elif t == ")":
                depth -= 1
            elif depth > 0 and t in ("count", "sum", "avg", "min", "max"):
                aggs -= 1
    if aggs > 1:
        others += 1
    if len([p for p in split_top(slices.get("select", []), (",",)) if p]) > 1:
        others += 1
    if "where" in slices and count_leaves(slices["where"]) > 1:
        others += 1
    if "group_by" in slices and \
            len([p for p in split_top(slices["group_by"], (",",)) if p]) > 1:
        others += 1

    if comp1 <= 1 and others == 0 and comp2 == 0:
        return "easy"
    if (others <= 2 and comp1 <= 1 and comp2 == 0) or \
            (comp1 <= 2 and others < 2 and comp2 == 0):
        return "medium"
    if (others > 2 and comp1 <= 2 and comp2 == 0) or \
            (2 < comp1 <= 3 and others <= 2 and comp2 == 0) or \
            (comp1 <= 1 and others == 0 and comp2 <= 1):
        return "hard"
    return "extra"


# --- official-script delegation ----------------------------------------------

def official_verdicts(pairs, tables_path, eval_dir):
    sys.path.insert(0, eval_dir)
    import evaluation  # type: ignore
    from process_sql import Schema, get_sql  # type: ignore

    with open(tables_path) as f:
        tables = json.load(f)
    schemas = {}
    for entry in tables:
        mapping = {}
        for t_idx, name in enumerate(entry["table_names_original"]):
            cols = [c for (ti, c) in entry["column_names_original"] if ti == t_idx]
            mapping[name.lower()] = [c.lower() for c in cols]
        schemas[entry["db_id"]] = Schema(mapping)

    evaluator = evaluation.Evaluator()
    out = []
    for pair in pairs:
        schema = schemas[pair["db_id"]]
        gold_sql = get_sql(schema, pair["gold"])
        pred_sql = get_sql(schema, pair["pred"])
        evaluator.partial_scores = evaluator.eval_partial_match(pred_sql, gold_sql)
        match = evaluator.eval_exact_match(pred_sql, gold_sql)
        out.append({"id": pair["id"], "set_match": bool(match),
                    "hardness": evaluator.eval_hardness(gold_sql)})
    return out


def main():
    pairs_path = sys.argv[1]
    tables_path = sys.argv[2] if len(sys.argv) > 2 else None
    with open(pairs_path) as f:
        pairs = json.load(f)

    eval_dir = os.environ.get("SPIDER_EVAL_DIR")
    if eval_dir and tables_path:
        verdicts = official_verdicts(pairs, tables_path, eval_dir)
    else:
        verdicts = []
        for pair in pairs:
            gold = tokenize(pair["gold"])
            pred = tokenize(pair["pred"])
            verdicts.append({
                "id": pair["id"],
                "set_match": normal_form(pred) == normal_form(gold),
                "hardness": hardness(gold),
            })
    for v in verdicts:
        print(json.dumps(v))


if __name__ == "__main__":
    main()
