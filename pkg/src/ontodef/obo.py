"""OBO flat-file parsing and cross-database graph merging.

Only `is_a` tag lines create hierarchy edges; every other relationship
tag is ignored.  Synonyms are parsed and carried as metadata for the
consistency analysis, never as training input.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

# Conflict resolution order when the same term id carries different
# non-empty definitions in several databases.
DB_PRIORITY = {"obo": 0, "bioportal": 1, "ols": 2}


@dataclass
class RawTerm:
    term_id: str
    name: str
    definition: str | None = None
    synonyms: list[str] = field(default_factory=list)
    is_a_parents: list[str] = field(default_factory=list)
    source_graph: str = ""
    source_db: str = ""


@dataclass
class GraphManifest:
    graph_name: str
    source_files: list[str] = field(default_factory=list)
    term_count: int = 0
    defined_fraction: float = 0.0


def _manifest_for(graph_name, source_files, terms) -> GraphManifest:
    defined = sum(1 for t in terms if t.definition)
    frac = defined / len(terms) if terms else 0.0
    return GraphManifest(graph_name, list(source_files), len(terms), frac)


def _extract_quoted(payload: str) -> str:
    """Quoted value of a def:/synonym: line, without the trailing
    provenance bracket (`def: "text" [PMID:1]` -> `text`)."""
    payload = payload.strip()
    if payload.startswith('"'):
        out = []
        i = 1
        while i < len(payload):
            ch = payload[i]
            if ch == "\\" and i + 1 < len(payload):
                out.append(payload[i + 1])
                i += 2
                continue
            if ch == '"':
                break
            out.append(ch)
            i += 1
        return "".join(out)
    # unquoted fall-back: strip a trailing bracket if present
    if payload.endswith("]") and "[" in payload:
        payload = payload[:payload.rindex("[")].strip()
    return payload


def _strip_comment(payload: str) -> str:
    return payload.split("!", 1)[0].strip()


def parse_obo(lines, source_graph: str = "", source_db: str = "",
              rejects: list | None = None) -> list[RawTerm]:
    """Parse `[Term]` stanzas into RawTerm records.

    `lines` is any iterable of text lines (an open file works).  Stanzas
    missing an id or name go to `rejects` (when given) and parsing
    continues; obsolete stanzas are dropped silently.
    """
    terms = []
    stanza: dict | None = None
    in_term = False

    def flush():
        nonlocal stanza
        if stanza is None:
            return
        if stanza.get("obsolete"):
            stanza = None
            return
        term_id, name = stanza.get("id"), stanza.get("name")
        if not term_id or not name:
            if rejects is not None:
                rejects.append({"reason": "missing id or name", "stanza": stanza["raw"]})
            log.warning("rejected malformed stanza in %s: %s", source_graph,
                        stanza["raw"][:80])
            stanza = None
            return
        terms.append(RawTerm(
            term_id=term_id, name=name,
            definition=stanza.get("def"),
            synonyms=stanza.get("synonyms", []),
            is_a_parents=stanza.get("parents", []),
            source_graph=source_graph, source_db=source_db))
        stanza = None

    for raw_line in lines:
        line = raw_line.rstrip("\n").strip()
        if line.startswith("["):
            flush()
            in_term = line == "[Term]"
            stanza = {"raw": "", "synonyms": [], "parents": []} if in_term else None
            continue
        if not in_term or stanza is None or not line:
            continue
        stanza["raw"] += line + "\n"
        tag, _, payload = line.partition(":")
        tag = tag.strip()
        payload = payload.strip()
        if tag == "id":
            stanza["id"] = payload
        elif tag == "name":
            stanza["name"] = payload
        elif tag == "def":
            stanza["def"] = _extract_quoted(payload)
        elif tag == "is_a":
            target = _strip_comment(payload)
            if target:
                stanza["parents"].append(target)
        elif tag == "synonym":
            stanza["synonyms"].append(_extract_quoted(payload))
        elif tag == "is_obsolete" and payload.lower().startswith("true"):
            stanza["obsolete"] = True
    flush()
    return terms


def _escape_quoted(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def serialize_obo(terms) -> str:
    """Canonical stanza text for a list of RawTerm records; parsing the
    result reproduces the list."""
    chunks = []
    for t in terms:
        lines = ["[Term]", f"id: {t.term_id}", f"name: {t.name}"]
        if t.definition is not None:
            lines.append(f'def: "{_escape_quoted(t.definition)}" []')
        for syn in t.synonyms:
            lines.append(f'synonym: "{_escape_quoted(syn)}" RELATED []')
        for parent in t.is_a_parents:
            lines.append(f"is_a: {parent}")
        chunks.append("\n".join(lines))
    return "\n\n".join(chunks) + "\n"


def normalize_graph_name(name: str) -> str:
    base = os.path.basename(name).lower()
    for ext in (".obo", ".txt", ".owl"):
        if base.endswith(ext):
            base = base[:-len(ext)]
    return base


def _db_rank(db: str) -> tuple:
    return (DB_PRIORITY.get(db.lower(), len(DB_PRIORITY)), db.lower())


def merge_graphs(graphs):
    """Union graphs whose normalized names match across databases.

    Input and output are lists of (GraphManifest, [RawTerm]).  Duplicate
    term ids are deduplicated preferring records that carry a definition;
    conflicting non-empty definitions keep the record from the
    highest-priority database and log the conflict.  Parent and synonym
    sets are unioned.
    """
    by_name: dict[str, list] = {}
    for manifest, terms in graphs:
        by_name.setdefault(normalize_graph_name(manifest.graph_name), []).append(
            (manifest, terms))

    merged = []
    for name in sorted(by_name):
        groups = sorted(by_name[name], key=lambda g: _db_rank(_group_db(g[1])))
        source_files: list[str] = []
        chosen: dict[str, RawTerm] = {}
        for manifest, terms in groups:
            source_files.extend(manifest.source_files)
            for term in terms:
                cur = chosen.get(term.term_id)
                if cur is None:
                    chosen[term.term_id] = _copy_term(term, name)
                    continue
                _union_links(cur, term)
                if term.definition and not cur.definition:
                    cur.definition = term.definition
                    cur.source_db = term.source_db
                elif (term.definition and cur.definition
                      and term.definition != cur.definition):
                    # priority order already fixed by the group sort; first wins
                    log.warning("definition conflict for %s in %s: keeping %s",
                                term.term_id, name, cur.source_db)
        terms_out = [chosen[tid] for tid in sorted(chosen)]
        merged.append((_manifest_for(name, source_files, terms_out), terms_out))
    return merged


def _group_db(terms) -> str:
    return terms[0].source_db if terms else ""


def _copy_term(term: RawTerm, graph_name: str) -> RawTerm:
    return RawTerm(term.term_id, term.name, term.definition,
                   list(term.synonyms), list(term.is_a_parents),
                   graph_name, term.source_db)


def _union_links(target: RawTerm, other: RawTerm) -> None:
    for parent in other.is_a_parents:
        if parent not in target.is_a_parents:
            target.is_a_parents.append(parent)
    for syn in other.synonyms:
        if syn not in target.synonyms:
            target.synonyms.append(syn)


# ------------------------------------------------------------------ JSONL IO

def term_to_record(term: RawTerm) -> dict:
    return {"id": term.term_id, "name": term.name, "def": term.definition,
            "synonyms": term.synonyms, "parents": term.is_a_parents,
            "graph": term.source_graph, "db": term.source_db}


def record_to_term(rec: dict) -> RawTerm:
    return RawTerm(rec["id"], rec["name"], rec.get("def"),
                   list(rec.get("synonyms", [])), list(rec.get("parents", [])),
                   rec.get("graph", ""), rec.get("db", ""))


def write_corpus_jsonl(path, terms) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for term in terms:
            fh.write(json.dumps(term_to_record(term), sort_keys=True) + "\n")


def read_corpus_jsonl(path) -> list[RawTerm]:
    terms = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                terms.append(record_to_term(json.loads(line)))
    return terms


def ingest_directory(in_dir, out_path, rejects_path) -> list[GraphManifest]:
    """Parse every .obo file under `in_dir` (db name = parent directory,
    or 'obo' for flat layouts), merge by graph name, write the corpus and
    rejects JSONL files, and return the merged manifests."""
    graphs = []
    rejects: list[dict] = []
    for root, _dirs, files in sorted(os.walk(in_dir)):
        for fname in sorted(files):
            if not fname.endswith(".obo"):
                continue
            path = os.path.join(root, fname)
            db = os.path.basename(root) if os.path.abspath(root) != os.path.abspath(in_dir) else "obo"
            graph_name = normalize_graph_name(fname)
            with open(path, encoding="utf-8") as fh:
                file_rejects: list[dict] = []
                terms = parse_obo(fh, source_graph=graph_name, source_db=db,
                                  rejects=file_rejects)
            for rej in file_rejects:
                rej["file"] = path
                rejects.append(rej)
            manifest = _manifest_for(graph_name, [path], terms)
            graphs.append((manifest, terms))
    merged = merge_graphs(graphs)
    all_terms = [t for _m, terms in merged for t in terms]
    write_corpus_jsonl(out_path, all_terms)
    with open(rejects_path, "w", encoding="utf-8") as fh:
        for rej in rejects:
            fh.write(json.dumps(rej, sort_keys=True) + "\n")
    return [m for m, _t in merged]
