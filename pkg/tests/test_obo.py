import io

from ontodef.obo import (
    GraphManifest, RawTerm, ingest_directory, merge_graphs, normalize_graph_name,
    parse_obo, read_corpus_jsonl, serialize_obo, term_to_record,
)

SAMPLE = """\
format-version: 1.2
ontology: x

[Term]
id: X:1
name: foo
def: "a foo thing" [PMID:1]
is_a: X:0 ! bar

[Term]
id: X:0
name: bar

[Term]
id: X:2
name: gone
is_obsolete: true

[Typedef]
id: part_of
name: part of
"""


def parse_text(text, **kw):
    return parse_obo(io.StringIO(text), **kw)


class TestParse:
    def test_field_mapping(self):
        terms = parse_text(SAMPLE, source_graph="x", source_db="obo")
        assert [t.term_id for t in terms] == ["X:1", "X:0"]
        foo = terms[0]
        assert foo.name == "foo"
        assert foo.definition == "a foo thing"
        assert foo.is_a_parents == ["X:0"]

    def test_missing_def_is_none(self):
        terms = parse_text(SAMPLE)
        assert terms[1].definition is None

    def test_obsolete_dropped(self):
        assert all(t.term_id != "X:2" for t in parse_text(SAMPLE))

    def test_typedef_stanzas_ignored(self):
        assert len(parse_text(SAMPLE)) == 2

    def test_malformed_stanza_rejected_not_fatal(self):
        text = "[Term]\nid: Y:1\n\n[Term]\nid: Y:2\nname: ok\n"
        rejects = []
        terms = parse_text(text, rejects=rejects)
        assert [t.term_id for t in terms] == ["Y:2"]
        assert len(rejects) == 1

    def test_synonym_and_escaped_quotes(self):
        text = '[Term]\nid: Z:1\nname: z\ndef: "says \\"hi\\" loudly" []\nsynonym: "zee" EXACT []\n'
        (term,) = parse_text(text)
        assert term.definition == 'says "hi" loudly'
        assert term.synonyms == ["zee"]

    def test_roundtrip_idempotent(self):
        first = parse_text(SAMPLE, source_graph="x", source_db="obo")
        second = parse_obo(io.StringIO(serialize_obo(first)),
                           source_graph="x", source_db="obo")
        assert first == second
        third = parse_obo(io.StringIO(serialize_obo(second)),
                          source_graph="x", source_db="obo")
        assert second == third


def graph(name, db, terms):
    for t in terms:
        t.source_graph, t.source_db = name, db
    defined = sum(1 for t in terms if t.definition)
    manifest = GraphManifest(name, [f"{db}/{name}.obo"], len(terms),
                             defined / len(terms) if terms else 0.0)
    return manifest, terms


class TestMerge:
    def test_disjoint_union(self):
        g1 = graph("envo", "obo", [RawTerm("A:1", "a", "def a")])
        g2 = graph("envo", "bioportal", [RawTerm("A:2", "b", "def b")])
        (manifest, terms), = merge_graphs([g1, g2])
        assert manifest.term_count == 2
        assert {t.term_id for t in terms} == {"A:1", "A:2"}

    def test_defined_record_preferred(self):
        g1 = graph("envo", "obo", [RawTerm("A:1", "a")])
        g2 = graph("envo", "ols", [RawTerm("A:1", "a", "curated")])
        (_, terms), = merge_graphs([g1, g2])
        assert terms[0].definition == "curated"

    def test_conflict_keeps_priority_db(self):
        g1 = graph("envo", "ols", [RawTerm("A:1", "a", "from ols")])
        g2 = graph("envo", "obo", [RawTerm("A:1", "a", "from obo")])
        (_, terms), = merge_graphs([g1, g2])
        assert terms[0].definition == "from obo"
        assert terms[0].source_db == "obo"

    def test_parent_and_synonym_union(self):
        g1 = graph("envo", "obo", [RawTerm("A:1", "a", "d", ["s1"], ["P:1"])])
        g2 = graph("envo", "ols", [RawTerm("A:1", "a", "d", ["s2"], ["P:2"])])
        (_, terms), = merge_graphs([g1, g2])
        assert terms[0].is_a_parents == ["P:1", "P:2"]
        assert set(terms[0].synonyms) == {"s1", "s2"}

    def test_unique_ids_and_count_never_increases(self):
        g1 = graph("envo", "obo", [RawTerm("A:1", "a", "d"), RawTerm("A:2", "b")])
        g2 = graph("envo", "ols", [RawTerm("A:1", "a")])
        (manifest, terms), = merge_graphs([g1, g2])
        ids = [t.term_id for t in terms]
        assert len(ids) == len(set(ids))
        assert manifest.term_count <= 3

    def test_defined_fraction_matches_recount(self):
        g1 = graph("envo", "obo", [RawTerm("A:1", "a", "d"), RawTerm("A:2", "b")])
        (manifest, terms), = merge_graphs([g1])
        defined = sum(1 for t in terms if t.definition)
        assert manifest.defined_fraction == defined / len(terms)

    def test_distinct_names_not_merged(self):
        g1 = graph("envo", "obo", [RawTerm("A:1", "a", "d")])
        g2 = graph("chebi", "obo", [RawTerm("B:1", "b", "d")])
        assert len(merge_graphs([g1, g2])) == 2

    def test_normalize_graph_name(self):
        assert normalize_graph_name("ENVO.obo") == "envo"
        assert normalize_graph_name("/data/ols/Envo.OBO".lower()) == "envo"


class TestIngestDirectory:
    def test_end_to_end(self, tmp_path):
        (tmp_path / "obo").mkdir()
        (tmp_path / "bioportal").mkdir()
        (tmp_path / "obo" / "envo.obo").write_text(SAMPLE)
        (tmp_path / "bioportal" / "ENVO.obo").write_text(
            '[Term]\nid: X:9\nname: nine\ndef: "nine things" []\n')
        out = tmp_path / "corpus.jsonl"
        rej = tmp_path / "rejects.jsonl"
        manifests = ingest_directory(tmp_path, out, rej)
        assert len(manifests) == 1 and manifests[0].graph_name == "envo"
        terms = read_corpus_jsonl(out)
        assert {t.term_id for t in terms} == {"X:1", "X:0", "X:9"}
        assert rej.read_text() == ""

    def test_jsonl_record_shape(self):
        rec = term_to_record(RawTerm("A:1", "a", "d", ["s"], ["P:1"], "g", "obo"))
        assert set(rec) == {"id", "name", "def", "synonyms", "parents", "graph", "db"}
