import numpy as np
import pytest

from lukanet.dataset import Dataset, DatasetError
from lukanet.ingest import (
    binarize,
    enrich_negatives,
    generate_table,
    load_nominal_csv,
    project_columns,
)
from lukanet.logic import LogicGrain, formula_valuation, parse_formula


def write(tmp_path, text, name="t.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


TOY = "cap,odor,class\nx,a,e\nb,n,p\nx,?,e\nf,a,p\n"


def test_load_toy(tmp_path):
    t = load_nominal_csv(write(tmp_path, TOY), "class", "p")
    assert t.column_names == ("cap", "odor")
    assert len(t) == 4 and t.positive_count() == 2
    assert t.tokens() == {"cap": ["x", "b", "f"], "odor": ["a", "n", "?"]}


def test_three_labels_rejected(tmp_path):
    with pytest.raises(DatasetError):
        load_nominal_csv(write(tmp_path, "a,y\nx,1\nx,2\nx,3\n"), "y", "1")


def test_bad_inputs(tmp_path):
    with pytest.raises(DatasetError):
        load_nominal_csv(write(tmp_path, TOY), "missing", "p")
    with pytest.raises(DatasetError):
        load_nominal_csv(write(tmp_path, "a,y\nx,1,2\n"), "y", "1")
    with pytest.raises(DatasetError):
        load_nominal_csv(tmp_path / "nope.csv", "y", "1")
    with pytest.raises(DatasetError):
        load_nominal_csv(write(tmp_path, TOY), "class", "zz")


def test_one_hot_rows(tmp_path):
    t = load_nominal_csv(write(tmp_path, "c,y\na,p\nb,e\nc,p\n"), "y", "p")
    d, bmap = binarize(t)
    assert d.column_names == ("c=a", "c=b", "c=c")
    assert d.inputs[0].tolist() == [1, 0, 0]
    assert d.inputs[2].tolist() == [0, 0, 1]
    assert d.targets.tolist() == [1, 0, 1]


def test_missing_token_gets_a_column(tmp_path):
    d, bmap = binarize(load_nominal_csv(write(tmp_path, TOY), "class", "p"))
    assert "odor=?" in d.column_names
    assert d.inputs[2, d.column_names.index("odor=?")] == 1.0


def test_partition_and_decode():
    rng = np.random.default_rng(3)
    from lukanet.ingest import NominalTable
    for _ in range(20):
        k = int(rng.integers(1, 5))
        rows = [tuple(str(rng.integers(0, 4)) for _ in range(k)) for _ in range(30)]
        labels = ["p", "e"] + [str(rng.choice(["p", "e"])) for _ in range(28)]
        t = NominalTable(tuple(f"c{i}" for i in range(k)), rows, "y", "p", labels)
        d, bmap = binarize(t)
        start = 0
        for toks in bmap.columns.values():
            block = d.inputs[:, start:start + len(toks)]
            assert (block.sum(axis=1) == 1).all()
            start += len(toks)
        assert bmap.decode(d) == rows
        assert len(bmap) == d.n_inputs


def test_enrich_example():
    d = Dataset([[1, 0, 1, 1]], [1], "abcd")
    e = enrich_negatives(d)
    assert e.inputs[1].tolist() == [0.5, 0, 0.5, 0.5]
    assert e.targets.tolist() == [1, 0]


def test_enrich_sizes_and_zero_rows():
    rng = np.random.default_rng(0)
    d = Dataset(rng.integers(0, 2, (100, 5)), rng.integers(0, 2, 100), "abcde")
    e = enrich_negatives(d)
    assert len(e) == 200
    assert (e.targets[100:] == 0).all()
    z = enrich_negatives(Dataset([[0, 0]], [0], "ab"))
    assert z.inputs.tolist() == [[0, 0], [0, 0]]
    with pytest.raises(ValueError):
        enrich_negatives(d, 1.5)


def test_project_columns():
    d = Dataset([[0, 1, 0.5]], [1], ("a", "b", "c"))
    same = project_columns(d, ["a", "b", "c"])
    assert np.array_equal(same.inputs, d.inputs) and same.column_names == d.column_names
    p = project_columns(d, ["c", "a"])
    assert p.inputs.tolist() == [[0.5, 0]]
    with pytest.raises(DatasetError):
        project_columns(d, ["zz"])


def test_generate_table():
    f = parse_formula("(x1 -> x2) & x3 | ~x4")
    d = generate_table(f, LogicGrain(7))
    assert len(d) == 8 ** 4 == 4096
    assert np.array_equal(d.targets, formula_valuation(f, d.column_names)(d.inputs))


def test_generate_table_noise():
    f = parse_formula("x & y")
    a = generate_table(f, LogicGrain(3), 0.1, seed=5)
    b = generate_table(f, LogicGrain(3), 0.1, seed=5)
    c = generate_table(f, LogicGrain(3), 0.1, seed=6)
    assert np.array_equal(a.targets, b.targets)
    assert not np.array_equal(a.targets, c.targets)
    assert a.targets.min() >= 0 and a.targets.max() <= 1
    with pytest.raises(ValueError):
        generate_table(f, LogicGrain(3), -1)
