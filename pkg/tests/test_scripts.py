import csv
import io
import runpy
from contextlib import redirect_stdout
from pathlib import Path

SCRIPTS = Path(__file__).resolve().parent.parent / "scripts"


def run_script(name, argv):
    main = runpy.run_path(str(SCRIPTS / name))["main"]
    buf = io.StringIO()
    with redirect_stdout(buf):
        main(argv)
    return list(csv.DictReader(io.StringIO(buf.getvalue())))


def test_agreement_sweep_rows():
    rows = run_script("agreement_sweep.py", ["--r", "1", "--n", "2", "4", "--L", "8", "--draws", "50"])
    assert len(rows) == 2
    assert all(float(row["agree_pcs"]) == 1.0 for row in rows)
    assert [int(row["bits"]) for row in rows] == [2, 4]


def test_search_sweep_values():
    rows = run_script("search_sweep.py", ["--n", "3", "--rounds", "1", "--bits", "0", "1"])
    assert [row["success"] for row in rows] == ["2/3", "7/9"]


def test_noisy_class_table_n3():
    rows = run_script("noisy_class_table.py", ["--n", "3"])
    assert len(rows) == 8
    assert all(row["passed"] == "True" for row in rows)
