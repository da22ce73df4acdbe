"""Quick end-to-end check of the bindings.

    maturin develop -m crates/py/Cargo.toml   # or: pip install crates/py
    python python/smoke_test.py
"""

import json

import sfcreconf as sr


def main():
    inst, st = sr.Instance.micro(), sr.State.micro()

    stay = sr.solve(inst, st, 1.0)
    assert stay.optimal and stay.cost_rec == 0.0 and stay.migrations == 0

    move = sr.solve(inst, st, 0.0, solver="brute")
    b = move.breakdown()
    assert move.migrations == 1
    assert [b["raw"][t] for t in "vwxyz"] == [2.0, 16.0, 0.1, 0.2, 70.0], b["raw"]
    assert sr.validate(inst, move.as_state(), st) == []

    again = sr.total_cost(inst, st, move.as_state(), 0.0)
    assert abs(again["joint"] - move.objective) < 1e-12

    csv, delta = sr.sweep(inst, st, grid="1:0:0.5")
    rows = csv.strip().splitlines()
    assert len(rows) == 4 and rows[1].startswith("1,"), rows
    assert len(delta.strip().splitlines()) == 3

    lp = sr.export_lp(inst, st, 0.5)
    assert lp.startswith("\\ model:") and lp.rstrip().endswith("End")

    small = sr.Instance.generate("small", seed=3)
    start = sr.State.initial(small)
    back = sr.Instance.from_json(small.to_json())
    assert back.to_json() == small.to_json()
    res = sr.solve(small, start, 0.5, solver="anneal", seed=1)
    assert sr.validate(small, res.as_state(), start) == []
    json.loads(res.to_json())

    try:
        sr.solve(inst, st, 1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("alpha outside [0, 1] accepted")

    print("smoke test ok:", small, res)


if __name__ == "__main__":
    main()
