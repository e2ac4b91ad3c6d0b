import io
import math

import numpy as np

from helfrich_disc import convergence as cv
from helfrich_disc import surfaces


def test_fit_rate():
    h = np.array([0.1, 0.05, 0.025])
    assert np.isclose(cv.fit_rate(h, 3 * h**2), 2.0)
    assert cv.fit_rate(h, [1e-16, 0.0, 1e-15]) == math.inf
    assert math.isnan(cv.fit_rate(h, [1e-3, 0.0, 0.0]))
    r = cv.successive_rates(h, 3 * h**2)
    assert math.isnan(r[0]) and np.allclose(r[1:], 2.0)


def test_plane_table_is_exact():
    tb = cv.run_convergence(surfaces.get("plane"), refinements=3)
    assert all(r["E_discrete"] <= 1e-14 for r in tb.rows)
    assert all(math.isnan(r["error_rel"]) for r in tb.rows)
    assert tb.summary["slope_energy"] == math.inf
    assert tb.summary["slope_director"] == math.inf
    assert tb.summary["slope_grad_n_sup"] == math.inf


def test_table_contents(paraboloid):
    tb = cv.run_convergence(paraboloid, refinements=3, fd=True)
    rows = tb.rows
    assert [r["n"] for r in rows] == [8, 16, 32]
    assert all(r["E_pseudo_optimized"] <= r["E_pseudo_projected"] for r in rows)
    assert all(0.9 <= r["E_fd"] / r["E_continuous"] <= 1.1 for r in rows[1:])
    buf = io.StringIO()
    cv.write_csv(tb, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# helfrich-disc v1"
    assert lines[1].split(",") == cv.COLUMNS
    assert len(lines) == 2 + len(rows)


def test_optimized_directors_converge(paraboloid):
    tb = cv.run_convergence(paraboloid, refinements=3, directors="optimize_pseudo")
    assert tb.summary["slope_energy"] >= 1.0
    errs = [r["error_rel"] for r in tb.rows]
    assert errs[0] > errs[1] > errs[2]


def test_non_quadratic_density_skips_pseudo_columns(paraboloid):
    from helfrich_disc import energy as en

    tb = cv.run_convergence(paraboloid, en.p_willmore(3.0), refinements=2)
    assert all(math.isnan(r["E_pseudo_optimized"]) for r in tb.rows)
    assert tb.rows[1]["error_rel"] < tb.rows[0]["error_rel"]
