from integrated_report import IntegratedReportGenerator, plot_mse_curves, run_integrated_report
from ratio_sweep import RatioSweepResult, SweepRow


def sweep(orderings=("cake_cutting", "russian_dolls")):
    rows = []
    for k, ordering in enumerate(orderings):
        for fraction, error in ((0.125, 0.02), (0.25, 0.01), (0.5, 0.001), (1.0, 0.0)):
            rows.append(SweepRow(ordering, fraction, 1, int(1024 * fraction), error * (1 + k), error,
                                 30, fraction < 1.0, 1.0))
    return RatioSweepResult(tuple(rows))


def test_report_lists_every_section(capsys):
    generator = run_integrated_report(sweep())
    out = capsys.readouterr().out
    for heading in ("EXECUTIVE SUMMARY", "MEDIAN SPECTRUM MSE", "ORDERING COMPARISON", "SOLVER CONVERGENCE"):
        assert heading in out
    assert "cake_cutting has the lower median MSE at 3/4 fractions" in out
    assert "Both orderings below 0.01 from 50% upward: yes" in out
    assert len(generator.comparison) == 4


def test_single_ordering_report_skips_comparison(capsys):
    generator = IntegratedReportGenerator(sweep(("cake_cutting",)))
    generator.generate_report()
    out = capsys.readouterr().out
    assert generator.comparison is None
    assert "ORDERING COMPARISON" not in out
    assert "MEDIAN SPECTRUM MSE" in out


def test_figure_is_written(tmp_path):
    path = plot_mse_curves(sweep(), tmp_path / "mse.png")
    assert path.stat().st_size > 0
