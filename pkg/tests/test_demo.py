import demo


def test_walk_demo_prints_spectrum(capsys):
    spectrum = demo.demo_walk()
    assert len(spectrum) == 13
    assert "Balanced coupler" in capsys.readouterr().out


def test_mask_demo_orders_by_blocks():
    masks = demo.demo_masks()
    assert masks.block_counts[0] == 1
    assert list(masks.block_counts) == sorted(masks.block_counts)


def test_acquisition_demo_reports_snr(capsys):
    model = demo.demo_acquisition()
    assert 6 <= model.snr <= 8
    assert "136.8" in capsys.readouterr().out


def test_reconstruction_demo_scores_both_solvers():
    results = demo.demo_reconstruction()
    assert set(results) == {"full inversion", "TV, 25% of masks"}
    assert results["full inversion"] < 0.05


def test_non_interactive_run(capsys):
    demo.main(interactive=False)
    assert "All demos completed!" in capsys.readouterr().out
