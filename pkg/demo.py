"""
Demo script showing key features of the simulation
Quick demonstration of each component on small grids
"""
import numpy as np

from acquisition_sim import SourceDetectorModel, accidental_rate, run_acquisition
from image_synth import OpticalGeometry, render_image
from mask_bases import build_mask_set, count_blocks
from recon import differential_signal, invert_full, tv_reconstruct
from spectrum import extract_spectrum, spectrum_mse
from walk_core import WaveguideArray, calibrated_array, evolve_array, two_photon_correlation, walk_spectrum

SMALL_GEOMETRY = OpticalGeometry(grid_width=16, grid_height=8, mode_pitch_px=5.0, mode_waist_px=1.7,
                                 center_row=3.5, first_mode_col=2.5, num_modes=3)


def demo_walk():
    """Single-photon spread and two-photon bunching"""
    print("\n" + "=" * 80)
    print("DEMO 1: Quantum Walk")
    print("=" * 80)

    array = calibrated_array()
    spectrum = walk_spectrum(array)
    print(f"\n{array.num_guides} guides, gamma*L = {array.coupling_length:.2f}")
    for k, value in enumerate(spectrum.intensities):
        print(f"  guide {k:>2}: {value:.4f} {'#' * int(round(50 * value))}")

    coupler = WaveguideArray(num_guides=2, gamma=1.0, length=np.pi / 4)
    correlation = two_photon_correlation(evolve_array(coupler), 0, 1)
    print(f"\nBalanced coupler, indistinguishable pair: P(one photon per guide) = "
          f"{correlation.pair_probability(0, 1):.2e}")
    return spectrum


def demo_masks():
    """Block counts along the cake-cutting order of a 4x4 grid"""
    print("\n" + "=" * 80)
    print("DEMO 2: Hadamard Mask Orderings")
    print("=" * 80)

    masks = build_mask_set(4, 4, "cake_cutting")
    print(f"\nFirst 6 of {len(masks)} masks (cake-cutting):")
    for position in range(6):
        mask = masks.mask(position)
        print(f"\n  row {int(masks.rows[position])}, {count_blocks(mask)} blocks")
        for line in mask.values:
            print("    " + " ".join("#" if v > 0 else "." for v in line))
    return masks


def demo_acquisition():
    """Nominal source rates and the accidental background they imply"""
    print("\n" + "=" * 80)
    print("DEMO 3: Heralded Acquisition")
    print("=" * 80)

    model = SourceDetectorModel()
    accidental = accidental_rate(model.herald_singles_rate, model.signal_rate,
                                 model.coincidence_window)
    print(f"\nAccidentals with every pixel ON: {accidental:.1f} /s")
    print(f"True coincidences:               {model.true_rate:.0f} /s")
    print(f"SNR:                             {model.snr:.2f}")
    print(f"Chip-to-detector loss:           {model.loss_db:.1f} dB")
    return model


def demo_reconstruction(seed=7):
    """Full inversion against TV from a quarter of the masks on a 16x8 grid"""
    print("\n" + "=" * 80)
    print("DEMO 4: Reconstruction and Spectrum Extraction")
    print("=" * 80)

    truth = walk_spectrum(WaveguideArray(num_guides=3, gamma=0.5, length=1.0))
    image = render_image(truth, SMALL_GEOMETRY).normalized()
    masks = build_mask_set(16, 8, "cake_cutting")
    records = run_acquisition(image, masks, 1.0, 1.0, SourceDetectorModel(), seed)
    measurements = differential_signal(records)

    direct = invert_full(measurements, masks)
    partial = tv_reconstruct(measurements.prefix(len(masks) // 4), masks)
    results = {}
    for label, img in (("full inversion", direct), ("TV, 25% of masks", partial.image)):
        spectrum, _ = extract_spectrum(img, SMALL_GEOMETRY, fit_baseline=True)
        results[label] = spectrum_mse(spectrum, truth)
        print(f"\n{label:<20} spectrum MSE {results[label]:.3e}")
    return results


def main(interactive=True):
    """Run all demos"""
    print("\n" + "=" * 80)
    print(" " * 20 + "SIMULATION COMPONENT DEMOS")
    print("=" * 80)

    demos = [demo_walk, demo_masks, demo_acquisition, demo_reconstruction]
    try:
        for k, demo in enumerate(demos):
            demo()
            if interactive and k < len(demos) - 1:
                input("\nPress Enter to continue to next demo...")
        print("\n" + "=" * 80)
        print("All demos completed!")
        print("  Run 'python main.py run' for the full pipeline")
        print("=" * 80)
    except KeyboardInterrupt:
        print("\n\nDemo interrupted. Goodbye!")


if __name__ == "__main__":
    main()
