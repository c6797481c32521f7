"""
Integrated Report Generator
Banner-style summary of a reconstruction-ratio sweep and the ordering comparison
"""
import logging

from errors import OrderingMissingError
from ratio_sweep import compare_orderings, trend_inversions

logger = logging.getLogger(__name__)

NEAR_ZERO_MSE = 0.01


class IntegratedReportGenerator:
    """Prints the sweep tables and comparison from a RatioSweepResult"""

    def __init__(self, result, first="cake_cutting", second="russian_dolls"):
        self.result = result
        self.first = first
        self.second = second
        self.comparison = None

    def generate_report(self):
        """Print the complete report; the ordering comparison is skipped for single-ordering sweeps"""
        print("=" * 80)
        print(" " * 22 + "RECONSTRUCTION RATIO SWEEP REPORT")
        print("=" * 80)

        try:
            self.comparison = compare_orderings(self.result, self.first, self.second)
        except OrderingMissingError as exc:
            logger.warning("Ordering comparison skipped: %s", exc)
            self.comparison = None

        self._print_executive_summary()
        self._print_mse_table()
        if self.comparison is not None:
            self._print_comparison()
        self._print_convergence()
        print("=" * 80)

    def _print_executive_summary(self):
        print("\n" + "=" * 80)
        print("EXECUTIVE SUMMARY")
        print("=" * 80)

        result = self.result
        fractions = result.fractions
        print(f"\n{'Metric':<40} {'Value':<20}")
        print("-" * 80)
        print(f"{'Orderings':<40} {', '.join(result.orderings)}")
        print(f"{'Seeds':<40} {len(result.seeds)}")
        print(f"{'Fractions':<40} {len(fractions)} ({fractions[0]:.0%} .. {fractions[-1]:.0%})")
        for ordering in result.orderings:
            label = f"Trend inversions ({ordering})"
            print(f"{label:<40} {trend_inversions(result, ordering)}")

    def _print_mse_table(self):
        print("\n" + "=" * 80)
        print("1. MEDIAN SPECTRUM MSE VS FULL RECONSTRUCTION")
        print("=" * 80)

        orderings = self.result.orderings
        print(f"\n{'Fraction':<12}" + "".join(f"{o:<22}" for o in orderings))
        print("-" * 80)
        for fraction in self.result.fractions:
            cells = []
            for ordering in orderings:
                values = self.result.values(ordering, fraction)
                cells.append(f"{self.result.median_mse(ordering, fraction):<22.3e}" if values else f"{'-':<22}")
            print(f"{fraction:<12.1%}" + "".join(cells))

    def _print_comparison(self):
        print("\n" + "=" * 80)
        print(f"2. ORDERING COMPARISON: {self.first} vs {self.second}")
        print("=" * 80)

        print(f"\n{'Fraction':<12} {self.first:<20} {self.second:<20} {'Better':<15}")
        print("-" * 80)
        for row in self.comparison:
            better = {-1: self.first, 1: self.second, 0: "tie"}[row.sign]
            print(f"{row.fraction:<12.1%} {row.median_first:<20.3e} {row.median_second:<20.3e} {better:<15}")

        wins = sum(1 for row in self.comparison if row.sign < 0)
        high = [row for row in self.comparison if row.fraction >= 0.5]
        print(f"\n{self.first} has the lower median MSE at {wins}/{len(self.comparison)} fractions")
        if high:
            near_zero = all(max(r.median_first, r.median_second) < NEAR_ZERO_MSE for r in high)
            print(f"Both orderings below {NEAR_ZERO_MSE} from 50% upward: {'yes' if near_zero else 'no'}")

    def _print_convergence(self):
        print("\n" + "=" * 80)
        print("3. SOLVER CONVERGENCE")
        print("=" * 80)

        print(f"\n{'Ordering':<20} {'Solves':<12} {'Converged':<12} {'Mean iterations':<18}")
        print("-" * 80)
        for ordering in self.result.orderings:
            rows = [r for r in self.result.rows if r.ordering == ordering]
            converged = sum(1 for r in rows if r.converged)
            mean_iterations = sum(r.iterations for r in rows) / len(rows)
            print(f"{ordering:<20} {len(rows):<12} {converged:<12} {mean_iterations:<18.1f}")


def plot_mse_curves(result, path):
    """MSE against reconstruction ratio, one median curve per ordering"""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for ordering in result.orderings:
        fractions = [f for f in result.fractions if result.values(ordering, f)]
        medians = [result.median_mse(ordering, f) for f in fractions]
        ax.plot([100 * f for f in fractions], medians, marker="o", label=ordering.replace("_", " "))
    ax.set_xlabel("Reconstruction ratio (%)")
    ax.set_ylabel("Spectrum MSE vs full reconstruction")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    logger.info("[OK] Figure written to %s", path)
    return path


def run_integrated_report(result, figure_path=None):
    generator = IntegratedReportGenerator(result)
    generator.generate_report()
    if figure_path is not None:
        plot_mse_curves(result, figure_path)
    return generator
