import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pytest  # noqa: E402

from harness import main  # noqa: E402
from visualize import plot_ifs_figure, plot_kernel_surfaces, plot_order_chain  # noqa: E402


def test_plots_from_harness_output(tmp_path):
    out = str(tmp_path)
    assert main(["ifs-figure", "--depths", "0..2", "--grid", "81", "--max-depth", "2", "--out", out]) == 0
    assert main(["ifs-kernel", "--depths", "0..1", "--grid", "20", "--max-depth", "1", "--out", out]) == 0
    assert main(["order-chain", "--nmax", "3", "--points", "disk:10:r0.8", "--out", out]) == 0

    figure = plot_ifs_figure(out)
    assert len(figure.axes) == 3
    figure = plot_kernel_surfaces(out)
    assert len(figure.axes) == 2 * 2  # one colorbar per panel
    figure = plot_order_chain(out)
    assert figure.axes[0].get_xlabel() == "n"
    plt.close("all")


def test_missing_plot_data(tmp_path):
    with pytest.raises(FileNotFoundError):
        plot_ifs_figure(str(tmp_path))
    with pytest.raises(FileNotFoundError):
        plot_kernel_surfaces(str(tmp_path))
