"""wavefocus-plots: offline figure generation from wavefocus artifacts."""

from .artifacts import (
    ArtifactError,
    load_field_2d,
    read_csv_slice,
    read_field,
    read_norms_csv,
    read_report,
)
from .render import PlotSpec, distance_contours_figure, heatmap_figure, ratio_curve_figure, render

__version__ = "0.1.0"
