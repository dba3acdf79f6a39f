"""
PDF reports for lambda sweeps, model comparisons and case studies.

This file contains the following:
1. Chart builders -> matplotlib figures rendered to PNG buffers.
2. Layout helpers -> titles, headings, paragraphs and centered images.
3. Page builders -> one function per page kind.
4. create_sweep_report / create_comparison_report / create_case_study_report.

Canvases are created with invariant=1 so the same table always gives the
same file.
"""
from __future__ import annotations

import io
import math

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402
from reportlab.lib.pagesizes import LETTER  # noqa: E402
from reportlab.lib.units import inch  # noqa: E402
from reportlab.lib.utils import ImageReader, simpleSplit  # noqa: E402
from reportlab.pdfgen import canvas  # noqa: E402

METRICS = ("accuracy", "f1", "dp", "eo")
METRIC_TITLES = {"accuracy": "Accuracy", "f1": "F1", "dp": "DP gap",
                 "eo": "EO gap"}
ROWS_PER_TABLE_PAGE = 18

# Functions for creating charts.


def _figure_buffer(fig, dpi: int = 72) -> io.BytesIO:
    buffer = io.BytesIO()
    fig.savefig(buffer, format="png", dpi=dpi)
    plt.close(fig)
    buffer.seek(0)
    return buffer


def create_line_chart(
    table: pd.DataFrame, metric: str, chart_title: str,
    fig_width=5.0, fig_height=4.0
) -> io.BytesIO:
    """Plots one metric against lambda, one line per task."""
    data = table.pivot_table(index="lambda", columns="task", values=metric,
                             aggfunc="first", dropna=False)

    fig, ax = plt.subplots(figsize=(fig_width, fig_height))
    data.plot(kind="line", marker="o", ax=ax)
    ax.set_xlabel("lambda_fc")
    ax.set_ylabel(METRIC_TITLES[metric])
    ax.set_title(chart_title)
    plt.tight_layout()

    return _figure_buffer(fig)


def create_grouped_bar_chart(
    table: pd.DataFrame, metric: str, chart_title: str,
    fig_width=5.0, fig_height=4.0
) -> io.BytesIO:
    """Seed-averaged metric per model, one bar group per task."""
    data = table.pivot_table(index="task", columns="model", values=metric,
                             aggfunc="mean")

    fig, ax = plt.subplots(figsize=(fig_width, fig_height))
    data.plot(kind="bar", ax=ax, rot=0)
    ax.set_xlabel("Task")
    ax.set_ylabel(METRIC_TITLES[metric])
    ax.set_title(chart_title)
    plt.tight_layout()

    return _figure_buffer(fig)


def _cell_text(value) -> str:
    if isinstance(value, float):
        return "-" if math.isnan(value) else f"{value:.4f}"
    text = str(value)
    return text if len(text) <= 48 else text[:45] + "..."


def create_table_image(
    frame: pd.DataFrame, fig_width=12.0, row_height=0.4
) -> io.BytesIO:
    """Renders a data frame as a bold-headed table image."""
    cell_text = [[_cell_text(v) for v in row] for row in frame.itertuples(index=False)]
    fig_height = max(1.0, row_height * (len(cell_text) + 1))

    fig, ax = plt.subplots(figsize=(fig_width, fig_height))
    ax.axis("off")
    table = ax.table(
        cellText=cell_text,
        colLabels=list(frame.columns),
        cellLoc="center",
        loc="center",
        bbox=[0, 0, 1, 1]
    )
    table.auto_set_font_size(False)
    table.set_fontsize(9)
    for (row, _), cell in table.get_celld().items():
        if row == 0:
            cell.set_text_props(weight="bold")

    return _figure_buffer(fig, dpi=150)

# Functions for positioning content.


def draw_centered_image(
    c: canvas.Canvas, page_width: float, page_height: float,
    page_height_percentage: float, y_element_above: float,
    img_buffer: io.BytesIO
) -> float:
    """
    Draws an image centered under y_element_above.

    The image may take up page_height_percentage of the page height and is
    shrunk further to fit the page width. Returns the image's bottom y.
    """
    image_reader = ImageReader(img_buffer)
    orig_width, orig_height = image_reader.getSize()

    scale_factor = page_height_percentage * page_height / orig_height
    if orig_width * scale_factor > 0.95 * page_width:
        scale_factor = 0.95 * page_width / orig_width
    scaled_width = orig_width * scale_factor
    scaled_height = orig_height * scale_factor

    x = (page_width - scaled_width) / 2
    y = y_element_above - scaled_height
    c.drawImage(image_reader, x, y, width=scaled_width, height=scaled_height)
    return y


def draw_image_grid(
    c: canvas.Canvas, page_width: float, y_element_above: float,
    img_buffers: list[io.BytesIO]
) -> float:
    """Draws square images two per row; returns the bottom y."""
    size = 0.45 * page_width
    gap = (page_width - 2 * size) / 3
    current_y = y_element_above - 0.25 * inch
    for start in range(0, len(img_buffers), 2):
        for column, buffer in enumerate(img_buffers[start:start + 2]):
            x = gap + column * (size + gap)
            c.drawImage(ImageReader(buffer), x, current_y - size,
                        width=size, height=size)
        current_y -= size + 0.2 * inch
    return current_y

# Functions for styling text.


def format_title(
    c: canvas.Canvas, title: str, page_width: float, page_height: float
) -> float:
    """Formats the title of the document on a page."""
    c.setFont("Times-Bold", 26)
    title_width = c.stringWidth(title, "Times-Bold", 26)
    y_title = page_height - (3.5 * inch)
    c.drawString((page_width - title_width) / 2, y_title, title)
    return y_title


def format_heading1(c: canvas.Canvas, page_height: float, title: str) -> float:
    c.setFont("Times-Bold", 24)
    y_title = page_height - (0.75 * inch)
    c.drawString(0.5 * inch, y_title, title)
    return y_title


def format_paragraph(
    c: canvas.Canvas, page_width: float, y_element_above: float, text: str
) -> float:
    """Wraps text in the paragraph style under y_element_above."""
    font_name, font_size = "Times-Roman", 14
    c.setFont(font_name, font_size)
    leading = font_size * 1.2
    usable_width = page_width - (0.5 * inch + 0.75 * inch)

    current_y = y_element_above - (0.5 * inch)
    for line in simpleSplit(text, font_name, font_size, usable_width):
        c.drawString(0.5 * inch, current_y, line)
        current_y -= leading
    return current_y


def format_centered_paragraph(
    c: canvas.Canvas, paragraph: list[str], page_width: float,
    y_element_above: float
) -> float:
    c.setFont("Times-Roman", 12)
    y_paragraph = y_element_above - (1.0 * inch)
    for line in paragraph:
        line_width = c.stringWidth(line, "Times-Roman", 12)
        c.drawString((page_width - line_width) / 2, y_paragraph, line)
        y_paragraph -= 14
    return y_paragraph

# Functions for creating individual pages.


def create_title_page(c: canvas.Canvas, title: str, overview: list[str]):
    """
    Creates a title page.

    Expected page output:
    1) Title
    2) Centered overview lines
    """
    page_width, page_height = LETTER
    y_title = format_title(c, title, page_width, page_height)
    format_centered_paragraph(c, overview, page_width, y_title)


def create_sweep_page(c: canvas.Canvas, table: pd.DataFrame):
    """
    Creates the chart page of a sweep report.

    Expected page output:
    1) Heading
    2) Intro paragraph
    3) One chart per metric, two per row
    """
    page_width, page_height = LETTER
    attribute = ", ".join(sorted(table["attribute"].unique()))
    intro_paragraph = (
        f"Each point is one training run scored on the test split. "
        f"Fairness gaps are measured between the {attribute} groups; lower "
        f"is fairer."
    )
    charts = [create_line_chart(table, metric, f"{METRIC_TITLES[metric]} vs lambda")
              for metric in METRICS]

    y_heading = format_heading1(c, page_height, "Sensitivity to lambda_fc")
    y_intro = format_paragraph(c, page_width, y_heading, intro_paragraph)
    draw_image_grid(c, page_width, y_intro, charts)


def create_comparison_page(c: canvas.Canvas, table: pd.DataFrame,
                           flags: pd.DataFrame = None):
    """
    Creates the chart page of a comparison report.

    Expected page output:
    1) Heading
    2) Paragraph on the adversarial baseline's ordering per seed
    3) One seed-averaged bar chart per metric
    """
    page_width, page_height = LETTER
    if flags is not None and len(flags):
        held = int(flags["ordering_holds"].sum())
        review_paragraph = (
            f"The adversarial baseline lowered DP at a larger accuracy cost "
            f"than FairPM on {held} of {len(flags)} seeds."
        )
    else:
        review_paragraph = "Bars average every seed's test metrics."
    charts = [create_grouped_bar_chart(table, metric, METRIC_TITLES[metric])
              for metric in METRICS]

    y_heading = format_heading1(c, page_height, "Model Comparison")
    y_review = format_paragraph(c, page_width, y_heading, review_paragraph)
    draw_image_grid(c, page_width, y_review, charts)


def create_table_pages(c: canvas.Canvas, heading: str, frame: pd.DataFrame):
    """Draws a frame over as many pages as needed, each ending with showPage."""
    page_width, page_height = LETTER
    chunks = [frame.iloc[start:start + ROWS_PER_TABLE_PAGE]
              for start in range(0, len(frame), ROWS_PER_TABLE_PAGE)] or [frame]
    for number, chunk in enumerate(chunks, start=1):
        title = heading if len(chunks) == 1 else \
            f"{heading} ({number}/{len(chunks)})"
        y_heading = format_heading1(c, page_height, title)
        if chunk.empty:
            format_paragraph(c, page_width, y_heading, "No rows.")
        else:
            share = min(0.85, 0.05 * (len(chunk) + 1))
            draw_centered_image(c, page_width, page_height, share,
                                y_heading - 0.3 * inch,
                                create_table_image(chunk))
        c.showPage()

# Report entry points.


def create_sweep_report(output_pdf_path, table: pd.DataFrame):
    """Title page, metric charts and the sweep table."""
    c = canvas.Canvas(str(output_pdf_path), pagesize=LETTER, invariant=1)
    lambdas = ", ".join(f"{v:g}" for v in sorted(table["lambda"].unique()))
    create_title_page(c, "Fairness Sweep Report", [
        "Accuracy, F1 and group fairness gaps of patient-criterion",
        "and patient-trial matching for each fairness weight.",
        f"Weights: {lambdas}",
    ])
    c.showPage()

    create_sweep_page(c, table)
    c.showPage()

    create_table_pages(c, "Sweep Table", table)
    c.save()


def create_comparison_report(output_pdf_path, table: pd.DataFrame,
                             flags: pd.DataFrame = None):
    """Title page, bar charts and the comparison tables."""
    c = canvas.Canvas(str(output_pdf_path), pagesize=LETTER, invariant=1)
    seeds = ", ".join(str(s) for s in sorted(table["seed"].unique()))
    create_title_page(c, "Model Comparison Report", [
        "Baseline, adversarial baseline and FairPM",
        "scored on the test split for every seed.",
        f"Seeds: {seeds}",
    ])
    c.showPage()

    create_comparison_page(c, table, flags)
    c.showPage()

    create_table_pages(c, "Comparison Table", table)
    if flags is not None:
        create_table_pages(c, "Ordering Flags", flags)
    c.save()


def create_case_study_report(output_pdf_path, table: pd.DataFrame):
    """Title page and the divergent pairs, paged."""
    c = canvas.Canvas(str(output_pdf_path), pagesize=LETTER, invariant=1)
    create_title_page(c, "Case Study Report", [
        "Patient-criterion pairs on which the baseline",
        "and FairPM predict different classes.",
        f"Divergent pairs: {len(table)}",
    ])
    c.showPage()

    columns = ["trial_id", "criterion_text", "race", "gender", "baseline",
               "fairpm"]
    create_table_pages(c, "Divergent Pairs", table[columns])
    c.save()
