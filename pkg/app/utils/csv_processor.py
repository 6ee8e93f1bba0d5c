import os
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np
import pandas as pd
from loguru import logger

from app.config.settings import CSV_FLOAT_FORMAT
from app.geometry.fractures import CellClassification
from app.postprocess.diagnostics import LineSample

PathLike = Union[str, Path]


class CSVProcessor:
    """
    Utility class for writing solver results as CSV files.

    Every file is UTF-8 with a header row, no index column and floats
    formatted with CSV_FLOAT_FORMAT, so repeated runs give identical bytes.
    """

    LINE_CUT_COLUMNS = ["s", "x", "y", "p_star"]
    CONSERVATION_COLUMNS = ["cell", "residual"]
    CUT_COLUMNS = ["cell", "fracture", "x0", "y0", "x1", "y1", "length"]
    CONVERGENCE_COLUMNS = ["n", "h", "error_u", "error_p_star", "error_p", "order_u", "order_p_star", "order_p"]

    @classmethod
    def write_frame(cls, frame: pd.DataFrame, file_path: PathLike) -> str:
        """
        Write a DataFrame with the project CSV conventions.

        Parameters:
        -----------
        frame : pd.DataFrame
            Data to write.
        file_path : PathLike
            Output CSV path; parent directories are created.

        Returns:
        --------
        str
            Path of the written file.
        """
        file_path = str(file_path)
        directory = os.path.dirname(file_path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        frame.to_csv(file_path, index=False, float_format=CSV_FLOAT_FORMAT, encoding="utf-8", lineterminator="\n")
        logger.debug(f"Wrote {len(frame)} rows to {file_path}")
        return file_path

    @classmethod
    def line_cut_frame(cls, sample: LineSample) -> pd.DataFrame:
        return pd.DataFrame({
            "s": sample.s,
            "x": sample.points[:, 0],
            "y": sample.points[:, 1],
            "p_star": sample.values,
        }, columns=cls.LINE_CUT_COLUMNS)

    @classmethod
    def export_line_cut(cls, sample: LineSample, file_path: PathLike) -> str:
        return cls.write_frame(cls.line_cut_frame(sample), file_path)

    @classmethod
    def export_conservation(cls, residuals: np.ndarray, file_path: PathLike) -> str:
        frame = pd.DataFrame({"cell": np.arange(len(residuals)), "residual": residuals},
                             columns=cls.CONSERVATION_COLUMNS)
        return cls.write_frame(frame, file_path)

    @classmethod
    def cuts_frame(cls, classification: CellClassification) -> pd.DataFrame:
        rows = []
        for cell in sorted(classification.cuts):
            for segment in classification.cuts[cell]:
                (x0, y0), (x1, y1) = segment.points
                rows.append({"cell": cell, "fracture": segment.fracture,
                             "x0": x0, "y0": y0, "x1": x1, "y1": y1, "length": segment.length})
        return pd.DataFrame(rows, columns=cls.CUT_COLUMNS)

    @classmethod
    def export_cuts(cls, classification: CellClassification, file_path: PathLike) -> str:
        return cls.write_frame(cls.cuts_frame(classification), file_path)

    @classmethod
    def export_convergence(cls, rows: Sequence[Dict[str, float]], file_path: PathLike) -> str:
        return cls.write_frame(pd.DataFrame(list(rows), columns=cls.CONVERGENCE_COLUMNS), file_path)

    @classmethod
    def line_cut_names(cls, count: int) -> List[str]:
        """File names line_<i>.csv for ``count`` line cuts."""
        return [f"line_{i}.csv" for i in range(count)]
