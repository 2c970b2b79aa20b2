"""
Exports scenario results: one CSV table of rows and one YAML file with the metadata needed to reproduce them.
"""

from dataclasses import dataclass
import csv
import io
import math
from pathlib import Path
from typing import Any, Iterable, List

import yaml

from localtimes.misc import atomic_write, format_float

HEADER = ("scenario", "quantity", "parameter", "value", "tolerance", "status")

@dataclass(frozen=True)
class Row:
    """ One reported number. `status` is pass or fail for checked values and info otherwise. """
    quantity:str
    value:float
    parameter:Any = ""
    tolerance:float|None = None
    status:str = "info"

    @classmethod
    def check(cls, quantity:str, value:float, expected:float, tolerance:float, parameter:Any="") -> "Row":
        """ Passes when |value - expected| <= tolerance. """
        ok = math.isfinite(value) and abs(value - expected) <= tolerance
        return cls(quantity, value, parameter, tolerance, "pass" if ok else "fail")

    @classmethod
    def bound(cls, quantity:str, value:float, tolerance:float, parameter:Any="") -> "Row":
        """ Passes when |value| <= tolerance. """
        return cls.check(quantity, value, 0.0, tolerance, parameter)

    @property
    def failed(self) -> bool:
        return self.status == "fail"

def _cell(x:Any) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, (float, int)):
        return format_float(x)
    return str(x)

def render_csv(scenario:str, rows:Iterable[Row]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(HEADER)
    for r in rows:
        writer.writerow((scenario, r.quantity, _cell(r.parameter), _cell(r.value), _cell(r.tolerance), r.status))
    return buffer.getvalue()

def export(target:Path, scenario:str, rows:List[Row], metadata:dict) -> List[Path]:
    """ Writes `<target>.csv` and `<target>.meta.yaml`, each atomically. """
    target = Path(target)
    csv_path = atomic_write(target.with_name(target.name + ".csv"), render_csv(scenario, rows))
    meta_path = atomic_write(target.with_name(target.name + ".meta.yaml"), yaml.safe_dump(metadata, sort_keys=True))
    return [csv_path, meta_path]
