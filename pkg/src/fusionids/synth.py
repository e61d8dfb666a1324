"""Synthetic benchmark generation.

Produces a flow CSV, an HFT1 host-tensor file, and a label-map sidecar whose
geometry makes the comparative pipeline claims testable at desk scale: flow
features are Gaussian clusters (classes may share a cluster center, making
them indistinguishable on flow alone), while host tensors carry a dense
per-class signature over a configurable subset of cells so that host-aware
fusion can separate what flow cannot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import FlowTable, HostTensorSet, LabelMap, save_flow_csv, save_host_tensors
from .errors import SpecInvalidError


@dataclass(frozen=True)
class SynthClass:
    name: str
    count: int
    flow_group: str | None = None    # classes sharing a group share a flow center


@dataclass(frozen=True)
class SynthSpec:
    classes: tuple[SynthClass, ...]
    benign_name: str
    flow_dim: int = 16
    event_dims: tuple[int, int] = (12, 8)
    message_dims: tuple[int, int] = (24, 32)
    flow_separation: float = 6.0
    flow_sigma: float = 1.0
    host_signal_fraction: float = 1.0
    host_amplitude: float = 2.5
    host_sigma: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        names = [c.name for c in self.classes]
        if len(self.classes) < 2:
            raise SpecInvalidError("need at least 2 classes")
        if len(set(names)) != len(names):
            raise SpecInvalidError("class names must be unique")
        if self.benign_name not in names:
            raise SpecInvalidError(f"benign class {self.benign_name!r} not among classes")
        if any(c.count < 1 for c in self.classes):
            raise SpecInvalidError("every class needs at least 1 sample")
        if self.flow_dim < 1 or min(*self.event_dims, *self.message_dims) < 1:
            raise SpecInvalidError("dims must be >= 1")
        if not 0.0 < self.host_signal_fraction <= 1.0:
            raise SpecInvalidError("host_signal_fraction must be in (0,1]")
        if self.flow_sigma <= 0 or self.host_sigma <= 0:
            raise SpecInvalidError("sigmas must be positive")

    def to_dict(self) -> dict:
        return {
            "classes": [
                {"name": c.name, "count": c.count, "flow_group": c.flow_group}
                for c in self.classes
            ],
            "benign_name": self.benign_name,
            "flow_dim": self.flow_dim,
            "event_dims": list(self.event_dims),
            "message_dims": list(self.message_dims),
            "flow_separation": self.flow_separation,
            "flow_sigma": self.flow_sigma,
            "host_signal_fraction": self.host_signal_fraction,
            "host_amplitude": self.host_amplitude,
            "host_sigma": self.host_sigma,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        try:
            spec = cls(
                classes=tuple(
                    SynthClass(c["name"], int(c["count"]), c.get("flow_group"))
                    for c in d["classes"]
                ),
                benign_name=d["benign_name"],
                flow_dim=int(d.get("flow_dim", 16)),
                event_dims=tuple(d.get("event_dims", (12, 8))),
                message_dims=tuple(d.get("message_dims", (24, 32))),
                flow_separation=float(d.get("flow_separation", 6.0)),
                flow_sigma=float(d.get("flow_sigma", 1.0)),
                host_signal_fraction=float(d.get("host_signal_fraction", 1.0)),
                host_amplitude=float(d.get("host_amplitude", 2.5)),
                host_sigma=float(d.get("host_sigma", 1.0)),
                seed=int(d.get("seed", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecInvalidError(f"bad synthetic spec: {exc}") from exc
        spec.validate()
        return spec


def generate_synthetic(spec: SynthSpec) -> tuple[FlowTable, HostTensorSet, LabelMap]:
    """Draw the dataset in memory; rows are grouped by class in spec order."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    f = spec.flow_dim
    m, n = spec.event_dims
    p, q = spec.message_dims
    cells = m * n + p * q

    # structural draws first, in class order, so sample counts don't shift them
    centers: dict[str, np.ndarray] = {}
    class_center = []
    for c in spec.classes:
        key = c.flow_group if c.flow_group is not None else f"__{c.name}"
        if key not in centers:
            direction = rng.normal(size=f)
            direction /= np.linalg.norm(direction)
            centers[key] = direction * spec.flow_separation
        class_center.append(centers[key])

    n_signal = max(1, int(round(spec.host_signal_fraction * cells)))
    signal_cells = rng.choice(cells, size=n_signal, replace=False)
    signatures = []
    for _ in spec.classes:
        sig = np.zeros(cells)
        sig[signal_cells] = rng.normal(size=n_signal) * spec.host_amplitude
        signatures.append(sig)

    total = sum(c.count for c in spec.classes)
    pad = len(str(total - 1))
    ids: list[str] = []
    labels: list[str] = []
    flow_rows = []
    host_rows = []
    for c, center, sig in zip(spec.classes, class_center, signatures):
        flow_rows.append(center + rng.normal(0.0, spec.flow_sigma, size=(c.count, f)))
        host_rows.append(sig + rng.normal(0.0, spec.host_sigma, size=(c.count, cells)))
        start = len(ids)
        ids.extend(f"s{start + i:0{pad}d}" for i in range(c.count))
        labels.extend([c.name] * c.count)

    flow_values = np.vstack(flow_rows)
    host = np.vstack(host_rows).astype(np.float32)
    event = host[:, : m * n].reshape(total, m, n)
    message = host[:, m * n :].reshape(total, p, q)

    feature_names = tuple(f"ft{j}" for j in range(f))
    table = FlowTable(tuple(ids), feature_names, flow_values, tuple(labels))
    tensors = HostTensorSet(tuple(ids), event, message)
    label_map = LabelMap.from_names(labels, spec.benign_name)
    return table, tensors, label_map


def write_synthetic(spec: SynthSpec, out_dir) -> dict[str, Path]:
    """Generate and write flow.csv, host.hft1, and labels.json under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table, tensors, label_map = generate_synthetic(spec)
    paths = {
        "flow_csv": out / "flow.csv",
        "host_tensors": out / "host.hft1",
        "label_map": out / "labels.json",
    }
    save_flow_csv(table, paths["flow_csv"])
    save_host_tensors(tensors, paths["host_tensors"])
    label_map.save(paths["label_map"])
    (out / "synth_spec.json").write_text(json.dumps(spec.to_dict(), indent=2) + "\n")
    return paths


def imbalanced_benchmark(seed: int = 0, scale: float = 1.0) -> SynthSpec:
    """Benchmark preset: half benign plus five attack classes, 20000 samples
    at scale 1.0, where the two "twin" classes share a flow cluster and are
    telling apart only through their host signatures; one twin is a minority.
    """
    def sz(x: int) -> int:
        return max(2, int(round(x * scale)))

    return SynthSpec(
        classes=(
            SynthClass("benign", sz(10000)),
            SynthClass("flood", sz(3600)),
            SynthClass("scan", sz(3400)),
            SynthClass("twin-heavy", sz(1500), flow_group="twin"),
            SynthClass("twin-light", sz(400), flow_group="twin"),
            SynthClass("probe", sz(1100)),
        ),
        benign_name="benign",
        seed=seed,
    )
