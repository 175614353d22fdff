"""CSV and manifest emission. All floats use shortest round-trip repr so
identical runs produce byte-identical files."""

import csv
import hashlib
import json

from .sim import Metrics, RunResult, SimConfig


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


RAW_COLUMNS = [
    "scheme",
    "L",
    "K",
    "N",
    "oh",
    "seed",
    "avg_se_bits_per_s_per_hz",
    "handovers_total",
    "handovers_per_ue_per_kslot",
    "slots",
]


def write_raw_csv(path, metrics: list[Metrics]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RAW_COLUMNS)
        for m in metrics:
            c = m.config
            for r in m.runs:
                w.writerow(
                    [
                        r.scheme,
                        c.bss,
                        c.k,
                        c.ues,
                        _fmt(c.oh),
                        r.seed,
                        _fmt(r.avg_se),
                        r.handovers_total,
                        _fmt(r.handovers_per_ue_per_kslot),
                        r.measured_slots,
                    ]
                )


AGGREGATE_COLUMNS = [
    "scheme",
    "L",
    "K",
    "N",
    "oh",
    "n_seeds",
    "mean_se",
    "se_ci95_halfwidth",
    "mean_handovers",
    "handovers_ci95_halfwidth",
    "mean_handovers_per_ue_per_kslot",
    "gain_vs_channel",
]


def write_aggregate_csv(path, metrics: list[Metrics]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(AGGREGATE_COLUMNS)
        for m in metrics:
            c = m.config
            w.writerow(
                [
                    m.scheme,
                    c.bss,
                    c.k,
                    c.ues,
                    _fmt(c.oh),
                    len(m.runs),
                    _fmt(m.mean_se),
                    _fmt(m.se_ci95),
                    _fmt(m.mean_handovers),
                    _fmt(m.handovers_ci95),
                    _fmt(m.mean_handovers_per_ue_per_kslot),
                    "" if m.gain_vs_channel is None else _fmt(m.gain_vs_channel),
                ]
            )


def write_plotdata_csv(path, metrics: list[Metrics]) -> None:
    """Long format, one (run, metric) observation per row."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "L", "K", "N", "oh", "seed", "metric", "value"])
        for m in metrics:
            c = m.config
            for r in m.runs:
                base = [r.scheme, c.bss, c.k, c.ues, _fmt(c.oh), r.seed]
                w.writerow(base + ["avg_se_bits_per_s_per_hz", _fmt(r.avg_se)])
                w.writerow(base + ["handovers_total", r.handovers_total])
                w.writerow(
                    base + ["handovers_per_ue_per_kslot", _fmt(r.handovers_per_ue_per_kslot)]
                )


def config_digest(resolved: dict) -> str:
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def write_manifest(path, command: str, resolved_config: dict, outputs: list[str]) -> None:
    """Reproduction record: the full resolved configuration and its hash."""
    from . import __version__

    doc = {
        "command": command,
        "package_version": __version__,
        "config": resolved_config,
        "config_sha256": config_digest(resolved_config),
        "outputs": sorted(outputs),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
