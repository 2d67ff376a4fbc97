"""Command-line front end.

Every command takes one system, either from ``--momenta`` (inline list or a
JSON file) or drawn at random from ``--seed`` for ``--m`` magnons.  ``simulate``
and ``verify`` also accept comma-separated ``--n/--m/--delta`` lists together
with ``--draws``; the grid then runs on a thread pool capped by
``BETHE_CIRCUIT_THREADS`` and rows come back in input order.

Exit status: 0 when every check is under ``--tol``, 1 on a numerical failure,
2 on a malformed invocation.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .aba_bridge import verify_equivalence
from .cba_core import MagnonSystem, _complex_from_json, network_wavefunction, unit_scattering
from .circuit import (
    CircuitDescription,
    build_circuit,
    fidelity,
    oracle_state,
    short_network_wavefunction,
    simulate,
    verify_unitarity,
)
from .errors import BetheCircuitError, DomainError
from .sectors import sector_basis
from .unitarize import FactorChain, OverlapChain, gram_matrix
from .xx_matchgate import compare_layers, decompose

COMMANDS = ("build", "simulate", "verify", "compare-aba", "xx-decompose", "gram-check")
SWEEP_COMMANDS = ("simulate", "verify")
CSV_FIELDS = ("N", "M", "delta", "seed", "fidelity", "max_unitarity_residual")
IMAG_SPREAD = 0.3


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    """A validated invocation: the command and the systems it runs on (with their seeds)."""

    command: str
    systems: tuple[tuple[MagnonSystem, int | None], ...]
    tol: float = 1e-9
    output: str | None = None
    format: str = "json"
    circuit: CircuitDescription | None = None

    @classmethod
    def from_args(cls, args) -> RunConfig:
        if not args.tol > 0:
            raise UsageError("--tol must be positive")
        circuit = None
        if args.circuit:
            if args.command != "simulate":
                raise UsageError("--circuit only applies to simulate")
            if args.momenta or args.n or args.m or args.seed is not None:
                raise UsageError("--circuit already fixes the system")
            circuit = CircuitDescription.load(args.circuit)
            systems = ((circuit.system(), None),)
        else:
            systems = tuple(_system_grid(args))
        if args.command not in SWEEP_COMMANDS and len(systems) != 1:
            raise UsageError(f"{args.command} takes a single system")
        if args.command == "build" and args.format == "csv":
            raise UsageError("build writes JSON or pretty output")
        return cls(args.command, systems, args.tol, args.out, args.format, circuit)


def random_momenta(M: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(-np.pi, np.pi, M) + 1j * rng.uniform(-IMAG_SPREAD, IMAG_SPREAD, M)


def _int_list(text: str | None, name: str) -> list[int]:
    if text is None:
        return []
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"--{name} expects integers, got {text!r}") from exc


def _float_list(text: str | None) -> list[float]:
    if text is None:
        return [0.0]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"--delta expects numbers, got {text!r}") from exc


def _parse_momenta(text: str, N: int | None, delta: float) -> MagnonSystem:
    """Inline ``p1,p2,...`` (complex literals allowed) or a JSON file.

    A file may hold a full system document or a bare list of momenta.
    """
    path = Path(text)
    if path.is_file():
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"{text}: not valid JSON ({exc})") from exc
        if isinstance(doc, dict):
            return MagnonSystem.from_json(doc)
        values = [_complex_from_json(v) for v in doc]
    else:
        try:
            values = [complex(v.strip().replace(" ", "")) for v in text.split(",") if v.strip()]
        except ValueError as exc:
            raise UsageError(f"cannot parse momenta {text!r}") from exc
    if N is None:
        raise UsageError("--n is required with inline momenta")
    return MagnonSystem.from_momenta(N, values, delta)


def _system_grid(args) -> list[tuple[MagnonSystem, int | None]]:
    """Expand the flags into ``(system, seed)`` pairs, in input order."""
    ns, ms, deltas = _int_list(args.n, "n"), _int_list(args.m, "m"), _float_list(args.delta)
    if args.momenta is not None:
        if args.seed is not None or args.draws != 1:
            raise UsageError("give either --momenta or --seed/--draws, not both")
        if len(ns) > 1 or len(deltas) > 1:
            raise UsageError("explicit momenta define a single system")
        system = _parse_momenta(args.momenta, ns[0] if ns else None, deltas[0])
        if ms and ms != [system.M]:
            raise UsageError(f"--m {args.m} disagrees with the {system.M} momenta given")
        return [(system, None)]
    if not ns or not ms:
        raise UsageError("need --momenta, or --n and --m with a --seed")
    if args.seed is None:
        raise UsageError("random momenta need --seed")
    if args.draws < 1:
        raise UsageError("--draws must be positive")
    out = []
    for N, M, delta in itertools.product(ns, ms, deltas):
        if not 1 <= M < N:
            if len(ns) * len(ms) == 1:
                raise UsageError(f"need 1 <= M < N, got N={N}, M={M}")
            continue
        for d in range(args.draws):
            seed = args.seed + d
            out.append((MagnonSystem.from_momenta(N, random_momenta(M, seed), delta), seed))
    return out


def _threads() -> int:
    cap = os.environ.get("BETHE_CIRCUIT_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return n


# commands ------------------------------------------------------------------


def _fidelity_row(system: MagnonSystem, seed, circ: CircuitDescription | None = None) -> dict:
    circ = circ or build_circuit(system)
    state = simulate(circ)
    fid = fidelity(state, oracle_state(system))
    return {
        "N": system.N,
        "M": system.M,
        "delta": system.delta,
        "seed": seed,
        "fidelity": fid,
        "max_unitarity_residual": verify_unitarity(circ).max_residual,
        "_state": state,
    }


def cmd_simulate(system, seed, tol, circ=None) -> dict:
    row = _fidelity_row(system, seed, circ)
    state = row.pop("_state")
    row["amplitudes"] = [
        {"positions": list(p), "re": float(a.real), "im": float(a.imag)}
        for p, a in zip(state.basis.order, np.asarray(state.amps))
    ]
    row["passed"] = abs(1 - row["fidelity"]) < tol and row["max_unitarity_residual"] < tol
    return row


def recursion_residuals(system: MagnonSystem) -> list[dict]:
    """Recursive overlaps against brute-force inner products, per ``(k, r)``."""
    chain = OverlapChain(system)
    rows = []
    for k in range(1, system.N + 1):
        for r in range(0, min(k, system.M) + 1):
            ref = gram_matrix(r, k, system).entries
            got = chain.overlap(r, k).entries
            scale = max(1.0, float(np.max(np.abs(ref))))
            rows.append({"k": k, "r": r, "dim": int(ref.shape[0]), "residual": float(np.max(np.abs(got - ref)) / scale)})
    return rows


def short_gate_residual(system: MagnonSystem) -> float:
    """Largest relative gap between the L-insertion network and the plain network."""
    chain = FactorChain(system)
    worst = 0.0
    for k in range(1, min(system.M, system.N) + 1):
        for r in range(k + 1):
            for pos in sector_basis(r, k).order:
                ref = np.asarray(network_wavefunction(pos, k, system).amps)
                got = np.asarray(short_network_wavefunction(pos, k, system, chain).amps)
                worst = max(worst, float(np.max(np.abs(got - ref)) / max(float(np.max(np.abs(ref))), 1e-300)))
    return worst


def cmd_verify(system, seed, tol) -> dict:
    row = _fidelity_row(system, seed)
    row.pop("_state")
    rec = recursion_residuals(system)
    row["max_recursion_residual"] = max(r["residual"] for r in rec)
    row["short_gate_residual"] = short_gate_residual(system)
    checks = (
        abs(1 - row["fidelity"]),
        row["max_unitarity_residual"],
        row["max_recursion_residual"],
        row["short_gate_residual"],
    )
    row["passed"] = all(c < tol for c in checks)
    return row


def cmd_compare_aba(system, tol) -> dict:
    report = verify_equivalence(system, tol)
    return {"N": system.N, "M": system.M, "delta": system.delta, **report.to_json()}


def cmd_xx(system, tol) -> dict:
    if system.delta != 0:
        raise UsageError(f"xx-decompose needs --delta 0, got {system.delta}")
    chain = FactorChain(system.with_scattering(unit_scattering))
    layers = decompose(system, chain)
    comparison = compare_layers(system, chain)
    worst = max((c.residual for c in comparison), default=0.0)
    return {
        "N": system.N,
        "M": system.M,
        "layers": [layer.to_json() for layer in layers],
        "residuals": [{"k": c.k, "residual": c.residual, "columns": c.columns} for c in comparison],
        "max_residual": worst,
        "passed": worst < tol,
    }


def cmd_gram(system, tol) -> dict:
    rows = recursion_residuals(system)
    worst = max(r["residual"] for r in rows)
    return {"N": system.N, "M": system.M, "delta": system.delta, "rows": rows, "max_residual": worst, "passed": worst < tol}


# output --------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _table(rows: list[dict], fields, exact: bool = False) -> list[list[str]]:
    def cell(v):
        if isinstance(v, float) and exact:
            return repr(float(v))
        if isinstance(v, float):
            return f"{v:.3e}" if v and (abs(v) < 1e-3 or abs(v) >= 1e4) else f"{v:.12g}"
        return "" if v is None else str(v)

    return [list(fields)] + [[cell(r.get(f)) for f in fields] for r in rows]


def render(payload, fmt: str, fields=None) -> str:
    rows = payload if isinstance(payload, list) else None
    if fmt == "json":
        return json.dumps(_jsonable(payload), indent=2) + "\n"
    if rows is None:
        rows = payload.get("rows") or [payload]
    fields = fields or [k for k in rows[0] if not isinstance(rows[0][k], (list, dict))]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for line in _table(rows, fields, exact=True):
            writer.writerow(line)
        return buf.getvalue()
    table = _table(rows, fields)
    widths = [max(len(r[i]) for r in table) for i in range(len(fields))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in table]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bethe-circuit", description="Build and check Bethe-state circuits.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--n", help="chain length (comma list for a sweep)")
    parser.add_argument("--m", help="magnon number (comma list for a sweep)")
    parser.add_argument("--delta", help="anisotropy (comma list for a sweep)")
    parser.add_argument("--momenta", help="inline p_1,...,p_M or a JSON file")
    parser.add_argument("--seed", type=int, help="seed for random complex momenta")
    parser.add_argument("--draws", type=int, default=1, help="random draws per grid point")
    parser.add_argument("--tol", type=float, default=1e-9)
    parser.add_argument("--out", help="write the report here instead of stdout")
    parser.add_argument("--format", choices=("json", "csv", "pretty"), default="json")
    parser.add_argument("--circuit", help="circuit JSON to simulate instead of building one")
    return parser


def run(config: RunConfig) -> int:
    fmt, tol = config.format, config.tol

    if config.command == "build":
        circ = build_circuit(config.systems[0][0])
        if fmt == "json":
            text = json.dumps(circ.to_json()) + "\n"
        else:
            rows = [{"k": g.k, "qubits": " ".join(map(str, g.qubits)), "dim": g.unitary.shape[0]} for g in circ.gates]
            text = render(rows, "pretty", ("k", "qubits", "dim"))
        _emit(text, config.output)
        return 0

    if config.command in SWEEP_COMMANDS:
        if config.command == "simulate":
            job = lambda item: cmd_simulate(*item, tol, config.circuit)  # noqa: E731
            fields = CSV_FIELDS
        else:
            job = lambda item: cmd_verify(*item, tol)  # noqa: E731
            fields = CSV_FIELDS + ("max_recursion_residual", "short_gate_residual")
        if len(config.systems) == 1:
            rows = [job(config.systems[0])]
        else:
            with ThreadPoolExecutor(max_workers=_threads()) as pool:
                rows = list(pool.map(job, config.systems))
            for r in rows:
                r.pop("amplitudes", None)
        payload = rows[0] if len(rows) == 1 else rows
        _emit(render(payload, fmt, None if fmt == "json" else fields), config.output)
        return 0 if all(r["passed"] for r in rows) else 1

    system = config.systems[0][0]
    if config.command == "compare-aba":
        report = cmd_compare_aba(system, tol)
    elif config.command == "xx-decompose":
        report = cmd_xx(system, tol)
        if fmt != "json":
            report = {**report, "rows": report["residuals"]}
    else:
        report = cmd_gram(system, tol)
    _emit(render(report, fmt), config.output)
    return 0 if report["passed"] else 1


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return run(RunConfig.from_args(args))
    except (UsageError, DomainError) as exc:
        print(f"bethe-circuit: error: {exc}", file=sys.stderr)
        return 2
    except BetheCircuitError as exc:
        print(f"bethe-circuit: numerical failure: {exc}", file=sys.stderr)
        return 1
